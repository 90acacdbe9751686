//! Convex sets with closed-form Euclidean projections.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-block constraint set.
///
/// Box bounds may be infinite. In JSON an infinite bound is written as
/// `null` (meaning `-inf` in `lower` and `+inf` in `upper`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    Box {
        #[serde(with = "bounds::lower")]
        lower: Vec<f64>,
        #[serde(with = "bounds::upper")]
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    NonnegativeOrthant {
        dim: usize,
    },
    WholeSpace {
        dim: usize,
    },
}

impl ConvexSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let set = ConvexSet::Box { lower, upper };
        set.validate()?;
        Ok(set)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let set = ConvexSet::Ball { center, radius };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::dim("box upper bound", lower.len(), upper.len()));
                }
                if lower.is_empty() {
                    return Err(Error::InvalidArgument("box of dimension zero".into()));
                }
                for (k, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                        return Err(Error::InvalidArgument(format!(
                            "box bounds out of order at component {k}: [{l}, {u}]"
                        )));
                    }
                }
            }
            ConvexSet::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::InvalidArgument("ball of dimension zero".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
                }
            }
            ConvexSet::NonnegativeOrthant { dim } | ConvexSet::WholeSpace { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidArgument("set of dimension zero".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::NonnegativeOrthant { dim } | ConvexSet::WholeSpace { dim } => *dim,
        }
    }

    /// Membership up to an absolute tolerance.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ConvexSet::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(v, c)| (v - c).powi(2)).sum();
                d.sqrt() <= radius + tol
            }
            ConvexSet::NonnegativeOrthant { .. } => x.iter().all(|v| *v >= -tol),
            ConvexSet::WholeSpace { .. } => true,
        }
    }

    pub fn is_whole_space(&self) -> bool {
        match self {
            ConvexSet::WholeSpace { .. } => true,
            ConvexSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .all(|(l, u)| *l == f64::NEG_INFINITY && *u == f64::INFINITY),
            _ => false,
        }
    }

    /// Intersection of two boxes; errors when the result is empty.
    pub fn intersect_box(&self, other: &ConvexSet) -> Result<ConvexSet> {
        match (self, other) {
            (ConvexSet::Box { lower: l1, upper: u1 }, ConvexSet::Box { lower: l2, upper: u2 }) => {
                if l1.len() != l2.len() {
                    return Err(Error::dim("box intersection", l1.len(), l2.len()));
                }
                let lower = l1.iter().zip(l2).map(|(a, b)| a.max(*b)).collect();
                let upper = u1.iter().zip(u2).map(|(a, b)| a.min(*b)).collect();
                ConvexSet::boxed(lower, upper)
            }
            _ => Err(Error::InvalidArgument("only boxes can be intersected".into())),
        }
    }
}

/// Euclidean projection of `x` onto `set`.
pub fn project(set: &ConvexSet, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != set.dim() {
        return Err(Error::dim("projection argument", set.dim(), x.len()));
    }
    Ok(project_unchecked(set, x))
}

pub(crate) fn project_unchecked(set: &ConvexSet, x: &DVector<f64>) -> DVector<f64> {
    match set {
        ConvexSet::Box { lower, upper } => {
            DVector::from_iterator(x.len(), x.iter().zip(lower.iter().zip(upper)).map(|(v, (l, u))| v.max(*l).min(*u)))
        }
        ConvexSet::Ball { center, radius } => {
            let c = DVector::from_column_slice(center);
            let d = x - &c;
            let norm = d.norm();
            // x == center falls in the first branch and maps to itself.
            if norm <= *radius {
                x.clone()
            } else {
                onto_sphere(&c, d * (*radius / norm), *radius)
            }
        }
        ConvexSet::NonnegativeOrthant { .. } => x.map(|v| v.max(0.0)),
        ConvexSet::WholeSpace { .. } => x.clone(),
    }
}

/// An element of the generalized Jacobian of the projection at `x`.
pub(crate) fn projection_jacobian(set: &ConvexSet, x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    match set {
        ConvexSet::Box { lower, upper } => DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            x.iter().zip(lower.iter().zip(upper)).map(|(v, (l, u))| if *v > *l && *v < *u { 1.0 } else { 0.0 }),
        )),
        ConvexSet::NonnegativeOrthant { .. } => {
            DMatrix::from_diagonal(&x.map(|v| if v > 0.0 { 1.0 } else { 0.0 }))
        }
        ConvexSet::Ball { center, radius } => {
            let d = x - DVector::from_column_slice(center);
            let norm = d.norm();
            if norm <= *radius {
                DMatrix::identity(n, n)
            } else {
                let u = d / norm;
                (DMatrix::identity(n, n) - &u * u.transpose()) * (*radius / norm)
            }
        }
        ConvexSet::WholeSpace { .. } => DMatrix::identity(n, n),
    }
}

/// `c + d` for `|d| ~ r`, shrunk by a few ulps if rounding puts it outside
/// the ball.
pub(crate) fn onto_sphere(c: &DVector<f64>, mut d: DVector<f64>, r: f64) -> DVector<f64> {
    loop {
        let x = c + &d;
        if (&x - c).norm() <= r {
            return x;
        }
        d *= 1.0 - 4.0 * f64::EPSILON;
    }
}

/// Minimizer over `set` of `(rho/2)|x_target - z|^2 + (alpha/2)|z - x_prox|^2`.
///
/// Both terms are isotropic, so the minimizer is the projection of their
/// weighted average.
pub fn prox_weighted(
    set: &ConvexSet,
    x_prox: &DVector<f64>,
    alpha: f64,
    x_target: &DVector<f64>,
    rho: f64,
) -> Result<DVector<f64>> {
    if alpha < 0.0 || rho < 0.0 || !(alpha + rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "prox weights must be nonnegative with positive sum, got alpha={alpha}, rho={rho}"
        )));
    }
    if x_prox.len() != set.dim() {
        return Err(Error::dim("prox center", set.dim(), x_prox.len()));
    }
    if x_target.len() != set.dim() {
        return Err(Error::dim("prox target", set.dim(), x_target.len()));
    }
    let avg = (x_prox * alpha + x_target * rho) / (alpha + rho);
    Ok(project_unchecked(set, &avg))
}

mod bounds {
    //! `null` <-> infinite bound.

    macro_rules! bound_serde {
        ($name:ident, $inf:expr) => {
            pub mod $name {
                use serde::{Deserialize, Deserializer, Serialize, Serializer};

                pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
                    let opt: Vec<Option<f64>> =
                        v.iter().map(|x| if x.is_infinite() { None } else { Some(*x) }).collect();
                    opt.serialize(s)
                }

                pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                    let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
                    Ok(opt.into_iter().map(|x| x.unwrap_or($inf)).collect())
                }
            }
        };
    }

    bound_serde!(lower, f64::NEG_INFINITY);
    bound_serde!(upper, f64::INFINITY);
}
