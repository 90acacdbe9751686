//! Small dense solvers for the block subproblems.
//!
//! Every block subproblem has the form `min 1/2 x'Kx + q'x` over a convex set
//! with `K` symmetric positive definite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sets::ConvexSet;

/// `E'E`, skipping the zero entries of each row of `E`.
pub(crate) fn gram(e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = e.ncols();
    let mut out = DMatrix::zeros(n, n);
    let mut nz: Vec<(usize, f64)> = Vec::with_capacity(n);
    for j in 0..e.nrows() {
        nz.clear();
        nz.extend((0..n).filter_map(|k| {
            let v = e[(j, k)];
            (v != 0.0).then_some((k, v))
        }));
        for &(a, va) in &nz {
            for &(b, vb) in &nz {
                out[(a, b)] += va * vb;
            }
        }
    }
    out
}

pub(crate) fn spd_solve(k: DMatrix<f64>, rhs: &DVector<f64>, block: usize) -> Result<DVector<f64>> {
    let chol = k.cholesky().ok_or(Error::Factorization { block })?;
    Ok(chol.solve(rhs))
}

/// Minimizer of `1/2 x'Kx + q'x` over `set`. `start` seeds the active-set
/// iteration for boxes and is otherwise unused.
pub(crate) fn minimize_quadratic(
    k: DMatrix<f64>,
    q: &DVector<f64>,
    set: &ConvexSet,
    start: &DVector<f64>,
    block: usize,
) -> Result<DVector<f64>> {
    if set.is_whole_space() {
        return spd_solve(k, &-q, block);
    }
    match set {
        ConvexSet::Box { lower, upper } => box_qp(&k, q, lower, upper, start, block),
        ConvexSet::NonnegativeOrthant { dim } => {
            box_qp(&k, q, &vec![0.0; *dim], &vec![f64::INFINITY; *dim], start, block)
        }
        ConvexSet::Ball { center, radius } => ball_qp(k, q, center, *radius, block),
        ConvexSet::WholeSpace { .. } => unreachable!(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

/// Primal active-set method for a strictly convex QP with bound constraints.
/// Terminates finitely; the returned point is exact up to the rounding of the
/// reduced Cholesky solves.
pub(crate) fn box_qp(
    k: &DMatrix<f64>,
    q: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
    start: &DVector<f64>,
    block: usize,
) -> Result<DVector<f64>> {
    let n = q.len();
    let mut x = DVector::from_iterator(n, (0..n).map(|i| start[i].max(lower[i]).min(upper[i])));
    let mut state: Vec<Bound> = (0..n)
        .map(|i| {
            if x[i] == lower[i] {
                Bound::Lower
            } else if x[i] == upper[i] {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();

    let max_iter = 50 * n + 100;
    let scale = k.amax().max(q.amax()).max(1.0);
    for _ in 0..max_iter {
        let grad = k * &x + q;
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        let mut p = DVector::zeros(n);
        if !free.is_empty() {
            let kff = k.select_rows(&free).select_columns(&free);
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -grad[i]));
            let pf = spd_solve(kff, &rhs, block)?;
            for (a, &i) in free.iter().enumerate() {
                p[i] = pf[a];
            }
        }

        let mut step = 1.0;
        let mut blocking = None;
        for &i in &free {
            let (bound, which) = if p[i] < 0.0 {
                (lower[i], Bound::Lower)
            } else if p[i] > 0.0 {
                (upper[i], Bound::Upper)
            } else {
                continue;
            };
            if bound.is_infinite() {
                continue;
            }
            let t = (bound - x[i]) / p[i];
            if t < step {
                step = t.max(0.0);
                blocking = Some((i, which));
            }
        }
        x += &p * step;
        if let Some((i, which)) = blocking {
            state[i] = which;
        }
        for i in 0..n {
            match state[i] {
                Bound::Lower => x[i] = lower[i],
                Bound::Upper => x[i] = upper[i],
                Bound::Free => x[i] = x[i].max(lower[i]).min(upper[i]),
            }
        }
        if blocking.is_some() {
            continue;
        }

        // Minimizer on the working set: release the bound with the most
        // negative multiplier, or stop.
        let grad = k * &x + q;
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            if lower[i] == upper[i] {
                continue;
            }
            let lambda = match state[i] {
                Bound::Free => continue,
                Bound::Lower => grad[i],
                Bound::Upper => -grad[i],
            };
            if lambda < -1e-13 * scale && worst.is_none_or(|(_, w)| lambda < w) {
                worst = Some((i, lambda));
            }
        }
        match worst {
            None => return Ok(x),
            Some((i, _)) => state[i] = Bound::Free,
        }
    }
    Err(Error::InnerSolver {
        block,
        iterations: max_iter,
    })
}

/// `min 1/2 x'Kx + q'x` subject to `|x - c| <= r`, via the eigendecomposition
/// of `K` and bisection on the multiplier of the ball constraint.
pub(crate) fn ball_qp(k: DMatrix<f64>, q: &DVector<f64>, center: &[f64], radius: f64, block: usize) -> Result<DVector<f64>> {
    let c = DVector::from_column_slice(center);
    // shift to y = x - c: 1/2 y'Ky + (Kc + q)'y
    let qs = &k * &c + q;
    let eig = SymmetricEigen::new((&k + k.transpose()) * 0.5);
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::Factorization { block });
    }
    let b = eig.eigenvectors.tr_mul(&qs);
    let norm_at = |lambda: f64| -> f64 {
        b.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(bk, ek)| (bk / (ek + lambda)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let coords = |lambda: f64| -> DVector<f64> {
        DVector::from_iterator(b.len(), b.iter().zip(eig.eigenvalues.iter()).map(|(bk, ek)| -bk / (ek + lambda)))
    };

    let lambda = if norm_at(0.0) <= radius {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, qs.norm() / radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_at(mid) > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let mut y = &eig.eigenvectors * coords(lambda);
    let ny = y.norm();
    if ny > radius {
        y *= radius / ny;
    }
    Ok(crate::sets::onto_sphere(&c, y, radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Long-run projected gradient as an independent reference.
    fn projected_gradient(k: &DMatrix<f64>, q: &DVector<f64>, set: &ConvexSet) -> DVector<f64> {
        let l = SymmetricEigen::new(k.clone()).eigenvalues.max();
        let mut x = DVector::zeros(q.len());
        x = crate::sets::project(set, &x).unwrap();
        for _ in 0..200_000 {
            let g = k * &x + q;
            x = crate::sets::project(set, &(&x - g / l)).unwrap();
        }
        x
    }

    fn spd(seed: u64, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = g.transpose() * g + DMatrix::identity(n, n) * 0.1;
        let q = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        (k, q)
    }

    #[test]
    fn box_qp_matches_projected_gradient() {
        for seed in 0..20 {
            let (k, q) = spd(seed, 4);
            let set = ConvexSet::boxed(vec![-0.5, -1.0, 0.0, f64::NEG_INFINITY], vec![0.5, 0.2, 1.0, 0.3]).unwrap();
            let x = minimize_quadratic(k.clone(), &q, &set, &DVector::zeros(4), 0).unwrap();
            let r = projected_gradient(&k, &q, &set);
            assert!((&x - &r).norm() < 1e-7, "seed {seed}: {x} vs {r}");
        }
    }

    #[test]
    fn ball_qp_matches_projected_gradient() {
        for seed in 0..20 {
            let (k, q) = spd(100 + seed, 3);
            let set = ConvexSet::ball(vec![0.2, -0.1, 0.3], 0.4).unwrap();
            let x = minimize_quadratic(k.clone(), &q, &set, &DVector::zeros(3), 0).unwrap();
            let r = projected_gradient(&k, &q, &set);
            assert!((&x - &r).norm() < 1e-7, "seed {seed}: {x} vs {r}");
        }
    }

    #[test]
    fn interior_solutions_are_unconstrained() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = DVector::from_vec(vec![-0.1, 0.05]);
        let free = k.clone().cholesky().unwrap().solve(&-&q);
        let set = ConvexSet::boxed(vec![-10.0; 2], vec![10.0; 2]).unwrap();
        let x = minimize_quadratic(k.clone(), &q, &set, &DVector::from_vec(vec![10.0, -10.0]), 0).unwrap();
        assert!((x - &free).norm() < 1e-14);
    }

    #[test]
    fn gram_matches_dense_product() {
        let e = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, -1.0, 3.0]);
        assert_eq!(gram(&e), e.transpose() * &e);
    }
}
