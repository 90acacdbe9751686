//! Multi-convex parametric programs
//!
//! ```text
//! minimise  f(z_1, .., z_P)        f(z) = 1/2 z'Hz + h'z + c0
//! s.t.      g(z_1, .., z_P, s) = 0 g pairwise bilinear in the blocks, affine in s
//!           z_i in Z_i
//! ```
//!
//! `f` has to be convex in every block (each diagonal block of `H` is PSD)
//! and `g` has to be affine in every block, which makes every block
//! subproblem of the augmented Lagrangian a strongly convex quadratic once a
//! proximal term is added.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::layout::{BlockLayout, BlockVector, PrimalDualPoint};
use crate::sets::{project_unchecked, ConvexSet};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// `f(z) = 1/2 z'Hz + h'z + c0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticObjective {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Self {
        Self {
            hessian,
            linear,
            constant,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n), DVector::zeros(n), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    fn validate(&self, layout: &BlockLayout) -> Result<()> {
        let n = layout.total();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(Error::dim("objective Hessian", n, self.hessian.nrows().max(self.hessian.ncols())));
        }
        if self.linear.len() != n {
            return Err(Error::dim("objective linear term", n, self.linear.len()));
        }
        if !self.hessian.iter().chain(self.linear.iter()).all(|v| v.is_finite()) || !self.constant.is_finite() {
            return Err(Error::InvalidArgument("objective has non-finite coefficients".into()));
        }
        let scale = self.hessian.amax().max(1.0);
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidArgument(format!("objective Hessian is not symmetric (asymmetry {asym:e})")));
        }
        for i in 0..layout.num_blocks() {
            let r = layout.range(i);
            let block = self.hessian.view((r.start, r.start), (r.len(), r.len())).into_owned();
            let min_eigenvalue = min_eigenvalue(&block);
            if min_eigenvalue < -PSD_TOL * block.amax().max(1.0) {
                return Err(Error::NotBlockConvex { block: i, min_eigenvalue });
            }
        }
        Ok(())
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Sum of `Q[r][c] * z_a[r] * z_b[c]` over the stored entries, `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerm {
    pub a: usize,
    pub b: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

/// Sum of `coef * z_block[idx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTerm {
    pub block: usize,
    pub entries: Vec<(usize, f64)>,
}

/// One scalar equality: pair terms + linear terms + `S_j . s + t_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub pairs: Vec<PairTerm>,
    pub linear: Vec<LinearTerm>,
    pub param: Vec<f64>,
    pub offset: f64,
}

impl ConstraintRow {
    pub fn new(param_dim: usize) -> Self {
        Self {
            pairs: Vec::new(),
            linear: Vec::new(),
            param: vec![0.0; param_dim],
            offset: 0.0,
        }
    }

    /// Adds `q * z_a[r] * z_b[c]`. Block order is normalized so that `a < b`.
    pub fn add_pair(&mut self, a: usize, r: usize, b: usize, c: usize, q: f64) -> &mut Self {
        let (a, r, b, c) = if a < b { (a, r, b, c) } else { (b, c, a, r) };
        match self.pairs.iter_mut().find(|p| p.a == a && p.b == b) {
            Some(p) => p.entries.push((r, c, q)),
            None => self.pairs.push(PairTerm {
                a,
                b,
                entries: vec![(r, c, q)],
            }),
        }
        self
    }

    pub fn add_linear(&mut self, block: usize, idx: usize, coef: f64) -> &mut Self {
        match self.linear.iter_mut().find(|l| l.block == block) {
            Some(l) => l.entries.push((idx, coef)),
            None => self.linear.push(LinearTerm {
                block,
                entries: vec![(idx, coef)],
            }),
        }
        self
    }

    pub fn set_param(&mut self, k: usize, coef: f64) -> &mut Self {
        self.param[k] = coef;
        self
    }

    pub fn set_offset(&mut self, t: f64) -> &mut Self {
        self.offset = t;
        self
    }

    fn value(&self, z: &BlockVector, s: &DVector<f64>) -> f64 {
        let l = z.layout();
        let d = z.data();
        let mut v = self.offset + self.param.iter().zip(s.iter()).map(|(a, b)| a * b).sum::<f64>();
        for lin in &self.linear {
            let off = l.offset(lin.block);
            v += lin.entries.iter().map(|(k, c)| c * d[off + k]).sum::<f64>();
        }
        for p in &self.pairs {
            let (oa, ob) = (l.offset(p.a), l.offset(p.b));
            v += p.entries.iter().map(|(r, c, q)| q * d[oa + r] * d[ob + c]).sum::<f64>();
        }
        v
    }
}

/// `g(z, s)`, one [`ConstraintRow`] per equality.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearConstraint {
    rows: Vec<ConstraintRow>,
    param_dim: usize,
}

impl BilinearConstraint {
    pub fn new(rows: Vec<ConstraintRow>, param_dim: usize) -> Self {
        Self { rows, param_dim }
    }

    pub fn empty(param_dim: usize) -> Self {
        Self::new(Vec::new(), param_dim)
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    /// The `S` matrix of the parameter map.
    pub fn param_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.param_dim, |j, k| self.rows[j].param[k])
    }

    pub fn offsets(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.offset))
    }

    fn validate(&self, layout: &BlockLayout) -> Result<()> {
        let p = layout.num_blocks();
        for (j, row) in self.rows.iter().enumerate() {
            if row.param.len() != self.param_dim {
                return Err(Error::dim(format!("parameter map of constraint row {j}"), self.param_dim, row.param.len()));
            }
            for lin in &row.linear {
                layout.check_block(lin.block)?;
                let n = layout.size(lin.block);
                if let Some((k, _)) = lin.entries.iter().find(|(k, _)| *k >= n) {
                    return Err(Error::InvalidArgument(format!(
                        "constraint row {j}: index {k} out of range for block {} of size {n}",
                        lin.block
                    )));
                }
            }
            for pair in &row.pairs {
                if pair.a >= pair.b || pair.b >= p {
                    return Err(Error::InvalidArgument(format!(
                        "constraint row {j}: pair term ({}, {}) needs a < b < {p}",
                        pair.a, pair.b
                    )));
                }
                let (na, nb) = (layout.size(pair.a), layout.size(pair.b));
                if let Some((r, c, _)) = pair.entries.iter().find(|(r, c, _)| *r >= na || *c >= nb) {
                    return Err(Error::InvalidArgument(format!(
                        "constraint row {j}: pair entry ({r}, {c}) outside a {na}x{nb} coupling"
                    )));
                }
            }
            let finite = row.offset.is_finite()
                && row.param.iter().all(|v| v.is_finite())
                && row.linear.iter().flat_map(|l| &l.entries).all(|(_, c)| c.is_finite())
                && row.pairs.iter().flat_map(|p| &p.entries).all(|(_, _, q)| q.is_finite());
            if !finite {
                return Err(Error::InvalidArgument(format!("constraint row {j} has non-finite coefficients")));
            }
        }
        Ok(())
    }
}

/// Multi-convex parametric program. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiConvexProgram {
    layout: BlockLayout,
    objective: QuadraticObjective,
    constraint: BilinearConstraint,
    sets: Vec<ConvexSet>,
}

impl MultiConvexProgram {
    pub fn new(
        layout: BlockLayout,
        objective: QuadraticObjective,
        constraint: BilinearConstraint,
        sets: Vec<ConvexSet>,
    ) -> Result<Self> {
        if sets.len() != layout.num_blocks() {
            return Err(Error::dim("set list", layout.num_blocks(), sets.len()));
        }
        for (i, set) in sets.iter().enumerate() {
            set.validate()?;
            if set.dim() != layout.size(i) {
                return Err(Error::dim(format!("set of block {i}"), layout.size(i), set.dim()));
            }
        }
        objective.validate(&layout)?;
        constraint.validate(&layout)?;
        Ok(Self {
            layout,
            objective,
            constraint,
            sets,
        })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn objective(&self) -> &QuadraticObjective {
        &self.objective
    }

    pub fn constraint(&self) -> &BilinearConstraint {
        &self.constraint
    }

    pub fn sets(&self) -> &[ConvexSet] {
        &self.sets
    }

    pub fn num_blocks(&self) -> usize {
        self.layout.num_blocks()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint.num_rows()
    }

    pub fn param_dim(&self) -> usize {
        self.constraint.param_dim()
    }

    /// Same program with a different linear objective term.
    pub fn with_linear_objective(&self, linear: DVector<f64>) -> Result<Self> {
        if linear.len() != self.layout.total() {
            return Err(Error::dim("objective linear term", self.layout.total(), linear.len()));
        }
        let mut out = self.clone();
        out.objective.linear = linear;
        Ok(out)
    }

    pub fn zero_point(&self) -> PrimalDualPoint {
        PrimalDualPoint::new(BlockVector::zeros(self.layout.clone()), DVector::zeros(self.num_constraints()))
    }

    pub(crate) fn check_z(&self, z: &BlockVector) -> Result<()> {
        if z.layout() == &self.layout {
            return Ok(());
        }
        if z.layout().num_blocks() != self.layout.num_blocks() {
            return Err(Error::dim("number of blocks", self.layout.num_blocks(), z.layout().num_blocks()));
        }
        let i = (0..self.layout.num_blocks())
            .find(|&i| z.layout().size(i) != self.layout.size(i))
            .unwrap_or(0);
        Err(Error::dim(format!("block {i}"), self.layout.size(i), z.layout().size(i)))
    }

    pub(crate) fn check_s(&self, s: &DVector<f64>) -> Result<()> {
        if s.len() == self.param_dim() {
            Ok(())
        } else {
            Err(Error::dim("parameter", self.param_dim(), s.len()))
        }
    }

    pub(crate) fn check_mu(&self, mu: &DVector<f64>) -> Result<()> {
        if mu.len() == self.num_constraints() {
            Ok(())
        } else {
            Err(Error::dim("multiplier", self.num_constraints(), mu.len()))
        }
    }

    fn objective_raw(&self, z: &DVector<f64>) -> f64 {
        let o = &self.objective;
        0.5 * z.dot(&(&o.hessian * z)) + o.linear.dot(z) + o.constant
    }

    fn constraint_raw(&self, z: &BlockVector, s: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.num_constraints(), self.constraint.rows.iter().map(|r| r.value(z, s)))
    }

    /// `f(z)`.
    pub fn evaluate_objective(&self, z: &BlockVector) -> Result<f64> {
        self.check_z(z)?;
        Ok(self.objective_raw(z.data()))
    }

    /// `g(z, s)`.
    pub fn evaluate_constraint(&self, z: &BlockVector, s: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_z(z)?;
        self.check_s(s)?;
        Ok(self.constraint_raw(z, s))
    }

    /// `grad f(z)`.
    pub fn objective_gradient(&self, z: &BlockVector) -> Result<DVector<f64>> {
        self.check_z(z)?;
        Ok(&self.objective.hessian * z.data() + &self.objective.linear)
    }

    /// Jacobian of `g` in `z` (independent of `s`).
    pub fn constraint_jacobian(&self, z: &BlockVector) -> Result<DMatrix<f64>> {
        self.check_z(z)?;
        let l = &self.layout;
        let d = z.data();
        let mut jac = DMatrix::zeros(self.num_constraints(), l.total());
        for (j, row) in self.constraint.rows.iter().enumerate() {
            for lin in &row.linear {
                let off = l.offset(lin.block);
                for (k, c) in &lin.entries {
                    jac[(j, off + k)] += c;
                }
            }
            for p in &row.pairs {
                let (oa, ob) = (l.offset(p.a), l.offset(p.b));
                for (r, c, q) in &p.entries {
                    jac[(j, oa + r)] += q * d[ob + c];
                    jac[(j, ob + c)] += q * d[oa + r];
                }
            }
        }
        Ok(jac)
    }

    /// `(E, e)` with `g(z', s) = E z'_i + e` for every `z'` equal to `z` off block `i`.
    pub fn block_affine_constraint(
        &self,
        i: usize,
        z: &BlockVector,
        s: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.layout.check_block(i)?;
        self.check_z(z)?;
        self.check_s(s)?;
        let l = &self.layout;
        let d = z.data();
        let m = self.num_constraints();
        let mut e_mat = DMatrix::zeros(m, l.size(i));
        let mut e = DVector::zeros(m);
        for (j, row) in self.constraint.rows.iter().enumerate() {
            let mut ej = row.offset + row.param.iter().zip(s.iter()).map(|(a, b)| a * b).sum::<f64>();
            for lin in &row.linear {
                if lin.block == i {
                    for (k, c) in &lin.entries {
                        e_mat[(j, *k)] += c;
                    }
                } else {
                    let off = l.offset(lin.block);
                    ej += lin.entries.iter().map(|(k, c)| c * d[off + k]).sum::<f64>();
                }
            }
            for p in &row.pairs {
                let (oa, ob) = (l.offset(p.a), l.offset(p.b));
                if p.a == i {
                    for (r, c, q) in &p.entries {
                        e_mat[(j, *r)] += q * d[ob + c];
                    }
                } else if p.b == i {
                    for (r, c, q) in &p.entries {
                        e_mat[(j, *c)] += q * d[oa + r];
                    }
                } else {
                    ej += p.entries.iter().map(|(r, c, q)| q * d[oa + r] * d[ob + c]).sum::<f64>();
                }
            }
            e[j] = ej;
        }
        Ok((e_mat, e))
    }

    /// `(H_i, h_i, c_i)` with `f(z') = 1/2 z'_i' H_i z'_i + h_i' z'_i + c_i` for
    /// every `z'` equal to `z` off block `i`.
    pub fn block_quadratic_objective(&self, i: usize, z: &BlockVector) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
        self.layout.check_block(i)?;
        self.check_z(z)?;
        let r = self.layout.range(i);
        let mut rest = z.data().clone();
        rest.rows_mut(r.start, r.len()).fill(0.0);
        let o = &self.objective;
        let hess = o.hessian.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let lin = o.linear.rows(r.start, r.len()) + o.hessian.rows(r.start, r.len()) * &rest;
        Ok((hess, lin, self.objective_raw(&rest)))
    }

    /// `L_rho(z, mu, s) = f(z) + (mu + rho/2 g(z, s))' g(z, s)`.
    pub fn augmented_lagrangian(&self, z: &BlockVector, mu: &DVector<f64>, s: &DVector<f64>, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty must be positive, got {rho}")));
        }
        self.check_mu(mu)?;
        let g = self.evaluate_constraint(z, s)?;
        Ok(self.objective_raw(z.data()) + (mu + &g * (0.5 * rho)).dot(&g))
    }

    /// `grad f(z) + Jg(z)' mu`.
    pub fn lagrangian_gradient(&self, z: &BlockVector, mu: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_mu(mu)?;
        let jac = self.constraint_jacobian(z)?;
        Ok(self.objective_gradient(z)? + jac.tr_mul(mu))
    }

    /// Hessian of `f + mu'g` in `z`; constant in `z` because `g` is bilinear.
    pub fn lagrangian_hessian(&self, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_mu(mu)?;
        let l = &self.layout;
        let mut hess = self.objective.hessian.clone();
        for (row, m) in self.constraint.rows.iter().zip(mu.iter()) {
            for p in &row.pairs {
                let (oa, ob) = (l.offset(p.a), l.offset(p.b));
                for (r, c, q) in &p.entries {
                    hess[(oa + r, ob + c)] += m * q;
                    hess[(ob + c, oa + r)] += m * q;
                }
            }
        }
        Ok(hess)
    }

    /// Natural residual `|w - Proj_{Z x R^m}(w - F(w, s))|` of the generalized
    /// equation `0 in F(w, s) + N_{Z x R^m}(w)`. Zero exactly at critical points.
    pub fn kkt_residual(&self, w: &PrimalDualPoint, s: &DVector<f64>) -> Result<f64> {
        let grad = self.lagrangian_gradient(&w.z, &w.mu)?;
        let g = self.evaluate_constraint(&w.z, s)?;
        let mut sq = g.norm_squared();
        for (i, set) in self.sets.iter().enumerate() {
            let r = self.layout.range(i);
            let zi = w.z.block(i).into_owned();
            let step = &zi - grad.rows(r.start, r.len());
            sq += (zi - project_unchecked(set, &step)).norm_squared();
        }
        Ok(sq.sqrt())
    }

    /// Projects every block of `z` onto its set.
    pub fn project_blocks(&self, z: &BlockVector) -> Result<BlockVector> {
        self.check_z(z)?;
        let mut out = z.clone();
        for (i, set) in self.sets.iter().enumerate() {
            let p = project_unchecked(set, &z.block(i).into_owned());
            out.set_block(i, &p);
        }
        Ok(out)
    }

    pub fn is_set_feasible(&self, z: &BlockVector, tol: f64) -> bool {
        self.check_z(z).is_ok() && self.sets.iter().enumerate().all(|(i, set)| set.contains(&z.block(i).into_owned(), tol))
    }
}
