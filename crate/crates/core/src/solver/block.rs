use nalgebra::{DMatrix, DVector};

use super::{SolverPath, TrackerConfig, TrackerState};
use crate::error::{Error, Result};
use crate::layout::BlockVector;
use crate::linalg;
use crate::program::MultiConvexProgram;
use crate::sets::{project_unchecked, prox_weighted};

/// Exact minimizer over `Z_i` of
/// `L_rho(.., z_i, .., mu, s) + alpha_i/2 |z_i - z_i^(l)|^2`,
/// with every other block held at its value in `z` and `z_i^(l)` the current
/// value of block `i`.
pub fn block_update(
    prog: &MultiConvexProgram,
    state: &TrackerState,
    i: usize,
    z: &BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
) -> Result<DVector<f64>> {
    if state.config.path != SolverPath::Direct {
        return Err(Error::InvalidArgument("block_update runs on the direct path".into()));
    }
    prog.check_mu(mu)?;
    prog.check_s(s)?;
    update_block(prog, &state.config, i, z, mu, s)
}

pub(crate) fn update_block(
    prog: &MultiConvexProgram,
    cfg: &TrackerConfig,
    i: usize,
    z: &BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
) -> Result<DVector<f64>> {
    prog.layout().check_block(i)?;
    let rho = cfg.rho;
    let alpha = cfg.alpha[i];
    let (hess, lin, _) = prog.block_quadratic_objective(i, z)?;
    let (e_mat, e) = prog.block_affine_constraint(i, z, s)?;
    let current = z.block(i).into_owned();

    // 1/2 x'(H_i + rho E'E)x + (h_i + E'(mu + rho e))'x + alpha/2 |x - z_i|^2
    let curvature = hess + linalg::gram(&e_mat) * rho;
    let q0 = lin + e_mat.tr_mul(&(mu + &e * rho));
    if !curvature.iter().chain(q0.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite { sweep: 0, block: i });
    }
    let set = &prog.sets()[i];

    if let Some(c) = isotropic_scale(&curvature) {
        // (c/2)|x + q0/c|^2 + alpha/2 |x - z_i|^2: a weighted prox of the set
        if c > 0.0 {
            return prox_weighted(set, &current, alpha, &(-&q0 / c), c);
        }
        return Ok(project_unchecked(set, &(&current - &q0 / alpha)));
    }

    let n = current.len();
    let k = curvature + DMatrix::identity(n, n) * alpha;
    let q = q0 - &current * alpha;
    linalg::minimize_quadratic(k, &q, set, &current, i)
}

/// `Some(c)` when the matrix equals `c I` with `c >= 0`.
fn isotropic_scale(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    let c = m[(0, 0)];
    if c < 0.0 {
        return None;
    }
    let tol = 1e-14 * m.amax().max(1.0);
    for r in 0..n {
        for k in 0..n {
            let target = if r == k { c } else { 0.0 };
            if (m[(r, k)] - target).abs() > tol {
                return None;
            }
        }
    }
    Some(c)
}

/// One Gauss-Seidel pass over the blocks in ascending order.
pub fn sweep(
    prog: &MultiConvexProgram,
    state: &TrackerState,
    z: &BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
) -> Result<BlockVector> {
    if state.config.path != SolverPath::Direct {
        return Err(Error::InvalidArgument("sweep runs on the direct path; use lifted_cycle".into()));
    }
    prog.check_mu(mu)?;
    prog.check_s(s)?;
    sweep_at(prog, &state.config, z, mu, s, 0)
}

pub(crate) fn sweep_at(
    prog: &MultiConvexProgram,
    cfg: &TrackerConfig,
    z: &BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
    sweep_index: usize,
) -> Result<BlockVector> {
    let mut z = z.clone();
    for i in 0..prog.num_blocks() {
        let zi = update_block(prog, cfg, i, &z, mu, s).map_err(|e| tag_sweep(e, sweep_index))?;
        if !zi.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                sweep: sweep_index,
                block: i,
            });
        }
        z.set_block(i, &zi);
    }
    Ok(z)
}

pub(crate) fn tag_sweep(e: Error, sweep_index: usize) -> Error {
    match e {
        Error::NonFinite { block, .. } => Error::NonFinite {
            sweep: sweep_index,
            block,
        },
        other => other,
    }
}
