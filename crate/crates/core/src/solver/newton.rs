//! Semismooth Newton on the natural map
//! `Phi(z, mu) = (z - Proj_Z(z - grad_z L), g(z, s))`, used to finish
//! oracle solves once the multiplier iteration is close.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::layout::{BlockVector, PrimalDualPoint};
use crate::program::MultiConvexProgram;
use crate::sets::{project, projection_jacobian};

const MAX_HALVINGS: usize = 30;

fn natural_map(prog: &MultiConvexProgram, w: &PrimalDualPoint, s: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let grad = prog.lagrangian_gradient(&w.z, &w.mu)?;
    let g = prog.evaluate_constraint(&w.z, s)?;
    let n = w.z.data().len();
    let mut phi = DVector::zeros(n + g.len());
    let mut trial = DVector::zeros(n);
    for (i, set) in prog.sets().iter().enumerate() {
        let r = prog.layout().range(i);
        let t = w.z.block(i) - grad.rows(r.start, r.len());
        let p = project(set, &t)?;
        phi.rows_mut(r.start, r.len()).copy_from(&(w.z.block(i) - p));
        trial.rows_mut(r.start, r.len()).copy_from(&t);
    }
    phi.rows_mut(n, g.len()).copy_from(&g);
    Ok((phi, trial))
}

/// Newton iterations with backtracking on `|Phi|` from `w0`. Stops at `tol`,
/// after `max_iter` steps, or when no step decreases the residual. Returns
/// the final point, its residual and the number of steps taken.
pub(crate) fn newton_polish(
    prog: &MultiConvexProgram,
    w0: &PrimalDualPoint,
    s: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(PrimalDualPoint, f64, usize)> {
    let n = w0.z.data().len();
    let m = w0.mu.len();
    let mut w = w0.clone();
    let (mut phi, mut trial) = natural_map(prog, &w, s)?;
    let mut res = phi.norm();
    let mut steps = 0;
    while steps < max_iter && res >= tol {
        let hess = prog.lagrangian_hessian(&w.mu)?;
        let jac = prog.constraint_jacobian(&w.z)?;
        let mut d = DMatrix::zeros(n, n);
        for (i, set) in prog.sets().iter().enumerate() {
            let r = prog.layout().range(i);
            let t = trial.rows(r.start, r.len()).into_owned();
            d.view_mut((r.start, r.start), (r.len(), r.len()))
                .copy_from(&projection_jacobian(set, &t));
        }
        let mut k = DMatrix::zeros(n + m, n + m);
        let top = DMatrix::identity(n, n) - &d + &d * &hess;
        k.view_mut((0, 0), (n, n)).copy_from(&top);
        k.view_mut((0, n), (n, m)).copy_from(&(&d * jac.transpose()));
        k.view_mut((n, 0), (m, n)).copy_from(&jac);
        let Some(delta) = k.lu().solve(&(-&phi)) else { break };
        if !delta.iter().all(|v| v.is_finite()) {
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let z = BlockVector::new(w.z.layout().clone(), w.z.data() + delta.rows(0, n) * t)?;
            let mu = &w.mu + delta.rows(n, m) * t;
            let cand = PrimalDualPoint::new(z, mu);
            let (p, tr) = natural_map(prog, &cand, s)?;
            let r = p.norm();
            if r.is_finite() && r <= (1.0 - 1e-4 * t) * res {
                accepted = Some((cand, p, tr, r));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, p, tr, r)) = accepted else { break };
        w = cand;
        phi = p;
        trial = tr;
        res = r;
        steps += 1;
    }

    // Newton iterates may leave Z by rounding.
    let projected = PrimalDualPoint::new(prog.project_blocks(&w.z)?, w.mu);
    let res = prog.kkt_residual(&projected, s)?;
    Ok((projected, res, steps))
}
