use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::newton::newton_polish;
use super::{block::sweep_at, lifted::cycle_at, LiftedState, SolverPath, TrackerConfig, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::layout::{BlockVector, PrimalDualPoint};
use crate::program::MultiConvexProgram;

/// Settings of the full-accuracy reference solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub rho: f64,
    /// Stop once the KKT residual drops below this.
    pub tol: f64,
    pub max_outer: usize,
    /// Cap on sweeps between two dual updates.
    pub max_inner_sweeps: usize,
    pub alpha: f64,
    pub path: SolverPath,
    /// Finish with semismooth Newton steps on the natural map.
    #[serde(default = "default_newton")]
    pub newton: bool,
    /// Attempts with a tenfold penalty after a failed one.
    #[serde(default)]
    pub restarts: usize,
}

fn default_newton() -> bool {
    true
}

const NEWTON_STEPS: usize = 30;

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            rho: 10.0,
            tol: 1e-8,
            max_outer: 200,
            max_inner_sweeps: 1000,
            alpha: DEFAULT_ALPHA,
            path: SolverPath::Direct,
            newton: true,
            restarts: 0,
        }
    }
}

impl OracleOptions {
    fn tracker_config(&self, prog: &MultiConvexProgram) -> TrackerConfig {
        TrackerConfig::new(self.rho, self.max_inner_sweeps.max(1), prog.num_blocks())
            .with_alpha(self.alpha)
            .with_path(self.path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub point: PrimalDualPoint,
    pub residual: f64,
    /// Dual updates performed, over all attempts.
    pub outer_iterations: usize,
    /// Primal sweeps performed, over all attempts.
    pub sweeps: usize,
    /// Newton steps accepted.
    pub newton_steps: usize,
    /// Penalty of the successful attempt.
    pub rho: f64,
}

#[derive(Default)]
struct Counters {
    outer: usize,
    sweeps: usize,
    newton: usize,
}

/// Method of multipliers with the proximal Gauss-Seidel loop run to
/// (near) convergence between dual updates, optionally finished by Newton
/// steps. Provides the reference critical points `w*` that the tracked
/// iterates are compared with.
///
/// An attempt that does not converge within `max_outer` dual updates is
/// restarted from `w0` with a tenfold penalty, up to `restarts` times. Small
/// penalties can leave the inner loop at points that buy a little constraint
/// violation with a large decrease of the objective; the dual updates remove
/// such violations only slowly.
pub fn solve_to_convergence(
    prog: &MultiConvexProgram,
    w0: &PrimalDualPoint,
    s: &DVector<f64>,
    opts: &OracleOptions,
) -> Result<OracleSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    opts.tracker_config(prog).validate(prog)?;
    prog.check_z(&w0.z)?;
    prog.check_mu(&w0.mu)?;
    prog.check_s(s)?;
    let residual = prog.kkt_residual(w0, s)?;
    if !residual.is_finite() {
        return Err(Error::NonFinite { sweep: 0, block: 0 });
    }
    let mut counters = Counters::default();
    let done = |point, residual, rho, c: &Counters| OracleSolution {
        point,
        residual,
        outer_iterations: c.outer,
        sweeps: c.sweeps,
        newton_steps: c.newton,
        rho,
    };
    if residual < opts.tol {
        return Ok(done(w0.clone(), residual, opts.rho, &counters));
    }
    if opts.newton {
        let (w, r, k) = newton_polish(prog, w0, s, opts.tol, NEWTON_STEPS)?;
        counters.newton += k;
        if r < opts.tol {
            return Ok(done(w, r, opts.rho, &counters));
        }
    }

    let mut best = (w0.clone(), residual);
    let mut rho = opts.rho;
    for _ in 0..=opts.restarts {
        let cfg = TrackerConfig { rho, ..opts.tracker_config(prog) };
        if let Some((point, residual)) = multiplier_method(prog, w0, s, opts, &cfg, &mut counters, &mut best)? {
            return Ok(done(point, residual, rho, &counters));
        }
        rho *= 10.0;
    }
    Err(Error::NonConvergence {
        best: Box::new(best.0),
        residual: best.1,
        iterations: counters.outer,
    })
}

/// One attempt at a fixed penalty. Returns the solution if the residual
/// drops below the tolerance; `best` keeps the best point seen.
fn multiplier_method(
    prog: &MultiConvexProgram,
    w0: &PrimalDualPoint,
    s: &DVector<f64>,
    opts: &OracleOptions,
    cfg: &TrackerConfig,
    counters: &mut Counters,
    best: &mut (PrimalDualPoint, f64),
) -> Result<Option<(PrimalDualPoint, f64)>> {
    let mut z = w0.z.clone();
    let mut mu = w0.mu.clone();
    let mut lifted = match opts.path {
        SolverPath::Direct => None,
        SolverPath::Lifted => Some(LiftedState::consistent_with(prog, w0)?),
    };
    let inner_tol = opts.tol / 10.0;

    for _ in 0..opts.max_outer {
        for _ in 0..opts.max_inner_sweeps {
            let z_before = z.clone();
            let y_before = lifted.as_ref().map(|ls| ls.y.clone());
            match lifted.as_mut() {
                None => z = sweep_at(prog, cfg, &z, &mu, s, counters.sweeps)?,
                Some(ls) => cycle_at(prog, cfg, ls, &mut z, &mu, s, counters.sweeps)?,
            }
            counters.sweeps += 1;
            let mut disp = max_block_displacement(&z, &z_before);
            if let (Some(ls), Some(yb)) = (lifted.as_ref(), y_before.as_ref()) {
                disp = disp.max(max_block_displacement(&ls.y, yb));
            }
            if disp < inner_tol {
                break;
            }
        }

        match lifted.as_mut() {
            None => mu += prog.evaluate_constraint(&z, s)? * cfg.rho,
            Some(ls) => {
                for i in 0..prog.num_blocks() {
                    let diff = ls.y.block(i) - z.block(i);
                    ls.nu[i] += diff * cfg.rho;
                }
                mu += prog.evaluate_constraint(&ls.y, s)? * cfg.rho;
            }
        }
        counters.outer += 1;

        let point = PrimalDualPoint::new(z.clone(), mu.clone());
        let residual = prog.kkt_residual(&point, s)?;
        if !residual.is_finite() {
            return Err(Error::NonFinite {
                sweep: counters.sweeps,
                block: 0,
            });
        }
        if residual < best.1 {
            *best = (point.clone(), residual);
        }
        if residual < opts.tol {
            return Ok(Some((point, residual)));
        }
        // Newton points are only taken when they solve the problem: a
        // failed polish can end near a spurious point and would pull the
        // multiplier iteration back to it.
        if opts.newton {
            let (w, r, k) = newton_polish(prog, &point, s, opts.tol, NEWTON_STEPS)?;
            counters.newton += k;
            if r < best.1 {
                *best = (w.clone(), r);
            }
            if r < opts.tol {
                return Ok(Some((w, r)));
            }
        }
    }
    Ok(None)
}

/// Direct-path sweeps at fixed `(mu, s)` until the step is below `tol`: the
/// limit `z^inf(mu, s)` of the inner loop. Returns the point and the number of
/// sweeps used.
pub fn minimize_augmented_lagrangian(
    prog: &MultiConvexProgram,
    z0: &BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
    cfg: &TrackerConfig,
    tol: f64,
    max_sweeps: usize,
) -> Result<(BlockVector, usize)> {
    cfg.validate(prog)?;
    prog.check_z(z0)?;
    prog.check_mu(mu)?;
    prog.check_s(s)?;
    let mut z = z0.clone();
    for k in 0..max_sweeps {
        let next = sweep_at(prog, cfg, &z, mu, s, k)?;
        let step = (next.data() - z.data()).norm();
        z = next;
        if step < tol {
            return Ok((z, k + 1));
        }
    }
    let best = PrimalDualPoint::new(z, mu.clone());
    let residual = prog.kkt_residual(&best, s)?;
    Err(Error::NonConvergence {
        best: Box::new(best),
        residual,
        iterations: max_sweeps,
    })
}

fn max_block_displacement(a: &BlockVector, b: &BlockVector) -> f64 {
    (0..a.layout().num_blocks())
        .map(|i| (a.block(i) - b.block(i)).norm())
        .fold(0.0, f64::max)
}
