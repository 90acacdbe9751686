//! Optimality tracking by truncated proximal alternating minimisation.
//!
//! One [`track_step`] runs a fixed number `M` of Gauss-Seidel sweeps over the
//! blocks of the augmented Lagrangian, warm-started at the previous iterate,
//! followed by a single multiplier update `mu <- mu + rho g(z, s)`.
//!
//! Two paths are available. [`SolverPath::Direct`] minimizes each block of
//! `L_rho` over its set exactly. [`SolverPath::Lifted`] works on the
//! reformulation with copies `y_i = z_i`: every block then costs one SPD solve
//! (in `y_i`) plus one projection (in `z_i`).

mod block;
mod lifted;
mod newton;
mod oracle;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{BlockVector, PrimalDualPoint};
use crate::program::MultiConvexProgram;

pub use block::{block_update, sweep};
pub(crate) use block::sweep_at;
pub use lifted::{lift_program, lifted_cycle};
pub use oracle::{minimize_augmented_lagrangian, solve_to_convergence, OracleOptions, OracleSolution};

/// Default proximal weight, kept small so the prox term barely perturbs the
/// block minimizers.
pub const DEFAULT_ALPHA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverPath {
    Direct,
    #[default]
    Lifted,
}

impl fmt::Display for SolverPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverPath::Direct => "direct",
            SolverPath::Lifted => "lifted",
        })
    }
}

impl FromStr for SolverPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverPath::Direct),
            "lifted" => Ok(SolverPath::Lifted),
            _ => Err(Error::InvalidArgument(format!("unknown solver path '{s}' (direct|lifted)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Penalty parameter, constant over time.
    pub rho: f64,
    /// Primal sweeps per time step (`M`).
    pub sweeps: usize,
    /// Proximal weight per block.
    pub alpha: Vec<f64>,
    pub path: SolverPath,
}

impl TrackerConfig {
    pub fn new(rho: f64, sweeps: usize, num_blocks: usize) -> Self {
        Self {
            rho,
            sweeps,
            alpha: vec![DEFAULT_ALPHA; num_blocks],
            path: SolverPath::default(),
        }
    }

    pub fn with_path(mut self, path: SolverPath) -> Self {
        self.path = path;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha.iter_mut().for_each(|a| *a = alpha);
        self
    }

    pub fn validate(&self, prog: &MultiConvexProgram) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidArgument("the number of sweeps M must be at least 1".into()));
        }
        if self.alpha.len() != prog.num_blocks() {
            return Err(Error::dim("alpha", prog.num_blocks(), self.alpha.len()));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {a}")));
        }
        Ok(())
    }
}

/// Auxiliary variables of the lifted path: copies `y` and consensus
/// multipliers `nu` (one vector per block).
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub y: BlockVector,
    pub nu: Vec<DVector<f64>>,
}

impl LiftedState {
    /// `y = z` and `nu = -(grad f + Jg' mu)`, the consensus multiplier that
    /// makes a critical point of the original program a fixed point of the
    /// lifted iteration.
    pub fn consistent_with(prog: &MultiConvexProgram, w: &PrimalDualPoint) -> Result<Self> {
        let grad = prog.lagrangian_gradient(&w.z, &w.mu)?;
        let nu = (0..prog.num_blocks())
            .map(|i| {
                let r = prog.layout().range(i);
                -grad.rows(r.start, r.len()).into_owned()
            })
            .collect();
        Ok(Self { y: w.z.clone(), nu })
    }
}

/// Configuration plus the current warm start `(z_k, mu_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub config: TrackerConfig,
    pub warm: PrimalDualPoint,
    pub lifted: Option<LiftedState>,
}

impl TrackerState {
    pub fn new(prog: &MultiConvexProgram, config: TrackerConfig, warm: PrimalDualPoint) -> Result<Self> {
        config.validate(prog)?;
        prog.check_z(&warm.z)?;
        prog.check_mu(&warm.mu)?;
        let lifted = match config.path {
            SolverPath::Direct => None,
            SolverPath::Lifted => Some(LiftedState::consistent_with(prog, &warm)?),
        };
        Ok(Self { config, warm, lifted })
    }

    /// Runs one time step in place. On error the state is left untouched.
    pub fn advance(&mut self, prog: &MultiConvexProgram, s_next: &DVector<f64>) -> Result<StepReport> {
        let (next, report) = track_step(prog, self, s_next)?;
        *self = next;
        Ok(report)
    }
}

/// Diagnostics of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub point: PrimalDualPoint,
    /// `L_rho(z^(l), mu_k, s)` for `l = 0..=M`.
    pub al_values: Vec<f64>,
    /// `|z^(l+1) - z^(l)|` for each sweep.
    pub displacements: Vec<f64>,
    /// `|g(z^(l), s)|` for `l = 0..=M`.
    pub sweep_feasibility: Vec<f64>,
    /// KKT residual at `(z^(l), mu_k)` for `l < M`, and at the updated point
    /// for `l = M`.
    pub sweep_kkt: Vec<f64>,
    /// `|g(z_{k+1}, s_{k+1})|`.
    pub feasibility: f64,
    /// KKT residual at `(z_{k+1}, mu_{k+1})`.
    pub kkt_residual: f64,
}

impl StepReport {
    pub const CSV_HEADER: &'static str = "step,sweep,al_value,displacement,feasibility,kkt_residual";

    /// One row per sweep, including the warm start as sweep 0.
    pub fn csv_rows(&self, step: usize) -> Vec<String> {
        (0..self.al_values.len())
            .map(|l| {
                let disp = if l == 0 { 0.0 } else { self.displacements[l - 1] };
                format!(
                    "{step},{l},{:e},{:e},{:e},{:e}",
                    self.al_values[l], disp, self.sweep_feasibility[l], self.sweep_kkt[l]
                )
            })
            .collect()
    }
}

/// One step of the tracking iteration at parameter `s_next`: `M` sweeps (or
/// lifted cycles) from the warm start, then the dual update.
pub fn track_step(
    prog: &MultiConvexProgram,
    state: &TrackerState,
    s_next: &DVector<f64>,
) -> Result<(TrackerState, StepReport)> {
    prog.check_s(s_next)?;
    let cfg = &state.config;
    let rho = cfg.rho;
    let mu = &state.warm.mu;
    let mut z = state.warm.z.clone();
    let mut lifted = state.lifted.clone();
    if cfg.path == SolverPath::Lifted && lifted.is_none() {
        lifted = Some(LiftedState::consistent_with(prog, &state.warm)?);
    }

    let m = cfg.sweeps;
    let mut al_values = Vec::with_capacity(m + 1);
    let mut displacements = Vec::with_capacity(m);
    let mut sweep_feasibility = Vec::with_capacity(m + 1);
    let mut sweep_kkt = Vec::with_capacity(m + 1);

    let record = |z: &BlockVector, al: &mut Vec<f64>, feas: &mut Vec<f64>, kkt: &mut Vec<f64>| -> Result<()> {
        al.push(prog.augmented_lagrangian(z, mu, s_next, rho)?);
        feas.push(prog.evaluate_constraint(z, s_next)?.norm());
        kkt.push(prog.kkt_residual(&PrimalDualPoint::new(z.clone(), mu.clone()), s_next)?);
        Ok(())
    };

    record(&z, &mut al_values, &mut sweep_feasibility, &mut sweep_kkt)?;
    for l in 0..m {
        let before = z.data().clone();
        match lifted.as_mut() {
            None => z = block::sweep_at(prog, cfg, &z, mu, s_next, l)?,
            Some(ls) => lifted::cycle_at(prog, cfg, ls, &mut z, mu, s_next, l)?,
        }
        displacements.push((z.data() - before).norm());
        if l + 1 < m {
            record(&z, &mut al_values, &mut sweep_feasibility, &mut sweep_kkt)?;
        } else {
            al_values.push(prog.augmented_lagrangian(&z, mu, s_next, rho)?);
        }
    }

    // Dual update. On the lifted path the stacked multiplier (mu, nu) of the
    // lifted program is updated with its stacked residual (g(y, s), y - z).
    let mu_next = match lifted.as_mut() {
        None => mu + prog.evaluate_constraint(&z, s_next)? * rho,
        Some(ls) => {
            for i in 0..prog.num_blocks() {
                let diff = ls.y.block(i) - z.block(i);
                ls.nu[i] += diff * rho;
            }
            mu + prog.evaluate_constraint(&ls.y, s_next)? * rho
        }
    };
    if !mu_next.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { sweep: m, block: 0 });
    }

    let point = PrimalDualPoint::new(z, mu_next);
    let feasibility = prog.evaluate_constraint(&point.z, s_next)?.norm();
    let kkt_residual = prog.kkt_residual(&point, s_next)?;
    sweep_feasibility.push(feasibility);
    sweep_kkt.push(kkt_residual);

    let next = TrackerState {
        config: state.config.clone(),
        warm: point.clone(),
        lifted,
    };
    let report = StepReport {
        point,
        al_values,
        displacements,
        sweep_feasibility,
        sweep_kkt,
        feasibility,
        kkt_residual,
    };
    Ok((next, report))
}

#[cfg(test)]
mod tests;
