//! Experiment drivers and metrics: tracking error against a reference
//! solver, empirical contraction coefficients, the rate of the inner loop in
//! the number of sweeps `M`, feasibility decay, and the error of the tracked
//! closed loop as a function of the sampling period at fixed compute.

mod contraction;
mod dt_sweep;
mod rate;
mod report;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::PrimalDualPoint;
use crate::nmpc::{run_closed_loop, run_oracle_loop, ClosedLoopSetup, ClosedLoopTrace};
use crate::program::MultiConvexProgram;
use crate::solver::{solve_to_convergence, OracleOptions, TrackerConfig, TrackerState};

pub use contraction::{contraction_probe, nnls2, ContractionCell, ContractionOptions, Regression};
pub use dt_sweep::{dt_sweep, DtSweepCell, DtSweepOptions};
pub use rate::{fit_rate, rate_experiment, RateFit};
pub use report::{write_contraction_csv, write_dt_sweep_csv, write_rate_csv};

/// `|w_k - w*_k|` for each step and `|s_{k+1} - s_k|` between consecutive
/// steps (one entry fewer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub errors: Vec<f64>,
    pub param_steps: Vec<f64>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn initial(&self) -> f64 {
        self.errors.first().copied().unwrap_or(f64::NAN)
    }

    pub fn last(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub const CSV_HEADER: &'static str = "k,error,param_step";

    /// One row per step; the last step has no successor and an empty
    /// `param_step`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for (k, e) in self.errors.iter().enumerate() {
            match self.param_steps.get(k) {
                Some(d) => writeln!(out, "{k},{e},{d}")?,
                None => writeln!(out, "{k},{e},")?,
            }
        }
        Ok(())
    }
}

/// Pairs tracked iterates with reference points computed at the same
/// parameters.
pub fn error_series(
    tracked: &[PrimalDualPoint],
    oracle: &[PrimalDualPoint],
    params: &[DVector<f64>],
) -> Result<ErrorSeries> {
    if tracked.len() != oracle.len() {
        return Err(Error::dim("oracle run", tracked.len(), oracle.len()));
    }
    if tracked.len() != params.len() {
        return Err(Error::dim("parameter sequence", tracked.len(), params.len()));
    }
    let errors = tracked.iter().zip(oracle).map(|(a, b)| a.distance(b)).collect();
    let param_steps = params.windows(2).map(|p| (&p[1] - &p[0]).norm()).collect();
    Ok(ErrorSeries { errors, param_steps })
}

/// Tracked iterates `w_k` after the step at `params[k]`, starting from `warm`.
pub fn track_parametric(
    prog: &MultiConvexProgram,
    config: &TrackerConfig,
    warm: &PrimalDualPoint,
    params: &[DVector<f64>],
) -> Result<Vec<PrimalDualPoint>> {
    let mut state = TrackerState::new(prog, config.clone(), warm.clone())?;
    params
        .iter()
        .enumerate()
        .map(|(k, s)| state.advance(prog, s).map(|r| r.point).map_err(|e| e.at_step(k)))
        .collect()
}

/// Reference points `w*_k` by continuation: each solve is warm-started at
/// the previous solution (the first at `start`), which keeps the sequence on
/// one branch of critical points.
pub fn oracle_parametric(
    prog: &MultiConvexProgram,
    start: &PrimalDualPoint,
    params: &[DVector<f64>],
    opts: &OracleOptions,
) -> Result<Vec<PrimalDualPoint>> {
    let mut w = start.clone();
    let mut out = Vec::with_capacity(params.len());
    for (k, s) in params.iter().enumerate() {
        w = solve_to_convergence(prog, &w, s, opts).map_err(|e| e.at_step(k))?.point;
        out.push(w.clone());
    }
    Ok(out)
}

/// Tracking error of the tracker started at `warm` against the continuation
/// oracle started at `oracle_start`, over the same parameters.
pub fn tracking_error_series(
    prog: &MultiConvexProgram,
    config: &TrackerConfig,
    warm: &PrimalDualPoint,
    oracle_start: &PrimalDualPoint,
    params: &[DVector<f64>],
    opts: &OracleOptions,
) -> Result<ErrorSeries> {
    let oracle = oracle_parametric(prog, oracle_start, params, opts)?;
    let tracked = track_parametric(prog, config, warm, params)?;
    error_series(&tracked, &oracle, params)
}

/// `s_k = s_0 + k step` for `k < steps`.
pub fn linear_drift(s0: &DVector<f64>, step: &DVector<f64>, steps: usize) -> Result<Vec<DVector<f64>>> {
    if s0.len() != step.len() {
        return Err(Error::dim("drift step", s0.len(), step.len()));
    }
    Ok((0..steps).map(|k| s0 + step * k as f64).collect())
}

/// `(1 - theta) / (2 theta - 1)` for `theta` in `(1/2, 1)`.
pub fn psi(theta: f64) -> Result<f64> {
    if !(theta > 0.5 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (1/2, 1), got {theta}")));
    }
    Ok((1.0 - theta) / (2.0 * theta - 1.0))
}

/// `|a - b| / |b|` over whole trajectories.
pub fn normalized_l2(tracked: &[f64], reference: &[f64]) -> Result<f64> {
    if tracked.len() != reference.len() {
        return Err(Error::dim("trajectory", reference.len(), tracked.len()));
    }
    if tracked.is_empty() {
        return Err(Error::InvalidArgument("empty trajectories".into()));
    }
    let diff: f64 = tracked.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let norm: f64 = reference.iter().map(|b| b * b).sum();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("reference trajectory is zero".into()));
    }
    Ok((diff / norm).sqrt())
}

/// Which states enter the normalized trajectory error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryMetric {
    /// The spec's output component (the speed for the DC motor).
    #[default]
    Output,
    FullState,
}

/// Normalized L2 distance between the state trajectories of two traces.
pub fn trajectory_error(tracked: &ClosedLoopTrace, oracle: &ClosedLoopTrace, metric: TrajectoryMetric) -> Result<f64> {
    let flat = |t: &ClosedLoopTrace| -> Vec<f64> {
        match metric {
            TrajectoryMetric::Output => t.output_series(),
            TrajectoryMetric::FullState => t.rows.iter().flat_map(|r| r.x.iter().copied()).collect(),
        }
    };
    normalized_l2(&flat(tracked), &flat(oracle))
}

/// The `|g|` column of a trace.
pub fn feasibility_series(trace: &ClosedLoopTrace) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    Ok(trace.rows.iter().map(|r| r.feasibility).collect())
}

/// Means of the first and last `fraction` of a series (at least one entry
/// each).
pub fn head_tail_means(series: &[f64], fraction: f64) -> Result<(f64, f64)> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let n = ((series.len() as f64 * fraction).floor() as usize).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok((mean(&series[..n]), mean(&series[series.len() - n..])))
}

/// A tracked closed loop next to the reference closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub tracked: ClosedLoopTrace,
    pub oracle: ClosedLoopTrace,
    /// Normalized L2 distance of the trajectories.
    pub nl2_error: f64,
    /// `|w_k - w*_k|` between the horizon points of the two loops (each at its
    /// own measured state) and the parameter differences of the tracked loop.
    pub point_errors: ErrorSeries,
}

impl Comparison {
    pub const CSV_HEADER: &'static str = "k,t_seconds,output_tracked,output_oracle,state_error,point_error";

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for (k, (a, b)) in self.tracked.rows.iter().zip(&self.oracle.rows).enumerate() {
            let o = self.tracked.output;
            writeln!(
                out,
                "{k},{},{},{},{},{}",
                a.t,
                a.x[o],
                b.x[o],
                (&a.x - &b.x).norm(),
                self.point_errors.errors[k]
            )?;
        }
        Ok(())
    }
}

/// Reference solution at the initial state, solved from
/// [`crate::nmpc::NmpcSpec::initial_guess`].
pub fn initial_solution(setup: &ClosedLoopSetup, opts: &OracleOptions) -> Result<PrimalDualPoint> {
    let first = setup
        .references
        .first()
        .ok_or_else(|| Error::InvalidArgument("closed loop needs at least one step".into()))?;
    let prog = crate::nmpc::build_nmpc_program(&setup.spec.with_reference(first.clone()))?;
    let guess = setup.spec.initial_guess(&prog, &setup.x0);
    Ok(solve_to_convergence(&prog, &guess, &setup.x0, opts)?.point)
}

/// Runs the reference loop from `w*_0` and the tracked loop from
/// `warm_scale * w*_0`, where `w*_0` solves the first horizon program.
pub fn compare_closed_loop(
    setup: &ClosedLoopSetup,
    config: &TrackerConfig,
    opts: &OracleOptions,
    warm_scale: f64,
    metric: TrajectoryMetric,
) -> Result<Comparison> {
    let w0 = initial_solution(setup, opts)?;
    let oracle = run_oracle_loop(&setup.spec, &setup.x0, &setup.references, setup.dt, opts, Some(w0.clone()))?;
    let tracked = run_closed_loop(&setup.spec, config, &setup.x0, &setup.references, setup.dt, w0.scaled(warm_scale))?;
    let nl2_error = trajectory_error(&tracked, &oracle, metric)?;
    let point_errors = error_series(&tracked.points, &oracle.points, &tracked.states())?;
    Ok(Comparison {
        tracked,
        oracle,
        nl2_error,
        point_errors,
    })
}
