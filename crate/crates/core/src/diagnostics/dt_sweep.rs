use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compare_closed_loop, TrajectoryMetric};
use crate::error::{Error, Result};
use crate::nmpc::{oracle_options, ClosedLoopSetup};
use crate::solver::{OracleOptions, SolverPath, TrackerConfig, DEFAULT_ALPHA};

/// Horizon programs have a state block and an input block.
const NMPC_BLOCKS: usize = 2;

/// Fixed-compute study: at sampling period `dt` the tracker gets
/// `floor(budget dt / P)` sweeps per step, `budget` being block updates per
/// second and `P` the number of blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtSweepOptions {
    pub budget: f64,
    pub dts: Vec<f64>,
    /// Simulated time in seconds.
    pub duration: f64,
    pub rho: f64,
    pub alpha: f64,
    pub path: SolverPath,
    /// The tracked loop starts at `warm_scale * w*_0`.
    pub warm_scale: f64,
    pub oracle: OracleOptions,
    pub metric: TrajectoryMetric,
}

impl Default for DtSweepOptions {
    fn default() -> Self {
        Self {
            budget: 5000.0,
            dts: vec![0.01],
            duration: 4.0,
            rho: 50.0,
            alpha: DEFAULT_ALPHA,
            path: SolverPath::default(),
            warm_scale: 5.0,
            oracle: oracle_options(),
            metric: TrajectoryMetric::Output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtSweepCell {
    pub dt: f64,
    pub sweeps_per_step: usize,
    /// `None` when the cell could not be run; see `note`.
    pub nl2_error: Option<f64>,
    pub note: Option<String>,
}

pub fn sweeps_per_step(budget: f64, dt: f64, num_blocks: usize) -> usize {
    // the shift keeps exact products such as 5000 * 0.01 from rounding down
    (budget * dt / num_blocks as f64 + 1e-9).floor() as usize
}

/// Runs tracked and reference closed loops for every `dt` and returns their
/// normalized L2 distance. Cells with no sweep per step, or whose reference
/// loop fails, are flagged rather than failing the sweep. Cells run in
/// parallel and come back in grid order.
pub fn dt_sweep<F>(factory: F, opts: &DtSweepOptions) -> Result<Vec<DtSweepCell>>
where
    F: Fn(f64, f64) -> Result<ClosedLoopSetup> + Sync,
{
    if !(opts.budget > 0.0) {
        return Err(Error::InvalidArgument(format!("budget must be positive, got {}", opts.budget)));
    }
    if opts.dts.is_empty() {
        return Err(Error::InvalidArgument("dt grid is empty".into()));
    }
    if let Some(dt) = opts.dts.iter().find(|dt| !(**dt > 0.0 && **dt <= 0.1)) {
        return Err(Error::InvalidArgument(format!("sampling period {dt} outside (0, 0.1]")));
    }
    opts.dts
        .par_iter()
        .map(|&dt| {
            let setup = factory(dt, opts.duration)?;
            let m = sweeps_per_step(opts.budget, dt, NMPC_BLOCKS);
            let mut cell = DtSweepCell {
                dt,
                sweeps_per_step: m,
                nl2_error: None,
                note: None,
            };
            if m == 0 {
                cell.note = Some("infeasible: budget allows no sweep per step".into());
                return Ok(cell);
            }
            let cfg = TrackerConfig::new(opts.rho, m, NMPC_BLOCKS)
                .with_alpha(opts.alpha)
                .with_path(opts.path);
            match compare_closed_loop(&setup, &cfg, &opts.oracle, opts.warm_scale, opts.metric) {
                Ok(c) => cell.nl2_error = Some(c.nl2_error),
                Err(e) if e.is_numerical() => cell.note = Some(format!("reference loop failed: {e}")),
                Err(e) => return Err(e),
            }
            Ok(cell)
        })
        .collect()
}
