use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{error_series, oracle_parametric, track_parametric};
use crate::error::{Error, Result};
use crate::layout::PrimalDualPoint;
use crate::program::MultiConvexProgram;
use crate::solver::{OracleOptions, SolverPath, TrackerConfig, DEFAULT_ALPHA};

/// Below this every tracking error or parameter step counts as zero.
const NEGLIGIBLE: f64 = 1e-12;

/// Nonnegative least squares `min |y - b1 a - b2 c|` over `b1, b2 >= 0`.
/// Returns the coefficients and the RMS residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regression {
    pub beta: [f64; 2],
    pub rms_residual: f64,
}

pub fn nnls2(y: &[f64], a: &[f64], c: &[f64]) -> Result<Regression> {
    if y.len() != a.len() || y.len() != c.len() {
        return Err(Error::dim("regressors", y.len(), a.len().min(c.len())));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("regression needs at least one sample".into()));
    }
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let (aa, cc, ac) = (dot(a, a), dot(c, c), dot(a, c));
    let (ay, cy) = (dot(a, y), dot(c, y));
    let sse = |b: [f64; 2]| -> f64 {
        y.iter()
            .zip(a.iter().zip(c))
            .map(|(yi, (ai, ci))| (yi - b[0] * ai - b[1] * ci).powi(2))
            .sum()
    };
    let mut candidates = vec![[0.0, 0.0]];
    if aa > 0.0 {
        candidates.push([(ay / aa).max(0.0), 0.0]);
    }
    if cc > 0.0 {
        candidates.push([0.0, (cy / cc).max(0.0)]);
    }
    let det = aa * cc - ac * ac;
    if det > 1e-14 * aa * cc {
        let b = [(cc * ay - ac * cy) / det, (aa * cy - ac * ay) / det];
        if b[0] >= 0.0 && b[1] >= 0.0 {
            candidates.push(b);
        }
    }
    let best = candidates
        .into_iter()
        .map(|b| (b, sse(b)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("nonempty");
    Ok(Regression {
        beta: best.0,
        rms_residual: (best.1 / y.len() as f64).sqrt(),
    })
}

/// Grid and settings of [`contraction_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionOptions {
    pub rho_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
    pub alpha: f64,
    pub path: SolverPath,
    pub oracle: OracleOptions,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        Self {
            rho_grid: vec![10.0],
            m_grid: vec![20],
            alpha: DEFAULT_ALPHA,
            path: SolverPath::default(),
            oracle: OracleOptions::default(),
        }
    }
}

/// Empirical coefficients of `e_{k+1} <= beta_w e_k + beta_s |s_{k+1} - s_k|`
/// for one `(rho, M)`. A coefficient that the run cannot identify is NaN and
/// `note` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCell {
    pub rho: f64,
    pub m: usize,
    pub beta_w: f64,
    pub beta_s: f64,
    pub residual: f64,
    pub note: Option<String>,
}

fn regress_cell(rho: f64, m: usize, errors: &[f64], steps: &[f64]) -> Result<ContractionCell> {
    let n = errors.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::InvalidArgument("contraction probe needs at least two steps".into()));
    }
    let (y, e) = (&errors[1..], &errors[..n]);
    let d = &steps[..n];
    let mut cell = ContractionCell {
        rho,
        m,
        beta_w: f64::NAN,
        beta_s: f64::NAN,
        residual: 0.0,
        note: None,
    };
    let excited = d.iter().any(|v| *v > NEGLIGIBLE);
    if errors.iter().all(|v| *v <= NEGLIGIBLE) {
        cell.note = Some("degenerate: tracking errors vanish".into());
    } else if !excited {
        let zeros = vec![0.0; n];
        let r = nnls2(y, e, &zeros)?;
        cell.beta_w = r.beta[0];
        cell.residual = r.rms_residual;
        cell.note = Some("beta_s unidentifiable: no parameter drift".into());
    } else {
        let r = nnls2(y, e, d)?;
        cell.beta_w = r.beta[0];
        cell.beta_s = r.beta[1];
        cell.residual = r.rms_residual;
    }
    Ok(cell)
}

/// For every `(rho, M)` in the grid: tracks the parameter sequence from
/// `warm`, pairs the iterates with the continuation oracle started at
/// `oracle_start`, and fits the contraction inequality by nonnegative least
/// squares. These are empirical surrogates for the constants of the theory,
/// which are not computable. Cells run in parallel; the result is ordered
/// rho-major as in the grids.
pub fn contraction_probe(
    prog: &MultiConvexProgram,
    params: &[DVector<f64>],
    warm: &PrimalDualPoint,
    oracle_start: &PrimalDualPoint,
    opts: &ContractionOptions,
) -> Result<Vec<ContractionCell>> {
    if opts.rho_grid.is_empty() || opts.m_grid.is_empty() {
        return Err(Error::InvalidArgument("rho and M grids must be nonempty".into()));
    }
    if params.len() < 2 {
        return Err(Error::InvalidArgument("contraction probe needs at least two steps".into()));
    }
    let oracle = oracle_parametric(prog, oracle_start, params, &opts.oracle)?;
    let cells: Vec<(f64, usize)> = opts
        .rho_grid
        .iter()
        .flat_map(|&rho| opts.m_grid.iter().map(move |&m| (rho, m)))
        .collect();
    cells
        .par_iter()
        .map(|&(rho, m)| {
            let cfg = TrackerConfig::new(rho, m, prog.num_blocks())
                .with_alpha(opts.alpha)
                .with_path(opts.path);
            let tracked = match track_parametric(prog, &cfg, warm, params) {
                Ok(t) => t,
                Err(e) if e.is_numerical() => {
                    return Ok(ContractionCell {
                        rho,
                        m,
                        beta_w: f64::NAN,
                        beta_s: f64::NAN,
                        residual: f64::NAN,
                        note: Some(format!("tracker failed: {e}")),
                    })
                }
                Err(e) => return Err(e),
            };
            let series = error_series(&tracked, &oracle, params)?;
            regress_cell(rho, m, &series.errors, &series.param_steps)
        })
        .collect()
}
