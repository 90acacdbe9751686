use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::BlockVector;
use crate::program::MultiConvexProgram;
use crate::solver::{minimize_augmented_lagrangian, SolverPath, TrackerConfig};

/// Distances to the inner-loop limit after `M` sweeps and the fit
/// `error ~ C M^(-psi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub m_values: Vec<usize>,
    pub errors: Vec<f64>,
    /// Fitted exponent; infinite when fewer than two errors are nonzero.
    pub psi_hat: f64,
    pub c_hat: f64,
}

/// Least squares of `log error = log C - psi log M` over the nonzero errors.
pub fn fit_rate(m_values: &[usize], errors: &[f64]) -> Result<RateFit> {
    if m_values.len() != errors.len() {
        return Err(Error::dim("errors", m_values.len(), errors.len()));
    }
    if m_values.len() < 3 {
        return Err(Error::InvalidArgument("rate fit needs at least three M values".into()));
    }
    if m_values[0] == 0 || m_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("M values must be positive and strictly increasing".into()));
    }
    let pts: Vec<(f64, f64)> = m_values
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > 0.0)
        .map(|(m, e)| ((*m as f64).ln(), e.ln()))
        .collect();
    let (psi_hat, c_hat) = if pts.len() < 2 {
        (f64::INFINITY, 0.0)
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        (-slope, (my - slope * mx).exp())
    };
    Ok(RateFit {
        m_values: m_values.to_vec(),
        errors: errors.to_vec(),
        psi_hat,
        c_hat,
    })
}

/// Runs `M` direct sweeps at fixed `(mu, s)` from `z0` for every `M` in
/// `m_values` and measures the distance to the limit of the inner loop,
/// computed by sweeping until the step falls below `1e-13`. Uses `rho` and
/// `alpha` of `config`.
pub fn rate_experiment(
    prog: &MultiConvexProgram,
    z0: &BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
    config: &TrackerConfig,
    m_values: &[usize],
) -> Result<RateFit> {
    fit_rate(m_values, &vec![0.0; m_values.len()])?;
    let cfg = config.clone().with_path(SolverPath::Direct);
    let (limit, _) = minimize_augmented_lagrangian(prog, z0, mu, s, &cfg, 1e-13, 200_000)?;
    let mut z = z0.clone();
    let mut done = 0;
    let mut errors = Vec::with_capacity(m_values.len());
    for &m in m_values {
        while done < m {
            z = crate::solver::sweep_at(prog, &cfg, &z, mu, s, done)?;
            done += 1;
        }
        errors.push((z.data() - limit.data()).norm());
    }
    fit_rate(m_values, &errors)
}
