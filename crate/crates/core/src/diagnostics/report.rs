//! CSV output of the experiments. Unidentified values are written as `nan`.

use std::io::Write;

use super::{ContractionCell, DtSweepCell, RateFit};

pub fn write_contraction_csv<W: Write>(mut out: W, cells: &[ContractionCell]) -> std::io::Result<()> {
    writeln!(out, "rho,M,beta_w,beta_s,residual")?;
    for c in cells {
        writeln!(out, "{},{},{},{},{}", c.rho, c.m, c.beta_w, c.beta_s, c.residual)?;
    }
    Ok(())
}

pub fn write_dt_sweep_csv<W: Write>(mut out: W, cells: &[DtSweepCell]) -> std::io::Result<()> {
    writeln!(out, "dt,M_per_step,nl2_error")?;
    for c in cells {
        writeln!(out, "{},{},{}", c.dt, c.sweeps_per_step, c.nl2_error.unwrap_or(f64::NAN))?;
    }
    Ok(())
}

pub fn write_rate_csv<W: Write>(mut out: W, fit: &RateFit) -> std::io::Result<()> {
    writeln!(out, "M,error")?;
    for (m, e) in fit.m_values.iter().zip(&fit.errors) {
        writeln!(out, "{m},{e}")?;
    }
    Ok(())
}
