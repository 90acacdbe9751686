use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;

use super::{build_nmpc_program, simulate_plant, NmpcSpec};
use crate::error::{Error, Result};
use crate::layout::PrimalDualPoint;
use crate::program::MultiConvexProgram;
use crate::sets::project;
use crate::solver::{solve_to_convergence, OracleOptions, TrackerConfig, TrackerState};

/// Closed-loop record of step `k`: the measured state `x_k` (which is also
/// the parameter `s_k`), the applied input and the solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub t: f64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub reference: DVector<f64>,
    pub feasibility: f64,
    pub kkt_residual: f64,
    pub solve_ms: f64,
    /// Solver failure at this step; the previous input was held.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopTrace {
    pub dt: f64,
    /// State component written to the `ref` column.
    pub output: usize,
    pub rows: Vec<TraceRow>,
    /// Horizon point after each step (`w_{k+1}`); the previous one is
    /// repeated on failed steps.
    pub points: Vec<PrimalDualPoint>,
    /// State after the last step.
    pub final_state: DVector<f64>,
}

impl ClosedLoopTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn states(&self) -> Vec<DVector<f64>> {
        self.rows.iter().map(|r| r.x.clone()).collect()
    }

    pub fn output_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x[self.output]).collect()
    }

    pub fn inputs(&self) -> Vec<DVector<f64>> {
        self.rows.iter().map(|r| r.u.clone()).collect()
    }

    pub fn csv_header(&self) -> String {
        let (nx, nu) = match self.rows.first() {
            Some(r) => (r.x.len(), r.u.len()),
            None => (2, 1),
        };
        let mut cols = vec!["k".to_string(), "t_seconds".to_string()];
        cols.extend((1..=nx).map(|i| format!("x{i}")));
        if nu == 1 {
            cols.push("u".into());
        } else {
            cols.extend((1..=nu).map(|i| format!("u{i}")));
        }
        cols.extend(["ref", "feasibility", "kkt_residual", "solve_ms"].map(String::from));
        cols.join(",")
    }

    /// Writes the trace as CSV. Without `timing` the `solve_ms` column is 0
    /// so that repeated runs produce identical files. Failed steps have
    /// `nan` feasibility and residual.
    pub fn write_csv<W: Write>(&self, mut out: W, timing: bool) -> std::io::Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        for row in &self.rows {
            let mut line = format!("{},{}", row.k, row.t);
            for v in row.x.iter().chain(row.u.iter()) {
                line.push_str(&format!(",{v}"));
            }
            let ms = if timing { row.solve_ms } else { 0.0 };
            line.push_str(&format!(
                ",{},{},{},{}",
                row.reference[self.output], row.feasibility, row.kkt_residual, ms
            ));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Rebuilds the horizon program only when the reference changes.
pub(crate) struct ProgramCache<'a> {
    spec: &'a NmpcSpec,
    current: Option<(DVector<f64>, MultiConvexProgram)>,
}

impl<'a> ProgramCache<'a> {
    pub(crate) fn new(spec: &'a NmpcSpec) -> Self {
        Self { spec, current: None }
    }

    pub(crate) fn get(&mut self, reference: &DVector<f64>) -> Result<&MultiConvexProgram> {
        let stale = self.current.as_ref().is_none_or(|(r, _)| r != reference);
        if stale {
            let prog = build_nmpc_program(&self.spec.with_reference(reference.clone()))?;
            self.current = Some((reference.clone(), prog));
        }
        Ok(&self.current.as_ref().expect("just filled").1)
    }
}

fn check_loop_inputs(spec: &NmpcSpec, x0: &DVector<f64>, references: &[DVector<f64>]) -> Result<()> {
    spec.validate()?;
    if references.is_empty() {
        return Err(Error::InvalidArgument("closed loop needs at least one step".into()));
    }
    let nx = spec.model.state_dim();
    if x0.len() != nx {
        return Err(Error::dim("initial state", nx, x0.len()));
    }
    if let Some(r) = references.iter().find(|r| r.len() != nx) {
        return Err(Error::dim("reference", nx, r.len()));
    }
    Ok(())
}

/// Tracked closed loop: one `track_step` per sampling period, starting from
/// `warm`, with `s_{k+1} = x_k` and `u_0` of the new iterate applied to the
/// plant. A failed step holds the previous input and keeps the solver state.
pub fn run_closed_loop(
    spec: &NmpcSpec,
    config: &TrackerConfig,
    x0: &DVector<f64>,
    references: &[DVector<f64>],
    dt: f64,
    warm: PrimalDualPoint,
) -> Result<ClosedLoopTrace> {
    check_loop_inputs(spec, x0, references)?;
    let mut cache = ProgramCache::new(spec);
    let first = cache.get(&references[0])?;
    let mut state = TrackerState::new(first, config.clone(), warm)?;
    let u_box = crate::sets::ConvexSet::boxed(
        spec.model.u_lower.iter().copied().collect(),
        spec.model.u_upper.iter().copied().collect(),
    )?;
    let mut held = project(&u_box, &spec.first_input(&state.warm.z))?;

    let mut x = x0.clone();
    let mut rows = Vec::with_capacity(references.len());
    let mut points = Vec::with_capacity(references.len());
    for (k, reference) in references.iter().enumerate() {
        let prog = cache.get(reference)?;
        let started = Instant::now();
        let outcome = state.advance(prog, &x);
        let solve_ms = started.elapsed().as_secs_f64() * 1e3;
        let (u, feasibility, kkt_residual, error) = match outcome {
            Ok(report) => (spec.first_input(&report.point.z), report.feasibility, report.kkt_residual, None),
            Err(e) => (held.clone(), f64::NAN, f64::NAN, Some(e.to_string())),
        };
        held = u.clone();
        let next = simulate_plant(&spec.model, &x, &u)?;
        rows.push(TraceRow {
            k,
            t: k as f64 * dt,
            x: std::mem::replace(&mut x, next),
            u,
            reference: reference.clone(),
            feasibility,
            kkt_residual,
            solve_ms,
            error,
        });
        points.push(state.warm.clone());
    }
    Ok(ClosedLoopTrace {
        dt,
        output: spec.output,
        rows,
        points,
        final_state: x,
    })
}

/// Reference closed loop: every step is solved to `opts.tol` by
/// [`solve_to_convergence`], warm-started at the previous solution (or at
/// `warm`, else [`NmpcSpec::initial_guess`], for the first step).
pub fn run_oracle_loop(
    spec: &NmpcSpec,
    x0: &DVector<f64>,
    references: &[DVector<f64>],
    dt: f64,
    opts: &OracleOptions,
    warm: Option<PrimalDualPoint>,
) -> Result<ClosedLoopTrace> {
    check_loop_inputs(spec, x0, references)?;
    let mut cache = ProgramCache::new(spec);
    let mut x = x0.clone();
    let mut w = match warm {
        Some(w) => w,
        None => spec.initial_guess(cache.get(&references[0])?, x0),
    };
    let mut rows = Vec::with_capacity(references.len());
    let mut points = Vec::with_capacity(references.len());
    for (k, reference) in references.iter().enumerate() {
        let prog = cache.get(reference)?;
        let started = Instant::now();
        let sol = solve_to_convergence(prog, &w, &x, opts).map_err(|e| e.at_step(k))?;
        let solve_ms = started.elapsed().as_secs_f64() * 1e3;
        let feasibility = prog.evaluate_constraint(&sol.point.z, &x)?.norm();
        let u = spec.first_input(&sol.point.z);
        let next = simulate_plant(&spec.model, &x, &u)?;
        rows.push(TraceRow {
            k,
            t: k as f64 * dt,
            x: std::mem::replace(&mut x, next),
            u,
            reference: reference.clone(),
            feasibility,
            kkt_residual: sol.residual,
            solve_ms,
            error: None,
        });
        w = sol.point;
        points.push(w.clone());
    }
    Ok(ClosedLoopTrace {
        dt,
        output: spec.output,
        rows,
        points,
        final_state: x,
    })
}
