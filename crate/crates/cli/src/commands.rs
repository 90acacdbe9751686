use optrack::diagnostics::{
    self, compare_closed_loop, contraction_probe, feasibility_series, head_tail_means, initial_solution,
    rate_experiment, trajectory_error, ContractionOptions, DtSweepOptions, TrajectoryMetric,
};
use optrack::fixtures::random_set_point;
use optrack::nalgebra::DVector;
use optrack::nmpc::{build_nmpc_program, dc_motor_setup, oracle_options, run_closed_loop, run_oracle_loop, ClosedLoopTrace};
use optrack::{
    solve_to_convergence, BlockVector, Error, MultiConvexProgram, OracleOptions, PrimalDualPoint, TrackerConfig,
    TrackerState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::args::{
    Builtin, CompareArgs, ContractionArgs, DtSweepArgs, OracleArgs, RateArgs, TrackArgs,
};
use crate::grid::{parse_f64_grid, parse_usize_grid};
use crate::output::{Manifest, OutputDir};
use crate::source::{motor_record, motor_setup, motor_setup_for, program_record, resolve, schedule, vector_flag, Source};
use crate::CliError;

/// State and input blocks of the DC-motor horizon program.
const MOTOR_BLOCKS: usize = 2;
/// Fraction of a run used for the head and tail feasibility means.
const HEAD_TAIL: f64 = 0.2;

fn at_step(step: usize, e: Error) -> Error {
    Error::AtStep {
        step,
        source: Box::new(e),
    }
}

fn usage(flag: &str, e: String) -> CliError {
    CliError::Usage(format!("{flag}: {e}"))
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn input_range(trace: &ClosedLoopTrace) -> (f64, f64) {
    trace.rows.iter().flat_map(|r| r.u.iter().copied()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
        (lo.min(u), hi.max(u))
    })
}

/// Summary of a closed-loop trace for the manifest.
fn trace_summary(trace: &ClosedLoopTrace) -> Value {
    let failed: Vec<usize> = trace.rows.iter().filter(|r| r.error.is_some()).map(|r| r.k).collect();
    let (u_min, u_max) = input_range(trace);
    let feas = feasibility_series(trace).unwrap_or_default();
    let (head, tail) = head_tail_means(&feas, HEAD_TAIL).unwrap_or((f64::NAN, f64::NAN));
    json!({
        "steps": trace.len(),
        "failed_steps": failed,
        "input_min": finite(u_min),
        "input_max": finite(u_max),
        "feasibility_head_mean": finite(head),
        "feasibility_tail_mean": finite(tail),
        "final_state": trace.final_state.as_slice(),
    })
}

fn first_failure(trace: &ClosedLoopTrace) -> Result<(), CliError> {
    match trace.rows.iter().find(|r| r.error.is_some()) {
        Some(r) => Err(CliError::Numerical(format!(
            "tracking step {} failed: {}",
            r.k,
            r.error.as_deref().unwrap_or_default()
        ))),
        None => Ok(()),
    }
}

/// Rows of a program run: step, feasibility, KKT residual, parameter,
/// primal and dual variables.
struct ProgramTrace {
    header: String,
    rows: Vec<String>,
}

impl ProgramTrace {
    fn new(prog: &MultiConvexProgram) -> Self {
        let mut cols = vec!["k".to_string(), "feasibility".into(), "kkt_residual".into()];
        cols.extend((1..=prog.param_dim()).map(|i| format!("s{i}")));
        cols.extend((1..=prog.layout().total()).map(|i| format!("z{i}")));
        cols.extend((1..=prog.num_constraints()).map(|i| format!("mu{i}")));
        Self {
            header: cols.join(","),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, k: usize, feasibility: f64, kkt: f64, s: &DVector<f64>, w: &PrimalDualPoint) {
        let mut line = format!("{k},{feasibility},{kkt}");
        for v in s.iter().chain(w.z.data().iter()).chain(w.mu.iter()) {
            line.push_str(&format!(",{v}"));
        }
        self.rows.push(line);
    }

    fn write(&self, out: &mut Vec<u8>) -> std::io::Result<()> {
        use std::io::Write;
        writeln!(out, "{}", self.header)?;
        for r in &self.rows {
            writeln!(out, "{r}")?;
        }
        Ok(())
    }
}

/// The program's zero point with every block projected onto its set.
fn projected_origin(prog: &MultiConvexProgram) -> Result<PrimalDualPoint, CliError> {
    let mut w = prog.zero_point();
    w.z = prog.project_blocks(&w.z)?;
    Ok(w)
}

fn perturbed(w: &PrimalDualPoint, half_width: f64, seed: u64) -> Result<PrimalDualPoint, CliError> {
    if half_width == 0.0 {
        return Ok(w.clone());
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(CliError::Usage(format!("--perturb must be nonnegative, got {half_width}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |v: &DVector<f64>| v.map(|x| x + rng.random_range(-half_width..=half_width));
    let z = BlockVector::new(w.z.layout().clone(), noise(w.z.data()))?;
    let mu = noise(&w.mu);
    Ok(PrimalDualPoint::new(z, mu))
}

pub fn track(a: &TrackArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut out = OutputDir::create(&a.out.out)?;
    let oracle = OracleOptions {
        tol: a.tol,
        ..OracleOptions::default()
    };
    let base = json!({
        "rho": a.rho, "M": a.m, "alpha": a.alpha, "path": a.path.to_string(),
        "warm_scale": a.warm_scale, "perturb": a.perturb, "timing": a.out.timing,
    });
    let tolerances = json!({ "warm_start_tol": a.tol });
    match resolve(&a.source, Builtin::DcMotor)? {
        Source::DcMotor => {
            let setup = motor_setup(&a.time)?;
            let cfg = TrackerConfig::new(a.rho, a.m, MOTOR_BLOCKS).with_alpha(a.alpha).with_path(a.path);
            let motor_oracle = OracleOptions {
                tol: a.tol,
                ..oracle_options()
            };
            let w0 = initial_solution(&setup, &motor_oracle).map_err(|e| at_step(0, e))?;
            let trace = run_closed_loop(&setup.spec, &cfg, &setup.x0, &setup.references, setup.dt, w0.scaled(a.warm_scale))?;
            out.write_csv("trace.csv", |b| trace.write_csv(b, a.out.timing))?;
            let mut config = base;
            config["dt"] = json!(setup.dt);
            config["steps"] = json!(setup.steps());
            config["horizon"] = json!(setup.spec.horizon);
            config["oracle"] = serde_json::to_value(&motor_oracle).expect("serializes");
            out.finish(Manifest {
                command: "track".into(),
                argv,
                program: motor_record(&setup),
                config,
                seed: a.seed,
                tolerances,
                results: trace_summary(&trace),
            })?;
            first_failure(&trace)
        }
        Source::Program { prog, label, is_toy } => {
            let steps = a.time.steps.unwrap_or(100);
            let params = schedule(&a.schedule, &prog, is_toy, steps, 0.0)?;
            let cfg = TrackerConfig::new(a.rho, a.m, prog.num_blocks()).with_alpha(a.alpha).with_path(a.path);
            let w0 = solve_to_convergence(&prog, &projected_origin(&prog)?, &params[0], &oracle)
                .map_err(|e| at_step(0, e))?
                .point;
            let warm = perturbed(&w0.scaled(a.warm_scale), a.perturb, a.seed)?;
            let mut state = TrackerState::new(&prog, cfg, warm)?;
            let mut trace = ProgramTrace::new(&prog);
            let mut sweeps = vec![optrack::StepReport::CSV_HEADER.to_string()];
            let mut failure = None;
            for (k, s) in params.iter().enumerate() {
                match state.advance(&prog, s) {
                    Ok(report) => {
                        trace.push(k, report.feasibility, report.kkt_residual, s, &report.point);
                        sweeps.extend(report.csv_rows(k));
                    }
                    Err(e) => {
                        failure = Some(at_step(k, e));
                        break;
                    }
                }
            }
            out.write_csv("trace.csv", |b| trace.write(b))?;
            if a.sweeps {
                out.write("sweeps.csv", (sweeps.join("\n") + "\n").as_bytes())?;
            }
            let mut config = base;
            config["steps"] = json!(params.len());
            config["params"] = json!(a.schedule.params.as_ref().map(|p| p.display().to_string()));
            config["s0"] = json!(params[0].as_slice());
            out.finish(Manifest {
                command: "track".into(),
                argv,
                program: program_record(&label, &prog)?,
                config,
                seed: a.seed,
                tolerances,
                results: json!({ "steps_completed": trace.rows.len() }),
            })?;
            match failure {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
    }
}

pub fn oracle(a: &OracleArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut out = OutputDir::create(&a.out.out)?;
    let source = resolve(&a.source, Builtin::DcMotor)?;
    let mut opts = match source {
        Source::DcMotor => oracle_options(),
        Source::Program { .. } => OracleOptions::default(),
    };
    opts.tol = a.tol;
    opts.newton = !a.no_newton;
    if let Some(r) = a.rho {
        opts.rho = r;
    }
    if let Some(m) = a.max_outer {
        opts.max_outer = m;
    }
    if let Some(r) = a.restarts {
        opts.restarts = r;
    }
    let tolerances = json!({ "tol": a.tol });
    let config = serde_json::to_value(&opts).expect("serializes");
    match source {
        Source::DcMotor => {
            let setup = motor_setup(&a.time)?;
            let trace = run_oracle_loop(&setup.spec, &setup.x0, &setup.references, setup.dt, &opts, None)?;
            out.write_csv("trace.csv", |b| trace.write_csv(b, a.out.timing))?;
            let mut config = config;
            config["dt"] = json!(setup.dt);
            config["steps"] = json!(setup.steps());
            config["horizon"] = json!(setup.spec.horizon);
            let mut results = trace_summary(&trace);
            results["max_kkt_residual"] = json!(trace.rows.iter().map(|r| r.kkt_residual).fold(0.0, f64::max));
            out.finish(Manifest {
                command: "oracle".into(),
                argv,
                program: motor_record(&setup),
                config,
                seed: a.seed,
                tolerances,
                results,
            })?;
            Ok(())
        }
        Source::Program { prog, label, is_toy } => {
            let steps = a.time.steps.unwrap_or(100);
            let params = schedule(&a.schedule, &prog, is_toy, steps, 0.0)?;
            let mut w = projected_origin(&prog)?;
            let mut trace = ProgramTrace::new(&prog);
            let mut failure = None;
            let mut outer = Vec::new();
            for (k, s) in params.iter().enumerate() {
                match solve_to_convergence(&prog, &w, s, &opts) {
                    Ok(sol) => {
                        let feas = prog.evaluate_constraint(&sol.point.z, s)?.norm();
                        trace.push(k, feas, sol.residual, s, &sol.point);
                        outer.push(sol.outer_iterations);
                        w = sol.point;
                    }
                    Err(e) => {
                        failure = Some(at_step(k, e));
                        break;
                    }
                }
            }
            out.write_csv("trace.csv", |b| trace.write(b))?;
            out.finish(Manifest {
                command: "oracle".into(),
                argv,
                program: program_record(&label, &prog)?,
                config,
                seed: a.seed,
                tolerances,
                results: json!({ "steps_completed": trace.rows.len(), "outer_iterations": outer }),
            })?;
            match failure {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
    }
}

pub fn dt_sweep(a: &DtSweepArgs, argv: Vec<String>) -> Result<(), CliError> {
    let dts = parse_f64_grid(&a.dt).map_err(|e| usage("--dt", e))?;
    let opts = DtSweepOptions {
        budget: a.budget,
        dts,
        duration: a.duration,
        rho: a.rho,
        alpha: a.alpha,
        path: a.path,
        warm_scale: a.warm_scale,
        oracle: OracleOptions {
            tol: a.tol,
            ..oracle_options()
        },
        metric: a.metric.into(),
    };
    let mut out = OutputDir::create(&a.out.out)?;
    let cells = diagnostics::dt_sweep(dc_motor_setup, &opts)?;
    out.write_csv("dt_sweep.csv", |b| diagnostics::write_dt_sweep_csv(b, &cells))?;
    let errors: Vec<f64> = cells.iter().filter_map(|c| c.nl2_error).collect();
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let last = cells.last().and_then(|c| c.nl2_error);
    let setup = motor_setup_for(opts.dts[0], opts.duration, None)?;
    out.finish(Manifest {
        command: "experiment dt-sweep".into(),
        argv,
        program: motor_record(&setup),
        config: serde_json::to_value(&opts).expect("serializes"),
        seed: a.seed,
        tolerances: json!({ "oracle_tol": a.tol }),
        results: json!({
            "min_error": finite(min),
            "error_at_largest_dt": last.map(finite),
            "ratio_largest_to_min": last.map(|l| finite(l / min)),
            "notes": cells.iter().filter_map(|c| c.note.as_ref().map(|n| json!({"dt": c.dt, "note": n}))).collect::<Vec<_>>(),
        }),
    })?;
    Ok(())
}

pub fn rate(a: &RateArgs, argv: Vec<String>) -> Result<(), CliError> {
    let ms = parse_usize_grid(&a.m).map_err(|e| usage("--M", e))?;
    let mut out = OutputDir::create(&a.out.out)?;
    let (prog, record, s_default, z_default) = match resolve(&a.source, Builtin::Toy)? {
        Source::DcMotor => {
            let setup = motor_setup_for(a.dt, a.dt, None)?;
            let prog = build_nmpc_program(&setup.spec.with_reference(setup.references[0].clone()))?;
            let guess = setup.spec.initial_guess(&prog, &setup.x0);
            (prog, motor_record(&setup), setup.x0.clone(), guess.z)
        }
        Source::Program { prog, label, is_toy } => {
            let record = program_record(&label, &prog)?;
            let s = DVector::from_element(prog.param_dim(), if is_toy { 1.0 } else { 0.0 });
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let z = random_set_point(&mut rng, &prog, 1.0).z;
            (prog, record, s, z)
        }
    };
    let s = match &a.s {
        Some(t) => vector_flag("s", t, prog.param_dim())?,
        None => s_default,
    };
    let mu = match &a.mu {
        Some(t) => vector_flag("mu", t, prog.num_constraints())?,
        None => DVector::zeros(prog.num_constraints()),
    };
    let z0 = match &a.z0 {
        Some(t) => BlockVector::new(prog.layout().clone(), vector_flag("z0", t, prog.layout().total())?)?,
        None => z_default,
    };
    let cfg = TrackerConfig::new(a.rho, 1, prog.num_blocks()).with_alpha(a.alpha);
    let fit = rate_experiment(&prog, &z0, &mu, &s, &cfg, &ms)?;
    out.write_csv("rate.csv", |b| diagnostics::write_rate_csv(b, &fit))?;
    out.finish(Manifest {
        command: "experiment rate".into(),
        argv,
        program: record,
        config: json!({
            "M": ms, "rho": a.rho, "alpha": a.alpha, "path": "direct",
            "s": s.as_slice(), "mu": mu.as_slice(), "z0": z0.data().as_slice(),
        }),
        seed: a.seed,
        tolerances: json!({ "limit_step_tol": 1e-13 }),
        results: json!({ "psi_hat": finite(fit.psi_hat), "c_hat": finite(fit.c_hat), "errors": fit.errors }),
    })?;
    Ok(())
}

pub fn contraction(a: &ContractionArgs, argv: Vec<String>) -> Result<(), CliError> {
    let rho_grid = parse_f64_grid(&a.rho).map_err(|e| usage("--rho", e))?;
    let m_grid = parse_usize_grid(&a.m).map_err(|e| usage("--M", e))?;
    let Source::Program { prog, label, is_toy } = resolve(&a.source, Builtin::Toy)? else {
        return Err(CliError::Usage(
            "contraction needs a program source (--builtin toy or --program)".into(),
        ));
    };
    let mut out = OutputDir::create(&a.out.out)?;
    let params = schedule(&a.schedule, &prog, is_toy, a.steps, 0.01)?;
    let opts = ContractionOptions {
        rho_grid,
        m_grid,
        alpha: a.alpha,
        path: a.path,
        oracle: OracleOptions {
            tol: a.tol,
            ..OracleOptions::default()
        },
    };
    let start = solve_to_convergence(&prog, &projected_origin(&prog)?, &params[0], &opts.oracle)
        .map_err(|e| at_step(0, e))?
        .point;
    let cells = contraction_probe(&prog, &params, &start.scaled(a.warm_scale), &start, &opts)?;
    out.write_csv("contraction.csv", |b| diagnostics::write_contraction_csv(b, &cells))?;
    let mut config = serde_json::to_value(&opts).expect("serializes");
    config["steps"] = json!(params.len());
    config["warm_scale"] = json!(a.warm_scale);
    config["s0"] = json!(params[0].as_slice());
    config["params"] = json!(a.schedule.params.as_ref().map(|p| p.display().to_string()));
    out.finish(Manifest {
        command: "experiment contraction".into(),
        argv,
        program: program_record(&label, &prog)?,
        config,
        seed: a.seed,
        tolerances: json!({ "oracle_tol": a.tol }),
        results: json!({
            "notes": cells.iter().filter_map(|c| c.note.as_ref().map(|n| json!({"rho": c.rho, "M": c.m, "note": n}))).collect::<Vec<_>>(),
        }),
    })?;
    Ok(())
}

pub fn compare(a: &CompareArgs, argv: Vec<String>) -> Result<(), CliError> {
    let setup = motor_setup_for(a.dt, a.duration, a.horizon)?;
    let mut out = OutputDir::create(&a.out.out)?;
    let cfg = TrackerConfig::new(a.rho, a.m, MOTOR_BLOCKS).with_alpha(a.alpha).with_path(a.path);
    let opts = OracleOptions {
        tol: a.tol,
        ..oracle_options()
    };
    let cmp = compare_closed_loop(&setup, &cfg, &opts, a.warm_scale, a.metric.into())?;
    out.write_csv("compare.csv", |b| cmp.write_csv(b))?;
    out.write_csv("tracked_trace.csv", |b| cmp.tracked.write_csv(b, a.out.timing))?;
    out.write_csv("oracle_trace.csv", |b| cmp.oracle.write_csv(b, a.out.timing))?;
    let full = trajectory_error(&cmp.tracked, &cmp.oracle, TrajectoryMetric::FullState)?;
    let mut config = serde_json::to_value(&cfg).expect("serializes");
    config["dt"] = json!(a.dt);
    config["duration"] = json!(a.duration);
    config["steps"] = json!(setup.steps());
    config["horizon"] = json!(setup.spec.horizon);
    config["warm_scale"] = json!(a.warm_scale);
    config["metric"] = serde_json::to_value(TrajectoryMetric::from(a.metric)).expect("serializes");
    config["oracle"] = serde_json::to_value(&opts).expect("serializes");
    out.finish(Manifest {
        command: "experiment compare".into(),
        argv,
        program: motor_record(&setup),
        config,
        seed: a.seed,
        tolerances: json!({ "oracle_tol": a.tol }),
        results: json!({
            "nl2_error": cmp.nl2_error,
            "nl2_error_full_state": full,
            "tracked": trace_summary(&cmp.tracked),
            "oracle": trace_summary(&cmp.oracle),
        }),
    })?;
    first_failure(&cmp.tracked)
}
