//! Resolution of program sources, parameter schedules and the DC-motor
//! scenario from the flags.

use std::fs;
use std::path::Path;

use optrack::diagnostics::linear_drift;
use optrack::fixtures::toy_program;
use optrack::format::{read_program, to_json};
use optrack::nalgebra::DVector;
use optrack::nmpc::{dc_motor_setup, dc_motor_spec, ClosedLoopSetup};
use optrack::MultiConvexProgram;
use serde_json::{json, Value};

use crate::args::{Builtin, ScheduleArgs, SourceArgs, TimeArgs};
use crate::grid::parse_vector;
use crate::output::sha256_hex;
use crate::CliError;

pub enum Source {
    DcMotor,
    Program {
        prog: MultiConvexProgram,
        label: String,
        is_toy: bool,
    },
}

pub fn resolve(args: &SourceArgs, default: Builtin) -> Result<Source, CliError> {
    if let Some(path) = &args.program {
        if !path.exists() {
            return Err(CliError::Io(format!("{}: program file not found", path.display())));
        }
        let prog = read_program(path)?;
        return Ok(Source::Program {
            prog,
            label: path.display().to_string(),
            is_toy: false,
        });
    }
    Ok(match args.builtin.unwrap_or(default) {
        Builtin::DcMotor => Source::DcMotor,
        Builtin::Toy => Source::Program {
            prog: toy_program(),
            label: "builtin:toy".into(),
            is_toy: true,
        },
    })
}

/// Manifest entry of a program source.
pub fn program_record(label: &str, prog: &MultiConvexProgram) -> Result<Value, CliError> {
    Ok(json!({ "source": label, "sha256": sha256_hex(to_json(prog)?.as_bytes()) }))
}

pub fn motor_record(setup: &ClosedLoopSetup) -> Value {
    let spec = serde_json::to_string(&setup.spec).expect("spec serializes");
    json!({ "source": "builtin:dc-motor", "sha256": sha256_hex(spec.as_bytes()) })
}

pub fn vector_flag(name: &str, text: &str, dim: usize) -> Result<DVector<f64>, CliError> {
    let v = parse_vector(text).map_err(|e| CliError::Usage(format!("--{name}: {e}")))?;
    if v.len() != dim {
        return Err(CliError::Usage(format!("--{name} needs {dim} entries, got {}", v.len())));
    }
    Ok(DVector::from_vec(v))
}

/// Reads one parameter vector per nonempty row. Lines starting with `#` are
/// comments and a first row that is not numeric is taken as a header.
pub fn read_params(path: &Path, dim: usize) -> Result<Vec<DVector<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_vector(line) {
            Ok(v) if v.len() == dim => rows.push(DVector::from_vec(v)),
            Ok(v) => {
                return Err(CliError::Usage(format!(
                    "{} line {}: expected {dim} values, got {}",
                    path.display(),
                    i + 1,
                    v.len()
                )))
            }
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(e) => return Err(CliError::Usage(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{}: no parameter rows", path.display())));
    }
    Ok(rows)
}

/// The parameter sequence: the CSV file, or the drift `s0 + k ds`.
pub fn schedule(
    args: &ScheduleArgs,
    prog: &MultiConvexProgram,
    is_toy: bool,
    steps: usize,
    default_ds: f64,
) -> Result<Vec<DVector<f64>>, CliError> {
    let p = prog.param_dim();
    if let Some(path) = &args.params {
        return read_params(path, p);
    }
    if steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    let s0 = match &args.s0 {
        Some(t) => vector_flag("s0", t, p)?,
        None if is_toy => DVector::from_element(p, 1.0),
        None => DVector::zeros(p),
    };
    let ds = match &args.ds {
        Some(t) => vector_flag("ds", t, p)?,
        None => DVector::from_element(p, default_ds),
    };
    Ok(linear_drift(&s0, &ds, steps)?)
}

/// The DC-motor scenario for `--dt`, `--steps` or `--duration`, `--horizon`.
pub fn motor_setup(time: &TimeArgs) -> Result<ClosedLoopSetup, CliError> {
    let duration = match (time.steps, time.duration) {
        (Some(0), _) => return Err(CliError::Usage("--steps must be positive".into())),
        (Some(n), _) => n as f64 * time.dt,
        (None, Some(d)) => d,
        (None, None) => 4.0,
    };
    motor_setup_for(time.dt, duration, time.horizon)
}

pub fn motor_setup_for(dt: f64, duration: f64, horizon: Option<usize>) -> Result<ClosedLoopSetup, CliError> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(CliError::Usage(format!("--dt must lie in (0, 0.1], got {dt}")));
    }
    let mut setup = dc_motor_setup(dt, duration)?;
    if let Some(h) = horizon {
        setup.spec = dc_motor_spec(dt, h, 2.0)?;
    }
    Ok(setup)
}
