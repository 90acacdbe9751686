//! Euler-discretized separately excited DC motor: state (armature current,
//! angular speed), input the field voltage multiplying the state.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BilinearModel, ClosedLoopSetup, NmpcSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcMotorParameters {
    /// Armature inductance (H).
    pub la: f64,
    /// Armature resistance (Ohm).
    pub ra: f64,
    /// Motor constant (Nm/A^2).
    pub km: f64,
    /// Rotor inertia.
    pub j: f64,
    /// Viscous friction.
    pub b: f64,
    /// Load torque (Nm).
    pub tau_l: f64,
    /// Armature voltage (V).
    pub ua: f64,
}

impl Default for DcMotorParameters {
    fn default() -> Self {
        Self {
            la: 0.307,
            ra: 12.548,
            km: 0.22567,
            j: 0.00385,
            b: 0.00783,
            tau_l: 1.47,
            ua: 60.0,
        }
    }
}

/// The motor at sampling period `dt` in `(0, 0.1]`, with state bounds
/// `[(-2, -8), (5, 1.5)]` and input bounds `[1.27, 1.4]`.
pub fn dc_motor_model(dt: f64) -> Result<BilinearModel> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(Error::InvalidArgument(format!("sampling period must lie in (0, 0.1], got {dt}")));
    }
    let p = DcMotorParameters::default();
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 - p.ra * dt / p.la, 1.0 - p.b * dt / p.j]));
    let bd = DMatrix::from_row_slice(2, 2, &[0.0, -p.km * dt / p.la, p.km * dt / p.j, 0.0]);
    let c = DVector::from_vec(vec![dt * p.ua / p.la, -dt * p.tau_l / p.j]);
    Ok(BilinearModel {
        a,
        b: DMatrix::zeros(2, 1),
        n: vec![bd],
        c,
        x_lower: DVector::from_vec(vec![-2.0, -8.0]),
        x_upper: DVector::from_vec(vec![5.0, 1.5]),
        u_lower: DVector::from_element(1, 1.27),
        u_upper: DVector::from_element(1, 1.4),
    })
}

/// About 0.26 s of preview: 26 steps at 0.01 s, 10 at 0.026 s.
pub fn default_horizon(dt: f64) -> usize {
    ((0.26 / dt).round() as usize).max(1)
}

/// Speed tracking: `Q = Q_f = diag(0, 1)`, `R = 0.1`, terminal box equal to
/// the state box, reference speed `speed_ref`.
pub fn dc_motor_spec(dt: f64, horizon: usize, speed_ref: f64) -> Result<NmpcSpec> {
    let model = dc_motor_model(dt)?;
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]));
    let spec = NmpcSpec {
        terminal_lower: model.x_lower.clone(),
        terminal_upper: model.x_upper.clone(),
        model,
        horizon,
        q_f: q.clone(),
        q,
        r: DMatrix::from_element(1, 1, 0.1),
        reference: DVector::from_vec(vec![0.0, speed_ref]),
        output: 1,
    };
    spec.validate()?;
    Ok(spec)
}

/// Square wave of the given amplitude starting positive, switching sign
/// every `half_period` seconds, sampled at `k dt` for `k < steps`.
pub fn square_wave(amplitude: f64, half_period: f64, dt: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|k| {
            // the small shift keeps k dt = half_period on the new level
            let phase = ((k as f64 * dt + 1e-9) / half_period).floor() as i64;
            if phase % 2 == 0 {
                amplitude
            } else {
                -amplitude
            }
        })
        .collect()
}

/// Steady state `(x, u)` of the motor with angular speed `speed`, found by
/// bisection on the input over `[0.5, 3]`. Independent of the sampling
/// period.
pub fn dc_motor_equilibrium(speed: f64) -> Result<(DVector<f64>, f64)> {
    let model = dc_motor_model(0.01)?;
    let steady = |u: f64| -> Option<DVector<f64>> {
        let u = DVector::from_element(1, u);
        let m = DMatrix::identity(2, 2) - model.state_matrix(&u);
        m.lu().solve(&model.c)
    };
    let (mut lo, mut hi) = (0.5, 3.0);
    let speed_at = |u: f64| steady(u).map_or(f64::NAN, |x| x[1]);
    if !(speed_at(lo) <= speed && speed <= speed_at(hi)) {
        return Err(Error::InvalidArgument(format!("no steady state with speed {speed}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if speed_at(mid) < speed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    Ok((steady(u).expect("bracketed"), u))
}

/// The benchmark scenario: speed reference switching between +2 and -2
/// every second, starting at rest (the zero-speed steady state), with the
/// default horizon.
pub fn dc_motor_setup(dt: f64, duration: f64) -> Result<ClosedLoopSetup> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let spec = dc_motor_spec(dt, default_horizon(dt), 2.0)?;
    let steps = ((duration / dt).round() as usize).max(1);
    let references = square_wave(2.0, 1.0, dt, steps)
        .into_iter()
        .map(|r| DVector::from_vec(vec![0.0, r]))
        .collect();
    Ok(ClosedLoopSetup {
        spec,
        x0: dc_motor_equilibrium(0.0)?.0,
        references,
        dt,
    })
}
