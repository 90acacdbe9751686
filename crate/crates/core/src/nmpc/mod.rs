//! NMPC for constrained bilinear models.
//!
//! The horizon program has two blocks, all predicted states and all inputs,
//! so that the dynamics are bilinear across the blocks and affine within
//! each. The measured state enters through the parameter: the state block
//! starts with a copy `x_0` of it, pinned by the rows `x_0 - s = 0`. Putting
//! `s` directly into the dynamics of the first stage would make the
//! constraint bilinear in `(u_0, s)`.

mod closed_loop;
mod motor;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{BlockLayout, BlockVector, PrimalDualPoint};
use crate::program::{BilinearConstraint, ConstraintRow, MultiConvexProgram, QuadraticObjective};
use crate::sets::ConvexSet;
use crate::solver::OracleOptions;

pub use closed_loop::{run_closed_loop, run_oracle_loop, ClosedLoopTrace, TraceRow};
pub use motor::{
    dc_motor_equilibrium, dc_motor_model, dc_motor_setup, dc_motor_spec, default_horizon, square_wave, DcMotorParameters,
};

/// `x+ = A x + B u + sum_i u[i] N_i x + c` with box bounds on states and
/// inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub n: Vec<DMatrix<f64>>,
    pub c: DVector<f64>,
    pub x_lower: DVector<f64>,
    pub x_upper: DVector<f64>,
    pub u_lower: DVector<f64>,
    pub u_upper: DVector<f64>,
}

impl BilinearModel {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nu) = (self.state_dim(), self.input_dim());
        let square = |m: &DMatrix<f64>, what: &str| -> Result<()> {
            if m.nrows() != nx || m.ncols() != nx {
                return Err(Error::InvalidArgument(format!(
                    "{what} must be {nx}x{nx}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Ok(())
        };
        square(&self.a, "A")?;
        if self.b.nrows() != nx {
            return Err(Error::dim("rows of B", nx, self.b.nrows()));
        }
        if self.n.len() != nu {
            return Err(Error::dim("number of N matrices", nu, self.n.len()));
        }
        for (i, m) in self.n.iter().enumerate() {
            square(m, &format!("N[{i}]"))?;
        }
        for (v, len, what) in [
            (&self.c, nx, "c"),
            (&self.x_lower, nx, "x_lower"),
            (&self.x_upper, nx, "x_upper"),
            (&self.u_lower, nu, "u_lower"),
            (&self.u_upper, nu, "u_upper"),
        ] {
            if v.len() != len {
                return Err(Error::dim(what, len, v.len()));
            }
        }
        ConvexSet::boxed(self.x_lower.iter().copied().collect(), self.x_upper.iter().copied().collect())?;
        ConvexSet::boxed(self.u_lower.iter().copied().collect(), self.u_upper.iter().copied().collect())?;
        Ok(())
    }

    /// `A + sum_i u[i] N_i`, the state matrix at a frozen input.
    pub fn state_matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let mut a = self.a.clone();
        for (i, m) in self.n.iter().enumerate() {
            a += m * u[i];
        }
        a
    }
}

/// One step of the plant. Bounds are not enforced.
pub fn simulate_plant(model: &BilinearModel, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != model.state_dim() {
        return Err(Error::dim("state", model.state_dim(), x.len()));
    }
    if u.len() != model.input_dim() {
        return Err(Error::dim("input", model.input_dim(), u.len()));
    }
    Ok(model.state_matrix(u) * x + &model.b * u + &model.c)
}

/// Horizon, weights and terminal box of the NMPC problem. The stage cost is
/// `(x - r)'Q(x - r) + u'Ru`, the terminal cost `(x_N - r)'Q_f(x_N - r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmpcSpec {
    pub model: BilinearModel,
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_f: DMatrix<f64>,
    pub terminal_lower: DVector<f64>,
    pub terminal_upper: DVector<f64>,
    /// Reference, held constant over the horizon.
    pub reference: DVector<f64>,
    /// State component reported as `ref` in traces and used by the speed
    /// error metric.
    pub output: usize,
}

impl NmpcSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let (nx, nu) = (self.model.state_dim(), self.model.input_dim());
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        for (m, dim, what) in [(&self.q, nx, "Q"), (&self.q_f, nx, "Q_f"), (&self.r, nu, "R")] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::InvalidArgument(format!("{what} must be {dim}x{dim}")));
            }
            if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
            }
            let min = m.clone().symmetric_eigen().eigenvalues.min();
            let ok = if what == "R" { min > 0.0 } else { min >= -1e-10 * m.amax().max(1.0) };
            if !ok {
                let kind = if what == "R" { "positive definite" } else { "positive semidefinite" };
                return Err(Error::InvalidArgument(format!("{what} is not {kind} (eigenvalue {min:e})")));
            }
        }
        for (v, what) in [
            (&self.terminal_lower, "terminal_lower"),
            (&self.terminal_upper, "terminal_upper"),
            (&self.reference, "reference"),
        ] {
            if v.len() != nx {
                return Err(Error::dim(what, nx, v.len()));
            }
        }
        if self.output >= nx {
            return Err(Error::InvalidArgument(format!("output index {} out of range", self.output)));
        }
        Ok(())
    }

    pub fn with_reference(&self, reference: DVector<f64>) -> Self {
        Self {
            reference,
            ..self.clone()
        }
    }

    /// Offset of `x_l` in the state block.
    pub fn state_offset(&self, l: usize) -> usize {
        l * self.model.state_dim()
    }

    /// Offset of `u_l` in the input block.
    pub fn input_offset(&self, l: usize) -> usize {
        l * self.model.input_dim()
    }

    /// First input `u_0` of a horizon solution.
    pub fn first_input(&self, z: &BlockVector) -> DVector<f64> {
        z.block(1).rows(0, self.model.input_dim()).into_owned()
    }

    /// Horizon point with every state at `x0`, every input at the centre of
    /// its box and zero multipliers.
    pub fn initial_guess(&self, prog: &MultiConvexProgram, x0: &DVector<f64>) -> PrimalDualPoint {
        let mut w = prog.zero_point();
        let (nx, nu) = (self.model.state_dim(), self.model.input_dim());
        let mid = (&self.model.u_lower + &self.model.u_upper) * 0.5;
        let mut xs = w.z.block_mut(0);
        for l in 0..=self.horizon {
            xs.rows_mut(l * nx, nx).copy_from(x0);
        }
        let mut us = w.z.block_mut(1);
        for l in 0..self.horizon {
            us.rows_mut(l * nu, nu).copy_from(&mid);
        }
        w
    }
}

/// A closed-loop scenario: the NMPC problem, the initial plant state and one
/// reference per sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSetup {
    pub spec: NmpcSpec,
    pub x0: DVector<f64>,
    pub references: Vec<DVector<f64>>,
    pub dt: f64,
}

impl ClosedLoopSetup {
    pub fn steps(&self) -> usize {
        self.references.len()
    }
}

/// Reference-solver settings for horizon programs. At small penalties the
/// inner loop can settle at points that reach a state bound one stage early
/// by violating the dynamics slightly, and the dual updates undo that only
/// very slowly; from 1e4 on a few outer iterations bring the Newton phase
/// into range. Failed attempts are retried at 1e5 and 1e6.
pub fn oracle_options() -> OracleOptions {
    OracleOptions {
        rho: 1e4,
        max_outer: 100,
        restarts: 2,
        ..OracleOptions::default()
    }
}

/// Blocks: states `(x_0, .., x_N)` and inputs `(u_0, .., u_{N-1})`. Rows:
/// `x_0 - s = 0`, then the dynamics
/// `x_{l+1} - A x_l - B u_l - sum_i u_l[i] N_i x_l - c = 0` for each stage.
/// `x_0` is unbounded, `x_1..x_N` lie in the state box and `x_N` also in the
/// terminal box.
pub fn build_nmpc_program(spec: &NmpcSpec) -> Result<MultiConvexProgram> {
    spec.validate()?;
    let model = &spec.model;
    let (nx, nu, hz) = (model.state_dim(), model.input_dim(), spec.horizon);
    let nxs = nx * (hz + 1);
    let nus = nu * hz;
    let layout = BlockLayout::new(vec![nxs, nus])?;

    let mut rows = Vec::with_capacity(nxs);
    for j in 0..nx {
        let mut row = ConstraintRow::new(nx);
        row.add_linear(0, j, 1.0).set_param(j, -1.0);
        rows.push(row);
    }
    for l in 0..hz {
        let (xl, xn, ul) = (spec.state_offset(l), spec.state_offset(l + 1), spec.input_offset(l));
        for r in 0..nx {
            let mut row = ConstraintRow::new(nx);
            row.add_linear(0, xn + r, 1.0);
            for c in 0..nx {
                if model.a[(r, c)] != 0.0 {
                    row.add_linear(0, xl + c, -model.a[(r, c)]);
                }
            }
            for k in 0..nu {
                if model.b[(r, k)] != 0.0 {
                    row.add_linear(1, ul + k, -model.b[(r, k)]);
                }
                for c in 0..nx {
                    let v = model.n[k][(r, c)];
                    if v != 0.0 {
                        row.add_pair(0, xl + c, 1, ul + k, -v);
                    }
                }
            }
            row.set_offset(-model.c[r]);
            rows.push(row);
        }
    }

    let n = nxs + nus;
    let mut hessian = DMatrix::zeros(n, n);
    let mut linear = DVector::zeros(n);
    let mut constant = 0.0;
    for l in 0..=hz {
        let w = if l < hz { &spec.q } else { &spec.q_f };
        let off = spec.state_offset(l);
        hessian.view_mut((off, off), (nx, nx)).copy_from(&(w * 2.0));
        linear.rows_mut(off, nx).copy_from(&(w * &spec.reference * -2.0));
        constant += spec.reference.dot(&(w * &spec.reference));
    }
    for l in 0..hz {
        let off = nxs + spec.input_offset(l);
        hessian.view_mut((off, off), (nu, nu)).copy_from(&(&spec.r * 2.0));
    }
    let objective = QuadraticObjective::new(hessian, linear, constant);

    let state_box = ConvexSet::boxed(model.x_lower.iter().copied().collect(), model.x_upper.iter().copied().collect())?;
    let terminal = state_box
        .intersect_box(&ConvexSet::boxed(
            spec.terminal_lower.iter().copied().collect(),
            spec.terminal_upper.iter().copied().collect(),
        )?)
        .map_err(|e| Error::InvalidArgument(format!("terminal box does not meet the state box: {e}")))?;
    let (mut lower, mut upper) = (vec![f64::NEG_INFINITY; nx], vec![f64::INFINITY; nx]);
    for l in 1..=hz {
        let src = if l < hz { &state_box } else { &terminal };
        let ConvexSet::Box { lower: lo, upper: up } = src else { unreachable!() };
        lower.extend_from_slice(lo);
        upper.extend_from_slice(up);
    }
    let (mut ulo, mut uup) = (Vec::with_capacity(nus), Vec::with_capacity(nus));
    for _ in 0..hz {
        ulo.extend(model.u_lower.iter());
        uup.extend(model.u_upper.iter());
    }
    let sets = vec![ConvexSet::boxed(lower, upper)?, ConvexSet::boxed(ulo, uup)?];

    MultiConvexProgram::new(layout, objective, BilinearConstraint::new(rows, nx), sets)
}
