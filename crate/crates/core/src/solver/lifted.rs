use nalgebra::{DMatrix, DVector};

use super::{block::tag_sweep, LiftedState, SolverPath, TrackerConfig, TrackerState};
use crate::error::{Error, Result};
use crate::layout::{BlockLayout, BlockVector};
use crate::linalg;
use crate::program::{BilinearConstraint, ConstraintRow, MultiConvexProgram, QuadraticObjective};
use crate::sets::{prox_weighted, ConvexSet};

/// The lifted program over blocks `(y_1..y_P, z_1..z_P)`: objective and
/// `g` act on `y`, consensus rows `y_i - z_i = 0` are appended after the
/// original rows, `y` is unconstrained and `z_i` keeps `Z_i`.
pub fn lift_program(prog: &MultiConvexProgram) -> MultiConvexProgram {
    let p = prog.num_blocks();
    let sizes = prog.layout().sizes();
    let n = prog.layout().total();
    let layout = BlockLayout::new(sizes.iter().chain(sizes).copied().collect()).expect("sizes already validated");

    let obj = prog.objective();
    let mut hessian = DMatrix::zeros(2 * n, 2 * n);
    hessian.view_mut((0, 0), (n, n)).copy_from(&obj.hessian);
    let mut linear = DVector::zeros(2 * n);
    linear.rows_mut(0, n).copy_from(&obj.linear);
    let objective = QuadraticObjective::new(hessian, linear, obj.constant);

    let pdim = prog.param_dim();
    let mut rows: Vec<ConstraintRow> = prog.constraint().rows().to_vec();
    for (i, &ni) in sizes.iter().enumerate() {
        for r in 0..ni {
            let mut row = ConstraintRow::new(pdim);
            row.add_linear(i, r, 1.0).add_linear(p + i, r, -1.0);
            rows.push(row);
        }
    }
    let constraint = BilinearConstraint::new(rows, pdim);

    let sets = sizes
        .iter()
        .map(|&ni| ConvexSet::WholeSpace { dim: ni })
        .chain(prog.sets().iter().cloned())
        .collect();
    MultiConvexProgram::new(layout, objective, constraint, sets).expect("lifting preserves validity")
}

/// One lifted cycle: for each block, an SPD solve in `y_i` followed by the
/// projection step in `z_i`. Returns the updated `(y, z)`.
pub fn lifted_cycle(
    prog: &MultiConvexProgram,
    state: &TrackerState,
    z: &BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
) -> Result<(BlockVector, BlockVector)> {
    if state.config.path != SolverPath::Lifted {
        return Err(Error::InvalidArgument("lifted_cycle needs the lifted path".into()));
    }
    let mut ls = state
        .lifted
        .clone()
        .ok_or_else(|| Error::InvalidArgument("lifted state is not initialized".into()))?;
    prog.check_z(z)?;
    prog.check_mu(mu)?;
    prog.check_s(s)?;
    let mut z = z.clone();
    cycle_at(prog, &state.config, &mut ls, &mut z, mu, s, 0)?;
    Ok((ls.y, z))
}

pub(crate) fn cycle_at(
    prog: &MultiConvexProgram,
    cfg: &TrackerConfig,
    ls: &mut LiftedState,
    z: &mut BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
    sweep_index: usize,
) -> Result<()> {
    let rho = cfg.rho;
    for i in 0..prog.num_blocks() {
        let alpha = cfg.alpha[i];
        let y_prev = ls.y.block(i).into_owned();
        let z_prev = z.block(i).into_owned();
        let ni = y_prev.len();

        let (hess, lin, _) = prog.block_quadratic_objective(i, &ls.y)?;
        let (e_mat, e) = prog.block_affine_constraint(i, &ls.y, s)?;
        let k = hess + linalg::gram(&e_mat) * rho + DMatrix::identity(ni, ni) * (rho + alpha);
        let q = lin + e_mat.tr_mul(&(mu + &e * rho)) + &ls.nu[i] - &z_prev * rho - &y_prev * alpha;
        if !k.iter().chain(q.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                sweep: sweep_index,
                block: i,
            });
        }
        let yi = linalg::spd_solve(k, &-q, i).map_err(|e| tag_sweep(e, sweep_index))?;
        ls.y.set_block(i, &yi);

        let target = &yi + &ls.nu[i] / rho;
        let zi = prox_weighted(&prog.sets()[i], &z_prev, alpha, &target, rho)?;
        if !zi.iter().chain(yi.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                sweep: sweep_index,
                block: i,
            });
        }
        z.set_block(i, &zi);
    }
    Ok(())
}
