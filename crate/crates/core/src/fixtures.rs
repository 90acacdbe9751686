//! Reference instances shared by tests, benches and the experiment drivers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::layout::{BlockLayout, BlockVector, PrimalDualPoint};
use crate::program::{BilinearConstraint, ConstraintRow, MultiConvexProgram, QuadraticObjective};
use crate::sets::{project, ConvexSet};

/// `min (z1-1)^2 + (z2-1)^2  s.t.  z1 z2 = s,  z in [0,2]^2`.
pub fn toy_program() -> MultiConvexProgram {
    let layout = BlockLayout::new(vec![1, 1]).unwrap();
    let objective = QuadraticObjective::new(
        DMatrix::identity(2, 2) * 2.0,
        DVector::from_vec(vec![-2.0, -2.0]),
        2.0,
    );
    let mut row = ConstraintRow::new(1);
    row.add_pair(0, 0, 1, 0, 1.0).set_param(0, -1.0);
    let constraint = BilinearConstraint::new(vec![row], 1);
    let unit = || ConvexSet::boxed(vec![0.0], vec![2.0]).unwrap();
    MultiConvexProgram::new(layout, objective, constraint, vec![unit(), unit()]).unwrap()
}

/// Closed-form critical point of [`toy_program`] on the symmetric branch,
/// valid for `0 < s <= 4`: `z = (sqrt s, sqrt s)`, `mu = 2(1 - sqrt s)/sqrt s`.
pub fn toy_solution(s: f64) -> PrimalDualPoint {
    let r = s.sqrt();
    let z = BlockVector::from_blocks(&[DVector::from_element(1, r), DVector::from_element(1, r)]).unwrap();
    PrimalDualPoint::new(z, DVector::from_element(1, 2.0 * (1.0 - r) / r))
}

/// Shape of randomly generated instances.
#[derive(Debug, Clone)]
pub struct RandomProgramOptions {
    pub max_blocks: usize,
    pub max_block_size: usize,
    pub max_rows: usize,
    pub max_param_dim: usize,
    /// Magnitude of the bilinear coupling coefficients.
    pub bilinear_scale: f64,
    /// Magnitude of the off-diagonal Hessian blocks (breaks joint convexity).
    pub offdiag_scale: f64,
    /// Added to the Hessian diagonal.
    pub diagonal_shift: f64,
    /// Use Box/Ball/orthant sets; otherwise large boxes only.
    pub mixed_sets: bool,
}

impl Default for RandomProgramOptions {
    fn default() -> Self {
        Self {
            max_blocks: 3,
            max_block_size: 4,
            max_rows: 3,
            max_param_dim: 2,
            bilinear_scale: 1.0,
            offdiag_scale: 1.0,
            diagonal_shift: 0.0,
            mixed_sets: true,
        }
    }
}

/// A random instance together with a parameter value and a point that is
/// feasible for it.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub program: MultiConvexProgram,
    pub param: DVector<f64>,
    pub feasible: BlockVector,
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, opts: &RandomProgramOptions) -> RandomInstance {
    let p = rng.random_range(1..=opts.max_blocks);
    let sizes: Vec<usize> = (0..p).map(|_| rng.random_range(1..=opts.max_block_size)).collect();
    let layout = BlockLayout::new(sizes.clone()).unwrap();
    let n = layout.total();
    let pdim = rng.random_range(1..=opts.max_param_dim);
    let m = rng.random_range(0..=opts.max_rows.min(n));

    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut hessian = g.transpose() * g / n as f64 + DMatrix::identity(n, n) * opts.diagonal_shift;
    for a in 0..p {
        for b in (a + 1)..p {
            let (ra, rb) = (layout.range(a), layout.range(b));
            for r in ra.clone() {
                for c in rb.clone() {
                    let v = opts.offdiag_scale * rng.random_range(-1.0..1.0);
                    hessian[(r, c)] += v;
                    hessian[(c, r)] += v;
                }
            }
        }
    }
    let linear = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let objective = QuadraticObjective::new(hessian, linear, rng.random_range(-1.0..1.0));

    let sets: Vec<ConvexSet> = sizes
        .iter()
        .map(|&ni| {
            let kind = if opts.mixed_sets { rng.random_range(0..3) } else { 0 };
            match kind {
                0 => {
                    let (lo, hi) = if opts.mixed_sets { (0.5..3.0, 0.5..3.0) } else { (4.0..6.0, 4.0..6.0) };
                    let lower = (0..ni).map(|_| -rng.random_range(lo.clone())).collect();
                    let upper = (0..ni).map(|_| rng.random_range(hi.clone())).collect();
                    ConvexSet::boxed(lower, upper).unwrap()
                }
                1 => {
                    let center = (0..ni).map(|_| rng.random_range(-0.5..0.5)).collect();
                    ConvexSet::ball(center, rng.random_range(1.0..3.0)).unwrap()
                }
                _ => ConvexSet::NonnegativeOrthant { dim: ni },
            }
        })
        .collect();

    let mut feasible = BlockVector::zeros(layout.clone());
    for (i, set) in sets.iter().enumerate() {
        let raw = DVector::from_fn(sizes[i], |_, _| rng.random_range(-1.0..1.0));
        feasible.set_block(i, &project(set, &raw).unwrap());
    }
    let param = DVector::from_fn(pdim, |_, _| rng.random_range(-1.0..1.0));

    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row = ConstraintRow::new(pdim);
        for a in 0..p {
            for b in (a + 1)..p {
                if rng.random_bool(0.7) {
                    for r in 0..sizes[a] {
                        for c in 0..sizes[b] {
                            if rng.random_bool(0.6) {
                                row.add_pair(a, r, b, c, opts.bilinear_scale * rng.random_range(-1.0..1.0));
                            }
                        }
                    }
                }
            }
        }
        // always some linear part so rows are not degenerate
        for (i, &ni) in sizes.iter().enumerate() {
            if i == 0 || rng.random_bool(0.6) {
                for k in 0..ni {
                    row.add_linear(i, k, rng.random_range(-1.0..1.0));
                }
            }
        }
        for k in 0..pdim {
            row.set_param(k, rng.random_range(-1.0..1.0));
        }
        rows.push(row);
    }
    // choose offsets so that `feasible` satisfies g(feasible, param) = 0
    let probe = MultiConvexProgram::new(
        layout.clone(),
        objective.clone(),
        BilinearConstraint::new(rows.clone(), pdim),
        sets.clone(),
    )
    .unwrap();
    let g0 = probe.evaluate_constraint(&feasible, &param).unwrap();
    for (row, gj) in rows.iter_mut().zip(g0.iter()) {
        row.offset = -gj;
    }
    let program = MultiConvexProgram::new(layout, objective, BilinearConstraint::new(rows, pdim), sets).unwrap();
    RandomInstance {
        program,
        param,
        feasible,
    }
}

/// Random primal-dual point of matching dimensions.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, prog: &MultiConvexProgram, scale: f64) -> PrimalDualPoint {
    let n = prog.layout().total();
    let z = BlockVector::new(
        prog.layout().clone(),
        DVector::from_fn(n, |_, _| scale * rng.random_range(-1.0..1.0)),
    )
    .unwrap();
    let mu = DVector::from_fn(prog.num_constraints(), |_, _| scale * rng.random_range(-1.0..1.0));
    PrimalDualPoint::new(z, mu)
}

/// [`random_point`] with every block projected onto its set.
pub fn random_set_point<R: Rng + ?Sized>(rng: &mut R, prog: &MultiConvexProgram, scale: f64) -> PrimalDualPoint {
    let mut w = random_point(rng, prog, scale);
    for (i, set) in prog.sets().iter().enumerate() {
        let zi = project(set, &w.z.block(i).into_owned()).expect("block sizes match");
        w.z.set_block(i, &zi);
    }
    w
}
