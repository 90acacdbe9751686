use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures::{random_instance, toy_program, toy_solution, RandomProgramOptions};
use crate::layout::BlockLayout;
use crate::program::{BilinearConstraint, ConstraintRow, QuadraticObjective};
use crate::sets::ConvexSet;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn toy_point(z1: f64, z2: f64, mu: f64) -> PrimalDualPoint {
    PrimalDualPoint::new(BlockVector::from_blocks(&[v(&[z1]), v(&[z2])]).unwrap(), v(&[mu]))
}

fn direct(prog: &MultiConvexProgram, rho: f64, sweeps: usize) -> TrackerConfig {
    TrackerConfig::new(rho, sweeps, prog.num_blocks()).with_path(SolverPath::Direct)
}

/// Block-i subproblem objective, evaluated independently of the solver.
fn subproblem_value(
    prog: &MultiConvexProgram,
    cfg: &TrackerConfig,
    i: usize,
    z: &BlockVector,
    mu: &DVector<f64>,
    s: &DVector<f64>,
    x: &DVector<f64>,
) -> f64 {
    let mut zz = z.clone();
    zz.set_block(i, x);
    prog.augmented_lagrangian(&zz, mu, s, cfg.rho).unwrap() + 0.5 * cfg.alpha[i] * (x - z.block(i)).norm_squared()
}

#[test]
fn whole_space_block_update_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = RandomProgramOptions::default();
    for _ in 0..30 {
        let inst = random_instance(&mut rng, &opts);
        let prog = &inst.program;
        let free_sets = prog.layout().sizes().iter().map(|&n| ConvexSet::WholeSpace { dim: n }).collect();
        let prog = MultiConvexProgram::new(
            prog.layout().clone(),
            prog.objective().clone(),
            prog.constraint().clone(),
            free_sets,
        )
        .unwrap();
        let cfg = direct(&prog, 2.0, 1).with_alpha(0.5);
        let state = TrackerState::new(&prog, cfg.clone(), prog.zero_point()).unwrap();
        let w = crate::fixtures::random_point(&mut rng, &prog, 1.0);
        for i in 0..prog.num_blocks() {
            let x = block_update(&prog, &state, i, &w.z, &w.mu, &inst.param).unwrap();
            let h = 1e-6;
            let mut grad = DVector::zeros(x.len());
            for k in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += h;
                xm[k] -= h;
                grad[k] = (subproblem_value(&prog, &cfg, i, &w.z, &w.mu, &inst.param, &xp)
                    - subproblem_value(&prog, &cfg, i, &w.z, &w.mu, &inst.param, &xm))
                    / (2.0 * h);
            }
            assert!(grad.norm() < 1e-8, "gradient norm {}", grad.norm());
        }
    }
}

#[test]
fn block_update_keeps_a_minimizer() {
    let prog = toy_program();
    let state = TrackerState::new(&prog, direct(&prog, 10.0, 1), toy_point(1.0, 1.0, 0.0)).unwrap();
    let w = toy_point(1.0, 1.0, 0.0);
    for i in 0..2 {
        let x = block_update(&prog, &state, i, &w.z, &w.mu, &v(&[1.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
    }
}

#[test]
fn one_dimensional_block_update_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        // 1-D block 0 coupled to a fixed block 1
        let layout = BlockLayout::new(vec![1, 1]).unwrap();
        let a = rng.random_range(0.0..2.0);
        let obj = QuadraticObjective::new(
            DMatrix::from_row_slice(2, 2, &[a, 0.3, 0.3, 1.0]),
            v(&[rng.random_range(-2.0..2.0), 0.0]),
            0.0,
        );
        let mut row = ConstraintRow::new(1);
        row.add_pair(0, 0, 1, 0, rng.random_range(-1.0..1.0))
            .add_linear(0, 0, rng.random_range(-1.0..1.0))
            .set_param(0, -1.0);
        let (lo, hi) = (-rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
        let sets = vec![ConvexSet::boxed(vec![lo], vec![hi]).unwrap(), ConvexSet::WholeSpace { dim: 1 }];
        let prog = MultiConvexProgram::new(layout, obj, BilinearConstraint::new(vec![row], 1), sets).unwrap();
        let cfg = direct(&prog, 3.0, 1).with_alpha(0.1);
        let state = TrackerState::new(&prog, cfg.clone(), prog.zero_point()).unwrap();
        let z = BlockVector::from_blocks(&[v(&[rng.random_range(lo..hi)]), v(&[rng.random_range(-2.0..2.0)])]).unwrap();
        let (mu, s) = (v(&[rng.random_range(-1.0..1.0)]), v(&[rng.random_range(-1.0..1.0)]));
        let x = block_update(&prog, &state, 0, &z, &mu, &s).unwrap()[0];
        let n = 1_000_000;
        let best = (0..=n)
            .map(|k| lo + (hi - lo) * k as f64 / n as f64)
            .min_by(|p, q| {
                let fp = subproblem_value(&prog, &cfg, 0, &z, &mu, &s, &v(&[*p]));
                let fq = subproblem_value(&prog, &cfg, 0, &z, &mu, &s, &v(&[*q]));
                fp.total_cmp(&fq)
            })
            .unwrap();
        assert!((x - best).abs() < 1e-6, "{x} vs {best}");
    }
}

#[test]
fn block_update_rejects_wrong_path_and_block() {
    let prog = toy_program();
    let lifted = TrackerState::new(&prog, TrackerConfig::new(1.0, 1, 2), prog.zero_point()).unwrap();
    let w = toy_point(0.5, 0.5, 0.0);
    assert!(block_update(&prog, &lifted, 0, &w.z, &w.mu, &v(&[1.0])).is_err());
    let state = TrackerState::new(&prog, direct(&prog, 1.0, 1), prog.zero_point()).unwrap();
    assert!(matches!(
        block_update(&prog, &state, 2, &w.z, &w.mu, &v(&[1.0])),
        Err(Error::InvalidBlock { .. })
    ));
}

#[test]
fn sweep_fixed_point_and_single_block() {
    let prog = toy_program();
    let w = toy_solution(1.21);
    let state = TrackerState::new(&prog, direct(&prog, 10.0, 1), w.clone()).unwrap();
    let z = sweep(&prog, &state, &w.z, &w.mu, &v(&[1.21])).unwrap();
    assert!((z.data() - w.z.data()).amax() < 1e-10);

    let layout = BlockLayout::new(vec![2]).unwrap();
    let obj = QuadraticObjective::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), v(&[1.0, -1.0]), 0.0);
    let single = MultiConvexProgram::new(
        layout,
        obj,
        BilinearConstraint::empty(1),
        vec![ConvexSet::ball(vec![0.0, 0.0], 0.3).unwrap()],
    )
    .unwrap();
    let state = TrackerState::new(&single, direct(&single, 1.0, 1), single.zero_point()).unwrap();
    let z0 = BlockVector::from_blocks(&[v(&[0.1, 0.1])]).unwrap();
    let swept = sweep(&single, &state, &z0, &DVector::zeros(0), &v(&[0.0])).unwrap();
    let upd = block_update(&single, &state, 0, &z0, &DVector::zeros(0), &v(&[0.0])).unwrap();
    assert_eq!(swept.data(), &upd);
}

#[test]
fn toy_sweep_decreases_augmented_lagrangian() {
    let prog = toy_program();
    let cfg = direct(&prog, 5.0, 1).with_alpha(0.3);
    let state = TrackerState::new(&prog, cfg.clone(), prog.zero_point()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let z = BlockVector::from_blocks(&[v(&[rng.random_range(0.0..2.0)]), v(&[rng.random_range(0.0..2.0)])]).unwrap();
        let (mu, s) = (v(&[rng.random_range(-2.0..2.0)]), v(&[rng.random_range(0.2..2.0)]));
        let next = sweep(&prog, &state, &z, &mu, &s).unwrap();
        let before = prog.augmented_lagrangian(&z, &mu, &s, 5.0).unwrap();
        let after = prog.augmented_lagrangian(&next, &mu, &s, 5.0).unwrap();
        let margin: f64 = (0..2).map(|i| 0.5 * 0.3 * (next.block(i) - z.block(i)).norm_squared()).sum();
        assert!(after <= before - margin + 1e-10);
    }
}

#[test]
fn dual_update_arithmetic() {
    // g = 0.1 independent of z
    let layout = BlockLayout::new(vec![1]).unwrap();
    let mut row = ConstraintRow::new(1);
    row.set_offset(0.1);
    let obj = QuadraticObjective::new(DMatrix::from_element(1, 1, 1.0), v(&[0.0]), 0.0);
    let prog = MultiConvexProgram::new(layout, obj, BilinearConstraint::new(vec![row], 1), vec![ConvexSet::WholeSpace { dim: 1 }]).unwrap();
    for path in [SolverPath::Direct, SolverPath::Lifted] {
        let mut warm = prog.zero_point();
        warm.mu = v(&[1.0]);
        let state = TrackerState::new(&prog, TrackerConfig::new(10.0, 3, 1).with_path(path), warm).unwrap();
        let (next, report) = track_step(&prog, &state, &v(&[0.0])).unwrap();
        assert!((next.warm.mu[0] - 2.0).abs() < 1e-14, "{path}");
        assert_eq!(report.al_values.len(), 4);
    }

    // feasible after the sweeps: multiplier unchanged
    let prog = toy_program();
    let w = toy_solution(1.0);
    let state = TrackerState::new(&prog, direct(&prog, 10.0, 5), w.clone()).unwrap();
    let (next, report) = track_step(&prog, &state, &v(&[1.0])).unwrap();
    assert!(report.feasibility < 1e-14);
    assert_eq!(next.warm.mu, w.mu);
}

#[test]
fn dual_update_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let opts = RandomProgramOptions::default();
    for _ in 0..50 {
        let inst = random_instance(&mut rng, &opts);
        let prog = &inst.program;
        let w = crate::fixtures::random_point(&mut rng, prog, 1.0);
        let state = TrackerState::new(prog, direct(prog, 3.0, 2), w.clone()).unwrap();
        let (next, _) = track_step(prog, &state, &inst.param).unwrap();
        let g = prog.evaluate_constraint(&next.warm.z, &inst.param).unwrap();
        assert!((&next.warm.mu - &w.mu - g * 3.0).amax() <= 1e-14 * (1.0 + next.warm.mu.amax()));
    }
}

#[test]
fn iterates_stay_in_their_sets() {
    // Some random instances have an augmented Lagrangian unbounded below and
    // diverge; the invariant concerns the steps that succeed.
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let opts = RandomProgramOptions::default();
    let mut completed = 0;
    for _ in 0..100 {
        let inst = random_instance(&mut rng, &opts);
        let prog = &inst.program;
        let w = crate::fixtures::random_point(&mut rng, prog, 3.0);
        for path in [SolverPath::Direct, SolverPath::Lifted] {
            let cfg = TrackerConfig::new(2.0, 3, prog.num_blocks()).with_path(path);
            let mut state = TrackerState::new(prog, cfg, w.clone()).unwrap();
            for _ in 0..3 {
                let report = match state.advance(prog, &inst.param) {
                    Ok(r) => r,
                    Err(e) if e.is_numerical() => break,
                    Err(e) => panic!("{e}"),
                };
                for (i, set) in prog.sets().iter().enumerate() {
                    let zi = report.point.z.block(i).into_owned();
                    assert!(set.contains(&zi, 0.0), "{path}: {set:?} {zi}");
                }
                completed += 1;
            }
        }
    }
    assert!(completed > 500, "{completed}");
}

#[test]
fn toy_step_reduces_kkt_residual() {
    let prog = toy_program();
    let warm = solve_to_convergence(&prog, &toy_point(0.5, 0.5, 0.0), &v(&[1.0]), &OracleOptions::default())
        .unwrap()
        .point;
    let s_next = v(&[1.02]);
    let before = prog.kkt_residual(&warm, &s_next).unwrap();
    for path in [SolverPath::Direct, SolverPath::Lifted] {
        let state = TrackerState::new(&prog, TrackerConfig::new(10.0, 20, 2).with_path(path), warm.clone()).unwrap();
        let (_, report) = track_step(&prog, &state, &s_next).unwrap();
        assert!(report.kkt_residual < before, "{path}: {} vs {before}", report.kkt_residual);
        assert_eq!(report.sweep_kkt.len(), 21);
        assert_eq!(report.csv_rows(0).len(), 21);
    }
}

#[test]
fn warm_start_at_oracle_beats_random_feasible_starts() {
    let prog = toy_program();
    let (s_k, s_next) = (v(&[1.0]), v(&[1.02]));
    let oracle = solve_to_convergence(&prog, &toy_point(0.5, 0.5, 0.0), &s_k, &OracleOptions::default()).unwrap();
    let cfg = direct(&prog, 10.0, 20);
    let run = |w: PrimalDualPoint| {
        let state = TrackerState::new(&prog, cfg.clone(), w).unwrap();
        track_step(&prog, &state, &s_next).unwrap().1.kkt_residual
    };
    let from_oracle = run(oracle.point);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..10 {
        let z1 = rng.random_range(0.5..2.0);
        assert!(from_oracle <= run(toy_point(z1, 1.0 / z1, 0.0)));
    }
}

#[test]
fn track_step_reports_non_finite_sweep() {
    let prog = toy_program();
    let state = TrackerState::new(&prog, direct(&prog, 1.0, 2), prog.zero_point()).unwrap();
    let err = track_step(&prog, &state, &v(&[f64::NAN])).unwrap_err();
    assert!(matches!(err, Error::NonFinite { sweep: 0, .. }), "{err}");
}

#[test]
fn lifted_cycle_decoupled_limit() {
    // no constraints, mu = nu = 0, tiny alpha: y-step minimizes f over the block
    let layout = BlockLayout::new(vec![2, 1]).unwrap();
    let h = DMatrix::from_row_slice(3, 3, &[3.0, 0.5, 0.2, 0.5, 2.0, -0.4, 0.2, -0.4, 1.5]);
    let obj = QuadraticObjective::new(h.clone(), v(&[1.0, -1.0, 0.5]), 0.0);
    let sets = vec![ConvexSet::WholeSpace { dim: 2 }, ConvexSet::WholeSpace { dim: 1 }];
    let prog = MultiConvexProgram::new(layout, obj, BilinearConstraint::empty(1), sets).unwrap();
    let z = BlockVector::from_blocks(&[v(&[0.3, 0.1]), v(&[-0.2])]).unwrap();
    let cfg = TrackerConfig::new(1e-9, 1, 2).with_alpha(1e-12);
    let mut state = TrackerState::new(&prog, cfg, PrimalDualPoint::new(z.clone(), DVector::zeros(0))).unwrap();
    state.lifted.as_mut().unwrap().nu.iter_mut().for_each(|n| n.fill(0.0));
    let (y, _) = lifted_cycle(&prog, &state, &z, &DVector::zeros(0), &v(&[0.0])).unwrap();
    let lin = v(&[1.0, -1.0, 0.5]);
    // block 0 is stationary given the old block 1, block 1 given the new block 0
    let mut y_half = y.clone();
    y_half.set_block(1, &v(&[-0.2]));
    assert!((&h * y_half.data() + &lin).rows(0, 2).norm() < 1e-8);
    let grad = &h * y.data() + &lin;
    assert!(grad.rows(2, 1).norm() < 1e-8);
}

#[test]
fn lifted_z_step_consensus_fixed_point() {
    let prog = toy_program();
    let w = toy_solution(1.0);
    let state = TrackerState::new(&prog, TrackerConfig::new(10.0, 1, 2), w.clone()).unwrap();
    let (y, z) = lifted_cycle(&prog, &state, &w.z, &w.mu, &v(&[1.0])).unwrap();
    assert!((z.data() - w.z.data()).amax() < 1e-14);
    assert!((y.data() - w.z.data()).amax() < 1e-14);
}

#[test]
fn lifted_cycle_equals_direct_sweep_on_lifted_program() {
    let prog = toy_program();
    let lifted = lift_program(&prog);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let w = toy_point(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(-1.0..1.0));
        let s = v(&[rng.random_range(0.5..1.5)]);
        let cfg = TrackerConfig::new(rng.random_range(1.0..20.0), 1, 2).with_alpha(rng.random_range(1e-6..1.0));
        let mut state = TrackerState::new(&prog, cfg.clone(), w.clone()).unwrap();
        let ls = state.lifted.as_mut().unwrap();
        ls.y = BlockVector::from_blocks(&[v(&[rng.random_range(0.0..2.0)]), v(&[rng.random_range(0.0..2.0)])]).unwrap();
        ls.nu = vec![v(&[rng.random_range(-1.0..1.0)]), v(&[rng.random_range(-1.0..1.0)])];

        let mut stacked_z = BlockVector::zeros(lifted.layout().clone());
        stacked_z.data_mut().rows_mut(0, 2).copy_from(ls.y.data());
        stacked_z.data_mut().rows_mut(2, 2).copy_from(w.z.data());
        let mut stacked_mu = DVector::zeros(3);
        stacked_mu[0] = w.mu[0];
        stacked_mu[1] = ls.nu[0][0];
        stacked_mu[2] = ls.nu[1][0];

        let (y, z) = lifted_cycle(&prog, &state, &w.z, &w.mu, &s).unwrap();
        let lcfg = TrackerConfig {
            rho: cfg.rho,
            sweeps: 1,
            alpha: [cfg.alpha.clone(), cfg.alpha.clone()].concat(),
            path: SolverPath::Direct,
        };
        let lstate = TrackerState::new(&lifted, lcfg, PrimalDualPoint::new(stacked_z.clone(), stacked_mu.clone())).unwrap();
        let swept = sweep(&lifted, &lstate, &stacked_z, &stacked_mu, &s).unwrap();
        assert!((swept.data().rows(0, 2) - y.data()).amax() < 1e-12);
        assert!((swept.data().rows(2, 2) - z.data()).amax() < 1e-12);
    }
}

#[test]
fn lift_program_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let inst = random_instance(&mut rng, &RandomProgramOptions::default());
    let prog = &inst.program;
    let lifted = lift_program(prog);
    assert_eq!(lifted.num_blocks(), 2 * prog.num_blocks());
    assert_eq!(lifted.num_constraints(), prog.num_constraints() + prog.layout().total());

    // y = z with g(y) = 0 is feasible in the lifted program
    let n = prog.layout().total();
    let mut stacked = BlockVector::zeros(lifted.layout().clone());
    stacked.data_mut().rows_mut(0, n).copy_from(inst.feasible.data());
    stacked.data_mut().rows_mut(n, n).copy_from(inst.feasible.data());
    assert!(lifted.evaluate_constraint(&stacked, &inst.param).unwrap().amax() < 1e-12);
    assert!(lifted.is_set_feasible(&stacked, 0.0));
}

#[test]
fn lifted_and_original_critical_points_agree() {
    let prog = toy_program();
    let lifted = lift_program(&prog);
    let s = v(&[1.3]);
    let orig = solve_to_convergence(&prog, &toy_point(0.5, 0.5, 0.0), &s, &OracleOptions::default()).unwrap();
    let mut w0 = lifted.zero_point();
    w0.z.data_mut().fill(0.5);
    let lift = solve_to_convergence(&lifted, &w0, &s, &OracleOptions::default()).unwrap();
    assert!((lift.point.z.data().rows(2, 2) - orig.point.z.data()).amax() < 1e-6);
    assert!((orig.point.z.data() - toy_solution(1.3).z.data()).amax() < 1e-6);
}

#[test]
fn oracle_solves_toy() {
    let prog = toy_program();
    for path in [SolverPath::Direct, SolverPath::Lifted] {
        let opts = OracleOptions {
            path,
            ..OracleOptions::default()
        };
        let sol = solve_to_convergence(&prog, &toy_point(0.5, 0.5, 0.0), &v(&[1.0]), &opts).unwrap();
        assert!((sol.point.z.data() - v(&[1.0, 1.0])).amax() < 1e-6, "{path}");
        assert!(sol.point.mu[0].abs() < 1e-6);
        assert!(sol.residual < 1e-8);
    }
}

#[test]
fn newton_agrees_with_multiplier_iteration() {
    let prog = toy_program();
    for s in [0.3, 1.0, 1.7] {
        let w0 = toy_point(0.5, 1.5, 0.0);
        let base = OracleOptions {
            newton: false,
            ..OracleOptions::default()
        };
        let plain = solve_to_convergence(&prog, &w0, &v(&[s]), &base).unwrap();
        let fast = solve_to_convergence(&prog, &w0, &v(&[s]), &OracleOptions::default()).unwrap();
        assert!(fast.residual < 1e-8);
        assert!((fast.point.z.data() - plain.point.z.data()).amax() < 1e-6, "s = {s}");
        assert!((fast.point.mu - &plain.point.mu).amax() < 1e-5, "s = {s}");
        assert!(prog.is_set_feasible(&fast.point.z, 0.0));
        assert_eq!(plain.newton_steps, 0);
    }
}

#[test]
fn newton_handles_active_bounds() {
    // Targets (3, 3) outside the box; with z1 z2 = 4 the corner (2, 2) is
    // the only feasible point.
    let prog = toy_program().with_linear_objective(v(&[-6.0, -6.0])).unwrap();
    let sol = solve_to_convergence(&prog, &toy_point(1.5, 1.5, 0.0), &v(&[4.0]), &OracleOptions::default()).unwrap();
    assert!((sol.point.z.data() - v(&[2.0, 2.0])).amax() < 1e-9);
    assert!(sol.residual < 1e-8);
}

#[test]
fn oracle_returns_critical_start_immediately() {
    let prog = toy_program();
    let w = toy_solution(0.81);
    let sol = solve_to_convergence(&prog, &w, &v(&[0.81]), &OracleOptions::default()).unwrap();
    assert_eq!(sol.outer_iterations, 0);
    assert_eq!(sol.point, w);
}

#[test]
fn oracle_reports_nonconvergence_with_best_point() {
    let prog = toy_program();
    let opts = OracleOptions {
        max_outer: 1,
        max_inner_sweeps: 1,
        tol: 1e-14,
        newton: false,
        ..OracleOptions::default()
    };
    match solve_to_convergence(&prog, &toy_point(0.1, 1.9, 0.0), &v(&[1.0]), &opts) {
        Err(Error::NonConvergence { best, residual, .. }) => {
            assert_eq!(prog.kkt_residual(&best, &v(&[1.0])).unwrap(), residual);
        }
        other => panic!("expected NonConvergence, got {other:?}"),
    }
}

#[test]
fn config_validation() {
    let prog = toy_program();
    let bad = [
        TrackerConfig::new(0.0, 1, 2),
        TrackerConfig::new(1.0, 0, 2),
        TrackerConfig::new(1.0, 1, 3),
        TrackerConfig::new(1.0, 1, 2).with_alpha(0.0),
    ];
    for cfg in bad {
        assert!(TrackerState::new(&prog, cfg, prog.zero_point()).is_err());
    }
}

#[test]
fn sweeps_satisfy_proximal_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let opts = RandomProgramOptions::default();
    for _ in 0..100 {
        let inst = random_instance(&mut rng, &opts);
        let prog = &inst.program;
        let w = crate::fixtures::random_set_point(&mut rng, prog, 1.0);
        let rho = rng.random_range(0.5..20.0);
        let cfg = direct(prog, rho, 1).with_alpha(rng.random_range(1e-6..1.0));
        let state = TrackerState::new(prog, cfg.clone(), w.clone()).unwrap();
        let mut z = w.z.clone();
        for _ in 0..5 {
            let next = match sweep(prog, &state, &z, &w.mu, &inst.param) {
                Ok(n) => n,
                Err(e) if e.is_numerical() => break,
                Err(e) => panic!("{e}"),
            };
            let before = prog.augmented_lagrangian(&z, &w.mu, &inst.param, rho).unwrap();
            let after = prog.augmented_lagrangian(&next, &w.mu, &inst.param, rho).unwrap();
            let margin: f64 = (0..prog.num_blocks())
                .map(|i| 0.5 * cfg.alpha[i] * (next.block(i) - z.block(i)).norm_squared())
                .sum();
            assert!(after <= before - margin + 1e-9, "{after} > {before} - {margin}");
            z = next;
        }
    }
}

#[test]
fn more_sweeps_get_closer_to_the_inner_limit() {
    let prog = toy_program();
    let (mu, s) = (v(&[0.3]), v(&[1.0]));
    let cfg = direct(&prog, 10.0, 1);
    let z0 = toy_point(0.5, 1.5, 0.0).z;
    let (limit, _) = minimize_augmented_lagrangian(&prog, &z0, &mu, &s, &cfg, 1e-14, 100_000).unwrap();
    let state = TrackerState::new(&prog, cfg, prog.zero_point()).unwrap();
    let mut z = z0;
    let mut dists = vec![];
    for m in 1..=50 {
        z = sweep(&prog, &state, &z, &mu, &s).unwrap();
        if [1, 2, 5, 10, 20, 50].contains(&m) {
            dists.push((z.data() - limit.data()).norm());
        }
    }
    assert!(dists.windows(2).all(|d| d[1] <= d[0] + 1e-10), "{dists:?}");
}

