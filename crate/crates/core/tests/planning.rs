use ergodic_core::ergodicity::{residual_field, PartialTrajectoryContext};
use ergodic_core::infosim::{
    build_eid, discretize, simulate_cells, simulate_collection, EidSpec, GaussianComponent, InfoGrid,
};
use ergodic_core::planner::{
    composite_plan, greedy_plan, optimize, trajectory_score, OptimizerConfig, Termination,
};
use ergodic_core::spectral::{
    decompose_trajectory, weight_vector, CellGrid, CoefficientSet, DensityField, Domain, Field,
    Weighting,
};
use ergodic_core::trajectory::{effort, rollout, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const START: [f64; 2] = [0.25, 0.35];

fn gaussian() -> DensityField {
    build_eid(&EidSpec::single_default(), &Domain::unit(2), &[100, 100]).unwrap()
}

fn random_rollout(rng: &mut ChaCha8Rng, n: usize, dt: f64) -> Trajectory {
    let mut x = START;
    let mut controls = Vec::with_capacity(n);
    for _ in 0..n {
        let next: [f64; 2] = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        controls.push(vec![(next[0] - x[0]) / dt, (next[1] - x[1]) / dt]);
        x = next;
    }
    rollout(&START, &controls, dt, Domain::unit(2)).unwrap()
}

#[test]
fn optimizer_beats_random_rollouts_on_uniform_density() {
    let phi = DensityField::uniform(CellGrid::new(Domain::unit(2), vec![10, 10]).unwrap());
    let config = OptimizerConfig { order: 20, max_iters: 500, ..Default::default() };
    let report = optimize(&START, 100, 0.5, &phi, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let best_random = (0..50)
        .map(|_| {
            let t = random_rollout(&mut rng, 100, 0.5);
            trajectory_score(&t, &phi, 20, config.weighting()).unwrap().value()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(report.final_score() < best_random, "{} vs {best_random}", report.final_score());
}

#[test]
fn optimizer_reaches_score_target() {
    let config = OptimizerConfig { score_target: Some(5e-4), ..Default::default() };
    let report = optimize(&START, 100, 0.5, &gaussian(), &config).unwrap();
    assert_eq!(report.terminated_by, Termination::ScoreTarget);
    assert!(report.final_score() <= 5e-4);
    assert!(report.iterations <= 5000);
    let check = trajectory_score(&report.trajectory, &gaussian(), 50, config.weighting()).unwrap();
    assert!((check.value() - report.final_score()).abs() < 1e-12);
}

#[test]
fn optimizer_is_deterministic_and_monotone() {
    let config = OptimizerConfig { order: 15, max_iters: 300, ..Default::default() };
    let a = optimize(&START, 60, 0.5, &gaussian(), &config).unwrap();
    let b = optimize(&START, 60, 0.5, &gaussian(), &config).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.score_history, b.score_history);
    assert_eq!(a.records, b.records);
    for w in a.records.windows(2) {
        assert!(w[1].objective <= w[0].objective);
    }
    for w in a.score_history.windows(2) {
        assert!(w[1] <= w[0]);
    }
    let other = optimize(&START, 60, 0.5, &gaussian(), &OptimizerConfig { seed: 1, ..config }).unwrap();
    assert_ne!(other.trajectory, a.trajectory);
}

#[test]
fn constant_trajectory_at_the_mode_scores_worse_than_optimized() {
    let phi = gaussian();
    let config = OptimizerConfig { order: 20, max_iters: 500, ..Default::default() };
    let still = rollout(&[0.65, 0.65], &vec![vec![0.0, 0.0]; 100], 0.5, Domain::unit(2)).unwrap();
    let optimized = optimize(&START, 100, 0.5, &phi, &config).unwrap();
    let s = trajectory_score(&still, &phi, 20, config.weighting()).unwrap().value();
    assert!(optimized.final_score() < s);
}

#[test]
fn greedy_beats_random_rollouts() {
    let info = discretize(&gaussian(), &[10, 10], 0.01).unwrap();
    let greedy = simulate_collection(&info, &greedy_plan(&info, &START, 100, 0.5).unwrap()).collected;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let t = random_rollout(&mut rng, 100, 0.5);
        assert!(simulate_collection(&info, &t).collected <= greedy);
    }
}

/// Best total over every cell sequence of length `n`.
fn exhaustive_best(info: &InfoGrid, n: usize) -> f64 {
    let cells = info.grid().n_cells();
    let mut best: f64 = 0.0;
    let mut seq = vec![0usize; n];
    for code in 0..cells.pow(n as u32) {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % cells;
            c /= cells;
        }
        best = best.max(simulate_cells(info, seq.iter().map(|&c| Some(c))).collected);
    }
    best
}

#[test]
fn greedy_matches_exhaustive_search_on_small_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let grid = CellGrid::new(Domain::unit(2), vec![2, 2]).unwrap();
    for n in 1..=6 {
        let mut instances = vec![
            vec![0.25; 4],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.8, 0.2, 0.0, 0.0],
            vec![0.0, 0.1, 0.3, 0.6],
        ];
        for _ in 0..12 {
            let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            instances.push(raw.iter().map(|v| v / s).collect());
        }
        for masses in instances {
            let info = InfoGrid::new(grid.clone(), masses.clone(), 1.0 / n as f64).unwrap();
            let greedy = greedy_plan(&info, &[0.1, 0.1], n, 0.5).unwrap();
            let got = simulate_collection(&info, &greedy).collected;
            let best = exhaustive_best(&info, n);
            assert!((got - best).abs() < 1e-12, "n={n} {masses:?}: {got} vs {best}");
        }
    }
}

#[test]
fn composite_plan_costs_more_for_similar_information() {
    let phi = build_eid(&EidSpec::bimodal_default(), &Domain::unit(2), &[100, 100]).unwrap();
    let info = discretize(&phi, &[10, 10], 0.01).unwrap();
    let config = OptimizerConfig::default();
    let single = optimize(&START, 100, 0.5, &phi, &config).unwrap().trajectory;
    let composite = composite_plan(&START, &[50, 50], 0.5, &phi, &config).unwrap();
    assert_eq!(composite.trajectory.state(50), composite.segments[0].trajectory.end());
    assert_eq!(composite.trajectory.len(), 100);
    assert!(effort(&composite.trajectory).value() > effort(&single).value());
    let a = simulate_collection(&info, &single).percent();
    let b = simulate_collection(&info, &composite.trajectory).percent();
    assert!((a - b).abs() <= 10.0, "{a} vs {b}");
}

#[test]
fn residual_after_covering_one_mode_moves_to_the_other() {
    let domain = Domain::unit(2);
    let spec = EidSpec::bimodal_default();
    let visited_mode = spec.components[0].clone();
    let other_mode = spec.components[1].clone();
    let phi = build_eid(&spec, &domain, &[100, 100]).unwrap();
    let single = build_eid(
        &EidSpec { components: vec![GaussianComponent { weight: 1.0, ..visited_mode.clone() }] },
        &domain,
        &[100, 100],
    )
    .unwrap();
    let order = 10;
    let config = OptimizerConfig { order, ..Default::default() };
    let first_half = optimize(&visited_mode.mean, 50, 0.5, &single, &config).unwrap().trajectory;
    let ca = decompose_trajectory(&first_half, order).unwrap();
    let ca = CoefficientSet::from_parts(
        domain.clone(),
        order,
        ca.coeffs().to_vec(),
        weight_vector(2, order, Weighting::sobolev(2)),
    )
    .unwrap();
    let ctx = PartialTrajectoryContext::new(ca, first_half.horizon(), first_half.horizon()).unwrap();
    let residual = residual_field(&ctx, &phi, order, &[100, 100]).unwrap();

    let m1 = &visited_mode.mean;
    let m2 = &other_mode.mean;
    let mid = [(m1[0] + m2[0]) / 2.0, (m1[1] + m2[1]) / 2.0];
    let (mut positive, mut unvisited) = (0.0, 0.0);
    for (cell, &v) in residual.values().iter().enumerate() {
        if v > 0.0 {
            let x = residual.grid().cell_center(cell);
            positive += v;
            if (x[0] - mid[0]) * (m2[0] - m1[0]) + (x[1] - mid[1]) * (m2[1] - m1[1]) > 0.0 {
                unvisited += v;
            }
        }
    }
    assert!(unvisited / positive >= 0.8, "{}", unvisited / positive);
}
