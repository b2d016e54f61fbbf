//! Experiment commands. Each returns typed results; [`crate::run`] turns
//! them into files.

use ergodic_core::ergodicity::{negative_cells, residual_field, PartialTrajectoryContext};
use ergodic_core::infosim::{simulate_collection, Collection, EidSpec, GaussianComponent};
use ergodic_core::planner::{
    composite_plan, greedy_plan, optimize, trajectory_score, OptimizeReport, OptimizerConfig,
    Termination,
};
use ergodic_core::scenarios::{
    ergodic_allocation, two_post_variance, two_state_schedule, SchedulePolicy, Side,
    TwoPostSpec, TwoStateOutcome, TwoStateSpec,
};
use ergodic_core::spectral::{
    decompose_trajectory, reconstruct_field, CellGrid, DensityField, Field, RawField,
};
use ergodic_core::trajectory::{effort_with, Trajectory};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{num, opt_num, Table};
use crate::CliError;

/// Reference point for the sampling-based planner, reported but never
/// computed: (score, info %).
pub const RIG_REFERENCE: (f64, f64) = (0.02295, 72.19);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Pto,
    Greedy,
    External,
}

impl RowKind {
    fn label(self) -> &'static str {
        match self {
            RowKind::Pto => "pto",
            RowKind::Greedy => "greedy",
            RowKind::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: RowKind,
    pub score_target: Option<f64>,
    pub achieved_score: Option<f64>,
    pub info_pct: Option<f64>,
    pub effort: Option<f64>,
    pub status: String,
}

pub fn cmd_score_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let phi = cfg.density(&cfg.eid)?;
    let info = cfg.info_grid(&phi)?;
    let base = cfg.optimizer_config();
    let mut rows: Vec<SweepRow> = cfg
        .score_targets
        .par_iter()
        .map(|&target| {
            let config = OptimizerConfig {
                score_target: Some(target),
                ..base.clone()
            };
            match optimize(&cfg.start, cfg.n, cfg.dt, &phi, &config) {
                Ok(r) => SweepRow {
                    kind: RowKind::Pto,
                    score_target: Some(target),
                    achieved_score: Some(r.final_score()),
                    info_pct: Some(simulate_collection(&info, &r.trajectory).percent()),
                    effort: Some(effort_with(&r.trajectory, cfg.effort_mode).value()),
                    status: termination_label(r.terminated_by).into(),
                },
                Err(e) => SweepRow {
                    kind: RowKind::Pto,
                    score_target: Some(target),
                    achieved_score: None,
                    info_pct: None,
                    effort: None,
                    status: format!("error: {e}").replace(',', ";"),
                },
            }
        })
        .collect();

    let greedy = greedy_plan(&info, &cfg.start, cfg.n, cfg.dt)?;
    rows.push(SweepRow {
        kind: RowKind::Greedy,
        score_target: None,
        achieved_score: Some(trajectory_score(&greedy, &phi, cfg.k, base.weighting())?.value()),
        info_pct: Some(simulate_collection(&info, &greedy).percent()),
        effort: Some(effort_with(&greedy, cfg.effort_mode).value()),
        status: "ok".into(),
    });
    rows.push(SweepRow {
        kind: RowKind::External,
        score_target: None,
        achieved_score: Some(RIG_REFERENCE.0),
        info_pct: Some(RIG_REFERENCE.1),
        effort: None,
        status: "external".into(),
    });
    Ok(rows)
}

fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::ScoreTarget => "score_target",
        Termination::GradTol => "grad_tol",
        Termination::MaxIters => "max_iters",
        Termination::LineSearch => "line_search",
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&["kind", "score_target", "achieved_score", "info_collected_pct", "effort", "status"]);
    for r in rows {
        t.push(vec![
            r.kind.label().into(),
            opt_num(r.score_target),
            opt_num(r.achieved_score),
            opt_num(r.info_pct),
            opt_num(r.effort),
            r.status.clone(),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRow {
    pub variant: String,
    pub info_pct: f64,
    pub effort: f64,
    /// Segment boundaries, i.e. times the plan restarts a sweep.
    pub switches: usize,
}

#[derive(Debug, Clone)]
pub struct HorizonResult {
    pub rows: Vec<HorizonRow>,
    pub single: Trajectory,
    pub composite: Trajectory,
}

/// One plan over `n` steps against two plans of `n / 2` steps each.
pub fn cmd_horizon(cfg: &ExperimentConfig) -> Result<HorizonResult, CliError> {
    if cfg.n < 2 || !cfg.n.is_multiple_of(2) {
        return Err(CliError::Config(format!("horizon experiment needs an even n, got {}", cfg.n)));
    }
    let phi = cfg.density(&cfg.horizon_eid)?;
    let info = cfg.info_grid(&phi)?;
    let config = cfg.optimizer_config();
    let half = cfg.n / 2;
    let (single, composite) = rayon::join(
        || optimize(&cfg.start, cfg.n, cfg.dt, &phi, &config),
        || composite_plan(&cfg.start, &[half, half], cfg.dt, &phi, &config),
    );
    let single = single?.trajectory;
    let composite = composite?.trajectory;
    let row = |variant: &str, t: &Trajectory, switches| HorizonRow {
        variant: variant.into(),
        info_pct: simulate_collection(&info, t).percent(),
        effort: effort_with(t, cfg.effort_mode).value(),
        switches,
    };
    Ok(HorizonResult {
        rows: vec![row("single", &single, 0), row("composite", &composite, 1)],
        single,
        composite,
    })
}

pub fn horizon_table(rows: &[HorizonRow]) -> Table {
    let mut t = Table::new(&["variant", "info_pct", "effort", "switches"]);
    for r in rows {
        t.push(vec![r.variant.clone(), num(r.info_pct), num(r.effort), r.switches.to_string()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructError {
    pub k: usize,
    pub l2_to_histogram: f64,
    pub l2_to_field: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructResult {
    pub fields: Vec<(usize, RawField)>,
    pub errors: Vec<ReconstructError>,
}

/// Visit density of a trajectory on a grid: visits per cell over `N` times
/// the cell volume.
pub fn empirical_histogram(grid: &CellGrid, traj: &Trajectory) -> Result<RawField, CliError> {
    let mut counts = vec![0.0; grid.n_cells()];
    let scale = 1.0 / (traj.len() as f64 * grid.cell_volume());
    for (i, x) in traj.visited().enumerate() {
        let cell = grid
            .cell_of(x)
            .ok_or(ergodic_core::Error::DomainViolation { index: i + 1 })?;
        counts[cell] += scale;
    }
    Ok(RawField::new(grid.clone(), counts)?)
}

fn l2_distance(a: &RawField, b: &impl Field) -> f64 {
    let sq: f64 = a.values().iter().zip(b.values()).map(|(p, q)| (p - q) * (p - q)).sum();
    (sq * a.grid().cell_volume()).sqrt()
}

/// Reconstructs the trajectory's spatial distribution at each order on the
/// field's grid.
pub fn cmd_reconstruct(
    field: &DensityField,
    traj: &Trajectory,
    orders: &[usize],
) -> Result<ReconstructResult, CliError> {
    let grid = field.grid();
    if traj.domain() != grid.domain() {
        return Err(CliError::Config("trajectory and field use different domains".into()));
    }
    let hist = empirical_histogram(grid, traj)?;
    let results: Vec<Result<(usize, RawField), CliError>> = orders
        .par_iter()
        .map(|&k| {
            let c = decompose_trajectory(traj, k)?;
            Ok((k, reconstruct_field(&c, grid.resolution())?))
        })
        .collect();
    let mut fields = Vec::with_capacity(orders.len());
    let mut errors = Vec::with_capacity(orders.len());
    for r in results {
        let (k, f) = r?;
        errors.push(ReconstructError {
            k,
            l2_to_histogram: l2_distance(&f, &hist),
            l2_to_field: l2_distance(&f, field),
        });
        fields.push((k, f));
    }
    Ok(ReconstructResult { fields, errors })
}

pub fn reconstruct_table(errors: &[ReconstructError]) -> Table {
    let mut t = Table::new(&["k", "l2_to_histogram", "l2_to_field"]);
    for e in errors {
        t.push(vec![e.k.to_string(), num(e.l2_to_histogram), num(e.l2_to_field)]);
    }
    t
}

#[derive(Debug, Clone)]
pub struct ResidualResult {
    pub field: RawField,
    pub flagged: Vec<usize>,
    pub executed_steps: usize,
}

/// Residual density after executing the first `round(split * N)` steps.
pub fn cmd_residual(
    field: &DensityField,
    traj: &Trajectory,
    split_fraction: f64,
    k: usize,
) -> Result<ResidualResult, CliError> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(CliError::Config(format!("split fraction must lie in (0, 1), got {split_fraction}")));
    }
    let n = traj.len();
    let na = ((split_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    if na >= n {
        return Err(CliError::Config("trajectory is too short to split".into()));
    }
    let executed = traj.prefix(na)?;
    let ca = decompose_trajectory(&executed, k)?;
    let ctx = PartialTrajectoryContext::new(ca, na as f64 * traj.dt(), (n - na) as f64 * traj.dt())?;
    let residual = residual_field(&ctx, field, k, field.grid().resolution())?;
    let flagged = negative_cells(&residual);
    Ok(ResidualResult {
        field: residual,
        flagged,
        executed_steps: na,
    })
}

pub fn flagged_table(result: &ResidualResult) -> Table {
    let mut t = Table::new(&["cell", "x", "y", "residual"]);
    let grid = result.field.grid();
    for &c in &result.flagged {
        let x = grid.cell_center(c);
        t.push(vec![c.to_string(), num(x[0]), num(x[1]), num(result.field.values()[c])]);
    }
    t
}

/// Trajectory for the residual demonstration: the first part is ergodic with
/// respect to the first mixture component alone, the rest with respect to
/// the clamped residual it leaves.
pub fn residual_demo_trajectory(cfg: &ExperimentConfig) -> Result<Trajectory, CliError> {
    let first = cfg
        .residual_eid
        .components
        .first()
        .ok_or_else(|| CliError::Config("residual_eid has no components".into()))?;
    let mode = EidSpec {
        components: vec![GaussianComponent {
            weight: 1.0,
            ..first.clone()
        }],
    };
    let config = OptimizerConfig {
        order: cfg.residual_k,
        ..cfg.optimizer.clone()
    };
    let mode_field = cfg.density(&mode)?;
    let phi = cfg.density(&cfg.residual_eid)?;
    let na = ((cfg.residual_split * cfg.n as f64).round() as usize).clamp(1, cfg.n.max(2) - 1);
    let start = if cfg.domain()?.contains(&first.mean) { first.mean.clone() } else { cfg.start.clone() };
    let a = optimize(&start, na, cfg.dt, &mode_field, &config)?.trajectory;
    let ca = decompose_trajectory(&a, cfg.residual_k)?;
    let ctx = PartialTrajectoryContext::new(ca, a.horizon(), (cfg.n - na) as f64 * cfg.dt)?;
    let residual = residual_field(&ctx, &phi, cfg.residual_k, phi.grid().resolution())?;
    let b = optimize(a.end(), cfg.n - na, cfg.dt, &residual.clamp_normalize()?, &config)?.trajectory;
    Ok(a.concat(&b)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStateRow {
    pub policy: String,
    pub n: usize,
    pub outcome: TwoStateOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPostRow {
    pub spec: TwoPostSpec,
    pub n_left_ergodic: usize,
    pub variance_all_left: f64,
    pub variance_ergodic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub two_state: Vec<TwoStateRow>,
    pub two_post: Vec<TwoPostRow>,
}

pub fn default_two_state() -> TwoStateSpec {
    TwoStateSpec::new(0.8, 0.2, 0.1, Side::Left).expect("valid constants")
}

pub fn cmd_scenarios() -> Result<ScenarioResult, CliError> {
    let spec = default_two_state();
    let mut two_state = Vec::new();
    for (label, n, policy) in [
        ("repeated_ergodic_5", 10, SchedulePolicy::RepeatedErgodic { segment_len: 5 }),
        ("perfectly_ergodic", 10, SchedulePolicy::PerfectlyErgodic),
        ("perfectly_ergodic", 20, SchedulePolicy::PerfectlyErgodic),
    ] {
        two_state.push(TwoStateRow {
            policy: label.into(),
            n,
            outcome: two_state_schedule(&spec, n, policy)?,
        });
    }
    let mut two_post = Vec::new();
    for (sl, sr, n) in [(1.0, 2.0, 10), (1.0, 1.0, 10)] {
        let spec = TwoPostSpec::new(sl, sr, n)?;
        let k = ergodic_allocation(&spec);
        two_post.push(TwoPostRow {
            spec,
            n_left_ergodic: k,
            variance_all_left: two_post_variance(&spec, n)?,
            variance_ergodic: two_post_variance(&spec, k)?,
        });
    }
    Ok(ScenarioResult { two_state, two_post })
}

pub fn two_state_table(rows: &[TwoStateRow]) -> Table {
    let mut t = Table::new(&[
        "policy",
        "n",
        "collected",
        "switches",
        "steps_to_complete",
        "zero_steps",
        "idle_before_complete",
    ]);
    for r in rows {
        let o = &r.outcome;
        t.push(vec![
            r.policy.clone(),
            r.n.to_string(),
            o.collected_exact.to_string(),
            o.switches.to_string(),
            o.steps_to_complete.map(|v| v.to_string()).unwrap_or_default(),
            o.zero_steps.to_string(),
            o.idle_before_complete.to_string(),
        ]);
    }
    t
}

pub fn two_post_table(rows: &[TwoPostRow]) -> Table {
    let mut t = Table::new(&[
        "sigma_left",
        "sigma_right",
        "n",
        "n_left_ergodic",
        "variance_all_left",
        "variance_ergodic",
    ]);
    for r in rows {
        t.push(vec![
            num(r.spec.sigma_left),
            num(r.spec.sigma_right),
            r.spec.n.to_string(),
            r.n_left_ergodic.to_string(),
            num(r.variance_all_left),
            num(r.variance_ergodic),
        ]);
    }
    t
}

pub fn cmd_optimize(cfg: &ExperimentConfig) -> Result<OptimizeReport, CliError> {
    let phi = cfg.density(&cfg.eid)?;
    Ok(optimize(&cfg.start, cfg.n, cfg.dt, &phi, &cfg.optimizer_config())?)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<Collection, CliError> {
    let phi = cfg.density(&cfg.eid)?;
    let info = cfg.info_grid(&phi)?;
    if traj.domain() != info.grid().domain() {
        return Err(CliError::Config("trajectory and grid use different domains".into()));
    }
    Ok(simulate_collection(&info, traj))
}

pub fn collection_table(traj: &Trajectory, grid: &CellGrid, c: &Collection) -> Table {
    let mut t = Table::new(&["step", "cell", "collected", "cumulative_pct"]);
    let mut total = 0.0;
    let initial = c.remaining.initial_total();
    for (i, (x, got)) in traj.visited().zip(&c.per_step).enumerate() {
        total += got;
        t.push(vec![
            (i + 1).to_string(),
            grid.cell_of(x).map(|v| v.to_string()).unwrap_or_default(),
            num(*got),
            num(100.0 * total / initial),
        ]);
    }
    t
}
