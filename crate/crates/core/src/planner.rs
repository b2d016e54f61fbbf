//! Ergodic trajectory optimization and the greedy information baseline.
//!
//! The optimizer minimizes
//!
//! ```text
//! J(u) = E(x(u)) + gamma * dt * sum_n |u_n|^2 + w * sum_n sum_i viol(x_n,i)^2
//! ```
//!
//! over the control sequence of a single integrator, where `viol` is the
//! distance outside the domain box. With fully actuated single-integrator
//! dynamics any state sequence is reachable, so descent runs along the
//! gradient preconditioned by `(dt^2 L^T L)^-1` (`L` the cumulative-sum
//! rollout map). That direction moves every state by minus its own state
//! gradient, which conditions far better than the raw control gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ergodicity::{ergodic_metric, ErgodicScore};
use crate::infosim::InfoGrid;
use crate::spectral::{
    coefficient_count, decompose_field_weighted, AxisTables, CoefficientSet, DensityField, Domain,
    Weighting,
};
use crate::tensor;
use crate::trajectory::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Per-axis coefficient order `K`.
    pub order: usize,
    pub max_iters: usize,
    /// Stop once the ergodic score drops to this value.
    pub score_target: Option<f64>,
    /// Stop once the descent direction norm drops to this value.
    pub grad_tol: f64,
    /// `gamma`, weight of the squared control penalty.
    pub control_penalty: f64,
    pub barrier_weight: f64,
    /// First and largest line-search step.
    pub step_init: f64,
    pub armijo_c: f64,
    pub backtrack_ratio: f64,
    /// Exponent of the metric weights `(1 + |k|^2)^-exponent`.
    pub weight_exponent: f64,
    /// Standard deviation of the initial per-step displacement jitter.
    pub init_jitter: f64,
    /// Final radius of the initial spiral.
    pub init_radius: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            order: 50,
            max_iters: 5000,
            score_target: None,
            grad_tol: 1e-6,
            control_penalty: 3e-4,
            barrier_weight: 1e3,
            step_init: 1.0,
            armijo_c: 1e-4,
            backtrack_ratio: 0.5,
            weight_exponent: 1.5,
            init_jitter: 0.02,
            init_radius: 0.1,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("step_init", self.step_init),
            ("weight_exponent", self.weight_exponent),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("control_penalty", self.control_penalty),
            ("barrier_weight", self.barrier_weight),
            ("init_jitter", self.init_jitter),
            ("init_radius", self.init_radius),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("armijo_c", self.armijo_c), ("backtrack_ratio", self.backtrack_ratio)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if let Some(t) = self.score_target {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("score_target must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn weighting(&self) -> Weighting {
        Weighting {
            exponent: self.weight_exponent,
        }
    }
}

/// Terms of the regularized objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub score: f64,
    pub control_cost: f64,
    pub barrier: f64,
}

/// Evaluates the objective and its gradient for a fixed target, reusing
/// scratch buffers between calls.
struct Evaluator<'a> {
    domain: &'a Domain,
    phi: &'a CoefficientSet,
    gamma: f64,
    barrier_weight: f64,
    tables: AxisTables,
    row: Vec<f64>,
    coeffs: Vec<f64>,
    scratch: Vec<f64>,
    states: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(domain: &'a Domain, phi: &'a CoefficientSet, gamma: f64, barrier_weight: f64) -> Self {
        let dim = domain.dim();
        let n = coefficient_count(dim, phi.order());
        Self {
            domain,
            phi,
            gamma,
            barrier_weight,
            tables: AxisTables::new(dim, phi.order()),
            row: Vec::with_capacity(n),
            coeffs: vec![0.0; n],
            scratch: Vec::with_capacity(n),
            states: Vec::new(),
        }
    }

    fn roll(&mut self, start: &[f64], controls: &[f64], dt: f64) {
        let dim = start.len();
        self.states.clear();
        self.states.extend_from_slice(start);
        for step in 0..controls.len() / dim {
            for i in 0..dim {
                let next = self.states[step * dim + i] + controls[step * dim + i] * dt;
                self.states.push(next);
            }
        }
    }

    /// Time-averaged coefficients of the visited states, no domain check.
    fn accumulate_coeffs(&mut self) {
        let dim = self.domain.dim();
        let n_steps = self.states.len() / dim - 1;
        self.coeffs.iter_mut().for_each(|c| *c = 0.0);
        for n in 1..=n_steps {
            let x = &self.states[n * dim..(n + 1) * dim];
            self.tables.fill(self.domain, x, false);
            let axes: Vec<&[f64]> = (0..dim).map(|a| self.tables.axis(a)).collect();
            tensor::outer_product(&axes, &mut self.row);
            self.coeffs.iter_mut().zip(&self.row).for_each(|(c, r)| *c += r);
        }
        let inv = 1.0 / n_steps as f64;
        self.coeffs.iter_mut().for_each(|c| *c *= inv);
    }

    fn barrier_terms(&self) -> f64 {
        let dim = self.domain.dim();
        let (lo, hi) = (self.domain.lower(), self.domain.upper());
        self.states[dim..]
            .chunks_exact(dim)
            .map(|x| {
                (0..dim)
                    .map(|i| (lo[i] - x[i]).max(0.0).powi(2) + (x[i] - hi[i]).max(0.0).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    fn value(&mut self, start: &[f64], controls: &[f64], dt: f64) -> ObjectiveValue {
        self.roll(start, controls, dt);
        self.accumulate_coeffs();
        let score: f64 = self
            .coeffs
            .iter()
            .zip(self.phi.coeffs())
            .zip(self.phi.weights())
            .map(|((c, p), w)| w * (c - p) * (c - p))
            .sum();
        let control_cost = self.gamma * dt * controls.iter().map(|u| u * u).sum::<f64>();
        let barrier = self.barrier_weight * self.barrier_terms();
        ObjectiveValue {
            total: score + control_cost + barrier,
            score,
            control_cost,
            barrier,
        }
    }

    /// Objective value and its gradient with respect to the flat controls.
    fn gradient(&mut self, start: &[f64], controls: &[f64], dt: f64) -> (ObjectiveValue, Vec<f64>) {
        let value = self.value(start, controls, dt);
        let dim = self.domain.dim();
        let n_steps = controls.len() / dim;
        let scale = 2.0 / n_steps as f64;
        let amp: Vec<f64> = self
            .coeffs
            .iter()
            .zip(self.phi.coeffs())
            .zip(self.phi.weights())
            .map(|((c, p), w)| scale * w * (c - p))
            .collect();
        let (lo, hi) = (self.domain.lower().to_vec(), self.domain.upper().to_vec());

        // d J / d x_n for visited states n = 1..=N
        let mut state_grad = vec![0.0; n_steps * dim];
        for n in 1..=n_steps {
            let x: Vec<f64> = self.states[n * dim..(n + 1) * dim].to_vec();
            self.tables.fill(self.domain, &x, true);
            for axis in 0..dim {
                let vecs: Vec<&[f64]> = (0..dim)
                    .map(|a| if a == axis { self.tables.deriv(a) } else { self.tables.axis(a) })
                    .collect();
                let mut g = tensor::contract(&amp, &vecs, &mut self.scratch);
                let below = (lo[axis] - x[axis]).max(0.0);
                let above = (x[axis] - hi[axis]).max(0.0);
                g += 2.0 * self.barrier_weight * (above - below);
                state_grad[(n - 1) * dim + axis] = g;
            }
        }

        // u_m moves every state after it: dJ/du_m = dt * sum_{n > m} dJ/dx_n
        let mut grad = vec![0.0; n_steps * dim];
        let mut acc = vec![0.0; dim];
        for m in (0..n_steps).rev() {
            for i in 0..dim {
                acc[i] += state_grad[m * dim + i];
                grad[m * dim + i] = dt * acc[i] + 2.0 * self.gamma * dt * controls[m * dim + i];
            }
        }
        (value, grad)
    }
}

fn check_inputs(traj: &Trajectory, phi: &CoefficientSet) -> Result<()> {
    if traj.domain() != phi.domain() {
        return Err(Error::invalid("trajectory and target live on different domains"));
    }
    if traj.is_empty() {
        return Err(Error::invalid("trajectory has no steps"));
    }
    Ok(())
}

/// Regularized objective of a trajectory against target coefficients. The
/// coefficient order and weights are taken from `phi`.
pub fn objective(
    traj: &Trajectory,
    phi: &CoefficientSet,
    config: &OptimizerConfig,
) -> Result<ObjectiveValue> {
    check_inputs(traj, phi)?;
    let mut eval = Evaluator::new(traj.domain(), phi, config.control_penalty, config.barrier_weight);
    Ok(eval.value(traj.start(), traj.flat_controls(), traj.dt()))
}

/// Analytic gradient of [`objective`] with respect to the controls, laid out
/// like [`Trajectory::flat_controls`].
pub fn objective_grad(
    traj: &Trajectory,
    phi: &CoefficientSet,
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    check_inputs(traj, phi)?;
    let mut eval = Evaluator::new(traj.domain(), phi, config.control_penalty, config.barrier_weight);
    Ok(eval.gradient(traj.start(), traj.flat_controls(), traj.dt()).1)
}

/// Maps a control-space gradient to the preconditioned descent direction.
fn descent_direction(grad: &[f64], dim: usize, dt: f64) -> Vec<f64> {
    let n = grad.len() / dim;
    let mut dir = vec![0.0; grad.len()];
    for i in 0..dim {
        // y = L^-T g (backward difference), z = L^-1 y (forward difference)
        let y = |m: usize| {
            let next = if m + 1 < n { grad[(m + 1) * dim + i] } else { 0.0 };
            grad[m * dim + i] - next
        };
        let mut prev = 0.0;
        for m in 0..n {
            let ym = y(m);
            dir[m * dim + i] = -(ym - prev) / (dt * dt);
            prev = ym;
        }
    }
    dir
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ScoreTarget,
    GradTol,
    MaxIters,
    /// Backtracking found no acceptable step.
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub score: f64,
    pub objective: f64,
    pub effort: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    /// Lowest-score iterate.
    pub trajectory: Trajectory,
    /// Best score seen up to each iteration.
    pub score_history: Vec<ErgodicScore>,
    /// Values of the iterate at the start of each iteration.
    pub records: Vec<IterationRecord>,
    pub iterations: usize,
    pub terminated_by: Termination,
}

impl OptimizeReport {
    pub fn final_score(&self) -> f64 {
        self.score_history.last().map_or(f64::INFINITY, |s| s.value())
    }
}

/// Initial controls: an outward spiral in the first two axes plus seeded
/// Gaussian jitter on each step's displacement.
pub fn initial_controls(start: &[f64], n_steps: usize, dt: f64, config: &OptimizerConfig) -> Vec<f64> {
    let dim = start.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let jitter = Normal::new(0.0, config.init_jitter.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let turns = 2.0;
    let offset = |n: usize| -> Vec<f64> {
        let s = n as f64 / n_steps as f64;
        let r = config.init_radius * s;
        let theta = 2.0 * std::f64::consts::PI * turns * s;
        (0..dim)
            .map(|i| match i {
                0 => r * theta.cos(),
                1 => r * theta.sin(),
                _ => 0.0,
            })
            .collect()
    };
    let mut controls = Vec::with_capacity(n_steps * dim);
    let mut prev = offset(0);
    for n in 1..=n_steps {
        let next = offset(n);
        for i in 0..dim {
            let noise = if config.init_jitter > 0.0 { jitter.sample(&mut rng) } else { 0.0 };
            controls.push((next[i] - prev[i] + noise) / dt);
        }
        prev = next;
    }
    controls
}

/// Optimizes an `n_steps` trajectory from `start` to be ergodic with
/// respect to `phi`.
pub fn optimize(
    start: &[f64],
    n_steps: usize,
    dt: f64,
    phi: &DensityField,
    config: &OptimizerConfig,
) -> Result<OptimizeReport> {
    use crate::spectral::Field;
    config.validate()?;
    let domain = phi.grid().domain();
    domain.check_dim(start.len())?;
    if !domain.contains(start) {
        return Err(Error::DomainViolation { index: 0 });
    }
    if n_steps == 0 {
        return Err(Error::invalid("need at least one step"));
    }
    let target = decompose_field_weighted(phi, config.order, config.weighting());
    let controls = initial_controls(start, n_steps, dt, config);
    optimize_from(start, controls, dt, &target, config)
}

/// Runs the descent from given initial controls against fixed target
/// coefficients.
pub fn optimize_from(
    start: &[f64],
    mut controls: Vec<f64>,
    dt: f64,
    target: &CoefficientSet,
    config: &OptimizerConfig,
) -> Result<OptimizeReport> {
    config.validate()?;
    let domain = target.domain().clone();
    let dim = domain.dim();
    // validates dimensions and dt
    Trajectory::from_flat_controls(start, controls.clone(), dt, domain.clone())?;
    let mut eval = Evaluator::new(&domain, target, config.control_penalty, config.barrier_weight);

    let mut score_history = Vec::new();
    let mut records = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut step = config.step_init;
    let mut iteration = 0;
    let terminated_by = loop {
        let (value, grad) = eval.gradient(start, &controls, dt);
        if !value.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration });
        }
        let traj_effort = controls.chunks_exact(dim).map(|u| u.iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
        records.push(IterationRecord {
            iteration,
            score: value.score,
            objective: value.total,
            effort: traj_effort,
        });
        if best.as_ref().is_none_or(|(s, _)| value.score < *s) {
            best = Some((value.score, controls.clone()));
        }
        let best_score = best.as_ref().map(|(s, _)| *s).unwrap_or(value.score);
        score_history.push(ErgodicScore::from_raw(best_score));

        if config.score_target.is_some_and(|t| value.score <= t) {
            break Termination::ScoreTarget;
        }
        let dir = descent_direction(&grad, dim, dt);
        let dir_norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if dir_norm <= config.grad_tol {
            break Termination::GradTol;
        }
        if iteration >= config.max_iters {
            break Termination::MaxIters;
        }

        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let mut t = step;
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = controls.iter().zip(&dir).map(|(u, d)| u + t * d).collect();
            let v = eval.value(start, &trial, dt);
            if v.total.is_finite() && v.total <= value.total + config.armijo_c * t * slope {
                accepted = Some(trial);
                break;
            }
            t *= config.backtrack_ratio;
        }
        match accepted {
            Some(next) => {
                controls = next;
                // let the next search start a little longer
                step = (t / config.backtrack_ratio).min(config.step_init);
            }
            None => break Termination::LineSearch,
        }
        iteration += 1;
    };

    let (_, best_controls) = best.expect("at least one iterate");
    let trajectory = Trajectory::from_flat_controls(start, best_controls, dt, domain)?;
    Ok(OptimizeReport {
        trajectory,
        score_history,
        records,
        iterations: iteration,
        terminated_by,
    })
}

/// Score of a trajectory against a density with the given order and
/// weighting. States outside the domain are rejected.
pub fn trajectory_score(
    traj: &Trajectory,
    phi: &DensityField,
    order: usize,
    weighting: Weighting,
) -> Result<ErgodicScore> {
    let target = decompose_field_weighted(phi, order, weighting);
    let c = crate::spectral::decompose_points(traj.domain(), traj.visited(), order, weighting)?;
    ergodic_metric(&c, &target)
}

/// Repeatedly jumps to the center of the cell with the most remaining
/// information (staying put if already there) and collects from it.
pub fn greedy_plan(info: &InfoGrid, start: &[f64], n_steps: usize, dt: f64) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::invalid("need at least one step"));
    }
    let domain = info.grid().domain().clone();
    domain.check_dim(start.len())?;
    if !(dt > 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    let dim = domain.dim();
    let mut grid = info.clone();
    let mut pos = start.to_vec();
    let mut controls = Vec::with_capacity(n_steps * dim);
    for _ in 0..n_steps {
        let cell = grid.richest_cell();
        if grid.grid().cell_of(&pos) == Some(cell) {
            controls.extend(std::iter::repeat_n(0.0, dim));
        } else {
            let center = grid.grid().cell_center(cell);
            for i in 0..dim {
                let u = (center[i] - pos[i]) / dt;
                controls.push(u);
                pos[i] += u * dt;
            }
        }
        grid.collect(cell);
    }
    Trajectory::from_flat_controls(start, controls, dt, domain)
}

#[derive(Debug, Clone)]
pub struct CompositePlan {
    pub trajectory: Trajectory,
    pub segments: Vec<OptimizeReport>,
}

/// Optimizes consecutive segments against the same density, each starting
/// where the previous ended. Segment `i` uses seed `config.seed + i`.
pub fn composite_plan(
    start: &[f64],
    segments: &[usize],
    dt: f64,
    phi: &DensityField,
    config: &OptimizerConfig,
) -> Result<CompositePlan> {
    if segments.is_empty() {
        return Err(Error::invalid("need at least one segment"));
    }
    let mut reports = Vec::with_capacity(segments.len());
    let mut whole: Option<Trajectory> = None;
    for (i, &n) in segments.iter().enumerate() {
        let seg_config = OptimizerConfig {
            seed: config.seed.wrapping_add(i as u64),
            ..config.clone()
        };
        let from = whole.as_ref().map_or(start.to_vec(), |t| t.end().to_vec());
        let report = optimize(&from, n, dt, phi, &seg_config)?;
        whole = Some(match whole {
            None => report.trajectory.clone(),
            Some(t) => t.concat(&report.trajectory)?,
        });
        reports.push(report);
    }
    Ok(CompositePlan {
        trajectory: whole.expect("non-empty segments"),
        segments: reports,
    })
}
