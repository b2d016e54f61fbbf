//! Discrete single-integrator trajectories.

use serde::{Deserialize, Serialize};

use crate::spectral::Domain;
use crate::{Error, Result};

/// States `x_0..x_N` and controls `u_0..u_{N-1}` with
/// `x_{n+1} = x_n + u_n * dt`. The start state is fixed; the `N` states
/// after it are the visited (measured) states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    domain: Domain,
    dt: f64,
    states: Vec<f64>,
    controls: Vec<f64>,
}

/// Integrates single-integrator dynamics from `start`. States may leave the
/// domain.
pub fn rollout<C: AsRef<[f64]>>(
    start: &[f64],
    controls: &[C],
    dt: f64,
    domain: Domain,
) -> Result<Trajectory> {
    let dim = domain.dim();
    let mut flat = Vec::with_capacity(controls.len() * dim);
    for u in controls {
        domain.check_dim(u.as_ref().len())?;
        flat.extend_from_slice(u.as_ref());
    }
    Trajectory::from_flat_controls(start, flat, dt, domain)
}

impl Trajectory {
    /// Rolls out controls stored back to back (`dim` values per step).
    pub fn from_flat_controls(
        start: &[f64],
        controls: Vec<f64>,
        dt: f64,
        domain: Domain,
    ) -> Result<Self> {
        let dim = domain.dim();
        domain.check_dim(start.len())?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if !controls.len().is_multiple_of(dim) {
            return Err(Error::invalid("control vector length is not a multiple of the dimension"));
        }
        let n = controls.len() / dim;
        let mut states = Vec::with_capacity((n + 1) * dim);
        states.extend_from_slice(start);
        for step in 0..n {
            for i in 0..dim {
                let next = states[step * dim + i] + controls[step * dim + i] * dt;
                states.push(next);
            }
        }
        Ok(Self {
            domain,
            dt,
            states,
            controls,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.controls.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Horizon `T = N * dt`.
    pub fn horizon(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn start(&self) -> &[f64] {
        self.state(0)
    }

    pub fn end(&self) -> &[f64] {
        self.state(self.len())
    }

    pub fn state(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.states[n * d..(n + 1) * d]
    }

    pub fn control(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.controls[n * d..(n + 1) * d]
    }

    /// All `N + 1` states, start included.
    pub fn states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.states.chunks_exact(self.dim())
    }

    /// The `N` states after the start.
    pub fn visited(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.states.chunks_exact(self.dim()).skip(1)
    }

    pub fn controls(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.controls.chunks_exact(self.dim())
    }

    pub fn flat_controls(&self) -> &[f64] {
        &self.controls
    }

    /// Appends `next`, which must start exactly where `self` ends and share
    /// the time step.
    pub fn concat(&self, next: &Trajectory) -> Result<Trajectory> {
        if self.domain != next.domain || self.dt != next.dt {
            return Err(Error::invalid("trajectories differ in domain or time step"));
        }
        if self.end() != next.start() {
            return Err(Error::invalid("next trajectory does not start at this one's end"));
        }
        let d = self.dim();
        let mut states = self.states.clone();
        states.extend_from_slice(&next.states[d..]);
        let mut controls = self.controls.clone();
        controls.extend_from_slice(&next.controls);
        Ok(Trajectory {
            domain: self.domain.clone(),
            dt: self.dt,
            states,
            controls,
        })
    }

    /// First `n` steps.
    pub fn prefix(&self, n: usize) -> Result<Trajectory> {
        if n > self.len() {
            return Err(Error::invalid(format!("prefix {n} exceeds length {}", self.len())));
        }
        let d = self.dim();
        Ok(Trajectory {
            domain: self.domain.clone(),
            dt: self.dt,
            states: self.states[..(n + 1) * d].to_vec(),
            controls: self.controls[..n * d].to_vec(),
        })
    }

    /// Steps `n..N`, starting from state `n`.
    pub fn suffix(&self, n: usize) -> Result<Trajectory> {
        if n > self.len() {
            return Err(Error::invalid(format!("suffix {n} exceeds length {}", self.len())));
        }
        let d = self.dim();
        Ok(Trajectory {
            domain: self.domain.clone(),
            dt: self.dt,
            states: self.states[n * d..].to_vec(),
            controls: self.controls[n * d..].to_vec(),
        })
    }
}

/// How per-step control magnitudes are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffortMode {
    /// `sum_n |u_n|`
    #[default]
    NormSum,
    /// `sum_n |u_n| * dt`
    DtWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Effort(f64);

impl Effort {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn effort(traj: &Trajectory) -> Effort {
    effort_with(traj, EffortMode::NormSum)
}

pub fn effort_with(traj: &Trajectory, mode: EffortMode) -> Effort {
    let sum: f64 = traj
        .controls()
        .map(|u| u.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    match mode {
        EffortMode::NormSum => Effort(sum),
        EffortMode::DtWeighted => Effort(sum * traj.dt()),
    }
}
