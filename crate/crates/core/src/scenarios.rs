//! Closed-form toy scenarios: a two-state collection problem for horizon
//! selection and a two-post distance estimate where ergodic allocation is
//! suboptimal.
//!
//! Two-state schedules are computed in exact rational arithmetic, so
//! collected totals and step counts carry no rounding error.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateSpec {
    pub info_left: f64,
    pub info_right: f64,
    pub rate: f64,
    pub switch_cost: f64,
    pub start: Side,
}

impl TwoStateSpec {
    pub fn new(info_left: f64, info_right: f64, rate: f64, start: Side) -> Result<Self> {
        let s = Self {
            info_left,
            info_right,
            rate,
            switch_cost: 1.0,
            start,
        };
        s.exact()?;
        Ok(s)
    }

    pub fn with_switch_cost(mut self, c: f64) -> Self {
        self.switch_cost = c;
        self
    }

    /// Exact `(info_left, info_right, rate)`.
    fn exact(&self) -> Result<(Rational64, Rational64, Rational64)> {
        let conv = |v: f64, what: &str| {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{what} must be finite")));
            }
            Rational64::approximate_float(v)
                .ok_or_else(|| Error::invalid(format!("{what} is not representable: {v}")))
        };
        let l = conv(self.info_left, "info_left")?;
        let r = conv(self.info_right, "info_right")?;
        let rate = conv(self.rate, "rate")?;
        let zero = Rational64::from_integer(0);
        if l < zero || r < zero {
            return Err(Error::invalid("information amounts must be non-negative"));
        }
        if l + r != Rational64::from_integer(1) {
            return Err(Error::invalid("information amounts must sum to 1"));
        }
        if rate <= zero {
            return Err(Error::invalid("rate must be positive"));
        }
        if !(self.switch_cost >= 0.0 && self.switch_cost.is_finite()) {
            return Err(Error::invalid("switch cost must be non-negative"));
        }
        Ok((l, r, rate))
    }

    /// Smallest horizon that can collect everything: `ceil(1 / rate)`.
    pub fn matched_horizon(&self) -> Result<usize> {
        let (_, _, rate) = self.exact()?;
        Ok((Rational64::from_integer(1) / rate).ceil().to_integer() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulePolicy {
    PerfectlyErgodic,
    RepeatedErgodic { segment_len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStateOutcome {
    pub visits: Vec<Side>,
    pub per_step: Vec<Rational64>,
    pub collected_exact: Rational64,
    pub collected: f64,
    pub switches: usize,
    /// First step (1-based) after which nothing remains.
    pub steps_to_complete: Option<usize>,
    /// Steps collecting nothing, over the whole schedule.
    pub zero_steps: usize,
    /// Steps collecting nothing before collection completes.
    pub idle_before_complete: usize,
    pub switch_cost_total: f64,
}

/// Steps the current side gets out of `n`: its share rounded to nearest,
/// ties going to the current side.
fn share(info: Rational64, n: usize) -> usize {
    let x = info * Rational64::from_integer(n as i64);
    let fl = x.floor();
    let frac = x - fl;
    let base = fl.to_integer() as usize;
    if frac >= Rational64::new(1, 2) {
        base + 1
    } else {
        base
    }
}

pub fn two_state_schedule(
    spec: &TwoStateSpec,
    n: usize,
    policy: SchedulePolicy,
) -> Result<TwoStateOutcome> {
    let (l, r, _) = spec.exact()?;
    if n == 0 {
        return Err(Error::invalid("horizon must be at least one step"));
    }
    let seg = match policy {
        SchedulePolicy::PerfectlyErgodic => n,
        SchedulePolicy::RepeatedErgodic { segment_len } => {
            if segment_len == 0 || !n.is_multiple_of(segment_len) {
                return Err(Error::invalid(format!(
                    "segment length {segment_len} does not divide {n}"
                )));
            }
            segment_len
        }
    };
    let info = |s: Side| match s {
        Side::Left => l,
        Side::Right => r,
    };
    let mut visits = Vec::with_capacity(n);
    let mut side = spec.start;
    for _ in 0..n / seg {
        let first = share(info(side), seg);
        visits.extend(std::iter::repeat_n(side, first));
        visits.extend(std::iter::repeat_n(side.other(), seg - first));
        side = *visits.last().unwrap();
    }
    evaluate_visits(spec, &visits)
}

/// Applies the linear collection model to an arbitrary visit sequence.
pub fn evaluate_visits(spec: &TwoStateSpec, visits: &[Side]) -> Result<TwoStateOutcome> {
    let (l, r, rate) = spec.exact()?;
    let zero = Rational64::from_integer(0);
    let mut remaining = [l, r];
    let mut per_step = Vec::with_capacity(visits.len());
    let mut steps_to_complete = None;
    let mut switches = 0;
    let mut prev = spec.start;
    for (i, &s) in visits.iter().enumerate() {
        if s != prev {
            switches += 1;
        }
        prev = s;
        let cell = &mut remaining[s as usize];
        let got = if *cell < rate { *cell } else { rate };
        *cell -= got;
        per_step.push(got);
        if steps_to_complete.is_none() && remaining[0] + remaining[1] == zero {
            steps_to_complete = Some(i + 1);
        }
    }
    let collected_exact = per_step.iter().copied().fold(zero, |a, b| a + b);
    let zero_steps = per_step.iter().filter(|v| **v == zero).count();
    let horizon = steps_to_complete.unwrap_or(visits.len());
    let idle_before_complete = per_step[..horizon].iter().filter(|v| **v == zero).count();
    Ok(TwoStateOutcome {
        visits: visits.to_vec(),
        collected: *collected_exact.numer() as f64 / *collected_exact.denom() as f64,
        per_step,
        collected_exact,
        switches,
        steps_to_complete,
        zero_steps,
        idle_before_complete,
        switch_cost_total: switches as f64 * spec.switch_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPostSpec {
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub n: usize,
}

impl TwoPostSpec {
    /// Noise levels must be positive; `sigma_right` may be infinite.
    pub fn new(sigma_left: f64, sigma_right: f64, n: usize) -> Result<Self> {
        if !(sigma_left > 0.0 && sigma_left.is_finite()) || !(sigma_right > 0.0) {
            return Err(Error::invalid("noise levels must be positive"));
        }
        if n == 0 {
            return Err(Error::invalid("at least one measurement is required"));
        }
        Ok(Self {
            sigma_left,
            sigma_right,
            n,
        })
    }
}

/// Variance of the fused distance estimate with `n_left` measurements from
/// the left post and the rest from the right.
pub fn two_post_variance(spec: &TwoPostSpec, n_left: usize) -> Result<f64> {
    if spec.n == 0 {
        return Err(Error::invalid("at least one measurement is required"));
    }
    if n_left > spec.n {
        return Err(Error::invalid(format!("n_left {n_left} exceeds {}", spec.n)));
    }
    let n_right = spec.n - n_left;
    let fisher = n_left as f64 / spec.sigma_left.powi(2) + n_right as f64 / spec.sigma_right.powi(2);
    Ok(1.0 / fisher)
}

/// Measurements an ergodic schedule takes at the left post when time is
/// split in proportion to each post's Fisher information.
pub fn ergodic_allocation(spec: &TwoPostSpec) -> usize {
    let il = spec.sigma_left.powi(-2);
    let ir = spec.sigma_right.powi(-2);
    let x = spec.n as f64 * il / (il + ir);
    (x.round() as usize).min(spec.n)
}
