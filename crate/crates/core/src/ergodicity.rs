//! Ergodic metric and partial-trajectory algebra.
//!
//! A trajectory split into an executed part `a` (horizon `T_a`) and a planned
//! part `b` (horizon `T_b`) has coefficients
//! `c_k = (T_a c_k^a + T_b c_k^b) / (T_a + T_b)`. Minimizing the metric of the
//! whole trajectory over `b` is the same as making `b` ergodic with respect to
//! the residual
//!
//! ```text
//! phi'_k = (T_a + T_b) / T_b * (phi_k - T_a / (T_a + T_b) * c_k^a)
//! ```
//!
//! Horizons may be given in seconds or in steps; only their ratio matters.

use crate::spectral::{
    decompose_field, reconstruct_field, CoefficientSet, DensityField, Field, RawField,
};
use crate::{Error, Result};

/// Reconstructed residual density below `-OVERSAMPLE_TOL` marks an
/// oversampled cell.
pub const OVERSAMPLE_TOL: f64 = 1e-9;

/// Value of the weighted ergodic metric. Always non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ErgodicScore(f64);

impl ErgodicScore {
    pub fn value(self) -> f64 {
        self.0
    }

    pub(crate) fn from_raw(v: f64) -> Self {
        ErgodicScore(v.max(0.0))
    }
}

/// `sum_k Lambda_k (c_k - phi_k)^2`.
pub fn ergodic_metric(c: &CoefficientSet, phi: &CoefficientSet) -> Result<ErgodicScore> {
    c.check_compatible(phi)?;
    let e = c
        .coeffs()
        .iter()
        .zip(phi.coeffs())
        .zip(c.weights())
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum();
    Ok(ErgodicScore(e))
}

/// Coefficients of an executed partial trajectory and the two horizons.
#[derive(Debug, Clone)]
pub struct PartialTrajectoryContext {
    coeffs_a: CoefficientSet,
    horizon_a: f64,
    horizon_b: f64,
}

impl PartialTrajectoryContext {
    pub fn new(coeffs_a: CoefficientSet, horizon_a: f64, horizon_b: f64) -> Result<Self> {
        for (name, h) in [("T_a", horizon_a), ("T_b", horizon_b)] {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {h}")));
            }
        }
        Ok(Self {
            coeffs_a,
            horizon_a,
            horizon_b,
        })
    }

    pub fn coeffs_a(&self) -> &CoefficientSet {
        &self.coeffs_a
    }

    pub fn horizon_a(&self) -> f64 {
        self.horizon_a
    }

    pub fn horizon_b(&self) -> f64 {
        self.horizon_b
    }

    pub fn with_horizon_b(&self, horizon_b: f64) -> Result<Self> {
        Self::new(self.coeffs_a.clone(), self.horizon_a, horizon_b)
    }

    /// `T_a / (T_a + T_b)`.
    pub fn executed_fraction(&self) -> f64 {
        self.horizon_a / (self.horizon_a + self.horizon_b)
    }

    /// `(T_b / (T_a + T_b))^2`, the factor relating the full and residual
    /// objectives.
    pub fn objective_scale(&self) -> f64 {
        let f = self.horizon_b / (self.horizon_a + self.horizon_b);
        f * f
    }
}

/// Coefficients of the concatenated trajectory.
pub fn combined_coefficients(
    ctx: &PartialTrajectoryContext,
    coeffs_b: &CoefficientSet,
) -> Result<CoefficientSet> {
    ctx.coeffs_a.check_compatible(coeffs_b)?;
    let (ta, tb) = (ctx.horizon_a, ctx.horizon_b);
    let total = ta + tb;
    let coeffs = ctx
        .coeffs_a
        .coeffs()
        .iter()
        .zip(coeffs_b.coeffs())
        .map(|(a, b)| (ta * a + tb * b) / total)
        .collect();
    ctx.coeffs_a.with_coeffs(coeffs)
}

/// Residual coefficients `phi'_k`.
pub fn residual_coefficients(
    ctx: &PartialTrajectoryContext,
    phi: &CoefficientSet,
) -> Result<CoefficientSet> {
    ctx.coeffs_a.check_compatible(phi)?;
    let frac = ctx.executed_fraction();
    let scale = (ctx.horizon_a + ctx.horizon_b) / ctx.horizon_b;
    let coeffs = phi
        .coeffs()
        .iter()
        .zip(ctx.coeffs_a.coeffs())
        .map(|(p, a)| scale * (p - frac * a))
        .collect();
    phi.with_coeffs(coeffs)
}

fn phi_coefficients(
    ctx: &PartialTrajectoryContext,
    phi_field: &DensityField,
    order: usize,
) -> Result<CoefficientSet> {
    if ctx.coeffs_a.order() != order {
        return Err(Error::invalid(format!(
            "partial trajectory coefficients have order {}, requested {order}",
            ctx.coeffs_a.order()
        )));
    }
    if ctx.coeffs_a.domain() != phi_field.grid().domain() {
        return Err(Error::invalid("density and trajectory live on different domains"));
    }
    // reuse the trajectory's weights so the sets are comparable
    let phi = decompose_field(phi_field, order);
    CoefficientSet::from_parts(
        phi.domain().clone(),
        order,
        phi.coeffs().to_vec(),
        ctx.coeffs_a.weights().to_vec(),
    )
}

/// Reconstruction of `phi - T_a / (T_a + T_b) * c^a`, which carries mass
/// `T_b / (T_a + T_b)`.
pub fn discounted_field(
    ctx: &PartialTrajectoryContext,
    phi_field: &DensityField,
    order: usize,
    resolution: &[usize],
) -> Result<RawField> {
    let phi = phi_coefficients(ctx, phi_field, order)?;
    let frac = ctx.executed_fraction();
    let coeffs = phi
        .coeffs()
        .iter()
        .zip(ctx.coeffs_a.coeffs())
        .map(|(p, a)| p - frac * a)
        .collect();
    reconstruct_field(&phi.with_coeffs(coeffs)?, resolution)
}

/// Signed residual density `phi'` on a grid. It integrates to one but may be
/// negative where the executed part oversampled.
pub fn residual_field(
    ctx: &PartialTrajectoryContext,
    phi_field: &DensityField,
    order: usize,
    resolution: &[usize],
) -> Result<RawField> {
    let phi = phi_coefficients(ctx, phi_field, order)?;
    reconstruct_field(&residual_coefficients(ctx, &phi)?, resolution)
}

/// Cells whose residual density is negative beyond [`OVERSAMPLE_TOL`].
pub fn oversampled_states(
    ctx: &PartialTrajectoryContext,
    phi_field: &DensityField,
    order: usize,
    resolution: &[usize],
) -> Result<Vec<usize>> {
    let field = residual_field(ctx, phi_field, order, resolution)?;
    Ok(negative_cells(&field))
}

pub fn negative_cells(field: &RawField) -> Vec<usize> {
    field
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < -OVERSAMPLE_TOL)
        .map(|(i, _)| i)
        .collect()
}
