//! Cosine basis on a box domain.
//!
//! Basis functions are separable products of cosines normalized to unit L2
//! norm over the domain:
//!
//! ```text
//! F_k(x) = prod_i cos(k_i * pi * (x_i - lower_i) / L_i) / h_i(k_i)
//! h_i(0) = sqrt(L_i),  h_i(k) = sqrt(L_i / 2) for k > 0
//! ```
//!
//! Coefficients are stored densely over all `(K+1)^s` multi-indices with
//! `k_1` varying fastest. Gridded fields use the same convention for cells
//! (`x` fastest, so rows of a 2-D grid run along `x`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::tensor;
use crate::trajectory::Trajectory;
use crate::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() || lower.len() > MAX_DIM {
            return Err(Error::invalid(format!(
                "domain dimension must be in 1..={MAX_DIM}, got {}",
                lower.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::invalid(format!(
                    "axis {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim]).expect("unit box is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.extent(i)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Regular cell partition of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    domain: Domain,
    resolution: Vec<usize>,
}

impl CellGrid {
    pub fn new(domain: Domain, resolution: Vec<usize>) -> Result<Self> {
        domain.check_dim(resolution.len())?;
        if resolution.contains(&0) {
            return Err(Error::invalid("cell counts must be positive"));
        }
        Ok(Self { domain, resolution })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn n_cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        self.domain.extent(axis) / self.resolution[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.domain.dim()).map(|i| self.cell_width(i)).product()
    }

    /// Cell-center coordinates along one axis.
    pub fn axis_centers(&self, axis: usize) -> Vec<f64> {
        let w = self.cell_width(axis);
        let l = self.domain.lower[axis];
        (0..self.resolution[axis])
            .map(|i| l + (i as f64 + 0.5) * w)
            .collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.resolution
            .iter()
            .map(|&r| {
                let i = flat % r;
                flat /= r;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .rev()
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.domain.lower[axis] + (i as f64 + 0.5) * self.cell_width(axis))
            .collect()
    }

    /// Cell containing `x`. Cells are half-open `[a, b)` except the last
    /// along each axis, which is closed. Points outside the domain map to
    /// `None`.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        if !self.domain.contains(x) {
            return None;
        }
        let mut idx = Vec::with_capacity(x.len());
        for (axis, &v) in x.iter().enumerate() {
            let r = self.resolution[axis];
            let t = (v - self.domain.lower[axis]) / self.cell_width(axis);
            idx.push((t.floor() as usize).min(r - 1));
        }
        Some(self.flat_index(&idx))
    }
}

/// Read access shared by signed and normalized gridded fields.
pub trait Field {
    fn grid(&self) -> &CellGrid;
    fn values(&self) -> &[f64];

    /// Midpoint-rule integral over the domain.
    fn integral(&self) -> f64 {
        self.values().iter().sum::<f64>() * self.grid().cell_volume()
    }
}

/// Gridded field with no sign or normalization constraint, e.g. a
/// band-limited reconstruction or an unnormalized residual.
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    grid: CellGrid,
    values: Vec<f64>,
}

impl RawField {
    pub fn new(grid: CellGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_cells(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: CellGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.n_cells())
            .map(|c| f(&grid.cell_center(c)))
            .collect();
        Self::new(grid, values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, factor: f64) -> RawField {
        RawField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Interprets a non-negative field as a density, rescaling it to unit
    /// mass. Fails if any value is negative or the mass is not positive.
    pub fn into_density(self) -> Result<DensityField> {
        if self.values.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("density values must be non-negative"));
        }
        let mass = self.integral();
        if !(mass > 0.0) {
            return Err(Error::invalid("density has zero mass"));
        }
        let values = self.values.iter().map(|v| v / mass).collect();
        Ok(DensityField {
            grid: self.grid,
            values,
        })
    }

    /// Clamps negative values to zero and renormalizes.
    pub fn clamp_normalize(&self) -> Result<DensityField> {
        RawField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.max(0.0)).collect(),
        }
        .into_density()
    }
}

impl Field for RawField {
    fn grid(&self) -> &CellGrid {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Non-negative gridded density integrating to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: CellGrid,
    values: Vec<f64>,
}

impl DensityField {
    pub const MASS_TOL: f64 = 1e-9;

    /// Validates that `values` already form a normalized density.
    pub fn new(grid: CellGrid, values: Vec<f64>) -> Result<Self> {
        let raw = RawField::new(grid, values)?;
        if raw.values.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("density values must be non-negative"));
        }
        let mass = raw.integral();
        if (mass - 1.0).abs() > Self::MASS_TOL {
            return Err(Error::invalid(format!("density integrates to {mass}, not 1")));
        }
        Ok(Self {
            grid: raw.grid,
            values: raw.values,
        })
    }

    pub fn uniform(grid: CellGrid) -> Self {
        let v = 1.0 / grid.domain().volume();
        let values = vec![v; grid.n_cells()];
        Self { grid, values }
    }

    pub fn to_raw(&self) -> RawField {
        RawField {
            grid: self.grid.clone(),
            values: self.values.clone(),
        }
    }

    /// Mixture `a * self + (1 - a) * other` on the same grid.
    pub fn mix(&self, a: f64, other: &DensityField) -> Result<DensityField> {
        if self.grid != other.grid {
            return Err(Error::invalid("fields live on different grids"));
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::invalid("mixture weight must lie in [0, 1]"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + (1.0 - a) * y)
            .collect();
        Ok(DensityField {
            grid: self.grid.clone(),
            values,
        })
    }
}

impl Field for DensityField {
    fn grid(&self) -> &CellGrid {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per-axis frequency indices `(k_1, ..., k_s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn norm_sq(&self) -> usize {
        self.0.iter().map(|k| k * k).sum()
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

/// Coefficient weights `(1 + |k|^2)^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weighting {
    pub exponent: f64,
}

impl Weighting {
    /// Sobolev-type weighting with exponent `(s + 1) / 2`.
    pub fn sobolev(dim: usize) -> Self {
        Self {
            exponent: (dim as f64 + 1.0) / 2.0,
        }
    }

    pub fn weight(&self, k: &MultiIndex) -> f64 {
        (1.0 + k.norm_sq() as f64).powf(-self.exponent)
    }
}

/// Number of coefficients for per-axis order `order` in `dim` dimensions.
pub fn coefficient_count(dim: usize, order: usize) -> usize {
    (order + 1).pow(dim as u32)
}

/// Multi-index of flat coefficient position `flat` (`k_1` fastest).
pub fn multi_index_of(dim: usize, order: usize, mut flat: usize) -> MultiIndex {
    let n = order + 1;
    MultiIndex(
        (0..dim)
            .map(|_| {
                let k = flat % n;
                flat /= n;
                k
            })
            .collect(),
    )
}

pub fn flat_index_of(order: usize, k: &MultiIndex) -> usize {
    k.0.iter().rev().fold(0, |acc, &ki| acc * (order + 1) + ki)
}

/// Fourier coefficients together with their metric weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    domain: Domain,
    order: usize,
    coeffs: Vec<f64>,
    weights: Vec<f64>,
}

impl CoefficientSet {
    pub fn from_parts(
        domain: Domain,
        order: usize,
        coeffs: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = coefficient_count(domain.dim(), order);
        for len in [coeffs.len(), weights.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
        Ok(Self {
            domain,
            order,
            coeffs,
            weights,
        })
    }

    pub(crate) fn with_weighting(
        domain: Domain,
        order: usize,
        coeffs: Vec<f64>,
        weighting: Weighting,
    ) -> Self {
        let weights = weight_vector(domain.dim(), order, weighting);
        Self {
            domain,
            order,
            coeffs,
            weights,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, k: &MultiIndex) -> Option<f64> {
        if k.0.len() != self.domain.dim() || k.0.iter().any(|&ki| ki > self.order) {
            return None;
        }
        Some(self.coeffs[flat_index_of(self.order, k)])
    }

    pub fn multi_index(&self, flat: usize) -> MultiIndex {
        multi_index_of(self.domain.dim(), self.order, flat)
    }

    /// Copy with replaced coefficient values.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::from_parts(
            self.domain.clone(),
            self.order,
            coeffs,
            self.weights.clone(),
        )
    }

    /// Copy of the coefficients restricted to a smaller order.
    pub fn truncated(&self, order: usize) -> Result<Self> {
        if order > self.order {
            return Err(Error::invalid(format!(
                "cannot truncate order {} to larger order {order}",
                self.order
            )));
        }
        let dim = self.domain.dim();
        let n = coefficient_count(dim, order);
        let mut coeffs = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for flat in 0..n {
            let src = flat_index_of(self.order, &multi_index_of(dim, order, flat));
            coeffs.push(self.coeffs[src]);
            weights.push(self.weights[src]);
        }
        Self::from_parts(self.domain.clone(), order, coeffs, weights)
    }

    /// Fails unless `other` shares domain, order and weights.
    pub fn check_compatible(&self, other: &CoefficientSet) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::invalid("coefficient sets live on different domains"));
        }
        if self.order != other.order {
            return Err(Error::invalid(format!(
                "coefficient orders differ: {} vs {}",
                self.order, other.order
            )));
        }
        if self.weights != other.weights {
            return Err(Error::invalid("coefficient sets use different weights"));
        }
        Ok(())
    }
}

pub fn weight_vector(dim: usize, order: usize, weighting: Weighting) -> Vec<f64> {
    (0..coefficient_count(dim, order))
        .map(|flat| weighting.weight(&multi_index_of(dim, order, flat)))
        .collect()
}

fn axis_norm(extent: f64, k: usize) -> f64 {
    if k == 0 {
        extent.sqrt()
    } else {
        (extent / 2.0).sqrt()
    }
}

/// Per-axis basis factors and their derivatives at one state, reused across
/// calls to avoid allocation in the optimizer's inner loop.
#[derive(Debug, Clone)]
pub(crate) struct AxisTables {
    n: usize,
    vals: Vec<f64>,
    ders: Vec<f64>,
}

impl AxisTables {
    pub(crate) fn new(dim: usize, order: usize) -> Self {
        let n = order + 1;
        Self {
            n,
            vals: vec![0.0; dim * n],
            ders: vec![0.0; dim * n],
        }
    }

    pub(crate) fn fill(&mut self, domain: &Domain, x: &[f64], derivs: bool) {
        let n = self.n;
        for (axis, &xi) in x.iter().enumerate() {
            let extent = domain.extent(axis);
            let t = (xi - domain.lower[axis]) / extent;
            for k in 0..n {
                let freq = k as f64 * PI;
                let h = axis_norm(extent, k);
                let (s, c) = (freq * t).sin_cos();
                self.vals[axis * n + k] = c / h;
                if derivs {
                    self.ders[axis * n + k] = -freq / extent * s / h;
                }
            }
        }
    }

    pub(crate) fn axis(&self, i: usize) -> &[f64] {
        &self.vals[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn deriv(&self, i: usize) -> &[f64] {
        &self.ders[i * self.n..(i + 1) * self.n]
    }
}

fn check_point(domain: &Domain, k: &MultiIndex, x: &[f64]) -> Result<()> {
    domain.check_dim(k.0.len())?;
    domain.check_dim(x.len())
}

/// Evaluates `F_k(x)`. The cosine form is defined everywhere, so points
/// outside the domain are evaluated without complaint.
pub fn basis_eval(domain: &Domain, k: &MultiIndex, x: &[f64]) -> Result<f64> {
    check_point(domain, k, x)?;
    Ok(k.0
        .iter()
        .zip(x)
        .enumerate()
        .map(|(axis, (&ki, &xi))| {
            let extent = domain.extent(axis);
            let t = (xi - domain.lower[axis]) / extent;
            (ki as f64 * PI * t).cos() / axis_norm(extent, ki)
        })
        .product())
}

/// Gradient of `F_k` with respect to the state.
pub fn basis_grad(domain: &Domain, k: &MultiIndex, x: &[f64]) -> Result<Vec<f64>> {
    check_point(domain, k, x)?;
    let dim = domain.dim();
    let mut vals = vec![0.0; dim];
    let mut ders = vec![0.0; dim];
    for axis in 0..dim {
        let extent = domain.extent(axis);
        let t = (x[axis] - domain.lower[axis]) / extent;
        let freq = k.0[axis] as f64 * PI;
        let h = axis_norm(extent, k.0[axis]);
        vals[axis] = (freq * t).cos() / h;
        ders[axis] = -freq / extent * (freq * t).sin() / h;
    }
    Ok((0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if i == j { ders[j] } else { vals[j] })
                .product()
        })
        .collect())
}

/// Matrix of basis factors `g(k, center_m)` for one axis, row-major with
/// shape `(order + 1) x cells` when `by_freq`, else `cells x (order + 1)`.
fn axis_matrix(grid: &CellGrid, axis: usize, order: usize, by_freq: bool) -> Vec<f64> {
    let centers = grid.axis_centers(axis);
    let domain = grid.domain();
    let extent = domain.extent(axis);
    let m = centers.len();
    let n = order + 1;
    let mut out = vec![0.0; m * n];
    for (ci, &x) in centers.iter().enumerate() {
        let t = (x - domain.lower[axis]) / extent;
        for k in 0..n {
            let v = (k as f64 * PI * t).cos() / axis_norm(extent, k);
            if by_freq {
                out[k * m + ci] = v;
            } else {
                out[ci * n + k] = v;
            }
        }
    }
    out
}

/// Decomposes a gridded field by midpoint quadrature, using the default
/// weighting.
pub fn decompose_field(field: &impl Field, order: usize) -> CoefficientSet {
    let dim = field.grid().domain().dim();
    decompose_field_weighted(field, order, Weighting::sobolev(dim))
}

pub fn decompose_field_weighted(
    field: &impl Field,
    order: usize,
    weighting: Weighting,
) -> CoefficientSet {
    let grid = field.grid();
    let mut shape = grid.resolution().to_vec();
    let mut data = field.values().to_vec();
    for axis in 0..shape.len() {
        let mat = axis_matrix(grid, axis, order, true);
        data = tensor::apply_along_axis(&data, &shape, axis, &mat, order + 1);
        shape[axis] = order + 1;
    }
    let vol = grid.cell_volume();
    data.iter_mut().for_each(|v| *v *= vol);
    CoefficientSet::with_weighting(grid.domain().clone(), order, data, weighting)
}

/// Time-averaged coefficients `c_k = (1/N) sum_n F_k(x_n)` of a point set
/// given as consecutive state vectors. Every point must lie in the domain.
pub fn decompose_points<'a, I>(
    domain: &Domain,
    points: I,
    order: usize,
    weighting: Weighting,
) -> Result<CoefficientSet>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let dim = domain.dim();
    let n_coef = coefficient_count(dim, order);
    let mut sum = vec![0.0; n_coef];
    let mut tables = AxisTables::new(dim, order);
    let mut row = Vec::with_capacity(n_coef);
    let mut count = 0usize;
    for (i, x) in points.into_iter().enumerate() {
        domain.check_dim(x.len())?;
        if !domain.contains(x) {
            return Err(Error::DomainViolation { index: i });
        }
        tables.fill(domain, x, false);
        let axes: Vec<&[f64]> = (0..dim).map(|a| tables.axis(a)).collect();
        tensor::outer_product(&axes, &mut row);
        sum.iter_mut().zip(&row).for_each(|(s, r)| *s += r);
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("cannot decompose an empty point set"));
    }
    let inv = 1.0 / count as f64;
    sum.iter_mut().for_each(|s| *s *= inv);
    Ok(CoefficientSet::with_weighting(
        domain.clone(),
        order,
        sum,
        weighting,
    ))
}

/// Coefficients of a trajectory's visited states (the fixed start state is
/// excluded).
pub fn decompose_trajectory(traj: &Trajectory, order: usize) -> Result<CoefficientSet> {
    let domain = traj.domain();
    decompose_points(domain, traj.visited(), order, Weighting::sobolev(domain.dim()))
}

/// Evaluates the band-limited expansion at every cell center of a grid with
/// the given resolution.
pub fn reconstruct_field(coeffs: &CoefficientSet, resolution: &[usize]) -> Result<RawField> {
    let grid = CellGrid::new(coeffs.domain().clone(), resolution.to_vec())?;
    let order = coeffs.order();
    let mut shape = vec![order + 1; resolution.len()];
    let mut data = coeffs.coeffs().to_vec();
    for axis in 0..shape.len() {
        let mat = axis_matrix(&grid, axis, order, false);
        data = tensor::apply_along_axis(&data, &shape, axis, &mat, resolution[axis]);
        shape[axis] = resolution[axis];
    }
    RawField::new(grid, data)
}

/// Evaluates the band-limited expansion at a single point.
pub fn reconstruct_at(coeffs: &CoefficientSet, x: &[f64]) -> Result<f64> {
    let domain = coeffs.domain();
    domain.check_dim(x.len())?;
    let mut tables = AxisTables::new(domain.dim(), coeffs.order());
    tables.fill(domain, x, false);
    let axes: Vec<&[f64]> = (0..domain.dim()).map(|a| tables.axis(a)).collect();
    let mut scratch = Vec::new();
    Ok(tensor::contract(coeffs.coeffs(), &axes, &mut scratch))
}
