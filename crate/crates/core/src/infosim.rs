//! Expected information densities and the linear collection model.
//!
//! The domain is split into cells, each holding the information mass the
//! density assigns to it. Every step the sensor removes `rate` from the cell
//! it occupies, or whatever is left if less remains.

use serde::{Deserialize, Serialize};

use crate::spectral::{CellGrid, DensityField, Domain, Field, RawField};
use crate::tensor;
use crate::trajectory::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Row-major, `dim x dim`, symmetric positive definite.
    pub covariance: Vec<Vec<f64>>,
    pub weight: f64,
}

impl GaussianComponent {
    pub fn isotropic(mean: Vec<f64>, sigma: f64, weight: f64) -> Self {
        let d = mean.len();
        let covariance = (0..d)
            .map(|i| (0..d).map(|j| if i == j { sigma * sigma } else { 0.0 }).collect())
            .collect();
        Self {
            mean,
            covariance,
            weight,
        }
    }
}

/// Gaussian-mixture expected information density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EidSpec {
    pub components: Vec<GaussianComponent>,
}

impl EidSpec {
    pub const DEFAULT_SIGMA: f64 = 0.12;

    /// One isotropic Gaussian at (0.65, 0.65).
    pub fn single_default() -> Self {
        Self {
            components: vec![GaussianComponent::isotropic(
                vec![0.65, 0.65],
                Self::DEFAULT_SIGMA,
                1.0,
            )],
        }
    }

    /// The default Gaussian plus a second at (0.25, 0.7), equally weighted.
    pub fn bimodal_default() -> Self {
        Self {
            components: vec![
                GaussianComponent::isotropic(vec![0.65, 0.65], Self::DEFAULT_SIGMA, 0.5),
                GaussianComponent::isotropic(vec![0.25, 0.7], Self::DEFAULT_SIGMA, 0.5),
            ],
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("EID needs at least one component"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("component weights sum to {total}, not 1")));
        }
        for (i, c) in self.components.iter().enumerate() {
            if !(c.weight > 0.0) {
                return Err(Error::invalid(format!("component {i}: weight must be positive")));
            }
            if c.mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.mean.len(),
                });
            }
            Cholesky::new(&c.covariance, dim)
                .map_err(|e| Error::invalid(format!("component {i}: {e}")))?;
        }
        Ok(())
    }
}

/// Lower-triangular factor of an SPD matrix.
struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn new(cov: &[Vec<f64>], dim: usize) -> std::result::Result<Self, String> {
        if cov.len() != dim || cov.iter().any(|r| r.len() != dim) {
            return Err(format!("covariance must be {dim}x{dim}"));
        }
        for i in 0..dim {
            for j in 0..i {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 * (cov[i][j].abs() + cov[j][i].abs()).max(1.0) {
                    return Err("covariance is not symmetric".into());
                }
            }
        }
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut s = cov[i][j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err("covariance is not positive definite".into());
                    }
                    l[i * dim + i] = s.sqrt();
                } else {
                    l[i * dim + j] = s / l[j * dim + j];
                }
            }
        }
        Ok(Self { dim, l })
    }

    /// Squared Mahalanobis norm of `r` and the log-determinant.
    fn mahalanobis(&self, r: &[f64]) -> f64 {
        let d = self.dim;
        let mut z = vec![0.0; d];
        for i in 0..d {
            let mut s = r[i];
            for k in 0..i {
                s -= self.l[i * d + k] * z[k];
            }
            z[i] = s / self.l[i * d + i];
        }
        z.iter().map(|v| v * v).sum()
    }

    fn det_sqrt(&self) -> f64 {
        (0..self.dim).map(|i| self.l[i * self.dim + i]).product()
    }
}

/// Evaluates the mixture at every cell center and renormalizes over the
/// domain, which absorbs the mass truncated at the boundary.
pub fn build_eid(spec: &EidSpec, domain: &Domain, resolution: &[usize]) -> Result<DensityField> {
    spec.validate(domain.dim())?;
    let dim = domain.dim();
    let parts: Vec<(Cholesky, &GaussianComponent)> = spec
        .components
        .iter()
        .map(|c| (Cholesky::new(&c.covariance, dim).expect("validated"), c))
        .collect();
    let norm = (2.0 * std::f64::consts::PI).powf(dim as f64 / 2.0);
    let grid = CellGrid::new(domain.clone(), resolution.to_vec())?;
    RawField::from_fn(grid, |x| {
        parts
            .iter()
            .map(|(chol, c)| {
                let r: Vec<f64> = x.iter().zip(&c.mean).map(|(a, m)| a - m).collect();
                c.weight * (-0.5 * chol.mahalanobis(&r)).exp() / (norm * chol.det_sqrt())
            })
            .sum()
    })?
    .into_density()
}

/// Remaining information per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoGrid {
    grid: CellGrid,
    remaining: Vec<f64>,
    rate: f64,
    initial_total: f64,
}

impl InfoGrid {
    pub const MASS_TOL: f64 = 1e-9;

    /// Builds a fresh grid. The masses must be non-negative and sum to one.
    pub fn new(grid: CellGrid, remaining: Vec<f64>, rate: f64) -> Result<Self> {
        if remaining.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_cells(),
                got: remaining.len(),
            });
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("collection rate must be positive, got {rate}")));
        }
        if remaining.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("cell information must be non-negative"));
        }
        let total: f64 = remaining.iter().sum();
        if (total - 1.0).abs() > Self::MASS_TOL {
            return Err(Error::invalid(format!("cell information sums to {total}, not 1")));
        }
        Ok(Self {
            grid,
            remaining,
            rate,
            initial_total: total,
        })
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn remaining(&self) -> &[f64] {
        &self.remaining
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn initial_total(&self) -> f64 {
        self.initial_total
    }

    pub fn total_remaining(&self) -> f64 {
        self.remaining.iter().sum()
    }

    /// Same masses with a different collection rate.
    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("collection rate must be positive, got {rate}")));
        }
        Ok(Self { rate, ..self.clone() })
    }

    /// Removes up to `rate` from `cell`, returning the amount collected.
    pub fn collect(&mut self, cell: usize) -> f64 {
        let got = self.rate.min(self.remaining[cell]);
        self.remaining[cell] -= got;
        got
    }

    /// Cell with the most information left; ties go to the lowest index.
    pub fn richest_cell(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.remaining.iter().enumerate() {
            if v > self.remaining[best] {
                best = i;
            }
        }
        best
    }
}

/// Per-axis overlap lengths between target cells (rows) and source cells.
fn overlap_matrix(target: &CellGrid, source: &CellGrid, axis: usize) -> Vec<f64> {
    let lower = target.domain().lower()[axis];
    let (nt, ns) = (target.resolution()[axis], source.resolution()[axis]);
    let (wt, ws) = (target.cell_width(axis), source.cell_width(axis));
    let mut m = vec![0.0; nt * ns];
    for t in 0..nt {
        let (a0, a1) = (lower + t as f64 * wt, lower + (t + 1) as f64 * wt);
        for s in 0..ns {
            let (b0, b1) = (lower + s as f64 * ws, lower + (s + 1) as f64 * ws);
            m[t * ns + s] = (a1.min(b1) - a0.max(b0)).max(0.0);
        }
    }
    m
}

/// Integrates a density over the cells of a grid with the given resolution.
/// Field cells straddling target cells contribute in proportion to their
/// overlap, treating the field as piecewise constant.
pub fn discretize(field: &DensityField, resolution: &[usize], rate: f64) -> Result<InfoGrid> {
    let source = field.grid();
    let target = CellGrid::new(source.domain().clone(), resolution.to_vec())?;
    let mut shape = source.resolution().to_vec();
    let mut data = field.values().to_vec();
    for axis in 0..shape.len() {
        let m = overlap_matrix(&target, source, axis);
        data = tensor::apply_along_axis(&data, &shape, axis, &m, resolution[axis]);
        shape[axis] = resolution[axis];
    }
    // guard against roundoff pushing the total off one
    let total: f64 = data.iter().sum();
    data.iter_mut().for_each(|v| *v = v.max(0.0) / total);
    InfoGrid::new(target, data, rate)
}

#[derive(Debug, Clone)]
pub struct Collection {
    pub collected: f64,
    pub remaining: InfoGrid,
    pub per_step: Vec<f64>,
}

impl Collection {
    pub fn percent(&self) -> f64 {
        100.0 * self.collected / self.remaining.initial_total()
    }
}

/// Runs the linear collection model along a trajectory's visited states.
/// States outside the domain collect nothing.
pub fn simulate_collection(grid: &InfoGrid, traj: &Trajectory) -> Collection {
    let cells: Vec<Option<usize>> = traj.visited().map(|x| grid.grid.cell_of(x)).collect();
    simulate_cells(grid, cells)
}

/// Runs the collection model over a sequence of occupied cells (`None` for
/// out-of-domain steps).
pub fn simulate_cells<I>(grid: &InfoGrid, cells: I) -> Collection
where
    I: IntoIterator<Item = Option<usize>>,
{
    let mut remaining = grid.clone();
    let per_step: Vec<f64> = cells
        .into_iter()
        .map(|c| c.map_or(0.0, |c| remaining.collect(c)))
        .collect();
    Collection {
        collected: per_step.iter().sum(),
        remaining,
        per_step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::rollout;
    use proptest::prelude::*;

    fn unit() -> Domain {
        Domain::unit(2)
    }

    fn default_grid() -> InfoGrid {
        let phi = build_eid(&EidSpec::single_default(), &unit(), &[100, 100]).unwrap();
        discretize(&phi, &[10, 10], 0.01).unwrap()
    }

    #[test]
    fn centered_gaussian_is_rotation_symmetric() {
        let spec = EidSpec {
            components: vec![GaussianComponent::isotropic(vec![0.5, 0.5], 0.15, 1.0)],
        };
        let f = build_eid(&spec, &unit(), &[20, 20]).unwrap();
        let g = f.grid();
        for iy in 0..20 {
            for ix in 0..20 {
                // rotate by 90 degrees about the center
                let a = f.values()[g.flat_index(&[ix, iy])];
                let b = f.values()[g.flat_index(&[19 - iy, ix])];
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn separated_modes_split_mass() {
        let spec = EidSpec {
            components: vec![
                GaussianComponent::isotropic(vec![0.2, 0.5], 0.06, 0.5),
                GaussianComponent::isotropic(vec![0.8, 0.5], 0.06, 0.5),
            ],
        };
        let f = build_eid(&spec, &unit(), &[200, 200]).unwrap();
        let g = f.grid();
        let left: f64 = (0..g.n_cells())
            .filter(|&c| g.cell_center(c)[0] < 0.5)
            .map(|c| f.values()[c] * g.cell_volume())
            .sum();
        assert!((left - 0.5).abs() < 0.01);
        assert!((f.integral() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_covariance() {
        let mut spec = EidSpec::single_default();
        spec.components[0].covariance = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(build_eid(&spec, &unit(), &[4, 4]).is_err());
        spec.components[0].covariance = vec![vec![1.0, 0.1], vec![0.0, 1.0]];
        assert!(build_eid(&spec, &unit(), &[4, 4]).is_err());
        let mut spec = EidSpec::single_default();
        spec.components[0].weight = 0.5;
        assert!(build_eid(&spec, &unit(), &[4, 4]).is_err());
    }

    #[test]
    fn uniform_discretizes_evenly() {
        let g = CellGrid::new(unit(), vec![30, 30]).unwrap();
        let info = discretize(&DensityField::uniform(g), &[10, 10], 0.01).unwrap();
        assert!(info.remaining().iter().all(|v| (v - 0.01).abs() < 1e-12));
    }

    #[test]
    fn concentrated_field_fills_one_cell() {
        let g = CellGrid::new(unit(), vec![50, 50]).unwrap();
        let mut v = vec![0.0; 2500];
        v[g.flat_index(&[33, 12])] = 2500.0;
        let info = discretize(&DensityField::new(g, v).unwrap(), &[10, 10], 0.01).unwrap();
        let cell = info.grid().flat_index(&[6, 2]);
        assert!((info.remaining()[cell] - 1.0).abs() < 1e-12);
        assert!((info.total_remaining() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_is_consistent() {
        let phi = build_eid(&EidSpec::bimodal_default(), &unit(), &[60, 60]).unwrap();
        let fine = discretize(&phi, &[20, 20], 0.01).unwrap();
        let coarse = discretize(&phi, &[10, 10], 0.01).unwrap();
        for iy in 0..10 {
            for ix in 0..10 {
                let agg: f64 = [(0, 0), (1, 0), (0, 1), (1, 1)]
                    .iter()
                    .map(|(dx, dy)| fine.remaining()[fine.grid().flat_index(&[2 * ix + dx, 2 * iy + dy])])
                    .sum();
                let c = coarse.remaining()[coarse.grid().flat_index(&[ix, iy])];
                assert!((agg - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_depletion_in_one_cell() {
        let g = CellGrid::new(unit(), vec![2, 1]).unwrap();
        let info = InfoGrid::new(g.clone(), vec![1.0, 0.0], 0.1).unwrap();
        let res = simulate_cells(&info, vec![Some(0); 10]);
        assert!((res.collected - 1.0).abs() < 1e-12);
        assert!(res.remaining.remaining()[0].abs() < 1e-12);

        let info = InfoGrid::new(g, vec![0.8, 0.2], 0.1).unwrap();
        let res = simulate_cells(&info, vec![Some(0); 20]);
        assert!((res.collected - 0.8).abs() < 1e-12);
        assert!(res.per_step[..8].iter().all(|&v| v > 0.0));
        // the eighth decrement may leave roundoff behind
        assert!(res.per_step[8..].iter().all(|&v| v < 1e-15));
    }

    #[test]
    fn out_of_domain_collects_nothing() {
        let info = default_grid();
        let traj = rollout(&[0.95, 0.5], &[vec![1.0, 0.0]], 0.5, unit()).unwrap();
        let res = simulate_collection(&info, &traj);
        assert_eq!(res.per_step, vec![0.0]);
    }

    #[test]
    fn richest_cell_ties_to_lowest_index() {
        let g = CellGrid::new(unit(), vec![2, 2]).unwrap();
        let info = InfoGrid::new(g, vec![0.1, 0.4, 0.1, 0.4], 0.1).unwrap();
        assert_eq!(info.richest_cell(), 1);
    }

    fn random_walk() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3).prop_map(|(a, b)| vec![a, b]), 1..60)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn submodular_and_conservative(ua in random_walk(), ub in random_walk()) {
            let info = default_grid();
            let a = rollout(&[0.25, 0.35], &ua, 0.5, unit()).unwrap();
            let b = rollout(a.end(), &ub, 0.5, unit()).unwrap();
            let ab = a.concat(&b).unwrap();
            let (ia, ib, iab) = (
                simulate_collection(&info, &a),
                simulate_collection(&info, &b),
                simulate_collection(&info, &ab),
            );
            prop_assert!(iab.collected <= ia.collected + ib.collected + 1e-12);
            prop_assert!(iab.collected + 1e-15 >= ia.collected);
            for r in [&ia, &ib, &iab] {
                prop_assert!((r.collected + r.remaining.total_remaining() - info.initial_total()).abs() < 1e-12);
                prop_assert!(r.per_step.iter().all(|&v| v <= info.rate()));
            }
        }

        #[test]
        fn collection_ignores_visit_order(cells in prop::collection::vec(0usize..100, 1..150), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let info = default_grid();
            let mut shuffled = cells.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = simulate_cells(&info, cells.iter().map(|&c| Some(c)));
            let b = simulate_cells(&info, shuffled.iter().map(|&c| Some(c)));
            prop_assert!((a.collected - b.collected).abs() < 1e-12);
        }
    }
}
