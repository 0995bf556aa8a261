//! Monte Carlo engine for composited soil surveys: synthetic plots with
//! exact moments, uniform independent random sampling of cores, random or
//! spatially ordered compositing, and multiplicative assay error.

mod experiment;

pub use experiment::{
    run_survey_experiment, simulate_replicate_groups, ClaimCheck, RunOptions, SimulationResult, SimulationSettings,
    CLAIM_TOLERANCE_SE,
};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::domain::PlotParameters;
use crate::error::{nonnegative, Error, Result};

/// Upper bound on concentrations, in %SOC.
const MAX_CONCENTRATION: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialCorrelation {
    #[default]
    None,
    /// Values increase along the plot diagonal.
    SmoothGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
}

impl Default for GridDims {
    fn default() -> Self {
        GridDims { rows: 100, cols: 100 }
    }
}

/// A discretized plot: one concentration per grid cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotField {
    pub dims: GridDims,
    pub values: Vec<f64>,
    /// Realized mean of `values`.
    pub mean: f64,
    /// Realized population SD of `values`.
    pub sd: f64,
}

impl PlotField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.dims.cols + col]
    }

    /// Position of a cell along a serpentine walk through the rows.
    pub fn transect_position(&self, cell: usize) -> usize {
        let (r, c) = (cell / self.dims.cols, cell % self.dims.cols);
        let c = if r % 2 == 0 { c } else { self.dims.cols - 1 - c };
        r * self.dims.cols + c
    }
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Builds a field whose mean is `μ` and population SD is `σ_p`.
///
/// The texture is a standardized lognormal draw. If that leaves [0, 100],
/// the field falls back to half the cells at `μ − σ_p` and half at
/// `μ + σ_p`. Pairs that neither construction can hold are rejected.
pub fn generate_plot(
    plot: &PlotParameters,
    dims: GridDims,
    texture_seed: u64,
    correlation: SpatialCorrelation,
) -> Result<PlotField> {
    let plot = plot.clone().validate()?;
    if dims.rows == 0 || dims.cols == 0 {
        return Err(Error::validation("grid", "grid needs at least one row and one column"));
    }
    let cells = dims.rows * dims.cols;
    let (mu, sp) = (plot.mu, plot.sigma_p);
    let mut values = if sp == 0.0 {
        vec![mu; cells]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(texture_seed);
        let texture = LogNormal::new(0.0, 0.5).expect("valid lognormal");
        let raw: Vec<f64> = (0..cells).map(|_| texture.sample(&mut rng)).collect();
        let (m, s) = moments(&raw);
        let scaled: Vec<f64> = raw.iter().map(|z| mu + sp * (z - m) / s).collect();
        if scaled.iter().all(|v| (0.0..=MAX_CONCENTRATION).contains(v)) {
            scaled
        } else if cells.is_multiple_of(2) && mu - sp >= 0.0 && mu + sp <= MAX_CONCENTRATION {
            let mut two = vec![mu - sp; cells / 2];
            two.extend(std::iter::repeat_n(mu + sp, cells / 2));
            two.shuffle(&mut rng);
            two
        } else {
            return Err(Error::infeasible(
                "sigma_p",
                format!("no field on [0, 100] with mean {mu} and SD {sp} on a {}x{} grid", dims.rows, dims.cols),
            ));
        }
    };
    if correlation == SpatialCorrelation::SmoothGradient {
        values.sort_by(|a, b| a.total_cmp(b));
        let mut cells_by_diagonal: Vec<usize> = (0..cells).collect();
        cells_by_diagonal.sort_by_key(|&i| (i / dims.cols + i % dims.cols, i / dims.cols));
        let mut placed = vec![0.0; cells];
        for (v, &cell) in values.iter().zip(&cells_by_diagonal) {
            placed[cell] = *v;
        }
        values = placed;
    }
    let (mean, sd) = moments(&values);
    Ok(PlotField { dims, values, mean, sd })
}

pub(crate) fn draw_cells<R: Rng>(field: &PlotField, n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..field.len())).collect()
}

/// `n` cores drawn uniformly and independently, with replacement, over the
/// grid cells.
pub fn draw_uirs(field: &PlotField, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::validation("n", "at least one core required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_cells(field, n, &mut rng).into_iter().map(|c| field.values[c]).collect())
}

pub(crate) fn transect_order(field: &PlotField, cells: &mut [usize]) {
    cells.sort_by_key(|&c| field.transect_position(c));
}

/// Like [`draw_uirs`], with the cores listed in the order a crew walking
/// the rows in a serpentine would collect them.
pub fn draw_uirs_transect(field: &PlotField, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::validation("n", "at least one core required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = draw_cells(field, n, &mut rng);
    transect_order(field, &mut cells);
    Ok(cells.into_iter().map(|c| field.values[c]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositeStrategy {
    /// Cores assigned to composites at random.
    #[default]
    Random,
    /// Consecutive cores form a composite.
    Adjacent,
    /// Core `j` goes to composite `j mod k`.
    Interleaved,
}

/// A partition of core indices `0..n` into `k` equal groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositePlan {
    pub strategy: CompositeStrategy,
    pub groups: Vec<Vec<usize>>,
}

impl CompositePlan {
    pub(crate) fn build<R: Rng>(n: usize, k: usize, strategy: CompositeStrategy, rng: &mut R) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::validation("k", "need at least one core and one composite"));
        }
        if !n.is_multiple_of(k) {
            return Err(Error::validation("k", format!("k ({k}) must divide n ({n})")));
        }
        let size = n / k;
        let groups = match strategy {
            CompositeStrategy::Adjacent => (0..k).map(|g| (g * size..(g + 1) * size).collect()).collect(),
            CompositeStrategy::Interleaved => (0..k).map(|g| (g..n).step_by(k).collect()).collect(),
            CompositeStrategy::Random => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(rng);
                idx.chunks(size).map(|c| c.to_vec()).collect()
            }
        };
        Ok(CompositePlan { strategy, groups })
    }

    pub fn new(n: usize, k: usize, strategy: CompositeStrategy, seed: u64) -> Result<Self> {
        Self::build(n, k, strategy, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Group means of `cores`.
    pub fn apply(&self, cores: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| cores[i]).sum::<f64>() / g.len() as f64)
            .collect()
    }
}

/// Composite values from `cores` pooled into `k` equal groups.
pub fn composite(cores: &[f64], k: usize, strategy: CompositeStrategy, seed: u64) -> Result<Vec<f64>> {
    Ok(CompositePlan::new(cores.len(), k, strategy, seed)?.apply(cores))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDistribution {
    #[default]
    Gamma,
    Lognormal,
}

/// Multiplicative assay error with mean 1 and SD `sigma_delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssayErrorModel {
    pub distribution: ErrorDistribution,
    pub sigma_delta: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum DeltaSampler {
    Exact,
    Gamma(Gamma<f64>),
    Lognormal(LogNormal<f64>),
}

impl DeltaSampler {
    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            DeltaSampler::Exact => 1.0,
            DeltaSampler::Gamma(d) => d.sample(rng),
            DeltaSampler::Lognormal(d) => d.sample(rng),
        }
    }
}

impl AssayErrorModel {
    pub fn new(distribution: ErrorDistribution, sigma_delta: f64) -> Result<Self> {
        nonnegative("sigma_delta", sigma_delta)?;
        Ok(AssayErrorModel { distribution, sigma_delta })
    }

    pub(crate) fn sampler(&self) -> Result<DeltaSampler> {
        nonnegative("sigma_delta", self.sigma_delta)?;
        let s2 = self.sigma_delta * self.sigma_delta;
        if s2 == 0.0 {
            return Ok(DeltaSampler::Exact);
        }
        let bad = |e: String| Error::validation("sigma_delta", e);
        Ok(match self.distribution {
            ErrorDistribution::Gamma => DeltaSampler::Gamma(Gamma::new(1.0 / s2, s2).map_err(|e| bad(e.to_string()))?),
            ErrorDistribution::Lognormal => {
                let log_var = s2.ln_1p();
                DeltaSampler::Lognormal(LogNormal::new(-log_var / 2.0, log_var.sqrt()).map_err(|e| bad(e.to_string()))?)
            }
        })
    }
}

/// Each sample multiplied by an independent draw of δ.
pub fn apply_assay_error(samples: &[f64], model: &AssayErrorModel, seed: u64) -> Result<Vec<f64>> {
    let sampler = model.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(samples.iter().map(|s| s * sampler.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topsoil_field(corr: SpatialCorrelation) -> PlotField {
        generate_plot(&PlotParameters::new(3.57, 0.68).unwrap(), GridDims::default(), 11, corr).unwrap()
    }

    #[test]
    fn constant_field() {
        let f = generate_plot(&PlotParameters::new(2.0, 0.0).unwrap(), GridDims { rows: 3, cols: 4 }, 0, SpatialCorrelation::None).unwrap();
        assert!(f.values.iter().all(|&v| v == 2.0));
        assert_eq!(f.sd, 0.0);
        assert!(draw_uirs(&f, 50, 3).unwrap().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn exact_moments() {
        for corr in [SpatialCorrelation::None, SpatialCorrelation::SmoothGradient] {
            let f = topsoil_field(corr);
            assert!((f.mean - 3.57).abs() < 1e-9);
            assert!((f.sd - 0.68).abs() < 1e-9);
            assert!(f.values.iter().all(|v| (0.0..=100.0).contains(v)));
        }
    }

    #[test]
    fn maximal_heterogeneity_is_half_and_half() {
        let f = generate_plot(&PlotParameters::new(50.0, 50.0).unwrap(), GridDims { rows: 10, cols: 10 }, 1, SpatialCorrelation::None).unwrap();
        assert_eq!(f.values.iter().filter(|&&v| v == 0.0).count(), 50);
        assert_eq!(f.values.iter().filter(|&&v| v == 100.0).count(), 50);
        assert!((f.sd - 50.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_moments_rejected() {
        let p = PlotParameters::new(1.0, 5.0).unwrap();
        let err = generate_plot(&p, GridDims::default(), 0, SpatialCorrelation::None).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
        let odd = GridDims { rows: 3, cols: 3 };
        assert!(generate_plot(&PlotParameters::new(50.0, 50.0).unwrap(), odd, 0, SpatialCorrelation::None).is_err());
    }

    #[test]
    fn gradient_field_is_sorted_along_diagonal() {
        let f = topsoil_field(SpatialCorrelation::SmoothGradient);
        assert!(f.get(0, 0) <= f.get(0, 1));
        assert!(f.get(0, 1) <= f.get(5, 5));
        assert!(f.get(50, 50) <= f.get(99, 99));
    }

    #[test]
    fn uirs_is_seeded_and_unbiased() {
        let f = topsoil_field(SpatialCorrelation::None);
        assert_eq!(draw_uirs(&f, 100, 5).unwrap(), draw_uirs(&f, 100, 5).unwrap());
        let n = 1_000_000;
        let cores = draw_uirs(&f, n, 9).unwrap();
        let mean = cores.iter().sum::<f64>() / n as f64;
        assert!((mean - f.mean).abs() < 3.0 * f.sd / (n as f64).sqrt());
        assert!(draw_uirs(&f, 0, 0).is_err());
    }

    #[test]
    fn transect_draws_follow_serpentine() {
        let f = topsoil_field(SpatialCorrelation::None);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cells = draw_cells(&f, 40, &mut rng);
        transect_order(&f, &mut cells);
        assert!(cells.windows(2).all(|w| f.transect_position(w[0]) <= f.transect_position(w[1])));
        assert_eq!(f.transect_position(f.dims.cols), 2 * f.dims.cols - 1);
    }

    #[test]
    fn composite_examples() {
        assert_eq!(composite(&[1.0, 3.0, 5.0, 7.0], 2, CompositeStrategy::Adjacent, 0).unwrap(), vec![2.0, 6.0]);
        assert_eq!(composite(&[1.0, 3.0, 5.0, 7.0], 2, CompositeStrategy::Interleaved, 0).unwrap(), vec![3.0, 5.0]);
        let cores = [1.0, 2.0, 4.0];
        assert_eq!(composite(&cores, 3, CompositeStrategy::Adjacent, 0).unwrap(), cores.to_vec());
        assert!(composite(&[1.0, 2.0, 3.0], 2, CompositeStrategy::Random, 0).is_err());
    }

    #[test]
    fn random_plan_is_a_partition() {
        let plan = CompositePlan::new(24, 6, CompositeStrategy::Random, 17).unwrap();
        let mut all: Vec<usize> = plan.groups.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..24).collect::<Vec<_>>());
        assert!(plan.groups.iter().all(|g| g.len() == 4));
        let cores: Vec<f64> = (0..24).map(|i| (i * i) as f64 * 0.1).collect();
        let comps = plan.apply(&cores);
        let m1 = cores.iter().sum::<f64>() / 24.0;
        let m2 = comps.iter().sum::<f64>() / 6.0;
        assert!((m1 - m2).abs() < 1e-12);
    }

    #[test]
    fn exact_assay_is_identity() {
        let model = AssayErrorModel::new(ErrorDistribution::Gamma, 0.0).unwrap();
        assert_eq!(apply_assay_error(&[5.0, 1.0], &model, 3).unwrap(), vec![5.0, 1.0]);
        assert!(AssayErrorModel::new(ErrorDistribution::Gamma, -0.1).is_err());
    }

    #[test]
    fn delta_moments() {
        for dist in [ErrorDistribution::Gamma, ErrorDistribution::Lognormal] {
            let model = AssayErrorModel::new(dist, 0.11).unwrap();
            let n = 1_000_000;
            let d = apply_assay_error(&vec![1.0; n], &model, 21).unwrap();
            assert!(d.iter().all(|&v| v > 0.0));
            let m = d.iter().sum::<f64>() / n as f64;
            let var = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let m4 = d.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n as f64;
            assert!((m - 1.0).abs() < 3.0 * (var / n as f64).sqrt(), "{dist:?} mean {m}");
            let se_var = ((m4 - var * var) / n as f64).sqrt();
            assert!((var - 0.0121).abs() < 3.0 * se_var, "{dist:?} var {var}");
        }
    }
}
