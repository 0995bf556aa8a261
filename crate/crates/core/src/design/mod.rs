//! Closed-form survey design: estimator variance, the cost model, optimal
//! compositing, budget- and precision-constrained allocations, relative
//! efficiency of assay methods, plot-ready curves and field logistics.
//!
//! Every function here is pure.

mod curves;
mod logistics;
mod optimize;

pub use curves::{se_budget_curve, tradeoff_curve, CurvePoint, CurveSeries, BASELINE_SERIES};
pub use logistics::{
    expected_shortest_path, stock_from_concentration, transect_length, BHH_ASYMPTOTIC, BHH_ROUNDED,
};
pub use optimize::{
    optimal_composite_size, optimal_se, optimize_for_budget, optimize_for_precision,
    relative_efficiency, BoundaryCase, CompositeSizeResult, OptimalAllocation, Problem,
};

use crate::domain::{AssayMethod, CostModel, Design, PlotParameters};

/// The two variance components of the mean estimate, split so that
/// `V(n, k) = plot_term / n + assay_term / k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTerms {
    /// σ_p²(1 + σ_δ²): heterogeneity, inflated by assay error.
    pub plot_term: f64,
    /// μ²σ_δ²: assay error on the mean level.
    pub assay_term: f64,
}

impl VarianceTerms {
    pub fn new(plot: &PlotParameters, method: &AssayMethod) -> Self {
        let sd2 = method.sigma_delta * method.sigma_delta;
        VarianceTerms {
            plot_term: plot.sigma_p * plot.sigma_p * (1.0 + sd2),
            assay_term: plot.mu * plot.mu * sd2,
        }
    }

    pub fn at(&self, n: f64, k: f64) -> f64 {
        self.plot_term / n + self.assay_term / k
    }
}

/// Variance of the mean of `k` assayed composites built from `n` cores.
pub fn estimator_variance(plot: &PlotParameters, method: &AssayMethod, design: &Design) -> f64 {
    VarianceTerms::new(plot, method).at(design.n as f64, design.k as f64)
}

pub fn estimator_se(plot: &PlotParameters, method: &AssayMethod, design: &Design) -> f64 {
    estimator_variance(plot, method, design).sqrt()
}

/// Fixed cost plus per-core sampling plus per-composite preparation and assay.
pub fn total_cost(costs: &CostModel, method: &AssayMethod, design: &Design) -> f64 {
    cost_nk(costs, method.cost_per_assay(), design.n as f64, design.k as f64)
}

pub(crate) fn cost_nk(costs: &CostModel, cost_per_assay: f64, n: f64, k: f64) -> f64 {
    costs.cost_fixed + n * costs.cost_core + k * cost_per_assay
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{costs, Profile};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn loi_top() -> (PlotParameters, AssayMethod) {
        (Profile::Topsoil.plot(), Profile::Topsoil.method("LOI").unwrap())
    }

    #[test]
    fn no_assay_error_reduces_to_srs_variance() {
        let plot = PlotParameters::new(3.57, 0.68).unwrap();
        let exact = AssayMethod::new("exact", 0.0, 1.0, 1.0).unwrap();
        for k in [1, 5, 17] {
            let v = estimator_variance(&plot, &exact, &Design::new(17, k).unwrap());
            assert_relative_eq!(v, 0.68 * 0.68 / 17.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn loi_topsoil_full_composite() {
        let (plot, loi) = loi_top();
        let d = Design::new(100, 1).unwrap();
        // 0.68²·1.0121/100 + 3.57²·0.0121
        assert_relative_eq!(estimator_variance(&plot, &loi, &d), 0.158_893_240_4, max_relative = 1e-9);
        assert_relative_eq!(estimator_se(&plot, &loi, &d), 0.398_614_149_8, max_relative = 1e-9);
    }

    #[test]
    fn loi_topsoil_se_ratio_is_about_five() {
        let (plot, loi) = loi_top();
        let full = estimator_se(&plot, &loi, &Design::new(100, 1).unwrap());
        let none = estimator_se(&plot, &loi, &Design::new(100, 100).unwrap());
        assert_relative_eq!(none, 0.078_880_183_2, max_relative = 1e-9);
        assert!((full / none - 5.05).abs() < 0.01);
    }

    #[test]
    fn cost_examples() {
        let (_, loi) = loi_top();
        let c = costs(5.0);
        assert_relative_eq!(total_cost(&c, &loi, &Design::new(100, 1).unwrap()), 709.25);
        let dcea = Profile::Topsoil.method("DC-EA").unwrap();
        assert_relative_eq!(total_cost(&c, &dcea, &Design::new(129, 5).unwrap()), 975.0);
        assert_relative_eq!(
            total_cost(&c, &dcea, &Design::new(1, 1).unwrap()),
            200.0 + 5.0 + 26.0
        );
    }

    proptest! {
        #[test]
        fn variance_monotone(
            mu in 0.01f64..50.0, sp in 0.01f64..20.0, sd in 0.001f64..1.0,
            n in 2u64..200, k in 1u64..200,
        ) {
            prop_assume!(k < n);
            let plot = PlotParameters::new(mu, sp).unwrap();
            let m = AssayMethod::new("m", sd, 1.0, 1.0).unwrap();
            let v = |n, k, m: &AssayMethod, p: &PlotParameters| estimator_variance(p, m, &Design { n, k });
            let base = v(n, k, &m, &plot);
            prop_assert!(v(n + 1, k, &m, &plot) < base);
            prop_assert!(v(n, k + 1, &m, &plot) < base);
            let noisier = AssayMethod::new("m", sd * 1.1, 1.0, 1.0).unwrap();
            prop_assert!(v(n, k, &noisier, &plot) > base);
            let rougher = PlotParameters::new(mu, (sp * 1.1).min(50.0)).unwrap();
            prop_assert!(v(n, k, &m, &rougher) > base);
        }
    }
}
