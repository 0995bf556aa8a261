//! Estimators computed from assay data: plot mean and heterogeneity,
//! assay error from replicates or calibration error, standard errors,
//! t-based confidence intervals, two-plot differences and permutation tests.

mod permutation;

pub use permutation::{
    permutation_test, permutation_test_with, PermutationMethod, PermutationOptions, PermutationResult,
    EXACT_ENUMERATION_LIMIT,
};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{finite, nonnegative, positive, Error, Result};

/// Assayed concentrations of `k` composites built from `n` cores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeAssays {
    pub values: Vec<f64>,
    /// Total number of cores across all composites.
    pub n: u64,
}

impl CompositeAssays {
    pub fn new(values: Vec<f64>, n: u64) -> Result<Self> {
        CompositeAssays { values, n }.validate()
    }

    pub fn validate(self) -> Result<Self> {
        if self.values.is_empty() {
            return Err(Error::validation("values", "no assay values"));
        }
        for (i, &v) in self.values.iter().enumerate() {
            nonnegative(&format!("values[{i}]"), v)?;
        }
        if self.n < self.k() {
            return Err(Error::validation(
                "n",
                format!("n ({}) is smaller than the number of assays ({})", self.n, self.k()),
            ));
        }
        Ok(self)
    }

    pub fn k(&self) -> u64 {
        self.values.len() as u64
    }

    fn require_two(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::validation(
                "values",
                "plot heterogeneity not estimable; at least 2 assays required",
            ));
        }
        Ok(())
    }
}

/// Replicated assays of the same samples; one inner list per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateAssays {
    pub groups: Vec<Vec<f64>>,
}

impl ReplicateAssays {
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        ReplicateAssays { groups }.validate()
    }

    pub fn validate(self) -> Result<Self> {
        if self.groups.is_empty() {
            return Err(Error::validation("groups", "no replicate groups"));
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.len() < 2 {
                return Err(Error::validation(
                    format!("groups[{i}]"),
                    "each sample needs at least 2 replicates",
                ));
            }
            for (j, &v) in g.iter().enumerate() {
                nonnegative(&format!("groups[{i}][{j}]"), v)?;
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
}

/// Per-sample terms of the replicate estimator, kept for the
/// constant-variance diagnostic (σ̂²_δ plotted against the sample mean).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateGroupDiagnostic {
    pub index: usize,
    pub replicates: usize,
    pub mean: f64,
    pub sample_variance: f64,
    /// `None` when the group was excluded.
    pub sigma_delta2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateEstimate {
    pub sigma_delta: f64,
    pub sigma_delta2: f64,
    pub aggregation: Aggregation,
    pub groups_used: usize,
    pub groups: Vec<ReplicateGroupDiagnostic>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub n: u64,
    pub k: u64,
    pub mu_hat: f64,
    pub sigma_p_hat: f64,
    pub sigma_delta_hat: f64,
    pub se_hat: f64,
    pub alpha: f64,
    pub df: f64,
    pub t_quantile: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// True when the lower limit was raised to 0.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceReport {
    pub mu_hat_1: f64,
    pub mu_hat_2: f64,
    pub delta_hat: f64,
    pub se_hat: f64,
    pub alpha: f64,
    pub df: f64,
    pub t_quantile: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: Option<f64>,
    pub permutation: Option<PermutationResult>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with divisor `len - 1`.
fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    }
}

/// Mean of the assayed composites.
pub fn mean_estimate(data: &CompositeAssays) -> Result<f64> {
    if data.values.is_empty() {
        return Err(Error::validation("values", "no assay values"));
    }
    Ok(mean(&data.values))
}

/// Plot variance: the composite sample variance scaled by the composite
/// size `n/k`.
pub fn plot_variance_estimate(data: &CompositeAssays) -> Result<f64> {
    data.require_two()?;
    Ok(data.n as f64 / data.k() as f64 * sample_variance(&data.values))
}

/// Assay error SD from replicated assays.
///
/// Each sample contributes `s² / (x̄² − s²/r)`; groups whose denominator is
/// not positive are excluded with a warning. The per-sample values are then
/// aggregated by median or mean.
pub fn assay_error_from_replicates(data: &ReplicateAssays, aggregation: Aggregation) -> Result<ReplicateEstimate> {
    let data = data.clone().validate()?;
    let mut warnings = Vec::new();
    let mut used = Vec::new();
    let groups = data
        .groups
        .iter()
        .enumerate()
        .map(|(index, g)| {
            let r = g.len() as f64;
            let m = mean(g);
            let s2 = sample_variance(g);
            let denom = m * m - s2 / r;
            let sigma_delta2 = if denom > 0.0 {
                let est = s2 / denom;
                used.push(est);
                Some(est)
            } else {
                warnings.push(format!(
                    "replicate group {index} excluded: nonpositive denominator ({denom:.6})"
                ));
                None
            };
            ReplicateGroupDiagnostic {
                index,
                replicates: g.len(),
                mean: m,
                sample_variance: s2,
                sigma_delta2,
            }
        })
        .collect();
    if used.is_empty() {
        return Err(Error::validation("groups", "every replicate group was excluded"));
    }
    let groups_used = used.len();
    let sigma_delta2 = match aggregation {
        Aggregation::Median => median(&mut used),
        Aggregation::Mean => mean(&used),
    };
    Ok(ReplicateEstimate {
        sigma_delta: sigma_delta2.sqrt(),
        sigma_delta2,
        aggregation,
        groups_used,
        groups,
        warnings,
    })
}

/// Total multiplicative error of a method calibrated against a reference
/// assay: the reference error plus the prediction error.
///
/// On the original scale the prediction error is `RMSE_v / μ̂`; for models
/// fitted on log concentrations it is `exp(RMSE_v) − 1`.
pub fn prediction_method_error(base_sigma_delta: f64, rmse_v: f64, mu_hat: f64, log_scale: bool) -> Result<f64> {
    nonnegative("base_sigma_delta", base_sigma_delta)?;
    nonnegative("rmse_v", rmse_v)?;
    if log_scale {
        return Ok(base_sigma_delta + rmse_v.exp_m1());
    }
    positive("mu_hat", mu_hat)?;
    Ok(base_sigma_delta + rmse_v / mu_hat)
}

/// Plug-in SE: √(σ̂_p²(1+σ̂_δ²)/n + μ̂²σ̂_δ²/k).
pub fn se_estimate(data: &CompositeAssays, sigma_delta_hat: f64) -> Result<f64> {
    nonnegative("sigma_delta", sigma_delta_hat)?;
    let sp2 = plot_variance_estimate(data)?;
    let mu = mean(&data.values);
    let sd2 = sigma_delta_hat * sigma_delta_hat;
    Ok((sp2 * (1.0 + sd2) / data.n as f64 + mu * mu * sd2 / data.k() as f64).sqrt())
}

fn check_alpha(alpha: f64) -> Result<f64> {
    finite("alpha", alpha)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(alpha)
}

/// Degrees of freedom of the plot-variance estimate from `k` composites.
pub fn default_df(k: u64) -> f64 {
    k.saturating_sub(1).max(1) as f64
}

/// Upper `1 − α/2` quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile(alpha: f64, df: f64) -> Result<f64> {
    check_alpha(alpha)?;
    positive("df", df)?;
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::validation("df", e.to_string()))?;
    Ok(t.inverse_cdf(1.0 - alpha / 2.0))
}

/// `μ̂ ± t·SE` with `k − 1` degrees of freedom unless overridden; the lower
/// limit is truncated at 0.
pub fn confidence_interval(
    data: &CompositeAssays,
    sigma_delta_hat: f64,
    alpha: f64,
    df_override: Option<f64>,
) -> Result<EstimateReport> {
    check_alpha(alpha)?;
    let se = se_estimate(data, sigma_delta_hat)?;
    let mu = mean(&data.values);
    let df = df_override.unwrap_or(default_df(data.k()));
    let t = t_quantile(alpha, df)?;
    let lower = mu - t * se;
    Ok(EstimateReport {
        n: data.n,
        k: data.k(),
        mu_hat: mu,
        sigma_p_hat: plot_variance_estimate(data)?.sqrt(),
        sigma_delta_hat,
        se_hat: se,
        alpha,
        df,
        t_quantile: t,
        ci_low: lower.max(0.0),
        ci_high: mu + t * se,
        truncated: lower < 0.0,
    })
}

/// Difference of two plot means, SE √(V̂₁ + V̂₂), and a t interval with
/// `min(n₁, n₂)` degrees of freedom.
pub fn difference_estimate(
    data1: &CompositeAssays,
    data2: &CompositeAssays,
    sigma_delta_1: f64,
    sigma_delta_2: f64,
    alpha: f64,
) -> Result<DifferenceReport> {
    check_alpha(alpha)?;
    let se1 = se_estimate(data1, sigma_delta_1).map_err(|e| e.at("data1"))?;
    let se2 = se_estimate(data2, sigma_delta_2).map_err(|e| e.at("data2"))?;
    let (m1, m2) = (mean(&data1.values), mean(&data2.values));
    let delta = m1 - m2;
    let se = (se1 * se1 + se2 * se2).sqrt();
    let df = data1.n.min(data2.n) as f64;
    let t = t_quantile(alpha, df)?;
    Ok(DifferenceReport {
        mu_hat_1: m1,
        mu_hat_2: m2,
        delta_hat: delta,
        se_hat: se,
        alpha,
        df,
        t_quantile: t,
        ci_low: delta - t * se,
        ci_high: delta + t * se,
        p_value: None,
        permutation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_four() -> CompositeAssays {
        CompositeAssays::new(vec![2.0, 4.0], 4).unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_estimate(&CompositeAssays::new(vec![3.57], 1).unwrap()).unwrap(), 3.57);
        assert_eq!(mean_estimate(&two_four()).unwrap(), 3.0);
        assert_eq!(mean_estimate(&CompositeAssays::new(vec![1.5; 7], 21).unwrap()).unwrap(), 1.5);
    }

    #[test]
    fn empty_data_rejected() {
        assert!(CompositeAssays::new(vec![], 3).is_err());
        let raw = CompositeAssays { values: vec![], n: 3 };
        assert!(mean_estimate(&raw).is_err());
        assert!(CompositeAssays::new(vec![1.0, 2.0], 1).is_err());
    }

    #[test]
    fn plot_variance_examples() {
        assert_relative_eq!(plot_variance_estimate(&two_four()).unwrap(), 4.0);
        assert_eq!(plot_variance_estimate(&CompositeAssays::new(vec![2.2; 5], 10).unwrap()).unwrap(), 0.0);
        let err = plot_variance_estimate(&CompositeAssays::new(vec![3.0], 5).unwrap()).unwrap_err();
        assert!(err.to_string().contains("at least 2 assays required"));
    }

    proptest! {
        #[test]
        fn no_compositing_gives_textbook_variance(values in prop::collection::vec(0.0f64..100.0, 2..40)) {
            let k = values.len() as u64;
            let data = CompositeAssays::new(values.clone(), k).unwrap();
            let m = values.iter().sum::<f64>() / k as f64;
            let textbook = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1) as f64;
            let got = plot_variance_estimate(&data).unwrap();
            prop_assert!((got - textbook).abs() <= 1e-12 * textbook.max(1.0));
        }

        #[test]
        fn se_increases_with_assay_error(values in prop::collection::vec(0.1f64..10.0, 2..10), sd in 0.0f64..0.5) {
            let k = values.len() as u64;
            let data = CompositeAssays::new(values, 3 * k).unwrap();
            prop_assert!(se_estimate(&data, sd + 0.01).unwrap() > se_estimate(&data, sd).unwrap());
        }

        #[test]
        fn difference_is_antisymmetric(
            a in prop::collection::vec(0.0f64..10.0, 2..8),
            b in prop::collection::vec(0.0f64..10.0, 2..8),
        ) {
            let d1 = CompositeAssays::new(a.clone(), a.len() as u64 * 2).unwrap();
            let d2 = CompositeAssays::new(b.clone(), b.len() as u64 * 3).unwrap();
            let f = difference_estimate(&d1, &d2, 0.05, 0.1, 0.05).unwrap();
            let r = difference_estimate(&d2, &d1, 0.1, 0.05, 0.05).unwrap();
            prop_assert_eq!(f.delta_hat, -r.delta_hat);
            prop_assert!((f.ci_low + r.ci_high).abs() < 1e-12);
            prop_assert!((f.ci_high + r.ci_low).abs() < 1e-12);
        }
    }

    #[test]
    fn replicate_pair_example() {
        let data = ReplicateAssays::new(vec![vec![1.0, 1.1]]).unwrap();
        let est = assay_error_from_replicates(&data, Aggregation::Median).unwrap();
        assert_relative_eq!(est.sigma_delta2, 0.005 / 1.1, max_relative = 1e-12);
        assert!((est.sigma_delta - 0.0674).abs() < 1e-4);
        assert_eq!(est.groups_used, 1);
    }

    #[test]
    fn identical_replicates_give_zero() {
        let data = ReplicateAssays::new(vec![vec![2.0; 3], vec![0.7; 2]]).unwrap();
        let est = assay_error_from_replicates(&data, Aggregation::Mean).unwrap();
        assert_eq!(est.sigma_delta, 0.0);
    }

    #[test]
    fn median_and_mean_aggregation() {
        let groups = vec![vec![1.0, 1.1], vec![2.0, 2.0], vec![1.0, 1.2]];
        let data = ReplicateAssays::new(groups).unwrap();
        let med = assay_error_from_replicates(&data, Aggregation::Median).unwrap();
        let avg = assay_error_from_replicates(&data, Aggregation::Mean).unwrap();
        assert_relative_eq!(med.sigma_delta2, 0.005 / 1.1, max_relative = 1e-12);
        let third = 0.02 / (1.21 - 0.01);
        assert_relative_eq!(avg.sigma_delta2, (0.005 / 1.1 + third) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn wild_pair_is_excluded() {
        // x̄² − s²/r is the mean of the pairwise products, so only zeros
        // can make it vanish.
        let groups = vec![vec![0.0, 0.0, 1.0], vec![1.0, 1.1]];
        let data = ReplicateAssays::new(groups).unwrap();
        let est = assay_error_from_replicates(&data, Aggregation::Median).unwrap();
        assert_eq!(est.groups_used, 1);
        assert_eq!(est.warnings.len(), 1);
        assert!(est.groups[0].sigma_delta2.is_none());
    }

    #[test]
    fn replicates_need_two_and_nonnegative() {
        assert!(ReplicateAssays::new(vec![vec![1.0]]).is_err());
        assert!(ReplicateAssays::new(vec![vec![1.0, -0.1]]).is_err());
    }

    #[test]
    fn prediction_error_table_values() {
        let cases = [(0.31, 3.57, 0.11), (0.31, 0.48, 0.67), (0.11, 3.57, 0.05), (0.11, 0.48, 0.25)];
        for (rmse, mu, expected) in cases {
            let got = prediction_method_error(0.02, rmse, mu, false).unwrap();
            assert!((got - expected).abs() <= 0.005, "{rmse} {mu}: {got}");
        }
        assert_relative_eq!(prediction_method_error(0.02, 0.31, 3.57, false).unwrap(), 0.02 + 0.31 / 3.57);
        assert_eq!(prediction_method_error(0.02, 0.0, 3.0, false).unwrap(), 0.02);
        assert!(prediction_method_error(0.02, 0.1, 0.0, false).is_err());
    }

    #[test]
    fn prediction_error_log_scale() {
        let got = prediction_method_error(0.02, 0.1, 0.0, true).unwrap();
        assert_relative_eq!(got, 0.02 + 0.1f64.exp() - 1.0, max_relative = 1e-14);
        let small = prediction_method_error(0.0, 1e-6, 1.0, true).unwrap();
        assert_relative_eq!(small, 1e-6, max_relative = 1e-5);
    }

    #[test]
    fn se_examples() {
        let data = two_four();
        assert_relative_eq!(se_estimate(&data, 0.0).unwrap(), 1.0);
        assert_relative_eq!(se_estimate(&data, 0.1).unwrap(), 1.055f64.sqrt(), max_relative = 1e-14);
        assert!((se_estimate(&data, 0.1).unwrap() - 1.0271).abs() < 1e-4);
    }

    #[test]
    fn degenerate_interval() {
        let data = CompositeAssays::new(vec![2.5; 4], 8).unwrap();
        let r = confidence_interval(&data, 0.0, 0.05, None).unwrap();
        assert_eq!((r.ci_low, r.ci_high), (2.5, 2.5));
        assert_eq!(r.df, 3.0);
        assert_eq!(confidence_interval(&data, 0.0, 0.05, Some(7.0)).unwrap().df, 7.0);
    }

    #[test]
    fn large_n_uses_normal_quantile() {
        let t = t_quantile(0.05, 1e6).unwrap();
        assert!((t - 1.96).abs() < 1e-3, "{t}");
        // Reference value of t_{0.975, 29}.
        assert!((t_quantile(0.05, 29.0).unwrap() - 2.045_229_6).abs() < 1e-6);
    }

    #[test]
    fn lower_limit_truncated_at_zero() {
        // μ̂ = 0.1 and σ̂_p² = 0.01·n/k·... choose data with large spread.
        let data = CompositeAssays::new(vec![0.0, 0.2], 2).unwrap();
        let r = confidence_interval(&data, 0.0, 0.05, None).unwrap();
        assert_eq!(r.mu_hat, 0.1);
        assert!(r.truncated);
        assert_eq!(r.ci_low, 0.0);
        assert!(r.ci_high > r.mu_hat);
    }

    #[test]
    fn interval_needs_two_assays_and_valid_alpha() {
        let one = CompositeAssays::new(vec![1.0], 3).unwrap();
        assert!(confidence_interval(&one, 0.0, 0.05, None).is_err());
        assert!(confidence_interval(&two_four(), 0.0, 1.0, None).is_err());
        assert!(confidence_interval(&two_four(), 0.0, 0.05, Some(0.0)).is_err());
    }

    #[test]
    fn difference_example() {
        let d2 = CompositeAssays::new(vec![1.0, 3.0], 4).unwrap();
        let r = difference_estimate(&two_four(), &d2, 0.0, 0.0, 0.05).unwrap();
        assert_eq!(r.delta_hat, 1.0);
        assert_relative_eq!(r.se_hat, 2f64.sqrt(), max_relative = 1e-14);
        assert_eq!(r.df, 4.0);
        let same = difference_estimate(&two_four(), &two_four(), 0.1, 0.1, 0.05).unwrap();
        assert_eq!(same.delta_hat, 0.0);
    }

    #[test]
    fn difference_names_degenerate_dataset() {
        let one = CompositeAssays::new(vec![1.0], 3).unwrap();
        let err = difference_estimate(&two_four(), &one, 0.0, 0.0, 0.05).unwrap_err();
        assert_eq!(err.field_path(), Some("data2.values"));
    }
}
