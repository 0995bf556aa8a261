//! Shared domain types and their validation.
//!
//! Concentrations are always percent SOC; costs are unitless nonnegative
//! amounts. Every constructor and `validate` call rejects NaN and infinities.

use serde::{Deserialize, Serialize};

use crate::error::{finite, nonnegative, positive, Error, Result};

/// Largest possible plot SD in %SOC, reached by a plot that is half 0 % and
/// half 100 % SOC.
pub const MAX_SIGMA_P: f64 = 50.0;

/// Mean SOC concentration and heterogeneity of a plot (or depth profile).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotParameters {
    /// Mean concentration, %SOC.
    pub mu: f64,
    /// Plot heterogeneity (SD of point concentrations), %SOC.
    pub sigma_p: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

impl PlotParameters {
    pub fn new(mu: f64, sigma_p: f64) -> Result<Self> {
        PlotParameters {
            mu,
            sigma_p,
            label: String::new(),
        }
        .validate()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn validate(self) -> Result<Self> {
        nonnegative("mu", self.mu)?;
        nonnegative("sigma_p", self.sigma_p)?;
        if self.mu > 100.0 {
            return Err(Error::validation("mu", format!("mu exceeds 100 (got {})", self.mu)));
        }
        if self.sigma_p > MAX_SIGMA_P {
            return Err(Error::validation(
                "sigma_p",
                format!("sigma_p exceeds 50 (got {})", self.sigma_p),
            ));
        }
        Ok(self)
    }
}

/// An assay method together with the sample preparation it requires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssayMethod {
    pub name: String,
    /// SD of the multiplicative assay error (mean 1).
    pub sigma_delta: f64,
    /// Preparation cost per composite sample.
    pub cost_prep: f64,
    /// Assay cost per composite sample.
    pub cost_assay: f64,
}

impl AssayMethod {
    pub fn new(name: impl Into<String>, sigma_delta: f64, cost_prep: f64, cost_assay: f64) -> Result<Self> {
        AssayMethod {
            name: name.into(),
            sigma_delta,
            cost_prep,
            cost_assay,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self> {
        nonnegative("sigma_delta", self.sigma_delta)?;
        nonnegative("cost_prep", self.cost_prep)?;
        nonnegative("cost_assay", self.cost_assay)?;
        Ok(self)
    }

    /// Combined preparation and assay cost of one composite sample.
    pub fn cost_per_assay(&self) -> f64 {
        self.cost_prep + self.cost_assay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub cost_fixed: f64,
    pub cost_core: f64,
}

impl CostModel {
    pub fn new(cost_fixed: f64, cost_core: f64) -> Result<Self> {
        CostModel {
            cost_fixed,
            cost_core,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self> {
        nonnegative("cost_fixed", self.cost_fixed)?;
        positive("cost_core", self.cost_core)?;
        Ok(self)
    }
}

/// `n` cores composited down to `k` assayed samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Design {
    pub n: u64,
    pub k: u64,
}

/// The composite size `n / k` as a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositeSize {
    pub numerator: u64,
    pub denominator: u64,
    pub value: f64,
    /// True when every composite can hold exactly `n / k` cores.
    pub divisible: bool,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Design {
    pub fn new(n: u64, k: u64) -> Result<Self> {
        Design { n, k }.validate()
    }

    /// Accepts `k = n` (no compositing) and `k = 1` (full compositing).
    /// Non-divisible designs are valid here; see [`Design::composite_size`].
    pub fn validate(self) -> Result<Self> {
        if self.n < 1 {
            return Err(Error::validation("n", "at least one core is required"));
        }
        if self.k < 1 {
            return Err(Error::validation("k", "at least one assay is required"));
        }
        if self.k > self.n {
            return Err(Error::validation(
                "k",
                format!("k exceeds n ({} > {})", self.k, self.n),
            ));
        }
        Ok(self)
    }

    /// Builds a design from real-valued counts, rejecting fractional values.
    pub fn from_f64(n: f64, k: f64) -> Result<Self> {
        let whole = |field: &str, v: f64| -> Result<u64> {
            finite(field, v)?;
            if v.fract() != 0.0 || v < 0.0 || v > u64::MAX as f64 {
                return Err(Error::validation(field, format!("must be a nonnegative integer, got {v}")));
            }
            Ok(v as u64)
        };
        Design::new(whole("n", n)?, whole("k", k)?)
    }

    pub fn composite_size(&self) -> CompositeSize {
        let g = gcd(self.n, self.k).max(1);
        CompositeSize {
            numerator: self.n / g,
            denominator: self.k / g,
            value: self.n as f64 / self.k as f64,
            divisible: self.n.is_multiple_of(self.k),
        }
    }

    pub fn is_divisible(&self) -> bool {
        self.n.is_multiple_of(self.k)
    }

    /// Snaps `k` to the divisor of `n` closest to it (ties go to the larger
    /// divisor, which keeps more assays).
    pub fn snap_to_divisor(&self) -> Design {
        let mut best = 1;
        let mut best_gap = u64::MAX;
        let mut d = 1;
        while d * d <= self.n {
            if self.n.is_multiple_of(d) {
                for cand in [d, self.n / d] {
                    let gap = cand.abs_diff(self.k);
                    if gap < best_gap || (gap == best_gap && cand > best) {
                        best = cand;
                        best_gap = gap;
                    }
                }
            }
            d += 1;
        }
        Design { n: self.n, k: best }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub total: f64,
}

impl Budget {
    pub fn new(total: f64) -> Result<Self> {
        positive("budget", total)?;
        Ok(Budget { total })
    }

    /// Checks that the budget leaves something after the fixed cost.
    pub fn check_against(&self, costs: &CostModel) -> Result<()> {
        if self.total <= costs.cost_fixed {
            return Err(Error::infeasible(
                "budget",
                format!(
                    "budget {} does not exceed the fixed cost {}",
                    self.total, costs.cost_fixed
                ),
            ));
        }
        Ok(())
    }
}

/// Largest tolerable variance of the mean estimate, (%SOC)².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionTarget {
    pub max_variance: f64,
}

impl PrecisionTarget {
    pub fn from_variance(max_variance: f64) -> Result<Self> {
        positive("max_variance", max_variance)?;
        Ok(PrecisionTarget { max_variance })
    }

    pub fn from_se(max_se: f64) -> Result<Self> {
        positive("max_se", max_se)?;
        Ok(PrecisionTarget {
            max_variance: max_se * max_se,
        })
    }

    pub fn max_se(&self) -> f64 {
        self.max_variance.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockGeometry {
    pub depth_m: f64,
    pub area_m2: f64,
    /// g/cm³
    pub bulk_density: f64,
}

impl StockGeometry {
    pub fn new(depth_m: f64, area_m2: f64, bulk_density: f64) -> Result<Self> {
        StockGeometry {
            depth_m,
            area_m2,
            bulk_density,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self> {
        positive("depth_m", self.depth_m)?;
        positive("area_m2", self.area_m2)?;
        positive("bulk_density", self.bulk_density)?;
        Ok(self)
    }
}

/// Converts a concentration in g/kg to %SOC.
pub fn g_per_kg_to_percent(value: f64) -> f64 {
    value / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_topsoil_plot_is_valid() {
        assert!(PlotParameters::new(3.57, 0.68).is_ok());
    }

    #[test]
    fn empty_plot_is_valid() {
        assert!(PlotParameters::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn sigma_p_above_fifty_rejected() {
        let err = PlotParameters::new(3.57, 60.0).unwrap_err();
        assert_eq!(err.field_path(), Some("sigma_p"));
        assert!(err.to_string().contains("sigma_p exceeds 50"));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(PlotParameters::new(f64::NAN, 0.1).is_err());
        assert!(AssayMethod::new("x", f64::INFINITY, 0.0, 0.0).is_err());
        assert!(CostModel::new(200.0, 0.0).is_err());
        assert!(StockGeometry::new(0.3, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn design_edges() {
        let d = Design::new(30, 6).unwrap();
        let size = d.composite_size();
        assert_eq!((size.numerator, size.denominator), (5, 1));
        assert!(size.divisible);
        assert_eq!(Design::new(10, 10).unwrap().composite_size().value, 1.0);
        let err = Design::new(10, 11).unwrap_err();
        assert!(err.to_string().contains("k exceeds n"));
        assert!(Design::new(10, 0).is_err());
        assert!(Design::from_f64(10.5, 2.0).is_err());
    }

    #[test]
    fn non_divisible_design_is_flagged_not_rejected() {
        let d = Design::new(10, 4).unwrap();
        let size = d.composite_size();
        assert!(!size.divisible);
        assert_eq!((size.numerator, size.denominator), (5, 2));
    }

    #[test]
    fn snap_picks_nearest_divisor() {
        assert_eq!(Design { n: 30, k: 7 }.snap_to_divisor().k, 6);
        assert_eq!(Design { n: 129, k: 5 }.snap_to_divisor().k, 3);
        assert_eq!(Design { n: 12, k: 5 }.snap_to_divisor().k, 6);
        assert_eq!(Design { n: 13, k: 13 }.snap_to_divisor().k, 13);
    }

    #[test]
    fn budget_must_exceed_fixed_cost() {
        let costs = CostModel::new(200.0, 5.0).unwrap();
        let err = Budget::new(200.0).unwrap().check_against(&costs).unwrap_err();
        assert_eq!(err.field_path(), Some("budget"));
    }

    #[test]
    fn precision_from_se_squares() {
        let t = PrecisionTarget::from_se(0.2).unwrap();
        assert!((t.max_variance - 0.04).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn validation_is_idempotent(mu in 0.0f64..=100.0, sp in 0.0f64..=50.0) {
            let once = PlotParameters::new(mu, sp).unwrap();
            prop_assert_eq!(once.clone().validate().unwrap(), once);
        }

        #[test]
        fn design_validation_is_idempotent(n in 1u64..500, k in 1u64..500) {
            prop_assume!(k <= n);
            let d = Design::new(n, k).unwrap();
            prop_assert_eq!(d.validate().unwrap(), d);
        }
    }
}
