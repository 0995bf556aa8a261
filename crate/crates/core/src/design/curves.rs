use serde::Serialize;

use super::{estimator_variance, optimal_se, total_cost};
use crate::domain::{AssayMethod, Budget, CostModel, Design, PlotParameters};
use crate::error::{Error, Result};

/// Name of the lower-bound series: no assay error and free assays.
pub const BASELINE_SERIES: &str = "no assay error";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Budget, or assay count `k` for trade-off curves.
    pub abscissa: f64,
    pub se: f64,
    /// SE / μ; absent when μ = 0.
    pub cv: Option<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSeries {
    pub name: String,
    /// Combined preparation and assay cost of the series' method.
    pub cost_per_assay: f64,
    pub points: Vec<CurvePoint>,
}

fn cv(se: f64, mu: f64) -> Option<f64> {
    (mu > 0.0).then(|| se / mu)
}

/// Optimal SE and CV against budget for each method, followed by the
/// no-assay-error baseline.
pub fn se_budget_curve(
    plot: &PlotParameters,
    methods: &[AssayMethod],
    costs: &CostModel,
    budgets: &[f64],
) -> Result<Vec<CurveSeries>> {
    let budgets = budgets
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            Budget::new(b)
                .and_then(|bud| bud.check_against(costs).map(|_| bud))
                .map_err(|e| e.at(&format!("budgets[{i}]")))
        })
        .collect::<Result<Vec<_>>>()?;
    let baseline = AssayMethod {
        name: BASELINE_SERIES.to_string(),
        sigma_delta: 0.0,
        cost_prep: 0.0,
        cost_assay: 0.0,
    };
    methods
        .iter()
        .chain(std::iter::once(&baseline))
        .map(|method| {
            let points = budgets
                .iter()
                .map(|b| {
                    let se = optimal_se(plot, method, costs, b)?;
                    Ok(CurvePoint {
                        abscissa: b.total,
                        se,
                        cv: cv(se, plot.mu),
                        cost: b.total,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CurveSeries {
                name: method.name.clone(),
                cost_per_assay: method.cost_per_assay(),
                points,
            })
        })
        .collect()
}

/// SE and total cost for a fixed core count across assay counts.
pub fn tradeoff_curve(
    plot: &PlotParameters,
    method: &AssayMethod,
    costs: &CostModel,
    n: u64,
    k_grid: &[u64],
) -> Result<Vec<CurvePoint>> {
    k_grid
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let design = Design::new(n, k).map_err(|e| match e {
                Error::Validation { message, .. } => Error::validation(format!("k_grid[{i}]"), message),
                other => other,
            })?;
            let se = estimator_variance(plot, method, &design).sqrt();
            Ok(CurvePoint {
                abscissa: k as f64,
                se,
                cv: cv(se, plot.mu),
                cost: total_cost(costs, method, &design),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{costs, Profile};
    use approx::assert_relative_eq;

    #[test]
    fn baseline_series_is_srs_bound() {
        let plot = Profile::Topsoil.plot();
        let c = costs(5.0);
        let series = se_budget_curve(&plot, &Profile::Topsoil.methods(), &c, &[500.0, 1000.0]).unwrap();
        assert_eq!(series.len(), 4);
        let base = series.last().unwrap();
        assert_eq!(base.name, BASELINE_SERIES);
        for p in &base.points {
            assert_relative_eq!(p.se, 0.68 * 5f64.sqrt() / (p.abscissa - 200.0).sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn curves_decrease_and_dcea_dominates() {
        for profile in Profile::ALL {
            for cc in [5.0, 20.0, 40.0] {
                let grid: Vec<f64> = (0..40).map(|i| 250.0 + 125.0 * i as f64).collect();
                let series = se_budget_curve(&profile.plot(), &profile.methods(), &costs(cc), &grid).unwrap();
                for s in &series {
                    for w in s.points.windows(2) {
                        assert!(w[1].se < w[0].se);
                    }
                }
                for (i, p) in series[0].points.iter().enumerate() {
                    assert!(p.se <= series[1].points[i].se);
                    assert!(p.se <= series[2].points[i].se);
                    assert!(p.se >= series[3].points[i].se);
                    assert_relative_eq!(p.cv.unwrap(), p.se / profile.plot().mu);
                }
            }
        }
    }

    #[test]
    fn budget_at_fixed_cost_rejected() {
        let err = se_budget_curve(&Profile::Topsoil.plot(), &[], &costs(5.0), &[300.0, 200.0]).unwrap_err();
        assert_eq!(err.field_path(), Some("budgets[1].budget"));
    }

    #[test]
    fn tradeoff_curve_fig1() {
        let plot = Profile::Topsoil.plot();
        let loi = Profile::Topsoil.method("LOI").unwrap();
        let grid: Vec<u64> = (1..=100).collect();
        let pts = tradeoff_curve(&plot, &loi, &costs(5.0), 100, &grid).unwrap();
        assert!((pts[0].se - 0.3986).abs() < 5e-5);
        assert!((pts[99].se - 0.0789).abs() < 5e-5);
        for w in pts.windows(2) {
            assert!(w[1].se < w[0].se);
            assert!(w[1].cost > w[0].cost);
        }
        let none = Design::new(100, 100).unwrap();
        assert_eq!(pts[99].se, estimator_variance(&plot, &loi, &none).sqrt());
        assert!(tradeoff_curve(&plot, &loi, &costs(5.0), 100, &[101]).is_err());
    }

    #[test]
    fn zero_mean_has_no_cv() {
        let plot = PlotParameters::new(0.0, 0.0).unwrap();
        let loi = Profile::Topsoil.method("LOI").unwrap();
        let pts = tradeoff_curve(&plot, &loi, &costs(5.0), 4, &[1, 2]).unwrap();
        assert!(pts.iter().all(|p| p.cv.is_none()));
    }
}
