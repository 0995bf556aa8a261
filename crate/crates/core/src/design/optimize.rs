use serde::Serialize;

use super::{cost_nk, VarianceTerms};
use crate::domain::{AssayMethod, Budget, CostModel, Design, PlotParameters, PrecisionTarget};
use crate::error::{Error, Result};

/// Above this many candidate assay counts the integer search is restricted
/// to a window around the continuous optimum.
const SEARCH_CAP: u64 = 4_000_000;

/// Relative slack when comparing money and variance against a limit.
const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    Interior,
    /// All cores composited into one sample (k = 1).
    FullComposite,
    /// Every core assayed on its own (k = n).
    NoComposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Minimize variance subject to a budget.
    Budget,
    /// Minimize cost subject to a variance ceiling.
    Precision,
}

/// Optimal composite size `n/k` for a fixed method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeSizeResult {
    /// Unclamped closed-form ratio; `None` when unbounded (no assay error).
    pub continuous: Option<f64>,
    /// Ratio clamped to at least 1; `None` when unbounded.
    pub clamped: Option<f64>,
    /// Floor of the clamped ratio.
    pub floor: Option<u64>,
    /// Nearest integer to the clamped ratio.
    pub rounded: Option<u64>,
    /// True when compositing reduces variance at equal cost.
    pub compositing_gain: bool,
    pub boundary: BoundaryCase,
}

/// Solution of a budget- or precision-constrained allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalAllocation {
    pub problem: Problem,
    /// The budget or the variance ceiling, depending on `problem`.
    pub limit: f64,
    /// Continuous (relaxed) optimum after boundary handling.
    pub n_real: f64,
    pub k_real: f64,
    pub boundary: BoundaryCase,
    pub continuous_variance: f64,
    pub continuous_cost: f64,
    /// Real optimum rounded down (budget) or up (precision).
    pub rounded: Design,
    /// Best integer design for the problem.
    pub n: u64,
    pub k: u64,
    pub composite_size: f64,
    pub divisible: bool,
    pub achieved_variance: f64,
    pub achieved_se: f64,
    pub total_cost: f64,
}

impl OptimalAllocation {
    pub fn design(&self) -> Design {
        Design { n: self.n, k: self.k }
    }
}

fn floor_tol(x: f64) -> f64 {
    (x + REL_TOL * x.abs().max(1.0)).floor()
}

fn ceil_tol(x: f64) -> f64 {
    (x - REL_TOL * x.abs().max(1.0)).ceil()
}

/// Composite size minimizing variance per unit cost, with the compositing
/// gain condition `σ_p²(1+σ_δ²)(cost_P+cost_A) > μ²σ_δ² cost_c`.
pub fn optimal_composite_size(
    plot: &PlotParameters,
    method: &AssayMethod,
    costs: &CostModel,
) -> CompositeSizeResult {
    let terms = VarianceTerms::new(plot, method);
    let ca = method.cost_per_assay();
    let cc = costs.cost_core;
    let gain = terms.plot_term * ca > terms.assay_term * cc;

    if terms.assay_term == 0.0 && terms.plot_term > 0.0 && ca > 0.0 {
        return CompositeSizeResult {
            continuous: None,
            clamped: None,
            floor: None,
            rounded: None,
            compositing_gain: true,
            boundary: BoundaryCase::FullComposite,
        };
    }
    let raw = if terms.plot_term == 0.0 || ca == 0.0 {
        0.0
    } else {
        (terms.plot_term / terms.assay_term).sqrt() * (ca / cc).sqrt()
    };
    let clamped = raw.max(1.0);
    CompositeSizeResult {
        continuous: Some(raw),
        clamped: Some(clamped),
        floor: Some(clamped.floor() as u64),
        rounded: Some(clamped.round() as u64),
        compositing_gain: gain,
        boundary: if gain {
            BoundaryCase::Interior
        } else {
            BoundaryCase::NoComposite
        },
    }
}

/// Numerator of the optimal SE: σ_p√((1+σ_δ²)cost_c) + μσ_δ√(cost_P+cost_A).
fn se_numerator(terms: &VarianceTerms, costs: &CostModel, ca: f64) -> f64 {
    (terms.plot_term * costs.cost_core).sqrt() + (terms.assay_term * ca).sqrt()
}

/// Smallest SE reachable at budget `B` by the continuous relaxation,
/// ignoring the `1 <= k <= n` constraints.
pub fn optimal_se(
    plot: &PlotParameters,
    method: &AssayMethod,
    costs: &CostModel,
    budget: &Budget,
) -> Result<f64> {
    budget.check_against(costs)?;
    let terms = VarianceTerms::new(plot, method);
    Ok(se_numerator(&terms, costs, method.cost_per_assay()) / (budget.total - costs.cost_fixed).sqrt())
}

/// Ratio of the optimal SEs of two methods; below 1 means method 1 wins.
/// Independent of the budget.
pub fn relative_efficiency(
    plot: &PlotParameters,
    method1: &AssayMethod,
    method2: &AssayMethod,
    costs: &CostModel,
) -> Result<f64> {
    let num = se_numerator(&VarianceTerms::new(plot, method1), costs, method1.cost_per_assay());
    let den = se_numerator(&VarianceTerms::new(plot, method2), costs, method2.cost_per_assay());
    if den == 0.0 {
        return Err(Error::validation(
            "method2",
            "method 2 reaches zero standard error, the ratio is undefined",
        ));
    }
    Ok(num / den)
}

/// Minimizes the estimator variance subject to
/// `cost_0 + n·cost_c + k·(cost_P + cost_A) <= B` and `1 <= k <= n`.
///
/// The continuous solution comes from the Lagrange conditions with the
/// `k < 1` and `k > n` boundaries applied. The integer design is the exact
/// optimum over all affordable integer pairs, which can differ from simply
/// flooring the continuous solution (that design is kept in `rounded`).
pub fn optimize_for_budget(
    plot: &PlotParameters,
    method: &AssayMethod,
    costs: &CostModel,
    budget: &Budget,
) -> Result<OptimalAllocation> {
    budget.check_against(costs)?;
    let terms = VarianceTerms::new(plot, method);
    let cc = costs.cost_core;
    let ca = method.cost_per_assay();
    let spend = budget.total - costs.cost_fixed;
    let limit = budget.total;
    let affordable = |n: f64, k: f64| cost_nk(costs, ca, n, k) <= limit + REL_TOL * limit.max(1.0);

    if !affordable(1.0, 1.0) {
        return Err(Error::infeasible(
            "budget",
            format!(
                "budget {} cannot pay for the fixed cost, one core and one assay ({})",
                limit,
                cost_nk(costs, ca, 1.0, 1.0)
            ),
        ));
    }

    let no_composite = || {
        let m = spend / (cc + ca);
        (m, m, BoundaryCase::NoComposite)
    };
    let full_composite = || ((spend - ca) / cc, 1.0, BoundaryCase::FullComposite);
    let denom = se_numerator(&terms, costs, ca);
    let (n_real, k_real, boundary) = if ca == 0.0 {
        no_composite()
    } else if denom == 0.0 || terms.assay_term == 0.0 {
        full_composite()
    } else {
        let n = spend * (terms.plot_term / cc).sqrt() / denom;
        let k = spend * (terms.assay_term / ca).sqrt() / denom;
        if k < 1.0 {
            full_composite()
        } else if k > n {
            no_composite()
        } else {
            (n, k, BoundaryCase::Interior)
        }
    };

    let rounded = Design {
        n: floor_tol(n_real).max(1.0) as u64,
        k: floor_tol(k_real).clamp(1.0, floor_tol(n_real).max(1.0)) as u64,
    };

    // For each k the best n is the largest one still affordable.
    let n_for_k = |k: u64| -> u64 { floor_tol((spend - k as f64 * ca) / cc) as u64 };
    let k_max = floor_tol(spend / (cc + ca)).max(1.0) as u64;
    let (k_lo, k_hi) = search_window(1, k_max, k_real);
    let mut best: Option<(f64, f64, Design)> = None;
    if ca == 0.0 {
        let n = n_for_k(0).max(1);
        let d = Design { n, k: n };
        best = Some((terms.at(n as f64, n as f64), cost_nk(costs, ca, n as f64, n as f64), d));
    } else {
        for k in k_lo..=k_hi {
            let mut n = n_for_k(k);
            while n > k && !affordable(n as f64, k as f64) {
                n -= 1;
            }
            if n < k || !affordable(n as f64, k as f64) {
                continue;
            }
            let v = terms.at(n as f64, k as f64);
            let c = cost_nk(costs, ca, n as f64, k as f64);
            let better = match &best {
                None => true,
                Some((bv, bc, _)) => v < *bv || (v == *bv && c < *bc),
            };
            if better {
                best = Some((v, c, Design { n, k }));
            }
        }
    }
    let (achieved_variance, total_cost, design) = best.ok_or_else(|| {
        Error::infeasible("budget", "no integer design with 1 <= k <= n fits the budget")
    })?;

    Ok(OptimalAllocation {
        problem: Problem::Budget,
        limit,
        n_real,
        k_real,
        boundary,
        continuous_variance: terms.at(n_real, k_real),
        continuous_cost: cost_nk(costs, ca, n_real, k_real),
        rounded,
        n: design.n,
        k: design.k,
        composite_size: design.n as f64 / design.k as f64,
        divisible: design.is_divisible(),
        achieved_variance,
        achieved_se: achieved_variance.sqrt(),
        total_cost,
    })
}

/// Minimizes total cost subject to `V(n, k) <= target` and `1 <= k <= n`.
///
/// Continuous optimum from the Lagrange conditions:
/// `n = (a + √(a·b·cost_A/cost_c)) / V`, `k = (b + √(a·b·cost_c/cost_A)) / V`
/// with `a = σ_p²(1+σ_δ²)` and `b = μ²σ_δ²`; boundaries `k = 1, n = a/(V-b)`
/// and `k = n = (a+b)/V`. The integer design is the exact cheapest design
/// meeting the target.
pub fn optimize_for_precision(
    plot: &PlotParameters,
    method: &AssayMethod,
    costs: &CostModel,
    target: &PrecisionTarget,
) -> Result<OptimalAllocation> {
    let v = target.max_variance;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::validation("max_variance", "must be a finite number > 0"));
    }
    let terms = VarianceTerms::new(plot, method);
    let (a, b) = (terms.plot_term, terms.assay_term);
    let cc = costs.cost_core;
    let ca = method.cost_per_assay();

    let no_composite = || {
        let m = (a + b) / v;
        (m, m, BoundaryCase::NoComposite)
    };
    let (n_real, k_real, boundary) = if ca == 0.0 || a == 0.0 {
        no_composite()
    } else if b == 0.0 {
        (a / v, 1.0, BoundaryCase::FullComposite)
    } else {
        let n = (a + (a * b * ca / cc).sqrt()) / v;
        let k = (b + (a * b * cc / ca).sqrt()) / v;
        if k < 1.0 {
            (a / (v - b), 1.0, BoundaryCase::FullComposite)
        } else if k >= n {
            no_composite()
        } else {
            (n, k, BoundaryCase::Interior)
        }
    };
    // A single core already meets very loose targets.
    let (n_real, k_real) = (n_real.max(1.0), k_real.max(1.0));

    let rounded = {
        let n = ceil_tol(n_real).max(1.0);
        Design {
            n: n as u64,
            k: ceil_tol(k_real).clamp(1.0, n) as u64,
        }
    };

    let meets = |n: f64, k: f64| terms.at(n, k) <= v * (1.0 + REL_TOL);
    // Smallest n meeting the target for a given k (None if impossible).
    let n_for_k = |k: u64| -> Option<u64> {
        let kf = k as f64;
        let room = v - b / kf;
        let mut n = if a == 0.0 {
            k
        } else if room <= 0.0 {
            return None;
        } else {
            (ceil_tol(a / room) as u64).max(k)
        };
        while !meets(n as f64, kf) {
            n += 1;
        }
        Some(n)
    };

    let k_start = if b == 0.0 { 1 } else { (floor_tol(b / v) as u64).max(1) };
    let mut best: Option<(f64, f64, Design)> = None;
    let mut k = k_start;
    let mut steps = 0u64;
    loop {
        let kf = k as f64;
        if let Some((_, bc, _)) = &best {
            // n >= k, so no larger k can be cheaper.
            if cost_nk(costs, ca, kf, kf) > *bc || steps >= SEARCH_CAP {
                break;
            }
        }
        if let Some(n) = n_for_k(k) {
            let c = cost_nk(costs, ca, n as f64, kf);
            let var = terms.at(n as f64, kf);
            let better = match &best {
                None => true,
                Some((bv, bc, _)) => c < *bc || (c == *bc && var < *bv),
            };
            if better {
                best = Some((var, c, Design { n, k }));
            }
        }
        k += 1;
        steps += 1;
    }
    let (achieved_variance, total_cost, design) =
        best.ok_or_else(|| Error::infeasible("max_variance", "no integer design meets the target"))?;

    Ok(OptimalAllocation {
        problem: Problem::Precision,
        limit: v,
        n_real,
        k_real,
        boundary,
        continuous_variance: terms.at(n_real, k_real),
        continuous_cost: cost_nk(costs, ca, n_real, k_real),
        rounded,
        n: design.n,
        k: design.k,
        composite_size: design.n as f64 / design.k as f64,
        divisible: design.is_divisible(),
        achieved_variance,
        achieved_se: achieved_variance.sqrt(),
        total_cost,
    })
}

fn search_window(lo: u64, hi: u64, center: f64) -> (u64, u64) {
    if hi - lo < SEARCH_CAP {
        return (lo, hi);
    }
    let half = SEARCH_CAP / 2;
    let c = (center.max(lo as f64).min(hi as f64)) as u64;
    (c.saturating_sub(half).max(lo), (c + half).min(hi))
}
