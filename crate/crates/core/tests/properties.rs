use proptest::prelude::*;
use soc_core::design::{
    optimal_composite_size, optimal_se, optimize_for_budget, optimize_for_precision, relative_efficiency, BoundaryCase,
};
use soc_core::estimation::permutation_test;
use soc_core::simulator::{run_survey_experiment, RunOptions, SimulationSettings};
use soc_core::{AssayMethod, Budget, CostModel, PlotParameters, PrecisionTarget};

fn inputs() -> impl Strategy<Value = (PlotParameters, AssayMethod, CostModel)> {
    (0.1f64..10.0, 0.05f64..3.0, 0.0f64..0.8, 0.0f64..30.0, 0.5f64..40.0, 0.0f64..300.0, 0.5f64..40.0).prop_map(
        |(mu, sp, sd, prep, assay, fixed, core)| {
            (
                PlotParameters::new(mu, sp).unwrap(),
                AssayMethod::new("m", sd, prep, assay).unwrap(),
                CostModel::new(fixed, core).unwrap(),
            )
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn efficiency_is_reciprocal(
        (plot, a, costs) in inputs(),
        sd in 0.01f64..0.8, prep in 0.0f64..30.0, assay in 0.5f64..40.0,
    ) {
        let b = AssayMethod::new("b", sd, prep, assay).unwrap();
        let ab = relative_efficiency(&plot, &a, &b, &costs).unwrap();
        let ba = relative_efficiency(&plot, &b, &a, &costs).unwrap();
        prop_assert!((ab * ba - 1.0).abs() < 1e-12, "{ab} * {ba}");
    }

    #[test]
    fn optimal_se_ignores_currency((plot, m, costs) in inputs(), extra in 10.0f64..5000.0, scale in 0.01f64..100.0) {
        let budget = Budget::new(costs.cost_fixed + extra).unwrap();
        let base = optimal_se(&plot, &m, &costs, &budget).unwrap();
        let m2 = AssayMethod::new("m", m.sigma_delta, m.cost_prep * scale, m.cost_assay * scale).unwrap();
        let c2 = CostModel::new(costs.cost_fixed * scale, costs.cost_core * scale).unwrap();
        let b2 = Budget::new(c2.cost_fixed + extra * scale).unwrap();
        let scaled = optimal_se(&plot, &m2, &c2, &b2).unwrap();
        prop_assert!((scaled / base - 1.0).abs() < 1e-12, "{base} vs {scaled}");
    }

    #[test]
    fn interior_ratio_matches_composite_size((plot, m, costs) in inputs(), extra in 50.0f64..20_000.0) {
        let budget = Budget::new(costs.cost_fixed + extra).unwrap();
        let alloc = optimize_for_budget(&plot, &m, &costs, &budget).unwrap();
        prop_assume!(alloc.boundary == BoundaryCase::Interior);
        let size = optimal_composite_size(&plot, &m, &costs).continuous.unwrap();
        let ratio = alloc.n_real / alloc.k_real;
        prop_assert!((ratio / size - 1.0).abs() < 1e-9, "{ratio} vs {size}");
    }

    #[test]
    fn budget_precision_round_trip((plot, m, costs) in inputs(), extra in 50.0f64..5000.0) {
        let budget = Budget::new(costs.cost_fixed + extra).unwrap();
        let Ok(by_budget) = optimize_for_budget(&plot, &m, &costs, &budget) else {
            return Ok(());
        };
        let target = PrecisionTarget::from_variance(by_budget.achieved_variance).unwrap();
        let by_precision = optimize_for_precision(&plot, &m, &costs, &target).unwrap();
        let slack = costs.cost_core + m.cost_prep + m.cost_assay;
        prop_assert!(
            by_precision.total_cost <= budget.total + slack + 1e-9 * budget.total,
            "{} > {} + {slack}", by_precision.total_cost, budget.total
        );
        prop_assert!(by_precision.achieved_variance <= target.max_variance * (1.0 + 1e-9));
    }
}

/// Brute force over every ordering of the pooled values.
fn enumerated_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let observed = (mean(x) - mean(y)).abs();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    let (mut hits, mut total) = (0u64, 0u64);
    loop {
        let g: Vec<f64> = order.iter().map(|&i| pooled[i]).collect();
        let (a, b) = g.split_at(x.len());
        if (mean(a) - mean(b)).abs() >= observed - 1e-9 {
            hits += 1;
        }
        total += 1;
        // next lexicographic permutation
        let Some(i) = (0..order.len() - 1).rev().find(|&i| order[i] < order[i + 1]) else {
            break;
        };
        let j = (i + 1..order.len()).rev().find(|&j| order[j] > order[i]).unwrap();
        order.swap(i, j);
        order[i + 1..].reverse();
    }
    hits as f64 / total as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn permutation_p_matches_enumeration(
        x in prop::collection::vec(0u8..12, 1..5),
        y in prop::collection::vec(0u8..12, 1..5),
    ) {
        prop_assume!(x.len() + y.len() <= 8);
        let x: Vec<f64> = x.into_iter().map(|v| f64::from(v) / 4.0).collect();
        let y: Vec<f64> = y.into_iter().map(|v| f64::from(v) / 4.0).collect();
        let got = permutation_test(&x, &y, 1000, 1).unwrap().p_value;
        let want = enumerated_p(&x, &y);
        prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn simulation_ignores_thread_count(seed in any::<u64>(), threads in 2usize..9) {
        let plot = PlotParameters::new(3.57, 0.68).unwrap();
        let m = AssayMethod::new("LOI", 0.11, 8.0, 1.25).unwrap();
        let settings = SimulationSettings::new(20, 4, 300, seed);
        let one = run_survey_experiment(&plot, &m, &settings, &RunOptions { threads: Some(1), ..Default::default() }).unwrap();
        let many = run_survey_experiment(&plot, &m, &settings, &RunOptions { threads: Some(threads), ..Default::default() }).unwrap();
        prop_assert_eq!(one, many);
    }
}
