use std::fmt::Write;

use soc_core::design::{BoundaryCase, CompositeSizeResult, OptimalAllocation, Problem};
use soc_core::estimation::{DifferenceReport, PermutationMethod};
use soc_core::service::{
    CompositeSizeResponse, CurveKind, CurvesResponse, EfficiencyResponse, EstimateResponse, PathLengthResponse,
    SigmaDeltaSource, StockResponse, TablesReport,
};
use soc_core::simulator::SimulationResult;

/// Six significant digits, trailing zeros dropped.
fn g(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (5 - x.abs().log10().floor() as i32).clamp(0, 12) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "unbounded".to_string(), g)
}

fn boundary(b: BoundaryCase) -> &'static str {
    match b {
        BoundaryCase::Interior => "interior",
        BoundaryCase::FullComposite => "all cores in one composite (k = 1)",
        BoundaryCase::NoComposite => "no compositing (k = n)",
    }
}

pub(crate) fn allocation(a: &OptimalAllocation, method: &str) -> String {
    let mut s = String::new();
    let goal = match a.problem {
        Problem::Budget => format!("minimum variance within budget {}", g(a.limit)),
        Problem::Precision => format!("minimum cost for variance <= {} (SE <= {})", g(a.limit), g(a.limit.sqrt())),
    };
    let _ = writeln!(s, "method            {method}");
    let _ = writeln!(s, "objective         {goal}");
    let _ = writeln!(s, "cores n           {}", a.n);
    let _ = writeln!(s, "assays k          {}", a.k);
    let _ = writeln!(
        s,
        "cores/composite   {}{}",
        g(a.composite_size),
        if a.divisible { "" } else { " (k does not divide n)" }
    );
    let _ = writeln!(s, "SE                {}", g(a.achieved_se));
    let _ = writeln!(s, "variance          {}", g(a.achieved_variance));
    let _ = writeln!(s, "total cost        {}", g(a.total_cost));
    let _ = writeln!(s, "continuous n, k   {}, {}", g(a.n_real), g(a.k_real));
    let _ = writeln!(s, "rounded n, k      {}, {}", a.rounded.n, a.rounded.k);
    let _ = writeln!(s, "boundary          {}", boundary(a.boundary));
    s
}

fn size_lines(s: &mut String, r: &CompositeSizeResult) {
    let _ = writeln!(s, "optimal n/k       {}", opt(r.continuous));
    let _ = writeln!(s, "clamped           {}", opt(r.clamped));
    let _ = writeln!(s, "rounded           {}", r.rounded.map_or("unbounded".into(), |v| v.to_string()));
    let _ = writeln!(s, "compositing gain  {}", if r.compositing_gain { "yes" } else { "no" });
    let _ = writeln!(s, "boundary          {}", boundary(r.boundary));
}

pub(crate) fn composite_size(r: &CompositeSizeResponse) -> String {
    let mut s = format!("method            {}\n", r.method);
    size_lines(&mut s, &r.size);
    s
}

pub(crate) fn efficiency(r: &EfficiencyResponse) -> String {
    format!(
        "relative efficiency of {} versus {}: {}\n",
        r.method2,
        r.method1,
        g(r.relative_efficiency)
    )
}

pub(crate) fn curves(r: &CurvesResponse, cv: bool) -> String {
    let mut s = String::new();
    let x = match r.kind {
        CurveKind::SeVsBudget => "budget",
        CurveKind::SeVsAssays => "k",
    };
    let y = if cv { "cv" } else { "se" };
    for series in &r.series {
        let _ = writeln!(s, "# {}", series.name);
        let _ = writeln!(s, "{x:>12} {y:>14} {:>12}", "cost");
        for p in &series.points {
            let v = if cv { p.cv.map_or("-".into(), g) } else { g(p.se) };
            let _ = writeln!(s, "{:>12} {:>14} {:>12}", g(p.abscissa), v, g(p.cost));
        }
    }
    s
}

pub(crate) fn estimate(r: &EstimateResponse) -> String {
    let e = &r.estimate;
    let mut s = String::new();
    let source = match r.sigma_delta_source {
        SigmaDeltaSource::Given => "given",
        SigmaDeltaSource::Replicates => "estimated from replicates",
    };
    let _ = writeln!(s, "composites k      {} (n = {} cores)", e.k, e.n);
    let _ = writeln!(s, "mean              {}", g(e.mu_hat));
    let _ = writeln!(s, "sigma_p           {}", g(e.sigma_p_hat));
    let _ = writeln!(s, "sigma_delta       {} ({source})", g(e.sigma_delta_hat));
    let _ = writeln!(s, "SE                {}", g(e.se_hat));
    let _ = writeln!(
        s,
        "{}% CI            [{}, {}]{}",
        g(100.0 * (1.0 - e.alpha)),
        g(e.ci_low),
        g(e.ci_high),
        if e.truncated { " (lower limit truncated at 0)" } else { "" }
    );
    let _ = writeln!(s, "t, df             {}, {}", g(e.t_quantile), g(e.df));
    if let Some(rep) = &r.replicate_estimate {
        let _ = writeln!(s, "replicate groups  {} of {} used", rep.groups_used, rep.groups.len());
    }
    s
}

pub(crate) fn diff(r: &DifferenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mean 1            {}", g(r.mu_hat_1));
    let _ = writeln!(s, "mean 2            {}", g(r.mu_hat_2));
    let _ = writeln!(s, "difference        {}", g(r.delta_hat));
    let _ = writeln!(s, "SE                {}", g(r.se_hat));
    let _ = writeln!(
        s,
        "{}% CI            [{}, {}] (df = {})",
        g(100.0 * (1.0 - r.alpha)),
        g(r.ci_low),
        g(r.ci_high),
        g(r.df)
    );
    if let Some(p) = &r.permutation {
        let how = match p.method {
            PermutationMethod::Exact => "exact",
            PermutationMethod::MonteCarlo => "Monte Carlo",
        };
        let _ = writeln!(s, "permutation p     {} ({how}, {} permutations)", g(p.p_value), p.permutations);
    }
    s
}

pub(crate) fn simulation(r: &SimulationResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n = {}, k = {}, sigma_delta = {}, {} replications, seed {}",
        r.n,
        r.k,
        g(r.sigma_delta),
        r.replications,
        r.seed
    );
    let _ = writeln!(s, "field mean, sd    {}, {}", g(r.field_mean), g(r.field_sd));
    let _ = writeln!(s, "mean of mu_hat    {} (MC SE {})", g(r.mean_mu_hat), g(r.mc_se_mean));
    let _ = writeln!(
        s,
        "var of mu_hat     {} (MC SE {}), formula {}",
        g(r.var_mu_hat),
        g(r.mc_se_var),
        g(r.theoretical_variance)
    );
    if let (Some(m), Some(e)) = (r.mean_sigma_p2_hat, r.expected_sigma_p2_hat) {
        let _ = writeln!(s, "mean sigma_p2_hat {m:.6} (expected {})", g(e));
    }
    if let Some(c) = r.ci_coverage {
        let _ = writeln!(s, "CI coverage       {} at nominal {}", g(c), g(1.0 - r.alpha));
    }
    for c in &r.checks {
        let _ = writeln!(
            s,
            "{:<26} {}  z = {}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.z.map_or("-".into(), |z| format!("{z:.2}"))
        );
    }
    s
}

pub(crate) fn stock(r: &StockResponse) -> String {
    format!("stock             {} g ({} Mg/ha)\n", g(r.stock_g), g(r.stock_mg_per_ha))
}

pub(crate) fn path_length(r: &PathLengthResponse) -> String {
    format!(
        "expected shortest path {} m for {} points over {} m²\ntransect {} m (ratio {})\n",
        g(r.expected_path_m),
        r.n,
        g(r.area_m2),
        g(r.transect_m),
        g(r.transect_to_path)
    )
}

pub(crate) fn tables(r: &TablesReport) -> String {
    let mut s = String::from("Optimal cores per composite\n");
    let costs: Vec<f64> = r
        .composite_sizes
        .first()
        .map(|row| row.cells.iter().map(|c| c.cost_core).collect())
        .unwrap_or_default();
    let _ = write!(s, "{:<10} {:<10}", "profile", "method");
    for c in &costs {
        let _ = write!(s, " {:>16}", format!("cc={}", g(*c)));
    }
    s.push('\n');
    for row in &r.composite_sizes {
        let _ = write!(s, "{:<10} {:<10}", row.profile, row.method);
        for cell in &row.cells {
            let v = match (cell.size.clamped, cell.size.floor) {
                (Some(c), Some(f)) => format!("{} ({f})", g(c)),
                _ => "unbounded".into(),
            };
            let _ = write!(s, " {v:>16}");
        }
        s.push('\n');
    }
    s.push_str("\nRelative efficiency\n");
    for row in &r.relative_efficiencies {
        let _ = write!(s, "{:<10} cc={:<6}", row.profile, g(row.cost_core));
        for c in &row.comparisons {
            let _ = write!(s, " {}/{}={:.3}", row.reference, c.method, c.relative_efficiency);
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "\nCurve data ({} budget series, {}-point tradeoff) available with --output json or csv",
        r.budget_curves.len(),
        r.tradeoff.points.len()
    );
    s
}

#[cfg(test)]
mod tests {
    use super::g;

    #[test]
    fn six_significant_digits() {
        assert_eq!(g(0.0668102345), "0.0668102");
        assert_eq!(g(996.0), "996");
        assert_eq!(g(21.72197), "21.722");
        assert_eq!(g(42840000.0), "42840000");
        assert_eq!(g(0.0), "0");
    }
}
