//! Request and response types shared by the command-line tool and the
//! HTTP service, with one pure handler per operation. Both front ends
//! serialize the same [`Response`] so their JSON agrees field for field.

use serde::{Deserialize, Serialize};

use crate::design::{
    expected_shortest_path, optimal_composite_size, optimize_for_budget, optimize_for_precision, relative_efficiency,
    se_budget_curve, stock_from_concentration, tradeoff_curve, transect_length, CompositeSizeResult, CurvePoint,
    CurveSeries, OptimalAllocation, BHH_ROUNDED,
};
use crate::domain::{AssayMethod, Budget, CostModel, PlotParameters, StockGeometry};
use crate::error::{Error, Result};
use crate::estimation::{
    assay_error_from_replicates, confidence_interval, difference_estimate, permutation_test, Aggregation,
    CompositeAssays, DifferenceReport, EstimateReport, ReplicateAssays, ReplicateEstimate,
};
use crate::io::PrecisionSpec;
use crate::presets::{Profile, COST_FIXED, CORE_COSTS};
use crate::simulator::{run_survey_experiment, RunOptions, SimulationResult, SimulationSettings};

pub const SCHEMA_VERSION: &str = "1";

/// A response body tagged with the schema version.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Response<T> {
    pub schema_version: &'static str,
    #[serde(flatten)]
    pub body: T,
}

pub fn respond<T>(body: T) -> Response<T> {
    Response {
        schema_version: SCHEMA_VERSION,
        body,
    }
}

/// Machine-readable error body: `{code, message, field_path}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub code: String,
    pub message: String,
    pub field_path: Option<String>,
}

impl From<&Error> for ErrorEnvelope {
    fn from(e: &Error) -> Self {
        let code = match e {
            Error::Validation { .. } => "validation",
            Error::Infeasible { .. } => "infeasible",
            Error::Parse { .. } => "parse",
            Error::TimeBudget { .. } => "time_budget",
        };
        ErrorEnvelope {
            code: code.to_string(),
            message: e.to_string(),
            field_path: e.field_path().map(str::to_string),
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_permutations() -> u64 {
    10_000
}
fn default_beta() -> f64 {
    BHH_ROUNDED
}

fn check_inputs(plot: &PlotParameters, costs: &CostModel) -> Result<()> {
    plot.clone().validate().map_err(|e| e.at("plot"))?;
    costs.validate().map_err(|e| e.at("costs"))?;
    Ok(())
}

fn check_method(method: &AssayMethod, path: &str) -> Result<()> {
    method.clone().validate().map_err(|e| e.at(path)).map(drop)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRequest {
    pub plot: PlotParameters,
    pub costs: CostModel,
    pub method: AssayMethod,
    pub budget: f64,
}

pub fn optimize(req: &OptimizeRequest) -> Result<OptimalAllocation> {
    check_inputs(&req.plot, &req.costs)?;
    check_method(&req.method, "method")?;
    let budget = Budget::new(req.budget)?;
    optimize_for_budget(&req.plot, &req.method, &req.costs, &budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinCostRequest {
    pub plot: PlotParameters,
    pub costs: CostModel,
    pub method: AssayMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_se: Option<f64>,
}

pub fn min_cost(req: &MinCostRequest) -> Result<OptimalAllocation> {
    check_inputs(&req.plot, &req.costs)?;
    check_method(&req.method, "method")?;
    let target = PrecisionSpec {
        max_variance: req.max_variance,
        max_se: req.max_se,
    }
    .target()
    .map_err(|e| match e {
        Error::Validation { field, message } if field.is_empty() => Error::validation("max_se", message),
        other => other,
    })?;
    optimize_for_precision(&req.plot, &req.method, &req.costs, &target)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeSizeRequest {
    pub plot: PlotParameters,
    pub costs: CostModel,
    pub method: AssayMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeSizeResponse {
    pub method: String,
    #[serde(flatten)]
    pub size: CompositeSizeResult,
}

pub fn composite_size(req: &CompositeSizeRequest) -> Result<CompositeSizeResponse> {
    check_inputs(&req.plot, &req.costs)?;
    check_method(&req.method, "method")?;
    Ok(CompositeSizeResponse {
        method: req.method.name.clone(),
        size: optimal_composite_size(&req.plot, &req.method, &req.costs),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyRequest {
    pub plot: PlotParameters,
    pub costs: CostModel,
    pub method1: AssayMethod,
    pub method2: AssayMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyResponse {
    pub method1: String,
    pub method2: String,
    /// Optimal SE with method 1 over optimal SE with method 2 at any budget.
    pub relative_efficiency: f64,
}

pub fn efficiency(req: &EfficiencyRequest) -> Result<EfficiencyResponse> {
    check_inputs(&req.plot, &req.costs)?;
    check_method(&req.method1, "method1")?;
    check_method(&req.method2, "method2")?;
    Ok(EfficiencyResponse {
        method1: req.method1.name.clone(),
        method2: req.method2.name.clone(),
        relative_efficiency: relative_efficiency(&req.plot, &req.method1, &req.method2, &req.costs)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesRequest {
    pub plot: PlotParameters,
    pub costs: CostModel,
    pub methods: Vec<AssayMethod>,
    /// Budget grid for optimal SE curves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<f64>>,
    /// Fixed core count for SE and cost against assay count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_n: Option<u64>,
    /// Assay counts for the fixed-n curves; defaults to every k in 1..=n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    SeVsBudget,
    SeVsAssays,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvesResponse {
    pub kind: CurveKind,
    pub series: Vec<CurveSeries>,
}

pub fn curves(req: &CurvesRequest) -> Result<CurvesResponse> {
    check_inputs(&req.plot, &req.costs)?;
    if req.methods.is_empty() {
        return Err(Error::validation("methods", "at least one assay method is required"));
    }
    for (i, m) in req.methods.iter().enumerate() {
        check_method(m, &format!("methods[{i}]"))?;
    }
    match (&req.budgets, req.fixed_n) {
        (Some(budgets), None) => {
            if req.k_grid.is_some() {
                return Err(Error::validation("k_grid", "only used with fixed_n"));
            }
            if budgets.is_empty() {
                return Err(Error::validation("budgets", "at least one budget is required"));
            }
            Ok(CurvesResponse {
                kind: CurveKind::SeVsBudget,
                series: se_budget_curve(&req.plot, &req.methods, &req.costs, budgets)?,
            })
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(Error::validation("fixed_n", "at least one core required"));
            }
            let grid = req.k_grid.clone().unwrap_or_else(|| (1..=n).collect());
            let series = req
                .methods
                .iter()
                .map(|m| {
                    Ok(CurveSeries {
                        name: m.name.clone(),
                        cost_per_assay: m.cost_per_assay(),
                        points: tradeoff_curve(&req.plot, m, &req.costs, n, &grid)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CurvesResponse {
                kind: CurveKind::SeVsAssays,
                series,
            })
        }
        _ => Err(Error::validation("budgets", "give exactly one of budgets and fixed_n")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRequest {
    /// Assayed composite values, %SOC.
    pub composites: Vec<f64>,
    /// Total cores behind the composites.
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaDeltaSource {
    Given,
    Replicates,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResponse {
    pub sigma_delta_source: SigmaDeltaSource,
    #[serde(flatten)]
    pub estimate: EstimateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate_estimate: Option<ReplicateEstimate>,
    pub warnings: Vec<String>,
}

pub fn estimate(req: &EstimateRequest) -> Result<EstimateResponse> {
    let data = CompositeAssays::new(req.composites.clone(), req.n).map_err(|e| match e {
        Error::Validation { field, message } => {
            Error::validation(field.replacen("values", "composites", 1), message)
        }
        other => other,
    })?;
    let (sd, source, reps) = match (req.sigma_delta, &req.replicates) {
        (Some(sd), None) => (sd, SigmaDeltaSource::Given, None),
        (None, Some(groups)) => {
            let reps = ReplicateAssays::new(groups.clone()).map_err(|e| e.at("replicates"))?;
            let est = assay_error_from_replicates(&reps, req.aggregation).map_err(|e| e.at("replicates"))?;
            (est.sigma_delta, SigmaDeltaSource::Replicates, Some(est))
        }
        _ => return Err(Error::validation("sigma_delta", "give exactly one of sigma_delta and replicates")),
    };
    let estimate = confidence_interval(&data, sd, req.alpha, req.df).map_err(|e| match e {
        Error::Validation { field, message } if field == "values" => Error::validation("composites", message),
        other => other,
    })?;
    let warnings = reps.as_ref().map(|r| r.warnings.clone()).unwrap_or_default();
    Ok(EstimateResponse {
        sigma_delta_source: source,
        estimate,
        replicate_estimate: reps,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffRequest {
    pub data1: CompositeAssays,
    pub data2: CompositeAssays,
    pub sigma_delta_1: f64,
    pub sigma_delta_2: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Monte Carlo permutations; 0 skips the test.
    #[serde(default = "default_permutations")]
    pub permutations: u64,
    #[serde(default)]
    pub seed: u64,
}

pub fn diff(req: &DiffRequest) -> Result<DifferenceReport> {
    let d1 = req.data1.clone().validate().map_err(|e| e.at("data1"))?;
    let d2 = req.data2.clone().validate().map_err(|e| e.at("data2"))?;
    let mut report = difference_estimate(&d1, &d2, req.sigma_delta_1, req.sigma_delta_2, req.alpha)?;
    if req.permutations > 0 {
        let perm = permutation_test(&d1.values, &d2.values, req.permutations, req.seed)?;
        report.p_value = Some(perm.p_value);
        report.permutation = Some(perm);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub plot: PlotParameters,
    pub method: AssayMethod,
    pub settings: SimulationSettings,
}

/// Runs a simulation; `max_replications` bounds the request size.
pub fn simulate(req: &SimulateRequest, max_replications: Option<u64>, opts: &RunOptions) -> Result<SimulationResult> {
    if let Some(cap) = max_replications {
        if req.settings.replications > cap {
            return Err(Error::validation(
                "settings.replications",
                format!("at most {cap} replications per request"),
            ));
        }
    }
    req.settings.validate().map_err(|e| e.at("settings"))?;
    check_method(&req.method, "method")?;
    req.plot.clone().validate().map_err(|e| e.at("plot"))?;
    run_survey_experiment(&req.plot, &req.method, &req.settings, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockRequest {
    pub geometry: StockGeometry,
    /// Mean concentration, %SOC.
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StockResponse {
    pub stock_g: f64,
    pub stock_mg_per_ha: f64,
}

pub fn stock(req: &StockRequest) -> Result<StockResponse> {
    let g = stock_from_concentration(&req.geometry, req.mu).map_err(|e| match e {
        Error::Validation { ref field, .. } if field == "mu" => e,
        other => other.at("geometry"),
    })?;
    Ok(StockResponse {
        stock_g: g,
        stock_mg_per_ha: g / 1e6 / (req.geometry.area_m2 / 1e4),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLengthRequest {
    pub n: u64,
    pub area_m2: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Plot sides for the transect comparison; a square of `area_m2` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathLengthResponse {
    pub n: u64,
    pub area_m2: f64,
    pub beta: f64,
    pub expected_path_m: f64,
    pub transect_m: f64,
    pub transect_to_path: f64,
}

pub fn path_length(req: &PathLengthRequest) -> Result<PathLengthResponse> {
    let path = expected_shortest_path(req.n, req.area_m2, req.beta)?;
    let side = req.area_m2.sqrt();
    let (w, h) = match (req.width_m, req.height_m) {
        (None, None) => (side, side),
        (Some(w), Some(h)) => (w, h),
        _ => return Err(Error::validation("width_m", "give both width_m and height_m or neither")),
    };
    let transect = transect_length(w, h)?;
    Ok(PathLengthResponse {
        n: req.n,
        area_m2: req.area_m2,
        beta: req.beta,
        expected_path_m: path,
        transect_m: transect,
        transect_to_path: transect / path,
    })
}

/// One soil profile of a table request: plot, methods and fixed cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileInput {
    pub name: String,
    pub plot: PlotParameters,
    pub cost_fixed: f64,
    pub methods: Vec<AssayMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesRequest {
    pub profiles: Vec<ProfileInput>,
    pub core_costs: Vec<f64>,
    /// Method every other method is compared against.
    pub reference_method: String,
    pub budgets: Vec<f64>,
    /// Trade-off curve: method and core count, on the first profile at
    /// the first core cost.
    pub tradeoff_method: String,
    pub tradeoff_n: u64,
}

impl TablesRequest {
    /// The reference inputs: both profiles, three core costs.
    pub fn reference() -> Self {
        TablesRequest {
            profiles: Profile::ALL
                .iter()
                .map(|p| ProfileInput {
                    name: p.name().to_string(),
                    plot: p.plot(),
                    cost_fixed: COST_FIXED,
                    methods: p.methods(),
                })
                .collect(),
            core_costs: CORE_COSTS.to_vec(),
            reference_method: "DC-EA".to_string(),
            budgets: (1..=20).map(|i| 250.0 * i as f64).collect(),
            tradeoff_method: "LOI".to_string(),
            tradeoff_n: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeSizeCell {
    pub cost_core: f64,
    #[serde(flatten)]
    pub size: CompositeSizeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeSizeRow {
    pub profile: String,
    pub method: String,
    pub cells: Vec<CompositeSizeCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyCell {
    pub method: String,
    pub relative_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub profile: String,
    pub cost_core: f64,
    pub reference: String,
    pub comparisons: Vec<EfficiencyCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffCurve {
    pub profile: String,
    pub method: String,
    pub n: u64,
    pub cost_core: f64,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetCurves {
    pub profile: String,
    pub cost_core: f64,
    pub series: Vec<CurveSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TablesReport {
    pub composite_sizes: Vec<CompositeSizeRow>,
    pub relative_efficiencies: Vec<EfficiencyRow>,
    pub tradeoff: TradeoffCurve,
    pub budget_curves: Vec<BudgetCurves>,
}

fn find_method<'a>(profile: &'a ProfileInput, name: &str, field: &str) -> Result<&'a AssayMethod> {
    profile
        .methods
        .iter()
        .find(|m| m.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::validation(field, format!("profile {:?} has no method {name:?}", profile.name)))
}

/// Composite sizes, relative efficiencies and the curve datasets for every
/// profile and core cost.
pub fn tables(req: &TablesRequest) -> Result<TablesReport> {
    if req.profiles.is_empty() {
        return Err(Error::validation("profiles", "at least one profile is required"));
    }
    if req.core_costs.is_empty() {
        return Err(Error::validation("core_costs", "at least one core cost is required"));
    }
    let costs_for = |p: &ProfileInput, cc: f64| CostModel::new(p.cost_fixed, cc);
    let mut sizes = Vec::new();
    let mut effs = Vec::new();
    let mut budget_curves = Vec::new();
    for (pi, p) in req.profiles.iter().enumerate() {
        let at = format!("profiles[{pi}]");
        p.plot.clone().validate().map_err(|e| e.at(&at).at("plot"))?;
        let reference = find_method(p, &req.reference_method, "reference_method")?;
        for m in &p.methods {
            let cells = req
                .core_costs
                .iter()
                .map(|&cc| {
                    Ok(CompositeSizeCell {
                        cost_core: cc,
                        size: optimal_composite_size(&p.plot, m, &costs_for(p, cc)?),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            sizes.push(CompositeSizeRow {
                profile: p.name.clone(),
                method: m.name.clone(),
                cells,
            });
        }
        for &cc in &req.core_costs {
            let costs = costs_for(p, cc)?;
            let comparisons = p
                .methods
                .iter()
                .filter(|m| m.name != reference.name)
                .map(|m| {
                    Ok(EfficiencyCell {
                        method: m.name.clone(),
                        relative_efficiency: relative_efficiency(&p.plot, reference, m, &costs)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            effs.push(EfficiencyRow {
                profile: p.name.clone(),
                cost_core: cc,
                reference: reference.name.clone(),
                comparisons,
            });
            budget_curves.push(BudgetCurves {
                profile: p.name.clone(),
                cost_core: cc,
                series: se_budget_curve(&p.plot, &p.methods, &costs, &req.budgets)?,
            });
        }
    }
    let first = &req.profiles[0];
    let method = find_method(first, &req.tradeoff_method, "tradeoff_method")?;
    let costs = costs_for(first, req.core_costs[0])?;
    let grid: Vec<u64> = (1..=req.tradeoff_n).collect();
    let tradeoff = TradeoffCurve {
        profile: first.name.clone(),
        method: method.name.clone(),
        n: req.tradeoff_n,
        cost_core: req.core_costs[0],
        points: tradeoff_curve(&first.plot, method, &costs, req.tradeoff_n, &grid)
            .map_err(|e| e.at("tradeoff_n"))?,
    };
    Ok(TablesReport {
        composite_sizes: sizes,
        relative_efficiencies: effs,
        tradeoff,
        budget_curves,
    })
}
