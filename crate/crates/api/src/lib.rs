//! Stateless JSON-over-HTTP front end to the planning, estimation and
//! simulation routines. Every response body is the same JSON the CLI prints
//! with `--output json`.

use std::time::Duration;

use axum::body::Bytes;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;
use soc_core::io::emit_json;
use soc_core::presets::{self, Profile};
use soc_core::service::{self, respond, ErrorEnvelope, ProfileInput};
use soc_core::simulator::RunOptions;
use soc_core::Error;
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use axum::{body, http};

/// Largest replication count accepted by `/v1/simulate`.
pub const MAX_REPLICATIONS: u64 = 100_000;
/// Wall-clock allowance for one simulation request.
pub const SIMULATION_TIME_BUDGET: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Default)]
pub struct ApiConfig {
    /// Origins allowed by CORS; none disables the CORS layer.
    pub cors_origins: Vec<HeaderValue>,
}

/// An error rendered as `{code, message, field_path}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    envelope: ErrorEnvelope,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, field_path: Option<String>) -> Self {
        ApiError {
            status,
            envelope: ErrorEnvelope {
                code: code.to_string(),
                message: message.into(),
                field_path,
            },
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            envelope: ErrorEnvelope::from(&e),
        }
    }
}

fn json_response(status: StatusCode, text: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let text = serde_json::to_string_pretty(&self.envelope).expect("envelope serializes") + "\n";
        json_response(self.status, text)
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok<T: Serialize>(body: T) -> ApiResult {
    Ok(json_response(StatusCode::OK, emit_json(&respond(body))?))
}

/// JSON path of a serde error as `a.b[2].c`, or `None` at the root.
fn path_string(path: &serde_path_to_error::Path) -> Option<String> {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s.push_str(&format!("[{index}]")),
            Segment::Map { key } => {
                if !s.is_empty() {
                    s.push('.');
                }
                s.push_str(key);
            }
            Segment::Enum { variant } => {
                if !s.is_empty() {
                    s.push('.');
                }
                s.push_str(variant);
            }
            Segment::Unknown => {}
        }
    }
    (!s.is_empty()).then_some(s)
}

/// Decodes a request body. Bytes that are not JSON are 400; JSON that does
/// not fit the request schema is 422.
pub fn decode<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let value: serde_json::Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.to_string(), None))?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = path_string(e.path());
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", e.into_inner().to_string(), path)
    })
}

async fn health() -> Response {
    json_response(StatusCode::OK, "{\"status\":\"ok\"}\n".to_string())
}

#[derive(Serialize)]
struct PresetsResponse {
    core_costs: Vec<f64>,
    profiles: Vec<ProfileInput>,
}

async fn presets_handler() -> ApiResult {
    ok(PresetsResponse {
        core_costs: presets::CORE_COSTS.to_vec(),
        profiles: Profile::ALL
            .iter()
            .map(|p| ProfileInput {
                name: p.name().to_string(),
                plot: p.plot(),
                cost_fixed: presets::COST_FIXED,
                methods: p.methods(),
            })
            .collect(),
    })
}

macro_rules! pure_handler {
    ($name:ident, $req:ty, $f:path) => {
        async fn $name(body: Bytes) -> ApiResult {
            let req: $req = decode(&body)?;
            ok($f(&req)?)
        }
    };
}

pure_handler!(optimize, service::OptimizeRequest, service::optimize);
pure_handler!(min_cost, service::MinCostRequest, service::min_cost);
pure_handler!(composite_size, service::CompositeSizeRequest, service::composite_size);
pure_handler!(efficiency, service::EfficiencyRequest, service::efficiency);
pure_handler!(curves, service::CurvesRequest, service::curves);
pure_handler!(estimate, service::EstimateRequest, service::estimate);
pure_handler!(diff, service::DiffRequest, service::diff);
pure_handler!(stock, service::StockRequest, service::stock);
pure_handler!(path_length, service::PathLengthRequest, service::path_length);
pure_handler!(tables, service::TablesRequest, service::tables);

async fn simulate(body: Bytes) -> ApiResult {
    let req: service::SimulateRequest = decode(&body)?;
    let opts = RunOptions {
        threads: None,
        time_budget: Some(SIMULATION_TIME_BUDGET),
    };
    let result = tokio::task::spawn_blocking(move || service::simulate(&req, Some(MAX_REPLICATIONS), &opts))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None))??;
    ok(result)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint", None)
}

/// All `/v1` routes without CORS.
pub fn router() -> Router {
    router_with(&ApiConfig::default())
}

pub fn router_with(config: &ApiConfig) -> Router {
    let app = Router::new()
        .route("/v1/health", get(health))
        .route("/v1/presets", get(presets_handler))
        .route("/v1/optimize", post(optimize))
        .route("/v1/min-cost", post(min_cost))
        .route("/v1/composite-size", post(composite_size))
        .route("/v1/efficiency", post(efficiency))
        .route("/v1/curves", post(curves))
        .route("/v1/estimate", post(estimate))
        .route("/v1/diff", post(diff))
        .route("/v1/simulate", post(simulate))
        .route("/v1/stock", post(stock))
        .route("/v1/path-length", post(path_length))
        .route("/v1/tables", post(tables))
        .fallback(not_found)
        .layer(CatchPanicLayer::custom(|_| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error", None).into_response()
        }));
    if config.cors_origins.is_empty() {
        app
    } else {
        app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(config.cors_origins.clone()))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        )
    }
}
