//! Survey design and estimation for soil organic carbon in a single plot.
//!
//! The crate covers the variance and cost model of composited core
//! sampling, optimal allocations under a budget or precision target,
//! estimators from assay data, a Monte Carlo simulator of the sampling
//! process, file ingestion and report output, and the request/response
//! layer shared by the command-line tool and the HTTP service.

pub mod design;
pub mod domain;
pub mod error;
pub mod estimation;
pub mod io;
pub mod presets;
pub mod service;
pub mod simulator;

pub use domain::{AssayMethod, Budget, CostModel, Design, PlotParameters, PrecisionTarget, StockGeometry};
pub use error::{Error, Result};
