//! Reading assay files and study configs, writing reports.
//!
//! Composite files carry `plot_id,composite_id,n_cores_total,measurement`
//! and replicate files `sample_id,replicate_id,measurement`. Either may
//! start with a `units=g_per_kg` line; values are otherwise %SOC. Row
//! numbers in errors and warnings count lines from 1, header included.
//!
//! Study configs are TOML. Reports are JSON or CSV with numbers rounded to
//! twelve significant digits and fields in a fixed order.

mod config;
mod csv_input;
mod report;

pub use config::{parse_config, PrecisionSpec, StudyConfig};
pub use csv_input::{
    parse_composites_csv, parse_replicates_csv, CompositeDataset, PlotComposites, ReplicateDataset, SourceInfo, Units,
    COMPOSITES_HEADER, REPLICATES_HEADER,
};
pub use report::{
    emit_curve_csv, emit_json, emit_key_value_csv, emit_report, emit_series_csv, round_sig, to_value, OutputFormat,
    SIGNIFICANT_DIGITS,
};
