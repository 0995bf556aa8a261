use serde::Serialize;
use serde_json::{Number, Value};

use crate::design::{CurvePoint, CurveSeries};
use crate::error::{Error, Result};

/// Significant digits kept in emitted numbers.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Text,
    #[default]
    Json,
    Csv,
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|f| Number::from_f64(round_sig(f)))
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Serializes `report` to a JSON value with rounded numbers.
pub fn to_value<T: Serialize + ?Sized>(report: &T) -> Result<Value> {
    serde_json::to_value(report)
        .map(round_value)
        .map_err(|e| Error::validation("report", e.to_string()))
}

/// Pretty JSON with a trailing newline; field order follows the type.
pub fn emit_json<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&to_value(report)?).expect("value serializes");
    s.push('\n');
    Ok(s)
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Any report as `field,value` rows with dotted paths.
pub fn emit_key_value_csv<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    let mut rows = Vec::new();
    flatten("", &to_value(report)?, &mut rows);
    Ok(write_csv(&["field", "value"], rows.into_iter().map(|(k, v)| vec![k, v])))
}

fn num(x: f64) -> String {
    scalar(&to_value(&x).expect("number serializes"))
}

fn point_row(p: &CurvePoint) -> Vec<String> {
    vec![num(p.abscissa), num(p.se), p.cv.map_or(String::new(), num), num(p.cost)]
}

/// One curve as `abscissa,se,cv,cost`.
pub fn emit_curve_csv(points: &[CurvePoint]) -> String {
    write_csv(&["abscissa", "se", "cv", "cost"], points.iter().map(point_row))
}

/// Several curves stacked, with the series name in front.
pub fn emit_series_csv(series: &[CurveSeries]) -> String {
    write_csv(
        &["series", "abscissa", "se", "cv", "cost"],
        series.iter().flat_map(|s| {
            s.points.iter().map(|p| {
                let mut row = vec![s.name.clone()];
                row.extend(point_row(p));
                row
            })
        }),
    )
}

/// JSON or `field,value` CSV for any report.
pub fn emit_report<T: Serialize + ?Sized>(report: &T, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => emit_key_value_csv(report),
        _ => emit_json(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::optimize_for_budget;
    use crate::domain::Budget;
    use crate::presets::{costs, Profile};

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(123456789.12345679), 123456789.123);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn allocation_json_has_real_and_integer_fields() {
        let dcea = Profile::Topsoil.method("DC-EA").unwrap();
        let a = optimize_for_budget(&Profile::Topsoil.plot(), &dcea, &costs(5.0), &Budget::new(1000.0).unwrap()).unwrap();
        let json = emit_json(&a).unwrap();
        let v: Value = serde_json::from_str(&json).unwrap();
        assert!(v["n_real"].is_f64());
        assert_eq!(v["n"], 128);
        assert_eq!(v["boundary"], "interior");
        assert_eq!(json, emit_json(&a).unwrap());
        assert!(json.ends_with("}\n"));
        let csv = emit_report(&a, OutputFormat::Csv).unwrap();
        assert!(csv.starts_with("field,value\nproblem,budget\n"));
        assert!(csv.contains("\nrounded.n,129\n"));
    }

    #[test]
    fn curve_csv_header() {
        let pts = vec![
            CurvePoint { abscissa: 1.0, se: 0.1 + 0.2, cv: None, cost: 10.0 },
            CurvePoint { abscissa: 2.0, se: 0.25, cv: Some(0.5), cost: 12.5 },
        ];
        assert_eq!(emit_curve_csv(&pts), "abscissa,se,cv,cost\n1.0,0.3,,10.0\n2.0,0.25,0.5,12.5\n");
    }
}
