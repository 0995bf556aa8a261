use serde::Serialize;

use crate::domain::g_per_kg_to_percent;
use crate::error::{Error, Result};
use crate::estimation::{CompositeAssays, ReplicateAssays};

pub const COMPOSITES_HEADER: [&str; 4] = ["plot_id", "composite_id", "n_cores_total", "measurement"];
pub const REPLICATES_HEADER: [&str; 3] = ["sample_id", "replicate_id", "measurement"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Percent,
    GPerKg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceInfo {
    pub name: String,
    pub data_rows: usize,
    pub units: Units,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotComposites {
    pub plot_id: String,
    pub assays: CompositeAssays,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeDataset {
    pub source: SourceInfo,
    /// In order of first appearance.
    pub plots: Vec<PlotComposites>,
}

impl CompositeDataset {
    /// The single plot in the file, or the one named `plot_id`.
    pub fn plot(&self, plot_id: Option<&str>) -> Result<&CompositeAssays> {
        match plot_id {
            Some(id) => self
                .plots
                .iter()
                .find(|p| p.plot_id == id)
                .map(|p| &p.assays)
                .ok_or_else(|| Error::parse(&self.source.name, None, format!("no plot with id {id:?}"))),
            None if self.plots.len() == 1 => Ok(&self.plots[0].assays),
            None => Err(Error::parse(
                &self.source.name,
                None,
                format!("file holds {} plots; choose one by id", self.plots.len()),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateDataset {
    pub source: SourceInfo,
    pub sample_ids: Vec<String>,
    pub assays: ReplicateAssays,
}

struct Row {
    line: usize,
    fields: Vec<String>,
}

/// Decodes the text, strips an optional `units=` line and checks the header.
fn read_rows(bytes: &[u8], source: &str, header: &[&str]) -> Result<(Units, Vec<Row>)> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(source, None, format!("not valid UTF-8 (byte {})", e.valid_up_to())))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let first = text.lines().next().unwrap_or("").trim();
    let (units, body, offset) = match first.strip_prefix("units=") {
        Some(u) => {
            let units = match u.trim() {
                "g_per_kg" => Units::GPerKg,
                "percent" => Units::Percent,
                other => return Err(Error::parse(source, Some(1), format!("unknown units {other:?}"))),
            };
            let rest = text.split_once('\n').map_or("", |(_, r)| r);
            (units, rest, 1)
        }
        None => (Units::Percent, text, 0),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut records = reader.records();
    let found = match records.next() {
        None => return Err(Error::parse(source, None, "empty file: missing header")),
        Some(r) => r.map_err(|e| csv_error(source, offset, e))?,
    };
    let expected = header.join(",");
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::parse(
            source,
            Some(offset + 1),
            format!("expected header {expected:?}, found {:?}", found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(source, offset, e))?;
        let line = offset + rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::parse(
                source,
                Some(line),
                format!("expected {} fields, found {} (decimal commas are not accepted)", header.len(), rec.len()),
            ));
        }
        rows.push(Row {
            line,
            fields: rec.iter().map(str::to_string).collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::parse(source, None, "no data rows"));
    }
    Ok((units, rows))
}

fn csv_error(source: &str, offset: usize, e: csv::Error) -> Error {
    let line = e.position().map(|p| offset + p.line() as usize);
    Error::parse(source, line, e.to_string())
}

fn measurement(source: &str, row: &Row, raw: &str, units: Units) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::parse(source, Some(row.line), format!("measurement {raw:?} is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::parse(
            source,
            Some(row.line),
            format!("measurement {raw:?} must be finite and >= 0"),
        ));
    }
    Ok(match units {
        Units::Percent => v,
        Units::GPerKg => g_per_kg_to_percent(v),
    })
}

fn nonempty<'a>(source: &str, row: &Row, name: &str, value: &'a str) -> Result<&'a str> {
    if value.is_empty() {
        return Err(Error::parse(source, Some(row.line), format!("{name} is empty")));
    }
    Ok(value)
}

/// Plot id, n, first line, composite ids and values.
type PlotRows = (String, u64, usize, Vec<String>, Vec<f64>);

/// Parses `plot_id,composite_id,n_cores_total,measurement` rows into one
/// set of composite assays per plot.
pub fn parse_composites_csv(bytes: &[u8], source: &str) -> Result<CompositeDataset> {
    let (units, rows) = read_rows(bytes, source, &COMPOSITES_HEADER)?;
    let mut plots: Vec<PlotRows> = Vec::new();
    for row in &rows {
        let plot_id = nonempty(source, row, "plot_id", &row.fields[0])?;
        let composite_id = nonempty(source, row, "composite_id", &row.fields[1])?;
        let n: u64 = row.fields[2].parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            Error::parse(
                source,
                Some(row.line),
                format!("n_cores_total {:?} is not a positive integer", row.fields[2]),
            )
        })?;
        let value = measurement(source, row, &row.fields[3], units)?;
        match plots.iter_mut().find(|p| p.0 == plot_id) {
            Some(p) => {
                if p.1 != n {
                    return Err(Error::parse(
                        source,
                        Some(row.line),
                        format!("n_cores_total {n} differs from {} given for plot {plot_id:?} on row {}", p.1, p.2),
                    ));
                }
                if p.3.iter().any(|c| c == composite_id) {
                    return Err(Error::parse(
                        source,
                        Some(row.line),
                        format!("duplicate composite_id {composite_id:?} in plot {plot_id:?}"),
                    ));
                }
                p.3.push(composite_id.to_string());
                p.4.push(value);
            }
            None => plots.push((plot_id.to_string(), n, row.line, vec![composite_id.to_string()], vec![value])),
        }
    }
    let plots = plots
        .into_iter()
        .map(|(plot_id, n, line, _, values)| {
            CompositeAssays::new(values, n)
                .map(|assays| PlotComposites {
                    plot_id: plot_id.clone(),
                    assays,
                })
                .map_err(|e| Error::parse(source, Some(line), format!("plot {plot_id:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompositeDataset {
        source: SourceInfo {
            name: source.to_string(),
            data_rows: rows.len(),
            units,
            warnings: Vec::new(),
        },
        plots,
    })
}

/// Parses `sample_id,replicate_id,measurement` rows into replicate groups.
/// Samples with a single replicate are dropped with a warning.
pub fn parse_replicates_csv(bytes: &[u8], source: &str) -> Result<ReplicateDataset> {
    let (units, rows) = read_rows(bytes, source, &REPLICATES_HEADER)?;
    let mut samples: Vec<(String, usize, Vec<String>, Vec<f64>)> = Vec::new();
    for row in &rows {
        let sample_id = nonempty(source, row, "sample_id", &row.fields[0])?;
        let replicate_id = nonempty(source, row, "replicate_id", &row.fields[1])?;
        let value = measurement(source, row, &row.fields[2], units)?;
        match samples.iter_mut().find(|s| s.0 == sample_id) {
            Some(s) => {
                if s.2.iter().any(|r| r == replicate_id) {
                    return Err(Error::parse(
                        source,
                        Some(row.line),
                        format!("duplicate replicate_id {replicate_id:?} for sample {sample_id:?}"),
                    ));
                }
                s.2.push(replicate_id.to_string());
                s.3.push(value);
            }
            None => samples.push((sample_id.to_string(), row.line, vec![replicate_id.to_string()], vec![value])),
        }
    }
    let mut warnings = Vec::new();
    let mut ids = Vec::new();
    let mut groups = Vec::new();
    for (id, line, _, values) in samples {
        if values.len() < 2 {
            warnings.push(format!("row {line}: sample {id:?} has a single replicate and was dropped"));
        } else {
            ids.push(id);
            groups.push(values);
        }
    }
    if groups.is_empty() {
        return Err(Error::parse(source, None, "no sample has at least 2 replicates"));
    }
    let assays = ReplicateAssays::new(groups).map_err(|e| Error::parse(source, None, e.to_string()))?;
    Ok(ReplicateDataset {
        source: SourceInfo {
            name: source.to_string(),
            data_rows: rows.len(),
            units,
            warnings,
        },
        sample_ids: ids,
        assays,
    })
}
