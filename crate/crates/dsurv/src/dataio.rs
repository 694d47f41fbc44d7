//! Dataset ingestion, imputation, and splitting.
//!
//! Datasets are comma-separated UTF-8 files with a header row; `?` or an
//! empty cell marks a missing value. A schema names the time and event
//! columns, gives each feature a missing-value policy (sample median or a
//! fixed default), and may drop features whose missing fraction exceeds a
//! threshold. Loading an already-imputed file changes nothing.

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::timegrid::SurvivalRecord;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

/// Missing-value policy for one feature column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Impute the median of the column's present values.
    Median,
    /// Impute a fixed default (e.g. a recommended laboratory normal).
    Fixed(f64),
}

/// Role assignment and imputation policy for a delimited survival dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    /// Header name of the follow-up time column (days).
    pub time: String,
    /// Header name of the event column; values must be 0 or 1.
    pub event: String,
    /// Feature columns in the order they should appear in covariate vectors.
    pub features: Vec<FeatureSpec>,
    /// Drop any feature whose missing fraction exceeds this threshold.
    #[serde(default)]
    pub drop_missing_above: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(default = "default_policy")]
    pub policy: MissingPolicy,
}

fn default_policy() -> MissingPolicy {
    MissingPolicy::Median
}

impl DatasetSchema {
    /// Convention schema: columns named `time` and `event`, every other
    /// header a median-imputed feature. Requires reading the header first.
    pub fn from_header(header: &[String]) -> Result<Self> {
        let features = header
            .iter()
            .filter(|h| h.as_str() != "time" && h.as_str() != "event")
            .map(|h| FeatureSpec {
                name: h.clone(),
                policy: MissingPolicy::Median,
            })
            .collect();
        let schema = DatasetSchema {
            time: "time".into(),
            event: "event".into(),
            features,
            drop_missing_above: None,
        };
        Ok(schema)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| with_path(e, path))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }
}

/// A loaded dataset: records plus the surviving feature names, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SurvivalRecord>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }
}

/// What ingestion did: imputation counts and dropped columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub rows: usize,
    /// Imputed cell count per feature column, only for columns that needed it.
    pub imputed: BTreeMap<String, usize>,
    /// Features excluded for exceeding the missing-fraction threshold, with
    /// their missing fractions.
    pub dropped: Vec<(String, f64)>,
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed == "?" {
        return Ok(None);
    }
    trimmed.parse::<f64>().map(Some).map_err(|_| Error::Ingest {
        row,
        column: column.to_string(),
        message: format!("cannot parse `{trimmed}` as a number"),
    })
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Load a delimited dataset per the schema.
///
/// Time and event cells must be present and valid in every row. Feature
/// columns above the drop threshold are excluded (and reported); remaining
/// missing cells are imputed per policy, with counts in the report.
pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<(Dataset, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|e| with_path(e, path))?;
    load_dataset_from_reader(file, schema)
}

pub(crate) fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

pub fn load_dataset_from_reader<R: Read>(
    reader: R,
    schema: &DatasetSchema,
) -> Result<(Dataset, IngestReport)> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let header: Vec<String> = csv_reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let col_of = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let time_col = col_of(&schema.time)?;
    let event_col = col_of(&schema.event)?;
    let feature_cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| col_of(&f.name))
        .collect::<Result<_>>()?;

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); schema.features.len()];

    for (idx, row) in csv_reader.records().enumerate() {
        let row = row?;
        let row_number = idx + 2; // 1-based, after the header
        let time = parse_cell(&row[time_col], row_number, &schema.time)?.ok_or(Error::Ingest {
            row: row_number,
            column: schema.time.clone(),
            message: "time is missing".into(),
        })?;
        if !(time >= 0.0) || !time.is_finite() {
            return Err(Error::Ingest {
                row: row_number,
                column: schema.time.clone(),
                message: format!("time must be nonnegative and finite, got {time}"),
            });
        }
        let event_raw = parse_cell(&row[event_col], row_number, &schema.event)?.ok_or(Error::Ingest {
            row: row_number,
            column: schema.event.clone(),
            message: "event flag is missing".into(),
        })?;
        let event = if event_raw == 0.0 {
            false
        } else if event_raw == 1.0 {
            true
        } else {
            return Err(Error::Ingest {
                row: row_number,
                column: schema.event.clone(),
                message: format!("event flag must be 0 or 1, got {event_raw}"),
            });
        };
        times.push(time);
        events.push(event);
        for (k, &col) in feature_cols.iter().enumerate() {
            columns[k].push(parse_cell(&row[col], row_number, &schema.features[k].name)?);
        }
    }

    let rows = times.len();
    let mut report = IngestReport {
        rows,
        ..IngestReport::default()
    };

    // Drop over-threshold columns, then impute the rest.
    let mut kept: Vec<(usize, &FeatureSpec)> = Vec::new();
    for (k, spec) in schema.features.iter().enumerate() {
        let missing = columns[k].iter().filter(|v| v.is_none()).count();
        let fraction = if rows == 0 { 0.0 } else { missing as f64 / rows as f64 };
        if let Some(threshold) = schema.drop_missing_above {
            if fraction > threshold {
                report.dropped.push((spec.name.clone(), fraction));
                continue;
            }
        }
        kept.push((k, spec));
    }

    let mut imputed_columns: Vec<Vec<f64>> = Vec::with_capacity(kept.len());
    for &(k, spec) in &kept {
        let column = &columns[k];
        let missing = column.iter().filter(|v| v.is_none()).count();
        let fill = match spec.policy {
            MissingPolicy::Fixed(v) => v,
            MissingPolicy::Median => {
                let present: Vec<f64> = column.iter().flatten().copied().collect();
                if present.is_empty() {
                    return Err(Error::Schema(format!(
                        "feature `{}` has no present values to take a median from",
                        spec.name
                    )));
                }
                median_of(present)
            }
        };
        if missing > 0 {
            report.imputed.insert(spec.name.clone(), missing);
        }
        imputed_columns.push(column.iter().map(|v| v.unwrap_or(fill)).collect());
    }

    let records = (0..rows)
        .map(|i| {
            SurvivalRecord::new(
                times[i],
                events[i],
                imputed_columns.iter().map(|c| c[i]).collect(),
            )
        })
        .collect();

    Ok((
        Dataset {
            records,
            feature_names: kept.iter().map(|(_, s)| s.name.clone()).collect(),
        },
        report,
    ))
}

/// Write a dataset in the same delimited format ingestion reads.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = String::new();
    out.push_str("time,event");
    for name in &dataset.feature_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for record in &dataset.records {
        out.push_str(&format!("{},{}", record.time, u8::from(record.event)));
        for v in &record.covariates {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Seeded shuffle-then-cut split; the two halves are disjoint and exhaust
/// the input. The training side gets `floor(n * train_fraction)` records.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    CounterRng::new(seed).shuffle(&mut order);
    let cut = (n as f64 * train_fraction).floor() as usize;
    let make = |indices: &[usize]| Dataset {
        records: indices.iter().map(|&i| dataset.records[i].clone()).collect(),
        feature_names: dataset.feature_names.clone(),
    };
    Ok((make(&order[..cut]), make(&order[cut..])))
}
