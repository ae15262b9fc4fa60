//! CSV dataset ingestion and export.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gp::Dataset;

use super::ExploreError;

/// Which columns of a CSV file form the dataset, plus optional per-column
/// domain overrides (used when a file does not span the modeling box).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub inputs: Vec<String>,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_overrides: Option<HashMap<String, (f64, f64)>>,
}

impl DatasetSchema {
    pub fn new(inputs: Vec<String>, output: String) -> Self {
        DatasetSchema {
            inputs,
            output,
            domain_overrides: None,
        }
    }

    fn validate(&self) -> Result<(), ExploreError> {
        let mut seen = std::collections::HashSet::new();
        for name in self.inputs.iter().chain(std::iter::once(&self.output)) {
            if !seen.insert(name) {
                return Err(ExploreError::DuplicateColumn(name.clone()));
            }
        }
        Ok(())
    }
}

/// Parse a headered CSV into a Dataset. Row order is preserved; per-column
/// min/max become the domain unless the schema overrides them.
pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<Dataset, ExploreError> {
    schema.validate()?;
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let col = |name: &str| -> Result<usize, ExploreError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ExploreError::MissingColumn(name.to_string()))
    };
    let input_cols: Vec<usize> = schema
        .inputs
        .iter()
        .map(|n| col(n))
        .collect::<Result<_, _>>()?;
    let output_col = col(&schema.output)?;

    let mut features = Vec::new();
    let mut outputs = Vec::new();
    // header is line 1
    for (row_i, record) in reader.records().enumerate() {
        let line = row_i + 2;
        let record = record.map_err(|e| ExploreError::Parse {
            line,
            message: e.to_string(),
        })?;
        let parse_cell = |idx: usize, name: &str| -> Result<f64, ExploreError> {
            let raw = record.get(idx).ok_or_else(|| ExploreError::Parse {
                line,
                message: format!("row too short for column '{name}'"),
            })?;
            let v: f64 = raw.trim().parse().map_err(|_| ExploreError::Parse {
                line,
                message: format!("cannot parse '{raw}' in column '{name}'"),
            })?;
            if !v.is_finite() {
                return Err(ExploreError::NonFiniteValue {
                    column: name.to_string(),
                    line,
                });
            }
            Ok(v)
        };
        let row: Vec<f64> = input_cols
            .iter()
            .zip(&schema.inputs)
            .map(|(&idx, name)| parse_cell(idx, name))
            .collect::<Result<_, _>>()?;
        outputs.push(parse_cell(output_col, &schema.output)?);
        features.push(row);
    }

    let mut ds = Dataset::new(schema.inputs.clone(), features, outputs);
    if let Some(overrides) = &schema.domain_overrides {
        for (m, name) in schema.inputs.iter().enumerate() {
            if let Some(&(lo, hi)) = overrides.get(name) {
                ds.domain[m] = (lo, hi);
            }
        }
        ds = Dataset::with_domain(
            ds.feature_names.clone(),
            ds.features_raw.clone(),
            ds.outputs.clone(),
            ds.domain.clone(),
        );
    }
    Ok(ds)
}

/// Write a dataset back out with inputs first and the output column last.
pub fn write_dataset_csv(
    path: &Path,
    ds: &Dataset,
    output_name: &str,
) -> Result<(), ExploreError> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push(output_name);
    writer.write_record(&header)?;
    for (row, y) in ds.features_raw.iter().zip(&ds.outputs) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        rec.push(format!("{y}"));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}
