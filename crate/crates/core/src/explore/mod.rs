//! Inverse-problem workflow: dataset I/O, dense prediction sweeps,
//! target-range filtering, plot exports, and the synthetic forward model.

pub mod io;
pub mod plots;
pub mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockgp::{BlockGpModel, BlockModelData};
use crate::design::{best_candidate_sample, DesignError, Domain, DEFAULT_BEST_CANDIDATE_K};
use crate::gp::{Dataset, GpError, GpModel, GpModelData, Surrogate};

pub use io::{load_dataset, write_dataset_csv, DatasetSchema};
pub use plots::{parallel_coords_export, som_heatmap_export, HeatmapQuantity};
pub use synthetic::{synthetic_dataset, synthetic_forward, table1_domain};

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("duplicate column '{0}' in schema")]
    DuplicateColumn(String),
    #[error("non-finite value in column '{column}' at line {line}")]
    NonFiniteValue { column: String, line: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("{0}")]
    Invalid(String),
}

/// Rows of a sweep whose output fell inside `target ± delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub dataset: Dataset,
    pub target: f64,
    pub delta: f64,
    /// Identifier of the model the sweep came from, when known.
    pub source_model: Option<String>,
    pub sweep_seed: Option<u64>,
}

/// Best-candidate sample of `dom` with model predictions attached as the
/// dataset output. Deterministic per seed.
pub fn dense_sweep(
    model: &dyn Surrogate,
    dom: &Domain,
    n: usize,
    seed: u64,
) -> Result<Dataset, ExploreError> {
    if model.input_dim() != dom.dim() {
        return Err(ExploreError::Invalid(format!(
            "model expects {} inputs, domain has {}",
            model.input_dim(),
            dom.dim()
        )));
    }
    let sample = best_candidate_sample(dom, n, DEFAULT_BEST_CANDIDATE_K, seed, None)?;
    let mut outputs = Vec::with_capacity(n);
    for p in &sample.points {
        outputs.push(model.predict_mean(p)?);
    }
    let domain = dom.dims.iter().map(|d| (d.min, d.max)).collect();
    Ok(Dataset::with_domain(
        dom.names(),
        sample.points,
        outputs,
        domain,
    ))
}

/// Keep exactly the rows with output in the closed interval
/// `[target - delta, target + delta]`, preserving order.
pub fn filter_solution(ds: &Dataset, target: f64, delta: f64) -> SolutionSet {
    assert!(delta >= 0.0, "delta must be nonnegative");
    let keep: Vec<usize> = ds
        .outputs
        .iter()
        .enumerate()
        .filter(|(_, y)| **y >= target - delta && **y <= target + delta)
        .map(|(i, _)| i)
        .collect();
    SolutionSet {
        dataset: ds.subset(&keep),
        target,
        delta,
        source_model: None,
        sweep_seed: None,
    }
}

/// Serialized model file. `version` guards the schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    #[serde(flatten)]
    pub model: ModelKind,
}

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Gp(GpModelData),
    Block(BlockModelData),
}

/// A model loaded back from disk; dispatches prediction to the inner kind.
pub enum LoadedModel {
    Gp(GpModel),
    Block(BlockGpModel),
}

impl Surrogate for LoadedModel {
    fn predict_mean(&self, x: &[f64]) -> Result<f64, GpError> {
        match self {
            LoadedModel::Gp(m) => m.predict_mean(x),
            LoadedModel::Block(m) => m.predict_mean(x),
        }
    }

    fn predict_variance(&self, x: &[f64]) -> Result<f64, GpError> {
        match self {
            LoadedModel::Gp(m) => m.predict_variance(x),
            LoadedModel::Block(m) => m.predict_variance(x),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            LoadedModel::Gp(m) => m.input_dim(),
            LoadedModel::Block(m) => m.input_dim(),
        }
    }
}

pub fn save_model(path: &std::path::Path, model: ModelKind) -> Result<(), ExploreError> {
    let file = ModelFile {
        version: MODEL_FILE_VERSION,
        model,
    };
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &std::path::Path) -> Result<LoadedModel, ExploreError> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.version != MODEL_FILE_VERSION {
        return Err(ExploreError::Invalid(format!(
            "unsupported model file version {}",
            file.version
        )));
    }
    Ok(match file.model {
        ModelKind::Gp(data) => LoadedModel::Gp(GpModel::from_data(data)?),
        ModelKind::Block(data) => LoadedModel::Block(BlockGpModel::from_data(data)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DimSpec;
    use crate::gp::{fit, SolverConfig};
    use crate::kernels::Hyperparameters;

    fn unit_domain(d: usize) -> Domain {
        Domain::new(
            (0..d)
                .map(|i| DimSpec {
                    name: format!("x{i}"),
                    min: 0.0,
                    max: 1.0,
                    levels: None,
                })
                .collect(),
        )
    }

    fn tiny_model() -> GpModel {
        let ds = Dataset::new(
            vec!["x0".into(), "x1".into()],
            vec![vec![0.1, 0.2], vec![0.8, 0.3], vec![0.4, 0.9], vec![0.6, 0.6]],
            vec![1.0, 2.0, 3.0, 2.5],
        );
        let hp = Hyperparameters {
            sigma_f: 1.0,
            sigma_n: 1e-3,
            length_scales: vec![1.0, 1.0],
        };
        fit(&ds, &hp, &SolverConfig::direct()).unwrap()
    }

    #[test]
    fn dense_sweep_one_point() {
        let model = tiny_model();
        let ds = dense_sweep(&model, &unit_domain(2), 1, 7).unwrap();
        assert_eq!(ds.len(), 1);
        let m = model.predict_mean(&ds.features_raw[0]).unwrap();
        assert_eq!(ds.outputs[0], m);
    }

    #[test]
    fn dense_sweep_in_box_and_deterministic() {
        let model = tiny_model();
        let dom = unit_domain(2);
        let a = dense_sweep(&model, &dom, 200, 42).unwrap();
        let b = dense_sweep(&model, &dom, 200, 42).unwrap();
        assert_eq!(a.features_raw, b.features_raw);
        assert_eq!(a.outputs, b.outputs);
        assert!(a.features_raw.iter().all(|p| dom.contains(p)));
    }

    #[test]
    fn dense_sweep_dim_mismatch() {
        let model = tiny_model();
        assert!(dense_sweep(&model, &unit_domain(3), 5, 0).is_err());
    }

    #[test]
    fn filter_closed_interval() {
        let ds = Dataset::new(
            vec!["a".into()],
            vec![vec![1.0], vec![2.0], vec![3.0]],
            vec![58.0, 59.9, 62.1],
        );
        let sol = filter_solution(&ds, 60.0, 2.0);
        assert_eq!(sol.dataset.outputs, vec![58.0, 59.9]);
        // endpoints included
        let ds2 = Dataset::new(vec!["a".into()], vec![vec![0.0]], vec![62.0]);
        assert_eq!(filter_solution(&ds2, 60.0, 2.0).dataset.len(), 1);
    }

    #[test]
    fn filter_delta_zero_empty() {
        let ds = Dataset::new(
            vec!["a".into()],
            vec![vec![1.0], vec![2.0]],
            vec![59.0, 61.0],
        );
        assert!(filter_solution(&ds, 60.0, 0.0).dataset.is_empty());
    }

    #[test]
    fn filter_preserves_order() {
        let ds = Dataset::new(
            vec!["a".into()],
            (0..10).map(|i| vec![i as f64]).collect(),
            vec![60.0, 1.0, 60.5, 2.0, 59.5, 3.0, 60.0, 4.0, 61.9, 58.1],
        );
        let sol = filter_solution(&ds, 60.0, 2.0);
        let kept: Vec<f64> = sol.dataset.features_raw.iter().map(|p| p[0]).collect();
        assert_eq!(kept, vec![0.0, 2.0, 4.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn model_file_round_trip_gp() {
        let model = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&path, ModelKind::Gp(model.to_data())).unwrap();
        let loaded = load_model(&path).unwrap();
        let x = [0.33, 0.71];
        assert!(
            (loaded.predict_mean(&x).unwrap() - model.predict_mean(&x).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn model_file_rejects_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = tiny_model();
        let mut file = serde_json::to_value(ModelFile {
            version: MODEL_FILE_VERSION,
            model: ModelKind::Gp(model.to_data()),
        })
        .unwrap();
        file["version"] = serde_json::json!(99);
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        assert!(load_model(&path).is_err());
    }
}
