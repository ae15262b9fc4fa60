//! Gaussian-process fit, prediction, and leave-one-out evaluation.
//!
//! Inputs are min-max scaled to [0, 1] before kernel evaluation; outputs stay
//! in raw units. A fitted model solves `C alpha = y` once and reuses `alpha`
//! for every mean prediction; variance predictions need one extra solve per
//! query, which the direct solver serves from its retained Cholesky factor.

use crate::kernels::{
    assemble_covariance, cross_covariance, sq_exp_cov, Hyperparameters, KernelError, TaperSpec,
};
use crate::linalg::{
    cg_solve, cholesky_factor, dot, solve_with_factor, CgConfig, CgResult, LinalgError,
    PackedSymMatrix,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("covariance matrix not positive definite: {source}{hint}")]
    NotPositiveDefinite {
        source: LinalgError,
        /// Names a duplicate training pair when one exists.
        hint: String,
    },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("conjugate gradient did not converge: {iterations} iterations, residual {residual:.3e}")]
    CgNotConverged {
        /// Model built from the final CG iterate; callers may accept it.
        model: Box<GpModel>,
        cg: CgResult,
        iterations: usize,
        residual: f64,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("solver error: {0}")]
    Solver(LinalgError),
    #[error("dataset too small: need at least {need} instances, have {have}")]
    TooFewInstances { need: usize, have: usize },
}

/// Training data: named features in raw units, one scalar output per row, and
/// a per-feature (min, max) domain used for scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub features_raw: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    pub domain: Vec<(f64, f64)>,
}

impl Dataset {
    /// Builds a dataset, computing the domain from per-column min/max.
    pub fn new(feature_names: Vec<String>, features_raw: Vec<Vec<f64>>, outputs: Vec<f64>) -> Self {
        let d = feature_names.len();
        let mut domain = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for row in &features_raw {
            for (m, v) in row.iter().enumerate() {
                domain[m].0 = domain[m].0.min(*v);
                domain[m].1 = domain[m].1.max(*v);
            }
        }
        Dataset {
            feature_names,
            features_raw,
            outputs,
            domain,
        }
    }

    pub fn with_domain(
        feature_names: Vec<String>,
        features_raw: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        domain: Vec<(f64, f64)>,
    ) -> Self {
        Dataset {
            feature_names,
            features_raw,
            outputs,
            domain,
        }
    }

    pub fn len(&self) -> usize {
        self.features_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features_raw.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Sample standard deviation of the outputs.
    pub fn output_std(&self) -> f64 {
        let n = self.outputs.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.outputs.iter().sum::<f64>() / n;
        let var = self
            .outputs
            .iter()
            .map(|y| (y - mean) * (y - mean))
            .sum::<f64>()
            / (n - 1.0);
        var.sqrt()
    }

    /// Sub-dataset over the given row indices, keeping this dataset's domain
    /// so scaling stays consistent.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            features_raw: indices.iter().map(|&i| self.features_raw[i].clone()).collect(),
            outputs: indices.iter().map(|&i| self.outputs[i]).collect(),
            domain: self.domain.clone(),
        }
    }
}

/// Scales one raw point into [0, 1] per feature; constant columns map to 0.5.
pub fn scale_point(x: &[f64], domain: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(domain)
        .map(|(v, (lo, hi))| {
            if hi > lo {
                (v - lo) / (hi - lo)
            } else {
                0.5
            }
        })
        .collect()
}

/// Min-max scales every feature row of the dataset into [0, 1].
pub fn scale_features(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.features_raw
        .iter()
        .map(|row| scale_point(row, &ds.domain))
        .collect()
}

/// Which linear solver backs the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverKind {
    Direct,
    Cg(CgConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    #[serde(default)]
    pub taper: TaperSpec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kind: SolverKind::Direct,
            taper: TaperSpec::None,
        }
    }
}

impl SolverConfig {
    pub fn direct() -> Self {
        SolverConfig::default()
    }

    pub fn cg(epsilon: f64, max_iter: usize) -> Self {
        SolverConfig {
            kind: SolverKind::Cg(CgConfig::new(epsilon, max_iter)),
            taper: TaperSpec::None,
        }
    }
}

/// Summary of the fit-time CG solve, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgFitSummary {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
}

/// A fitted Gaussian-process model.
#[derive(Debug)]
pub struct GpModel {
    pub feature_names: Vec<String>,
    pub domain: Vec<(f64, f64)>,
    /// Training features after min-max scaling.
    pub scaled_features: Vec<Vec<f64>>,
    /// Raw training features, retained for export.
    pub features_raw: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    pub hp: Hyperparameters,
    pub solver: SolverConfig,
    /// Solution of `C alpha = y`.
    pub alpha: Vec<f64>,
    /// Retained Cholesky factor (direct mode), reused for variance solves.
    pub factor: Option<PackedSymMatrix>,
    /// Retained covariance matrix (CG mode), needed for per-query solves.
    pub cov: Option<PackedSymMatrix>,
    pub cg_fit: Option<CgFitSummary>,
    variance_clamps: AtomicUsize,
}

/// Anything that predicts mean and variance at a raw-unit query point.
pub trait Surrogate {
    fn predict_mean(&self, x_star: &[f64]) -> Result<f64, GpError>;
    fn predict_variance(&self, x_star: &[f64]) -> Result<f64, GpError>;
    fn input_dim(&self) -> usize;
}

fn find_duplicate_pair(features: &[Vec<f64>]) -> Option<(usize, usize)> {
    for i in 0..features.len() {
        for j in 0..i {
            if features[i] == features[j] {
                return Some((j, i));
            }
        }
    }
    None
}

/// Fits a GP: assembles the covariance over scaled features and solves
/// `C alpha = y` with the configured solver.
pub fn fit(ds: &Dataset, hp: &Hyperparameters, cfg: &SolverConfig) -> Result<GpModel, GpError> {
    hp.validate(ds.dim())?;
    let scaled = scale_features(ds);
    let c = assemble_covariance(&scaled, hp, &cfg.taper)?;
    fit_prepared(ds, hp, cfg, scaled, c)
}

/// Fit continuation once the scaled features and covariance exist; LOO folds
/// enter here with submatrices of one shared assembly.
fn fit_prepared(
    ds: &Dataset,
    hp: &Hyperparameters,
    cfg: &SolverConfig,
    scaled: Vec<Vec<f64>>,
    c: PackedSymMatrix,
) -> Result<GpModel, GpError> {
    let make_model = |alpha: Vec<f64>,
                      factor: Option<PackedSymMatrix>,
                      cov: Option<PackedSymMatrix>,
                      cg_fit: Option<CgFitSummary>| GpModel {
        feature_names: ds.feature_names.clone(),
        domain: ds.domain.clone(),
        scaled_features: scaled.clone(),
        features_raw: ds.features_raw.clone(),
        outputs: ds.outputs.clone(),
        hp: hp.clone(),
        solver: cfg.clone(),
        alpha,
        factor,
        cov,
        cg_fit,
        variance_clamps: AtomicUsize::new(0),
    };

    match &cfg.kind {
        SolverKind::Direct => {
            let l = cholesky_factor(&c).map_err(|e| match e {
                LinalgError::NotPositiveDefinite { .. } => {
                    let hint = match find_duplicate_pair(&scaled) {
                        Some((a, b)) => format!(" (duplicate training points {a} and {b})"),
                        None => String::new(),
                    };
                    GpError::NotPositiveDefinite { source: e, hint }
                }
                other => GpError::Solver(other),
            })?;
            let alpha = solve_with_factor(&l, &ds.outputs).map_err(GpError::Solver)?;
            Ok(make_model(alpha, Some(l), None, None))
        }
        SolverKind::Cg(cg_cfg) => {
            let r = cg_solve(&c, &ds.outputs, cg_cfg, None).map_err(GpError::Solver)?;
            let summary = CgFitSummary {
                iterations: r.iterations,
                final_residual_norm: r.final_residual_norm,
                converged: r.converged,
            };
            let model = make_model(r.u.clone(), None, Some(c), Some(summary));
            if r.converged {
                Ok(model)
            } else {
                Err(GpError::CgNotConverged {
                    iterations: r.iterations,
                    residual: r.final_residual_norm,
                    model: Box::new(model),
                    cg: r,
                })
            }
        }
    }
}

impl GpModel {
    fn check_query(&self, x_star: &[f64]) -> Result<Vec<f64>, GpError> {
        if x_star.len() != self.feature_names.len() {
            return Err(GpError::DimensionMismatch {
                expected: self.feature_names.len(),
                found: x_star.len(),
            });
        }
        Ok(scale_point(x_star, &self.domain))
    }

    /// Predictive mean `c_*' alpha` at a raw-unit query.
    pub fn predict_mean(&self, x_star: &[f64]) -> Result<f64, GpError> {
        let q = self.check_query(x_star)?;
        let c_star = cross_covariance(&q, &self.scaled_features, &self.hp, &self.solver.taper);
        Ok(dot(&c_star, &self.alpha))
    }

    /// Predictive variance `c_** - c_*' C^-1 c_*`, clamped at zero.
    pub fn predict_variance(&self, x_star: &[f64]) -> Result<f64, GpError> {
        let q = self.check_query(x_star)?;
        let c_star = cross_covariance(&q, &self.scaled_features, &self.hp, &self.solver.taper);
        let w = match (&self.factor, &self.cov) {
            (Some(l), _) => solve_with_factor(l, &c_star).map_err(GpError::Solver)?,
            (None, Some(c)) => {
                let cg_cfg = match &self.solver.kind {
                    SolverKind::Cg(c) => *c,
                    SolverKind::Direct => unreachable!("direct mode retains its factor"),
                };
                cg_solve(c, &c_star, &cg_cfg, None)
                    .map_err(GpError::Solver)?
                    .u
            }
            (None, None) => {
                // Imported model without solver state: rebuild the factor.
                let c = assemble_covariance(&self.scaled_features, &self.hp, &self.solver.taper)?;
                let l = cholesky_factor(&c).map_err(GpError::Solver)?;
                solve_with_factor(&l, &c_star).map_err(GpError::Solver)?
            }
        };
        let c_ss = sq_exp_cov(0.0, &self.hp, true);
        let var = c_ss - dot(&c_star, &w);
        if var < 0.0 {
            self.variance_clamps.fetch_add(1, Ordering::Relaxed);
            Ok(0.0)
        } else {
            Ok(var)
        }
    }

    /// How many variance predictions were clamped up to zero.
    pub fn variance_clamp_count(&self) -> usize {
        self.variance_clamps.load(Ordering::Relaxed)
    }

    pub fn train_len(&self) -> usize {
        self.alpha.len()
    }
}

impl Surrogate for GpModel {
    fn predict_mean(&self, x_star: &[f64]) -> Result<f64, GpError> {
        GpModel::predict_mean(self, x_star)
    }
    fn predict_variance(&self, x_star: &[f64]) -> Result<f64, GpError> {
        GpModel::predict_variance(self, x_star)
    }
    fn input_dim(&self) -> usize {
        self.feature_names.len()
    }
}

/// One held-out prediction from a leave-one-out pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooPoint {
    pub index: usize,
    pub actual: f64,
    pub predicted: f64,
    pub variance: Option<f64>,
}

/// Result of a leave-one-out evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub mae: f64,
    pub per_point: Vec<LooPoint>,
    pub wall_time_s: f64,
    /// Folds whose CG solve hit the iteration cap; their iterates were used.
    pub cg_nonconverged_folds: usize,
    /// Folds skipped due to factorization failure (opt-in).
    pub skipped_folds: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct LooOptions {
    pub with_variance: bool,
    /// When set, a fold whose covariance fails to factorize is recorded and
    /// skipped instead of failing the whole evaluation.
    pub skip_failed_folds: bool,
    /// Restrict held-out folds to these row indices (models still train on
    /// all remaining rows). Used by overlapping blocks.
    pub eval_indices: Option<Vec<usize>>,
}

/// Leave-one-out evaluation: N independent fits of size N-1. Folds run in
/// parallel; the MAE reduction is done in fixed index order.
pub fn loo_evaluate(
    ds: &Dataset,
    hp: &Hyperparameters,
    cfg: &SolverConfig,
    with_variance: bool,
) -> Result<LooReport, GpError> {
    loo_evaluate_with(
        ds,
        hp,
        cfg,
        &LooOptions {
            with_variance,
            ..LooOptions::default()
        },
    )
}

enum FoldOutcome {
    Ok { point: LooPoint, cg_nonconverged: bool },
    Skipped(usize),
}

pub fn loo_evaluate_with(
    ds: &Dataset,
    hp: &Hyperparameters,
    cfg: &SolverConfig,
    opts: &LooOptions,
) -> Result<LooReport, GpError> {
    let n = ds.len();
    if n < 2 {
        return Err(GpError::TooFewInstances { need: 2, have: n });
    }
    let eval: Vec<usize> = match &opts.eval_indices {
        Some(idx) => idx.clone(),
        None => (0..n).collect(),
    };
    let start = Instant::now();

    // one covariance assembly shared by all folds; each fold factors the
    // principal minor with its held-out row removed
    hp.validate(ds.dim())?;
    let scaled_full = scale_features(ds);
    let cov_full = assemble_covariance(&scaled_full, hp, &cfg.taper)?;

    let outcomes: Vec<Result<FoldOutcome, GpError>> = eval
        .par_iter()
        .map(|&held| {
            let keep: Vec<usize> = (0..n).filter(|&i| i != held).collect();
            let sub = ds.subset(&keep);
            let sub_scaled: Vec<Vec<f64>> =
                keep.iter().map(|&i| scaled_full[i].clone()).collect();
            let fitted = fit_prepared(&sub, hp, cfg, sub_scaled, cov_full.minor(held));
            let (model, nonconv) = match fitted {
                Ok(m) => (m, false),
                Err(GpError::CgNotConverged { model, .. }) => (*model, true),
                Err(e @ GpError::NotPositiveDefinite { .. }) => {
                    return if opts.skip_failed_folds {
                        Ok(FoldOutcome::Skipped(held))
                    } else {
                        Err(e)
                    };
                }
                Err(e) => return Err(e),
            };
            let x = &ds.features_raw[held];
            let predicted = model.predict_mean(x)?;
            let variance = if opts.with_variance {
                Some(model.predict_variance(x)?)
            } else {
                None
            };
            Ok(FoldOutcome::Ok {
                point: LooPoint {
                    index: held,
                    actual: ds.outputs[held],
                    predicted,
                    variance,
                },
                cg_nonconverged: nonconv,
            })
        })
        .collect();

    let mut per_point = Vec::with_capacity(eval.len());
    let mut skipped = Vec::new();
    let mut cg_nonconverged_folds = 0;
    for outcome in outcomes {
        match outcome? {
            FoldOutcome::Ok { point, cg_nonconverged } => {
                if cg_nonconverged {
                    cg_nonconverged_folds += 1;
                }
                per_point.push(point);
            }
            FoldOutcome::Skipped(i) => skipped.push(i),
        }
    }
    if per_point.is_empty() {
        return Err(GpError::TooFewInstances { need: 1, have: 0 });
    }
    let mae = per_point
        .iter()
        .map(|p| (p.predicted - p.actual).abs())
        .sum::<f64>()
        / per_point.len() as f64;

    Ok(LooReport {
        mae,
        per_point,
        wall_time_s: start.elapsed().as_secs_f64(),
        cg_nonconverged_folds,
        skipped_folds: skipped,
    })
}

/// Serializable form of a fitted model (schema `version` 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpModelData {
    pub feature_names: Vec<String>,
    pub domain: Vec<(f64, f64)>,
    pub hyperparameters: Hyperparameters,
    pub solver: SolverConfig,
    pub alpha: Vec<f64>,
    pub features_raw: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl GpModel {
    pub fn to_data(&self) -> GpModelData {
        GpModelData {
            feature_names: self.feature_names.clone(),
            domain: self.domain.clone(),
            hyperparameters: self.hp.clone(),
            solver: self.solver.clone(),
            alpha: self.alpha.clone(),
            features_raw: self.features_raw.clone(),
            outputs: self.outputs.clone(),
        }
    }

    /// Rebuilds a model from exported data. The stored `alpha` is honored;
    /// solver state for variance queries is rebuilt lazily.
    pub fn from_data(data: GpModelData) -> Result<GpModel, GpError> {
        data.hyperparameters.validate(data.feature_names.len())?;
        let ds = Dataset::with_domain(
            data.feature_names,
            data.features_raw,
            data.outputs,
            data.domain,
        );
        let scaled = scale_features(&ds);
        Ok(GpModel {
            feature_names: ds.feature_names,
            domain: ds.domain,
            scaled_features: scaled,
            features_raw: ds.features_raw,
            outputs: ds.outputs,
            hp: data.hyperparameters,
            solver: data.solver,
            alpha: data.alpha,
            factor: None,
            cov: None,
            cg_fit: None,
            variance_clamps: AtomicUsize::new(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let outputs = features
            .iter()
            .map(|x| (x[0] * 0.4).sin() + 0.3 * x[1])
            .collect();
        Dataset::new(vec!["a".into(), "b".into()], features, outputs)
    }

    #[test]
    fn scaling_endpoints() {
        let ds = Dataset::new(
            vec!["power".into()],
            vec![vec![50.0], vec![400.0], vec![225.0]],
            vec![0.0, 0.0, 0.0],
        );
        let s = scale_features(&ds);
        assert_eq!(s[0][0], 0.0);
        assert_eq!(s[1][0], 1.0);
        assert_relative_eq!(s[2][0], 0.5);
    }

    #[test]
    fn scaling_constant_column() {
        let ds = Dataset::new(
            vec!["c".into()],
            vec![vec![3.0], vec![3.0]],
            vec![0.0, 1.0],
        );
        assert_eq!(scale_features(&ds), vec![vec![0.5], vec![0.5]]);
    }

    #[test]
    fn fit_single_point() {
        let ds = Dataset::new(vec!["x".into()], vec![vec![1.0]], vec![6.0]);
        let hp = Hyperparameters::new(2.0, 0.0, vec![1.0]);
        let m = fit(&ds, &hp, &SolverConfig::direct()).unwrap();
        assert_relative_eq!(m.alpha[0], 6.0 / 4.0);
    }

    #[test]
    fn fit_duplicate_points_fails() {
        let ds = Dataset::new(
            vec!["x".into()],
            vec![vec![1.0], vec![1.0], vec![2.0]],
            vec![1.0, 1.0, 2.0],
        );
        let hp = Hyperparameters::new(1.0, 0.0, vec![1.0]);
        let err = fit(&ds, &hp, &SolverConfig::direct()).unwrap_err();
        match err {
            GpError::NotPositiveDefinite { hint, .. } => {
                assert!(hint.contains("duplicate"), "hint was {hint:?}")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn direct_and_cg_alpha_agree() {
        let ds = toy_dataset(20, 42);
        let hp = Hyperparameters::new(1.0, 0.05, vec![0.4, 0.4]);
        let direct = fit(&ds, &hp, &SolverConfig::direct()).unwrap();
        let cg = fit(&ds, &hp, &SolverConfig::cg(1e-10, 200)).unwrap();
        let num: f64 = direct
            .alpha
            .iter()
            .zip(&cg.alpha)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = direct.alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(num / den <= 1e-8);
    }

    #[test]
    fn noiseless_interpolation() {
        let ds = toy_dataset(30, 1);
        let hp = Hyperparameters::new(1.0, 0.0, vec![0.5, 0.5]);
        let m = fit(&ds, &hp, &SolverConfig::direct()).unwrap();
        let ymax = ds.outputs.iter().fold(0.0f64, |a, y| a.max(y.abs()));
        for (x, y) in ds.features_raw.iter().zip(&ds.outputs) {
            let p = m.predict_mean(x).unwrap();
            assert!((p - y).abs() <= 1e-6 * ymax);
            let v = m.predict_variance(x).unwrap();
            assert!(v <= 1e-8);
        }
    }

    #[test]
    fn prior_mean_and_variance_far_away() {
        let ds = toy_dataset(15, 2);
        let hp = Hyperparameters::new(1.3, 0.1, vec![0.05, 0.05]);
        let m = fit(&ds, &hp, &SolverConfig::direct()).unwrap();
        // Far outside the training domain in scaled units.
        let far = vec![1e6, 1e6];
        assert!(m.predict_mean(&far).unwrap().abs() <= 1e-9);
        let c_ss = hp.sigma_f * hp.sigma_f + hp.sigma_n * hp.sigma_n;
        assert_relative_eq!(m.predict_variance(&far).unwrap(), c_ss, max_relative = 1e-9);
    }

    #[test]
    fn predict_matches_dense_oracle() {
        // Independent dense route through nalgebra.
        use nalgebra::{DMatrix, DVector};
        let ds = toy_dataset(20, 7);
        let hp = Hyperparameters::new(0.9, 0.02, vec![0.3, 0.6]);
        let m = fit(&ds, &hp, &SolverConfig::direct()).unwrap();
        let scaled = scale_features(&ds);
        let n = ds.len();
        let dense = DMatrix::from_fn(n, n, |i, j| {
            let dist = crate::kernels::weighted_distance(&scaled[i], &scaled[j], &hp.length_scales)
                .unwrap();
            sq_exp_cov(dist, &hp, i == j)
        });
        let y = DVector::from_vec(ds.outputs.clone());
        let lu = dense.clone().lu();

        let query = vec![4.2, 0.7];
        let q = scale_point(&query, &ds.domain);
        let c_star = DVector::from_vec(
            scaled
                .iter()
                .map(|x| {
                    let dist =
                        crate::kernels::weighted_distance(&q, x, &hp.length_scales).unwrap();
                    sq_exp_cov(dist, &hp, false)
                })
                .collect::<Vec<_>>(),
        );
        let alpha = lu.solve(&y).unwrap();
        let mean_oracle = c_star.dot(&alpha);
        let w = lu.solve(&c_star).unwrap();
        let var_oracle = sq_exp_cov(0.0, &hp, true) - c_star.dot(&w);

        assert_relative_eq!(m.predict_mean(&query).unwrap(), mean_oracle, epsilon = 1e-8);
        assert_relative_eq!(
            m.predict_variance(&query).unwrap(),
            var_oracle,
            epsilon = 1e-8
        );
    }

    #[test]
    fn loo_two_points_closed_form() {
        // With one training point, prediction is k(D) * y / (sf^2 + sn^2).
        let ds = Dataset::new(
            vec!["x".into()],
            vec![vec![0.0], vec![1.0]],
            vec![2.0, -1.0],
        );
        let hp = Hyperparameters::new(1.5, 0.2, vec![0.8]);
        let rep = loo_evaluate(&ds, &hp, &SolverConfig::direct(), false).unwrap();
        // Scaled distance between the two points is 1 / 0.8.
        let d = 1.0 / 0.8;
        let k = sq_exp_cov(d, &hp, false);
        let denom = hp.sigma_f * hp.sigma_f + hp.sigma_n * hp.sigma_n;
        assert_relative_eq!(rep.per_point[0].predicted, k * -1.0 / denom, epsilon = 1e-12);
        assert_relative_eq!(rep.per_point[1].predicted, k * 2.0 / denom, epsilon = 1e-12);
    }

    #[test]
    fn loo_constant_zero_outputs() {
        let mut ds = toy_dataset(10, 3);
        ds.outputs = vec![0.0; 10];
        let hp = Hyperparameters::new(1.0, 0.01, vec![0.5, 0.5]);
        let rep = loo_evaluate(&ds, &hp, &SolverConfig::direct(), false).unwrap();
        assert_eq!(rep.mae, 0.0);
    }

    #[test]
    fn loo_matches_brute_force() {
        let ds = toy_dataset(30, 9);
        let hp = Hyperparameters::new(1.0, 0.05, vec![0.4, 0.4]);
        let cfg = SolverConfig::direct();
        let rep = loo_evaluate(&ds, &hp, &cfg, false).unwrap();

        // Brute-force oracle: plain sequential loop of fit + predict_mean.
        let mut abs_sum = 0.0;
        for held in 0..ds.len() {
            let keep: Vec<usize> = (0..ds.len()).filter(|&i| i != held).collect();
            let m = fit(&ds.subset(&keep), &hp, &cfg).unwrap();
            let p = m.predict_mean(&ds.features_raw[held]).unwrap();
            abs_sum += (p - ds.outputs[held]).abs();
            assert_relative_eq!(rep.per_point[held].predicted, p, epsilon = 1e-12);
        }
        assert_relative_eq!(rep.mae, abs_sum / ds.len() as f64, epsilon = 1e-12);
    }

    #[test]
    fn loo_permutation_invariant_mae() {
        let ds = toy_dataset(16, 4);
        let hp = Hyperparameters::new(1.0, 0.05, vec![0.4, 0.4]);
        let cfg = SolverConfig::direct();
        let mae = loo_evaluate(&ds, &hp, &cfg, false).unwrap().mae;

        let perm: Vec<usize> = (0..16).rev().collect();
        let ds2 = ds.subset(&perm);
        let mae2 = loo_evaluate(&ds2, &hp, &cfg, false).unwrap().mae;
        assert_relative_eq!(mae, mae2, epsilon = 1e-12);
    }

    #[test]
    fn model_roundtrip_through_json() {
        let ds = toy_dataset(12, 5);
        let hp = Hyperparameters::new(1.0, 0.05, vec![0.4, 0.4]);
        let m = fit(&ds, &hp, &SolverConfig::direct()).unwrap();
        let json = serde_json::to_string(&m.to_data()).unwrap();
        let back = GpModel::from_data(serde_json::from_str(&json).unwrap()).unwrap();
        let q = vec![3.3, 0.1];
        assert_relative_eq!(
            m.predict_mean(&q).unwrap(),
            back.predict_mean(&q).unwrap(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            m.predict_variance(&q).unwrap(),
            back.predict_variance(&q).unwrap(),
            epsilon = 1e-10
        );
    }
}
