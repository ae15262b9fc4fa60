//! Random-search hyperparameter optimization: evaluate R candidate sets by
//! leave-one-out MAE and keep the argmin, with a full evaluation trace.

use crate::design::{hyperparam_candidates, DesignError, Domain};
use crate::gp::{loo_evaluate_with, Dataset, GpError, LooOptions, LooReport, SolverConfig};
use crate::kernels::Hyperparameters;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HyperoptError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("no candidate produced a finite MAE")]
    AllCandidatesFailed,
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Hyperparameter box, d + 2 dims in order (sigma_f, sigma_n, lambdas).
    pub space: Domain,
    /// Candidate count R.
    pub r: usize,
    pub solver: SolverConfig,
    pub seed: u64,
    /// After selection, run the two extra variance-bearing LOO passes (one at
    /// a default hyperparameter set, one at the optimum).
    pub with_variance_finals: bool,
}

/// One evaluated candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateEval {
    pub hp: Hyperparameters,
    /// LOO mean absolute error; +inf when the covariance failed to factorize.
    pub mae: f64,
    pub wall_time_s: f64,
    pub cg_nonconverged_folds: usize,
    pub failed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchTrace {
    pub evals: Vec<CandidateEval>,
    /// Argmin of MAE, first occurrence on ties.
    pub best_index: usize,
    pub total_time_s: f64,
    /// GP models built: R * N, plus 2N when the variance finals ran.
    pub model_builds: usize,
    pub default_pass: Option<LooReport>,
    pub optimum_pass: Option<LooReport>,
}

impl SearchTrace {
    pub fn best(&self) -> &CandidateEval {
        &self.evals[self.best_index]
    }

    /// One CSV row per candidate: sigma_f, sigma_n, lambdas, MAE, time.
    pub fn write_csv<W: Write>(&self, w: W, feature_names: &[String]) -> Result<(), HyperoptError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["index".to_string(), "sigma_f".into(), "sigma_n".into()];
        header.extend(feature_names.iter().map(|n| format!("lambda_{n}")));
        header.push("mae".into());
        header.push("time_s".into());
        header.push("cg_nonconverged_folds".into());
        wtr.write_record(&header)?;
        for (i, e) in self.evals.iter().enumerate() {
            let mut row = vec![i.to_string(), format!("{:.9e}", e.hp.sigma_f), format!("{:.9e}", e.hp.sigma_n)];
            row.extend(e.hp.length_scales.iter().map(|l| format!("{l:.9e}")));
            row.push(if e.failed { "inf".into() } else { format!("{:.9e}", e.mae) });
            row.push(format!("{:.6}", e.wall_time_s));
            row.push(e.cg_nonconverged_folds.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Default hyperparameter set for the "default" final pass.
pub fn default_hyperparameters(ds: &Dataset) -> Hyperparameters {
    let s = ds.output_std().max(f64::MIN_POSITIVE);
    Hyperparameters::new(s, 1e-3 * s, vec![1.0; ds.dim()])
}

/// Evaluates a fixed candidate list by LOO MAE. A candidate whose covariance
/// is not positive definite gets an infinite MAE and the search continues;
/// CG folds that hit the cap contribute their final iterate.
pub fn evaluate_candidates(
    ds: &Dataset,
    candidates: &[Hyperparameters],
    solver: &SolverConfig,
    eval_indices: Option<&[usize]>,
) -> Result<Vec<CandidateEval>, HyperoptError> {
    let mut evals = Vec::with_capacity(candidates.len());
    for hp in candidates {
        let started = Instant::now();
        let opts = LooOptions {
            with_variance: false,
            skip_failed_folds: false,
            eval_indices: eval_indices.map(<[usize]>::to_vec),
        };
        match loo_evaluate_with(ds, hp, solver, &opts) {
            Ok(rep) => evals.push(CandidateEval {
                hp: hp.clone(),
                mae: rep.mae,
                wall_time_s: started.elapsed().as_secs_f64(),
                cg_nonconverged_folds: rep.cg_nonconverged_folds,
                failed: false,
            }),
            Err(GpError::NotPositiveDefinite { .. }) => evals.push(CandidateEval {
                hp: hp.clone(),
                mae: f64::INFINITY,
                wall_time_s: started.elapsed().as_secs_f64(),
                cg_nonconverged_folds: 0,
                failed: true,
            }),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(evals)
}

fn argmin(evals: &[CandidateEval]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in evals.iter().enumerate() {
        if e.mae.is_finite() && best.map_or(true, |b| e.mae < evals[b].mae) {
            best = Some(i);
        }
    }
    best
}

/// Random search over `cfg.r` best-candidate draws from the space.
pub fn random_search(
    ds: &Dataset,
    cfg: &SearchConfig,
) -> Result<(Hyperparameters, SearchTrace), HyperoptError> {
    let candidates = hyperparam_candidates(&cfg.space, cfg.r, cfg.seed)?;
    search_with_candidates(ds, &candidates, &cfg.solver, cfg.with_variance_finals)
}

/// Random search over an explicit candidate list. Blocked pipelines call this
/// so every block and the full-data baseline share the same candidates.
pub fn search_with_candidates(
    ds: &Dataset,
    candidates: &[Hyperparameters],
    solver: &SolverConfig,
    with_variance_finals: bool,
) -> Result<(Hyperparameters, SearchTrace), HyperoptError> {
    let started = Instant::now();
    let evals = evaluate_candidates(ds, candidates, solver, None)?;
    let best_index = argmin(&evals).ok_or(HyperoptError::AllCandidatesFailed)?;
    let best_hp = evals[best_index].hp.clone();

    let mut model_builds = candidates.len() * ds.len();
    let (default_pass, optimum_pass) = if with_variance_finals {
        let var_opts = LooOptions {
            with_variance: true,
            ..LooOptions::default()
        };
        let default_hp = default_hyperparameters(ds);
        let dp = loo_evaluate_with(ds, &default_hp, solver, &var_opts)?;
        let op = loo_evaluate_with(ds, &best_hp, solver, &var_opts)?;
        model_builds += 2 * ds.len();
        (Some(dp), Some(op))
    } else {
        (None, None)
    };

    let trace = SearchTrace {
        evals,
        best_index,
        total_time_s: started.elapsed().as_secs_f64(),
        model_builds,
        default_pass,
        optimum_pass,
    };
    Ok((best_hp, trace))
}
