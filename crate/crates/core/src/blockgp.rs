//! Independent-block GP: partition the data into non-overlapping blocks along
//! one or two input dimensions, run the hyperparameter search separately per
//! block, and route predictions to the owning block.
//!
//! Blocks are count-balanced: per split dimension, points are sorted by value
//! and cut at ranks `b * N / B`, with cuts shifted forward so equal values
//! never straddle a boundary.

use crate::design::hyperparam_candidates;
use crate::gp::{fit, Dataset, GpError, GpModel, GpModelData, Surrogate};
use crate::hyperopt::{evaluate_candidates, HyperoptError, SearchConfig};
use crate::kernels::Hyperparameters;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlockGpError {
    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: HyperoptError,
    },
    #[error("empty block {block}: a tie group swallowed its quota")]
    EmptyBlock { block: usize },
    #[error("invalid block spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Hyperopt(#[from] HyperoptError),
}

/// How to split the dataset into blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    /// One or two feature indices to split along.
    pub dims: Vec<usize>,
    /// Blocks per split dimension; total B is the product.
    pub counts: Vec<usize>,
    /// Fraction of a block's value range appended on each side for fitting
    /// only. Zero disables overlap.
    pub overlap_fraction: f64,
}

impl BlockSpec {
    pub fn new(dims: Vec<usize>, counts: Vec<usize>) -> Self {
        BlockSpec {
            dims,
            counts,
            overlap_fraction: 0.0,
        }
    }

    pub fn total_blocks(&self) -> usize {
        self.counts.iter().product()
    }

    fn validate(&self, d: usize, n: usize) -> Result<(), BlockGpError> {
        if self.dims.is_empty() || self.dims.len() > 2 {
            return Err(BlockGpError::InvalidSpec(format!(
                "expected 1 or 2 split dimensions, got {}",
                self.dims.len()
            )));
        }
        if self.dims.len() != self.counts.len() {
            return Err(BlockGpError::InvalidSpec(
                "dims and counts must have the same length".into(),
            ));
        }
        if let Some(bad) = self.dims.iter().find(|m| **m >= d) {
            return Err(BlockGpError::InvalidSpec(format!(
                "split dimension {bad} out of range for d = {d}"
            )));
        }
        if self.counts.iter().any(|c| *c == 0) {
            return Err(BlockGpError::InvalidSpec("block counts must be >= 1".into()));
        }
        let b = self.total_blocks();
        if b > 1 && n < 2 * b {
            return Err(BlockGpError::InvalidSpec(format!(
                "need at least 2B = {} instances, have {n}",
                2 * b
            )));
        }
        if !(0.0..0.5).contains(&self.overlap_fraction) {
            return Err(BlockGpError::InvalidSpec(format!(
                "overlap_fraction must be in [0, 0.5), got {}",
                self.overlap_fraction
            )));
        }
        Ok(())
    }
}

/// A concrete disjoint cover of the instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub spec: BlockSpec,
    /// Block id per instance.
    pub assignment: Vec<usize>,
    /// Per split dim: the maximum value of each lower block. A query belongs
    /// to the lowest block whose boundary is >= its value (boundary values
    /// route to the lower block).
    pub boundaries: Vec<Vec<f64>>,
    pub block_sizes: Vec<usize>,
}

impl Partition {
    /// Block id along each split dim for a raw value, then combined row-major.
    pub fn locate(&self, x: &[f64]) -> usize {
        let mut id = 0;
        for (k, &dim) in self.spec.dims.iter().enumerate() {
            let v = x[dim];
            let along = self.boundaries[k].iter().filter(|b| v > **b).count();
            id = id * self.spec.counts[k] + along;
        }
        id
    }

    pub fn block_indices(&self, block: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (b == block).then_some(i))
            .collect()
    }

    /// Paper-style block code: one digit per input dimension, 0 when the
    /// dimension is not split, otherwise 1-based block index along it.
    pub fn block_code(&self, block: usize, d: usize) -> String {
        let mut along = vec![0usize; self.spec.dims.len()];
        let mut rest = block;
        for k in (0..self.spec.dims.len()).rev() {
            along[k] = rest % self.spec.counts[k];
            rest /= self.spec.counts[k];
        }
        let mut code = String::new();
        for m in 0..d {
            match self.spec.dims.iter().position(|&dim| dim == m) {
                Some(k) => write!(code, "{}", along[k] + 1).unwrap(),
                None => code.push('0'),
            }
        }
        code
    }
}

/// Splits one dimension into count-balanced groups, shifting cuts forward so
/// tied values stay together. Returns (per-point block id, boundaries).
fn split_dim(
    values: &[f64],
    count: usize,
) -> Result<(Vec<usize>, Vec<f64>), BlockGpError> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

    let mut boundaries = Vec::with_capacity(count - 1);
    let mut prev_cut = 0usize;
    for b in 1..count {
        let mut cut = b * n / count;
        while cut < n && cut > 0 && values[order[cut]] == values[order[cut - 1]] {
            cut += 1;
        }
        if cut <= prev_cut || cut >= n {
            return Err(BlockGpError::EmptyBlock { block: b });
        }
        boundaries.push(values[order[cut - 1]]);
        prev_cut = cut;
    }
    let ids = values
        .iter()
        .map(|v| boundaries.iter().filter(|b| *v > **b).count())
        .collect();
    Ok((ids, boundaries))
}

/// Partitions the dataset per the spec; two-dim specs split each dimension
/// independently and cross the results.
pub fn partition(ds: &Dataset, spec: &BlockSpec) -> Result<Partition, BlockGpError> {
    spec.validate(ds.dim(), ds.len())?;
    let n = ds.len();
    let mut per_dim_ids = Vec::new();
    let mut boundaries = Vec::new();
    for (k, &dim) in spec.dims.iter().enumerate() {
        let values: Vec<f64> = ds.features_raw.iter().map(|r| r[dim]).collect();
        let (ids, bounds) = split_dim(&values, spec.counts[k])?;
        per_dim_ids.push(ids);
        boundaries.push(bounds);
    }
    let mut assignment = vec![0usize; n];
    for i in 0..n {
        let mut id = 0;
        for k in 0..spec.dims.len() {
            id = id * spec.counts[k] + per_dim_ids[k][i];
        }
        assignment[i] = id;
    }
    let b = spec.total_blocks();
    let mut block_sizes = vec![0usize; b];
    for &a in &assignment {
        block_sizes[a] += 1;
    }
    if let Some(empty) = block_sizes.iter().position(|s| *s == 0) {
        return Err(BlockGpError::EmptyBlock { block: empty });
    }
    Ok(Partition {
        spec: spec.clone(),
        assignment,
        boundaries,
        block_sizes,
    })
}

/// Per-block search outcome kept alongside the fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSummary {
    pub block: usize,
    pub code: String,
    pub size: usize,
    pub hp: Hyperparameters,
    pub mae: f64,
    /// Index of the selected candidate in the shared candidate list.
    pub candidate_index: usize,
    pub wall_time_s: f64,
    pub cg_nonconverged_folds: usize,
}

/// Independent-block GP: one separately hyper-optimized model per block.
#[derive(Debug)]
pub struct BlockGpModel {
    pub partition: Partition,
    pub models: Vec<GpModel>,
    pub summaries: Vec<BlockSummary>,
    pub n_candidates: usize,
}

/// Fits every block with the shared candidate list from `search` and keeps
/// the per-block argmin. Overlap neighbors join a block's training rows but
/// never its held-out LOO folds.
pub fn fit_blocks(
    ds: &Dataset,
    part: &Partition,
    search: &SearchConfig,
) -> Result<BlockGpModel, BlockGpError> {
    let candidates = hyperparam_candidates(&search.space, search.r, search.seed)
        .map_err(HyperoptError::from)?;
    fit_blocks_with_candidates(ds, part, &candidates, search)
}

pub fn fit_blocks_with_candidates(
    ds: &Dataset,
    part: &Partition,
    candidates: &[Hyperparameters],
    search: &SearchConfig,
) -> Result<BlockGpModel, BlockGpError> {
    let b = part.spec.total_blocks();
    let d = ds.dim();
    let mut models = Vec::with_capacity(b);
    let mut summaries = Vec::with_capacity(b);

    for block in 0..b {
        let started = Instant::now();
        let own = part.block_indices(block);
        let extra = overlap_indices(ds, part, block, &own);
        let mut rows = own.clone();
        rows.extend(extra);
        let sub = ds.subset(&rows);
        let eval_idx: Vec<usize> = (0..own.len()).collect();

        let evals = evaluate_candidates(&sub, candidates, &search.solver, Some(&eval_idx))
            .map_err(|source| BlockGpError::Block { block, source })?;
        let best = evals
            .iter()
            .enumerate()
            .filter(|(_, e)| e.mae.is_finite())
            .min_by(|(_, a), (_, b)| a.mae.partial_cmp(&b.mae).unwrap())
            .map(|(i, _)| i)
            .ok_or(BlockGpError::Block {
                block,
                source: HyperoptError::AllCandidatesFailed,
            })?;
        let hp = candidates[best].clone();
        let model = match fit(&sub, &hp, &search.solver) {
            Ok(m) => m,
            Err(GpError::CgNotConverged { model, .. }) => *model,
            Err(e) => return Err(e.into()),
        };
        let cg_nonconverged_folds = evals[best].cg_nonconverged_folds;
        summaries.push(BlockSummary {
            block,
            code: part.block_code(block, d),
            size: own.len(),
            hp,
            mae: evals[best].mae,
            candidate_index: best,
            wall_time_s: started.elapsed().as_secs_f64(),
            cg_nonconverged_folds,
        });
        models.push(model);
    }

    Ok(BlockGpModel {
        partition: part.clone(),
        models,
        summaries,
        n_candidates: candidates.len(),
    })
}

/// Rows outside `block` that fall inside its overlap-extended value ranges on
/// every split dimension.
fn overlap_indices(ds: &Dataset, part: &Partition, block: usize, own: &[usize]) -> Vec<usize> {
    let f = part.spec.overlap_fraction;
    if f <= 0.0 {
        return Vec::new();
    }
    let mut ranges = Vec::new();
    for &dim in &part.spec.dims {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in own {
            let v = ds.features_raw[i][dim];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let ext = f * (hi - lo);
        ranges.push((dim, lo - ext, hi + ext));
    }
    (0..ds.len())
        .filter(|i| part.assignment[*i] != block)
        .filter(|&i| {
            ranges
                .iter()
                .all(|(dim, lo, hi)| {
                    let v = ds.features_raw[i][*dim];
                    v >= *lo && v <= *hi
                })
        })
        .collect()
}

impl BlockGpModel {
    /// Which block's model serves a query; boundary routing ignores overlap.
    pub fn route(&self, x_star: &[f64]) -> usize {
        self.partition.locate(x_star)
    }

    pub fn predict_block(&self, x_star: &[f64]) -> Result<(f64, f64, usize), GpError> {
        let block = self.route(x_star);
        let m = &self.models[block];
        Ok((m.predict_mean(x_star)?, m.predict_variance(x_star)?, block))
    }

    pub fn total_block_time_s(&self) -> f64 {
        self.summaries.iter().map(|s| s.wall_time_s).sum()
    }

    /// Summed cubic operation count over blocks, the dominant direct-solver
    /// cost; ideally N^3 / B^2 for perfectly balanced blocks.
    pub fn cubic_op_count(&self) -> f64 {
        self.partition
            .block_sizes
            .iter()
            .map(|&s| (s as f64).powi(3))
            .sum()
    }
}

impl Surrogate for BlockGpModel {
    fn predict_mean(&self, x_star: &[f64]) -> Result<f64, GpError> {
        self.models[self.route(x_star)].predict_mean(x_star)
    }
    fn predict_variance(&self, x_star: &[f64]) -> Result<f64, GpError> {
        self.models[self.route(x_star)].predict_variance(x_star)
    }
    fn input_dim(&self) -> usize {
        self.models[0].feature_names.len()
    }
}

/// Comparison of a full-data search against the blocked run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub block_variable: String,
    pub full_time_s: f64,
    pub full_mae: f64,
    pub total_block_time_s: f64,
    pub speedup: f64,
    pub rows: Vec<BlockSummary>,
    /// Measured sum of block-size cubes and the balanced-block bound N^3/B^2.
    pub cubic_op_count: f64,
    pub cubic_op_bound: f64,
}

pub fn speedup_report(
    full_time_s: f64,
    full_mae: f64,
    m: &BlockGpModel,
    feature_names: &[String],
) -> SpeedupReport {
    let n: usize = m.partition.block_sizes.iter().sum();
    let b = m.partition.spec.total_blocks();
    let block_variable = m
        .partition
        .spec
        .dims
        .iter()
        .map(|&d| feature_names[d].clone())
        .collect::<Vec<_>>()
        .join(",");
    let total_block_time_s = m.total_block_time_s();
    SpeedupReport {
        block_variable,
        full_time_s,
        full_mae,
        total_block_time_s,
        speedup: full_time_s / total_block_time_s,
        rows: m.summaries.clone(),
        cubic_op_count: m.cubic_op_count(),
        cubic_op_bound: (n as f64).powi(3) / (b as f64).powi(2),
    }
}

impl SpeedupReport {
    /// Plain-text table: block variable, block number, time, sigma_f,
    /// sigma_n, lambdas, MAE.
    pub fn render_table(&self, feature_names: &[String]) -> String {
        let mut out = String::new();
        let mut header = vec![
            "block_variable".to_string(),
            "block".into(),
            "time_s".into(),
            "sigma_f".into(),
            "sigma_n".into(),
        ];
        header.extend(feature_names.iter().map(|n| format!("lambda_{n}")));
        header.push("mae".into());
        writeln!(out, "{}", header.join("\t")).unwrap();
        for row in &self.rows {
            let mut cols = vec![
                self.block_variable.clone(),
                row.code.clone(),
                format!("{:.3}", row.wall_time_s),
                format!("{:.3e}", row.hp.sigma_f),
                format!("{:.3e}", row.hp.sigma_n),
            ];
            cols.extend(row.hp.length_scales.iter().map(|l| format!("{l:.3}")));
            cols.push(format!("{:.3e}", row.mae));
            writeln!(out, "{}", cols.join("\t")).unwrap();
        }
        writeln!(
            out,
            "full_time_s\t{:.3}\tfull_mae\t{:.3e}\ttotal_block_time_s\t{:.3}\tspeedup\t{:.2}",
            self.full_time_s, self.full_mae, self.total_block_time_s, self.speedup
        )
        .unwrap();
        out
    }
}

/// Diagnostic for choosing a blocking dimension: pooled within-block output
/// standard deviation when splitting each dimension alone into `count`
/// blocks. Lower means instances with similar outputs share a block.
pub fn dim_spread_scores(ds: &Dataset, count: usize) -> Vec<f64> {
    (0..ds.dim())
        .map(|dim| {
            let spec = BlockSpec::new(vec![dim], vec![count]);
            match partition(ds, &spec) {
                Ok(p) => {
                    let mut pooled = 0.0;
                    for b in 0..count {
                        let idx = p.block_indices(b);
                        let ys: Vec<f64> = idx.iter().map(|&i| ds.outputs[i]).collect();
                        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
                        pooled += ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>();
                    }
                    (pooled / ds.len() as f64).sqrt()
                }
                Err(_) => f64::INFINITY,
            }
        })
        .collect()
}

/// Serializable form of a blocked model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockModelData {
    pub partition: Partition,
    pub blocks: Vec<GpModelData>,
    pub summaries: Vec<BlockSummary>,
    pub n_candidates: usize,
}

impl BlockGpModel {
    pub fn to_data(&self) -> BlockModelData {
        BlockModelData {
            partition: self.partition.clone(),
            blocks: self.models.iter().map(GpModel::to_data).collect(),
            summaries: self.summaries.clone(),
            n_candidates: self.n_candidates,
        }
    }

    pub fn from_data(data: BlockModelData) -> Result<BlockGpModel, GpError> {
        let models = data
            .blocks
            .into_iter()
            .map(GpModel::from_data)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BlockGpModel {
            partition: data.partition,
            models,
            summaries: data.summaries,
            n_candidates: data.n_candidates,
        })
    }
}
