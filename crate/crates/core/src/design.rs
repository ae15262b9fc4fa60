//! Space-filling experiment designs: stratified random sampling over a
//! leveled box and Mitchell-style best-candidate sampling. Also generates
//! hyperparameter candidates for the random search.

use crate::kernels::Hyperparameters;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DesignError {
    #[error("dimension {name}: invalid range [{min}, {max}]")]
    InvalidRange { name: String, min: f64, max: f64 },
    #[error("dimension {0} has no level count set")]
    MissingLevels(String),
    #[error("hyperparameter space must have d + 2 dimensions, got {0}")]
    BadSpaceDim(usize),
}

/// One input dimension of a sampling box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
}

/// A box domain with named dimensions and optional per-dimension levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dims: Vec<DimSpec>,
}

impl Domain {
    pub fn new(dims: Vec<DimSpec>) -> Self {
        Domain { dims }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.dims.iter().map(|d| d.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        for d in &self.dims {
            if !(d.min < d.max) {
                return Err(DesignError::InvalidRange {
                    name: d.name.clone(),
                    min: d.min,
                    max: d.max,
                });
            }
            if let Some(0) = d.levels {
                return Err(DesignError::MissingLevels(d.name.clone()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(&self.dims)
                .all(|(v, d)| *v >= d.min && *v <= d.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    Stratified,
    BestCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub method: SampleMethod,
}

/// One uniform draw per cell of the leveled grid, iterated in row-major cell
/// order. Deterministic for a fixed seed.
pub fn stratified_sample(dom: &Domain, seed: u64) -> Result<SampleSet, DesignError> {
    dom.validate()?;
    let levels: Vec<usize> = dom
        .dims
        .iter()
        .map(|d| d.levels.ok_or_else(|| DesignError::MissingLevels(d.name.clone())))
        .collect::<Result<_, _>>()?;
    let total: usize = levels.iter().product();
    let d = dom.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(total);
    let mut cell = vec![0usize; d];
    for _ in 0..total {
        let p: Vec<f64> = (0..d)
            .map(|m| {
                let spec = &dom.dims[m];
                let w = (spec.max - spec.min) / levels[m] as f64;
                let lo = spec.min + cell[m] as f64 * w;
                rng.gen_range(lo..lo + w)
            })
            .collect();
        points.push(p);
        // advance the row-major cell counter
        for m in (0..d).rev() {
            cell[m] += 1;
            if cell[m] < levels[m] {
                break;
            }
            cell[m] = 0;
        }
    }
    Ok(SampleSet {
        points,
        seed,
        method: SampleMethod::Stratified,
    })
}

fn unit_scale(p: &[f64], dom: &Domain) -> Vec<f64> {
    p.iter()
        .zip(&dom.dims)
        .map(|(v, d)| (v - d.min) / (d.max - d.min))
        .collect()
}

fn min_dist_sq(scaled: &[f64], accepted: &[Vec<f64>]) -> f64 {
    accepted
        .iter()
        .map(|a| {
            a.iter()
                .zip(scaled)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Greedy best-candidate sampling: each step draws `k` uniform candidates and
/// keeps the one farthest (max-min Euclidean distance in the unit-scaled box)
/// from everything accepted so far. With no prior points, the first point is
/// a single uniform draw.
pub fn best_candidate_sample(
    dom: &Domain,
    n: usize,
    k: usize,
    seed: u64,
    existing: Option<&[Vec<f64>]>,
) -> Result<SampleSet, DesignError> {
    dom.validate()?;
    let d = dom.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted_scaled: Vec<Vec<f64>> = existing
        .map(|pts| pts.iter().map(|p| unit_scale(p, dom)).collect())
        .unwrap_or_default();
    let mut points = Vec::with_capacity(n);

    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|m| rng.gen_range(dom.dims[m].min..dom.dims[m].max))
            .collect()
    };

    for _ in 0..n {
        if accepted_scaled.is_empty() {
            let p = draw(&mut rng);
            accepted_scaled.push(unit_scale(&p, dom));
            points.push(p);
            continue;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..k.max(1) {
            let cand = draw(&mut rng);
            let dist = min_dist_sq(&unit_scale(&cand, dom), &accepted_scaled);
            if best.as_ref().map_or(true, |(bd, _)| dist > *bd) {
                best = Some((dist, cand));
            }
        }
        let (_, p) = best.unwrap();
        accepted_scaled.push(unit_scale(&p, dom));
        points.push(p);
    }
    Ok(SampleSet {
        points,
        seed,
        method: SampleMethod::BestCandidate,
    })
}

/// Default candidate count per best-candidate step.
pub const DEFAULT_BEST_CANDIDATE_K: usize = 32;

/// Default hyperparameter search box for a `d`-dimensional problem whose
/// outputs have standard deviation `output_std`: the signal and noise scales
/// are sampled log-uniformly, the length scales linearly.
pub fn default_hyperparam_space(d: usize, output_std: f64) -> Domain {
    let s = if output_std > 0.0 { output_std } else { 1.0 };
    let mut dims = vec![
        DimSpec {
            name: "sigma_f".into(),
            min: 1e-2 * s,
            max: 1e1 * s,
            levels: None,
        },
        DimSpec {
            name: "sigma_n".into(),
            min: 1e-6 * s,
            max: 1e-1 * s,
            levels: None,
        },
    ];
    for m in 0..d {
        dims.push(DimSpec {
            name: format!("lambda_{m}"),
            min: 0.05,
            max: 2.0,
            levels: None,
        });
    }
    Domain::new(dims)
}

/// Best-candidate samples over the hyperparameter box. The space must have
/// `d + 2` dims ordered (sigma_f, sigma_n, lambda_1..lambda_d); the first two
/// are sampled in log space.
pub fn hyperparam_candidates(
    space: &Domain,
    r: usize,
    seed: u64,
) -> Result<Vec<Hyperparameters>, DesignError> {
    if space.dim() < 3 {
        return Err(DesignError::BadSpaceDim(space.dim()));
    }
    space.validate()?;
    // log-transform the two scale dimensions so best-candidate dispersion
    // works across decades
    let log_space = Domain::new(
        space
            .dims
            .iter()
            .enumerate()
            .map(|(i, d)| {
                if i < 2 {
                    DimSpec {
                        name: d.name.clone(),
                        min: d.min.ln(),
                        max: d.max.ln(),
                        levels: None,
                    }
                } else {
                    d.clone()
                }
            })
            .collect(),
    );
    let set = best_candidate_sample(&log_space, r, DEFAULT_BEST_CANDIDATE_K, seed, None)?;
    Ok(set
        .points
        .into_iter()
        .map(|p| {
            Hyperparameters::new(p[0].exp(), p[1].exp(), p[2..].to_vec())
        })
        .collect())
}
