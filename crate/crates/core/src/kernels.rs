//! Covariance functions: weighted distances, the squared-exponential kernel,
//! compactly supported tapers, and covariance-matrix assembly.
//!
//! The model is parameterized by `d + 2` hyperparameters: a signal scale
//! `sigma_f`, a noise scale `sigma_n`, and `d` per-dimension length scales
//! `lambda_m`. The distance divides each coordinate difference by its length
//! scale, so the kernel exponent is `-D^2 / 2` with the length parameter
//! already absorbed.

use crate::linalg::PackedSymMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
}

/// GP hyperparameters: signal scale, noise scale, and weighted length scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub sigma_f: f64,
    pub sigma_n: f64,
    pub length_scales: Vec<f64>,
}

impl Hyperparameters {
    pub fn new(sigma_f: f64, sigma_n: f64, length_scales: Vec<f64>) -> Self {
        Hyperparameters {
            sigma_f,
            sigma_n,
            length_scales,
        }
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn validate(&self, d: usize) -> Result<(), KernelError> {
        if self.length_scales.len() != d {
            return Err(KernelError::DimensionMismatch {
                expected: d,
                found: self.length_scales.len(),
            });
        }
        if !(self.sigma_f > 0.0) {
            return Err(KernelError::InvalidHyperparameters(format!(
                "sigma_f must be > 0, got {}",
                self.sigma_f
            )));
        }
        if !(self.sigma_n >= 0.0) {
            return Err(KernelError::InvalidHyperparameters(format!(
                "sigma_n must be >= 0, got {}",
                self.sigma_n
            )));
        }
        if let Some(l) = self.length_scales.iter().find(|l| !(**l > 0.0)) {
            return Err(KernelError::InvalidHyperparameters(format!(
                "length scales must be > 0, got {l}"
            )));
        }
        Ok(())
    }
}

/// Taper applied multiplicatively to the covariance function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaperSpec {
    None,
    /// Wendland-1 taper with compact support `theta`.
    Wendland1 { theta: f64 },
    /// Block-diagonal taper: 1 when two points share a block, else 0.
    Block { assignment: Vec<usize> },
}

impl Default for TaperSpec {
    fn default() -> Self {
        TaperSpec::None
    }
}

/// Weighted Euclidean distance with per-dimension division by length scale.
pub fn weighted_distance(
    xi: &[f64],
    xj: &[f64],
    length_scales: &[f64],
) -> Result<f64, KernelError> {
    if xi.len() != length_scales.len() || xj.len() != length_scales.len() {
        return Err(KernelError::DimensionMismatch {
            expected: length_scales.len(),
            found: if xi.len() != length_scales.len() {
                xi.len()
            } else {
                xj.len()
            },
        });
    }
    Ok(weighted_distance_unchecked(xi, xj, length_scales))
}

#[inline]
pub(crate) fn weighted_distance_unchecked(xi: &[f64], xj: &[f64], length_scales: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((a, b), l) in xi.iter().zip(xj).zip(length_scales) {
        let t = (a - b) / l;
        s += t * t;
    }
    s.sqrt()
}

/// Squared-exponential covariance. `same_point` adds the noise term
/// `sigma_n^2` (the Kronecker delta realized as a flag).
#[inline]
pub fn sq_exp_cov(dist: f64, hp: &Hyperparameters, same_point: bool) -> f64 {
    let mut k = hp.sigma_f * hp.sigma_f * (-0.5 * dist * dist).exp();
    if same_point {
        k += hp.sigma_n * hp.sigma_n;
    }
    k
}

/// Wendland-1 taper `(1 - D/theta)_+^4 (1 + 4 D/theta)`: 1 at D = 0, 0 for
/// D >= theta, and within [0, 1] everywhere.
#[inline]
pub fn wendland1_taper(dist: f64, theta: f64) -> f64 {
    let t = 1.0 - dist / theta;
    if t <= 0.0 {
        0.0
    } else {
        let t2 = t * t;
        t2 * t2 * (1.0 + 4.0 * dist / theta)
    }
}

/// Taper value for an off-diagonal pair `(i, j)` at distance `dist`.
#[inline]
pub(crate) fn taper_value(taper: &TaperSpec, dist: f64, i: usize, j: usize) -> f64 {
    match taper {
        TaperSpec::None => 1.0,
        TaperSpec::Wendland1 { theta } => wendland1_taper(dist, *theta),
        TaperSpec::Block { assignment } => {
            if assignment[i] == assignment[j] {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Assembles the covariance matrix over the given (scaled) feature rows.
/// Off-diagonal entries are multiplied by the taper; the diagonal always
/// includes the noise term.
pub fn assemble_covariance(
    features: &[Vec<f64>],
    hp: &Hyperparameters,
    taper: &TaperSpec,
) -> Result<PackedSymMatrix, KernelError> {
    let n = features.len();
    let d = hp.length_scales.len();
    if let Some(bad) = features.iter().find(|r| r.len() != d) {
        return Err(KernelError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    if let TaperSpec::Block { assignment } = taper {
        if assignment.len() != n {
            return Err(KernelError::DimensionMismatch {
                expected: n,
                found: assignment.len(),
            });
        }
    }
    let mut c = PackedSymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..i {
            let dist = weighted_distance_unchecked(&features[i], &features[j], &hp.length_scales);
            let k = sq_exp_cov(dist, hp, false) * taper_value(taper, dist, i, j);
            c.set(i, j, k);
        }
        c.set(i, i, sq_exp_cov(0.0, hp, true));
    }
    Ok(c)
}

/// Cross-covariance vector between a query point and the training rows.
/// Block tapers do not apply across the training/query divide and are
/// treated as 1 here.
pub(crate) fn cross_covariance(
    query: &[f64],
    features: &[Vec<f64>],
    hp: &Hyperparameters,
    taper: &TaperSpec,
) -> Vec<f64> {
    features
        .iter()
        .map(|x| {
            let dist = weighted_distance_unchecked(query, x, &hp.length_scales);
            let t = match taper {
                TaperSpec::Wendland1 { theta } => wendland1_taper(dist, *theta),
                _ => 1.0,
            };
            sq_exp_cov(dist, hp, false) * t
        })
        .collect()
}
