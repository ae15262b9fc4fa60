//! Surrogate-modeling toolkit built around Gaussian-process regression.
//!
//! The crate provides:
//! - dense SPD linear algebra in packed storage, with both a Cholesky direct
//!   solver and a truncatable conjugate gradient solver ([`linalg`]),
//! - squared-exponential covariances with weighted distances and compactly
//!   supported tapers ([`kernels`]),
//! - GP fitting, prediction, and leave-one-out evaluation ([`gp`]),
//! - independent-block GPs with per-block hyperparameters ([`blockgp`]),
//! - space-filling experiment designs ([`design`]),
//! - random-search hyperparameter optimization ([`hyperopt`]),
//! - Batch Map self-organizing maps on hexagonal grids ([`som`]),
//! - inverse-problem exploration, dataset I/O, and plot exports ([`explore`]).

pub mod blockgp;
pub mod design;
pub mod explore;
pub mod gp;
pub mod hyperopt;
pub mod kernels;
pub mod linalg;
pub mod som;

pub use gp::{Dataset, GpModel, Surrogate};
pub use kernels::Hyperparameters;
pub use linalg::PackedSymMatrix;
