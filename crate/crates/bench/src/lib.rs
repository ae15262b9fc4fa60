//! Benchmark-only crate; see `benches/solvers.rs`.

use surro_core::design::SampleMethod;
use surro_core::explore::{synthetic_dataset, table1_domain};
use surro_core::gp::Dataset;

/// Seeded synthetic dataset shared by the benchmarks.
pub fn bench_dataset(n: usize, seed: u64) -> Dataset {
    synthetic_dataset(
        &table1_domain(),
        SampleMethod::BestCandidate,
        n,
        seed,
        Some(0.5),
    )
    .expect("valid domain")
}
