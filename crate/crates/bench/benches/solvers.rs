//! Direct Cholesky vs conjugate gradient vs blocked fits.
//!
//! Run with `cargo bench -p surro-bench`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use surro_bench::bench_dataset;
use surro_core::blockgp::{fit_blocks_with_candidates, partition, BlockSpec};
use surro_core::design::{default_hyperparam_space, hyperparam_candidates};
use surro_core::gp::{fit, GpError, SolverConfig};
use surro_core::hyperopt::{default_hyperparameters, SearchConfig};

fn bench_single_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for &n in &[100usize, 200, 400] {
        let ds = bench_dataset(n, 7);
        let hp = default_hyperparameters(&ds);
        group.bench_with_input(BenchmarkId::new("direct", n), &ds, |b, ds| {
            b.iter(|| fit(ds, &hp, &SolverConfig::direct()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cg_1e-8", n), &ds, |b, ds| {
            b.iter(|| match fit(ds, &hp, &SolverConfig::cg(1e-8, n)) {
                Ok(m) => m,
                Err(GpError::CgNotConverged { model, .. }) => *model,
                Err(e) => panic!("{e}"),
            })
        });
    }
    group.finish();
}

fn bench_block_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("block_search");
    group.sample_size(10);
    let ds = bench_dataset(200, 7);
    let space = default_hyperparam_space(ds.dim(), ds.output_std());
    let candidates = hyperparam_candidates(&space, 4, 1).unwrap();
    for &b in &[1usize, 2, 4] {
        // split along speed, the steep input
        let spec = BlockSpec::new(vec![1], vec![b]);
        let part = partition(&ds, &spec).unwrap();
        let search = SearchConfig {
            space: space.clone(),
            r: candidates.len(),
            solver: SolverConfig::direct(),
            seed: 1,
            with_variance_finals: false,
        };
        group.bench_with_input(BenchmarkId::new("blocks", b), &part, |bch, part| {
            bch.iter(|| fit_blocks_with_candidates(&ds, part, &candidates, &search).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_single_fit, bench_block_search);
criterion_main!(benches);
