//! Batch Map self-organizing maps on a hexagonal grid.
//!
//! Node `(r, c)` sits at `x = c + 0.5 * (r mod 2)`, `y = r * sqrt(3)/2`, so
//! every interior node has six equidistant neighbors at unit distance.
//! Training expects features already scaled to [0, 1].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Hexagonal node lattice. Node index is `r * nx + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexGrid {
    pub nx: usize,
    pub ny: usize,
    pub coords: Vec<[f64; 2]>,
}

impl HexGrid {
    pub fn new(nx: usize, ny: usize) -> Self {
        let row_pitch = 3.0_f64.sqrt() / 2.0;
        let coords = (0..ny)
            .flat_map(|r| {
                (0..nx).map(move |c| {
                    [c as f64 + 0.5 * (r % 2) as f64, r as f64 * row_pitch]
                })
            })
            .collect();
        HexGrid { nx, ny, coords }
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node_rc(&self, index: usize) -> (usize, usize) {
        (index / self.nx, index % self.nx)
    }

    /// Euclidean distance between two node coordinate vectors.
    pub fn grid_distance(&self, a: usize, b: usize) -> f64 {
        let pa = self.coords[a];
        let pb = self.coords[b];
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    }
}

/// Batch Map training parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    /// Initial neighborhood radius.
    pub r_max: f64,
    /// Final neighborhood radius.
    pub r_min: f64,
    /// Iterations over which the radius shrinks from r_max to r_min.
    pub r_iter: usize,
    /// Total iterations; the map runs to this count.
    pub iter_max: usize,
    /// Optional per-dimension distance weights, applied as multipliers on the
    /// coordinate differences before squaring. Defaults to 1.
    pub dist_weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl SomConfig {
    /// Parameters used with a 30x30 grid.
    pub fn preset_30x30(seed: u64) -> SomConfig {
        SomConfig {
            r_max: 20.0,
            r_min: 1.0,
            r_iter: 150,
            iter_max: 200,
            dist_weights: None,
            seed,
        }
    }

    /// Parameters used with a 10x10 grid.
    pub fn preset_10x10(seed: u64) -> SomConfig {
        SomConfig {
            r_max: 8.0,
            r_min: 1.0,
            r_iter: 100,
            iter_max: 120,
            dist_weights: None,
            seed,
        }
    }
}

/// A trained (or in-training) map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomModel {
    pub grid: HexGrid,
    /// One d-dimensional weight (model) vector per node.
    pub weights: Vec<Vec<f64>>,
    pub config: SomConfig,
    /// Convergence metric recorded after every iteration.
    pub convergence_history: Vec<f64>,
    /// Neighborhood radius used at every iteration.
    pub radius_history: Vec<f64>,
}

fn feature_distance_sq(x: &[f64], m: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        Some(w) => x
            .iter()
            .zip(m)
            .zip(w)
            .map(|((a, b), wi)| {
                let t = wi * (a - b);
                t * t
            })
            .sum(),
        None => x
            .iter()
            .zip(m)
            .map(|(a, b)| (a - b) * (a - b))
            .sum(),
    }
}

/// Reference node of an instance: argmin of the (optionally weighted)
/// feature-space distance, ties broken by lowest node index.
pub fn find_reference(x: &[f64], model: &SomModel) -> usize {
    find_reference_in(x, &model.weights, model.config.dist_weights.as_deref())
}

fn find_reference_in(x: &[f64], weights: &[Vec<f64>], dw: Option<&[f64]>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, m) in weights.iter().enumerate() {
        let d = feature_distance_sq(x, m, dw);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Average feature-space distance of each instance to its reference node.
pub fn convergence_metric(model: &SomModel, features: &[Vec<f64>]) -> f64 {
    let dw = model.config.dist_weights.as_deref();
    features
        .iter()
        .map(|x| {
            let c = find_reference_in(x, &model.weights, dw);
            feature_distance_sq(x, &model.weights[c], dw).sqrt()
        })
        .sum::<f64>()
        / features.len() as f64
}

/// Batch Map training. Each iteration assigns every instance to its reference
/// node, then replaces each node's weight by the plain mean of the instances
/// whose reference node lies within grid radius r of it; all neighborhood
/// nodes are updated to the same extent. Empty lists leave a weight
/// unchanged. The radius shrinks by (r_max - r_min) / r_iter per iteration,
/// floored at r_min, and the loop always runs iter_max iterations.
pub fn batch_train(features: &[Vec<f64>], grid: &HexGrid, cfg: &SomConfig) -> SomModel {
    assert!(!features.is_empty(), "need at least one instance");
    let d = features[0].len();
    let nodes = grid.node_count();

    // weights start uniform between each feature's min and max
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for row in features {
        for m in 0..d {
            mins[m] = mins[m].min(row[m]);
            maxs[m] = maxs[m].max(row[m]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights: Vec<Vec<f64>> = (0..nodes)
        .map(|_| {
            (0..d)
                .map(|m| {
                    if maxs[m] > mins[m] {
                        rng.gen_range(mins[m]..maxs[m])
                    } else {
                        mins[m]
                    }
                })
                .collect()
        })
        .collect();

    let dw = cfg.dist_weights.as_deref();
    let r_delta = if cfg.r_iter > 0 {
        (cfg.r_max - cfg.r_min) / cfg.r_iter as f64
    } else {
        0.0
    };
    let mut radius_history = Vec::with_capacity(cfg.iter_max);
    let mut convergence_history = Vec::with_capacity(cfg.iter_max);

    for t in 0..cfg.iter_max {
        let radius = (cfg.r_max - t as f64 * r_delta).max(cfg.r_min);
        radius_history.push(radius);

        // phase i: reference node per instance, accumulated per node
        let mut sums = vec![vec![0.0; d]; nodes];
        let mut counts = vec![0usize; nodes];
        for x in features {
            let c = find_reference_in(x, &weights, dw);
            counts[c] += 1;
            for m in 0..d {
                sums[c][m] += x[m];
            }
        }

        // phase iii: each node averages the instances referencing any node in
        // its neighborhood
        let mut next = weights.clone();
        for inode in 0..nodes {
            let mut total = vec![0.0; d];
            let mut n = 0usize;
            for other in 0..nodes {
                if counts[other] > 0 && grid.grid_distance(inode, other) <= radius {
                    n += counts[other];
                    for m in 0..d {
                        total[m] += sums[other][m];
                    }
                }
            }
            if n > 0 {
                for m in 0..d {
                    next[inode][m] = total[m] / n as f64;
                }
            }
        }
        weights = next;

        let snapshot = SomModel {
            grid: grid.clone(),
            weights: weights.clone(),
            config: cfg.clone(),
            convergence_history: Vec::new(),
            radius_history: Vec::new(),
        };
        convergence_history.push(convergence_metric(&snapshot, features));
    }

    SomModel {
        grid: grid.clone(),
        weights,
        config: cfg.clone(),
        convergence_history,
        radius_history,
    }
}

/// Per-node statistics over a dataset's (scaled) features and raw outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub row: usize,
    pub col: usize,
    pub count: usize,
    /// Mean output of assigned instances; absent for empty nodes.
    pub mean_output: Option<f64>,
    /// Instances with output inside the closed range, when one was given.
    pub in_range: usize,
    pub weights: Vec<f64>,
}

pub fn node_stats(
    model: &SomModel,
    features: &[Vec<f64>],
    outputs: &[f64],
    range: Option<(f64, f64)>,
) -> Vec<NodeStats> {
    let nodes = model.grid.node_count();
    let mut counts = vec![0usize; nodes];
    let mut sums = vec![0.0; nodes];
    let mut in_range = vec![0usize; nodes];
    for (x, y) in features.iter().zip(outputs) {
        let c = find_reference(x, model);
        counts[c] += 1;
        sums[c] += y;
        if let Some((lo, hi)) = range {
            if *y >= lo && *y <= hi {
                in_range[c] += 1;
            }
        }
    }
    (0..nodes)
        .map(|i| {
            let (row, col) = model.grid.node_rc(i);
            NodeStats {
                row,
                col,
                count: counts[i],
                mean_output: (counts[i] > 0).then(|| sums[i] / counts[i] as f64),
                in_range: in_range[i],
                weights: model.weights[i].clone(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hex_grid_interior_six_equidistant_neighbors() {
        let g = HexGrid::new(10, 10);
        // node (5, 5) is interior
        let center = 5 * 10 + 5;
        let mut at_unit = 0;
        for i in 0..g.node_count() {
            if i != center && (g.grid_distance(center, i) - 1.0).abs() < 1e-9 {
                at_unit += 1;
            }
        }
        assert_eq!(at_unit, 6);
    }

    #[test]
    fn find_reference_exact_and_ties() {
        let g = HexGrid::new(3, 3);
        let mut model = SomModel {
            grid: g,
            weights: (0..9).map(|i| vec![i as f64]).collect(),
            config: SomConfig::preset_10x10(0),
            convergence_history: vec![],
            radius_history: vec![],
        };
        assert_eq!(find_reference(&[7.0], &model), 7);
        // two equidistant nodes: lower index wins
        model.weights = vec![vec![0.0], vec![2.0], vec![2.0]];
        assert_eq!(find_reference(&[2.0], &model), 1);
    }

    #[test]
    fn find_reference_matches_exhaustive_scan() {
        let g = HexGrid::new(10, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![rng.gen(), rng.gen()])
            .collect();
        let model = batch_train(&data, &g, &SomConfig::preset_10x10(5));
        for x in data.iter().take(50) {
            let got = find_reference(x, &model);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, w) in model.weights.iter().enumerate() {
                let d: f64 = x.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            assert_eq!(got, best);
        }
    }

    #[test]
    fn single_instance_pulls_neighborhood_onto_it() {
        let g = HexGrid::new(4, 4);
        let cfg = SomConfig {
            r_max: 1.0,
            r_min: 1.0,
            r_iter: 1,
            iter_max: 1,
            dist_weights: None,
            seed: 2,
        };
        let data = vec![vec![0.3, 0.7]];
        let model = batch_train(&data, &g, &cfg);
        // every node within radius of the reference node equals the instance
        let c = find_reference(&data[0], &model);
        for i in 0..g.node_count() {
            if g.grid_distance(c, i) <= 1.0 {
                assert_relative_eq!(model.weights[i][0], 0.3);
                assert_relative_eq!(model.weights[i][1], 0.7);
            }
        }
    }

    #[test]
    fn one_node_grid_takes_global_mean() {
        let g = HexGrid::new(1, 1);
        let cfg = SomConfig {
            r_max: 1.0,
            r_min: 0.0,
            r_iter: 1,
            iter_max: 1,
            dist_weights: None,
            seed: 0,
        };
        let model = batch_train(&[vec![1.0], vec![3.0]], &g, &cfg);
        assert_relative_eq!(model.weights[0][0], 2.0);
        // convergence metric: mean(|1-2|, |3-2|) = 1
        assert_relative_eq!(
            convergence_metric(&model, &[vec![1.0], vec![3.0]]),
            1.0
        );
    }

    #[test]
    fn convergence_metric_zero_on_exact_match() {
        let g = HexGrid::new(2, 1);
        let model = SomModel {
            grid: g,
            weights: vec![vec![0.1], vec![0.9]],
            config: SomConfig::preset_10x10(0),
            convergence_history: vec![],
            radius_history: vec![],
        };
        assert_eq!(convergence_metric(&model, &[vec![0.1], vec![0.9]]), 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let g = HexGrid::new(6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let cfg = SomConfig {
            r_max: 4.0,
            r_min: 1.0,
            r_iter: 20,
            iter_max: 30,
            dist_weights: None,
            seed: 77,
        };
        let a = batch_train(&data, &g, &cfg);
        let b = batch_train(&data, &g, &cfg);
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn radius_schedule() {
        let g = HexGrid::new(3, 3);
        let cfg = SomConfig {
            r_max: 5.0,
            r_min: 1.0,
            r_iter: 4,
            iter_max: 8,
            dist_weights: None,
            seed: 1,
        };
        let model = batch_train(&[vec![0.5]], &g, &cfg);
        let expect: Vec<f64> = (0..8)
            .map(|t| (5.0 - t as f64 * 1.0).max(1.0))
            .collect();
        assert_eq!(model.radius_history, expect);
    }

    #[test]
    fn final_metric_not_worse_than_initial() {
        let g = HexGrid::new(8, 8);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen(), rng.gen()]).collect();
            let cfg = SomConfig {
                r_max: 6.0,
                r_min: 1.0,
                r_iter: 30,
                iter_max: 40,
                dist_weights: None,
                seed: 100 + seed,
            };
            let model = batch_train(&data, &g, &cfg);
            let first = model.convergence_history[0];
            let last = *model.convergence_history.last().unwrap();
            assert!(last <= first, "seed {seed}: {last} > {first}");
        }
    }

    #[test]
    fn reference_invariant_under_uniform_weight_scaling() {
        let g = HexGrid::new(5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let data: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let mut cfg = SomConfig::preset_10x10(4);
        cfg.dist_weights = Some(vec![2.0, 0.5]);
        let model = batch_train(&data, &g, &cfg);

        let mut scaled = model.clone();
        scaled.config.dist_weights = Some(vec![6.0, 1.5]);
        for x in &data {
            assert_eq!(find_reference(x, &model), find_reference(x, &scaled));
        }
    }

    #[test]
    fn node_stats_cover_all_instances() {
        let g = HexGrid::new(6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data: Vec<Vec<f64>> = (0..70).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let outputs: Vec<f64> = data.iter().map(|x| 10.0 * x[0]).collect();
        let model = batch_train(&data, &g, &SomConfig::preset_10x10(8));
        let stats = node_stats(&model, &data, &outputs, Some((2.0, 5.0)));
        let total: usize = stats.iter().map(|s| s.count).sum();
        assert_eq!(total, 70);
        for s in &stats {
            if s.count == 0 {
                assert!(s.mean_output.is_none());
                assert_eq!(s.in_range, 0);
            }
        }
        // in-range counts match a brute-force filter
        let brute: usize = outputs.iter().filter(|y| **y >= 2.0 && **y <= 5.0).count();
        let from_stats: usize = stats.iter().map(|s| s.in_range).sum();
        assert_eq!(brute, from_stats);
    }

    #[test]
    fn identical_instances_collapse_to_one_node() {
        let g = HexGrid::new(4, 4);
        let data = vec![vec![0.4, 0.4]; 12];
        let outputs = vec![3.0; 12];
        let model = batch_train(&data, &g, &SomConfig::preset_10x10(6));
        let stats = node_stats(&model, &data, &outputs, None);
        let nonzero: Vec<&NodeStats> = stats.iter().filter(|s| s.count > 0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].count, 12);
        assert_relative_eq!(nonzero[0].mean_output.unwrap(), 3.0);
    }
}
