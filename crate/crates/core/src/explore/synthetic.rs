//! Synthetic forward model standing in for a melt-pool simulation, plus the
//! four-dimensional process box it lives on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::design::{best_candidate_sample, DesignError, DimSpec, Domain, SampleMethod, SampleSet, stratified_sample};
use crate::gp::Dataset;

/// Frozen value of `synthetic_forward` at the reference point
/// (P=200, v=800, beam=59, eta=0.4); regression constant for seeded tests.
pub const REFERENCE_DEPTH: f64 = 36.82298471593294;

/// Melt-pool depth proxy in micrometres.
///
/// `x = [power (W), speed (mm/s), beam diameter (um), absorptivity]`.
/// depth = 1e-4 * eta * P / (sqrt(v) * sqrt(sigma_b)) with sigma_b the beam
/// diameter in metres, expressed in micrometres (the base formula is in
/// millimetres; the 1000 factor converts). Linear in P and eta, inverse
/// square root in v, weakly decreasing in beam diameter. The formula is
/// frozen: changing it invalidates every seeded fixture built on it.
pub fn synthetic_forward(x: &[f64]) -> f64 {
    assert_eq!(x.len(), 4, "expected [power, speed, beam, absorptivity]");
    let (p, v, beam_um, eta) = (x[0], x[1], x[2], x[3]);
    let sigma_b = beam_um * 1e-6;
    1e-4 * eta * p / (v.sqrt() * sigma_b.sqrt()) * 1000.0
}

/// The leveled process box: power 50-400 W (7 levels), speed 50-2250 mm/s
/// (10), beam diameter 50-68 um (3), absorptivity 0.3-0.5 (2).
pub fn table1_domain() -> Domain {
    Domain::new(vec![
        DimSpec {
            name: "power".into(),
            min: 50.0,
            max: 400.0,
            levels: Some(7),
        },
        DimSpec {
            name: "speed".into(),
            min: 50.0,
            max: 2250.0,
            levels: Some(10),
        },
        DimSpec {
            name: "beam".into(),
            min: 50.0,
            max: 68.0,
            levels: Some(3),
        },
        DimSpec {
            name: "absorptivity".into(),
            min: 0.3,
            max: 0.5,
            levels: Some(2),
        },
    ])
}

/// Sample the domain and evaluate the forward model, optionally adding
/// zero-mean Gaussian noise of the given standard deviation.
pub fn synthetic_dataset(
    dom: &Domain,
    method: SampleMethod,
    n: usize,
    seed: u64,
    noise_std: Option<f64>,
) -> Result<Dataset, DesignError> {
    let sample: SampleSet = match method {
        SampleMethod::Stratified => stratified_sample(dom, seed)?,
        SampleMethod::BestCandidate => {
            best_candidate_sample(dom, n, crate::design::DEFAULT_BEST_CANDIDATE_K, seed, None)?
        }
    };
    let mut outputs: Vec<f64> = sample.points.iter().map(|p| synthetic_forward(p)).collect();
    if let Some(std) = noise_std {
        let normal = Normal::new(0.0, std).expect("valid noise std");
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        for y in &mut outputs {
            *y += normal.sample(&mut rng);
        }
    }
    let domain = dom.dims.iter().map(|d| (d.min, d.max)).collect();
    Ok(Dataset::with_domain(
        dom.names(),
        sample.points,
        outputs,
        domain,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const REF: [f64; 4] = [200.0, 800.0, 59.0, 0.4];

    #[test]
    fn reference_point_frozen() {
        assert_relative_eq!(synthetic_forward(&REF), REFERENCE_DEPTH, max_relative = 1e-12);
    }

    #[test]
    fn doubling_power_doubles_depth() {
        let mut x = REF;
        let base = synthetic_forward(&x);
        x[0] *= 2.0;
        assert_relative_eq!(synthetic_forward(&x), 2.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn quadrupling_speed_halves_depth() {
        let mut x = REF;
        let base = synthetic_forward(&x);
        x[1] *= 4.0;
        assert_relative_eq!(synthetic_forward(&x), base / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn monotone_directions() {
        let base = synthetic_forward(&REF);
        let bump = |i: usize, dv: f64| {
            let mut x = REF;
            x[i] += dv;
            synthetic_forward(&x)
        };
        assert!(bump(0, 10.0) > base); // power up
        assert!(bump(1, 100.0) < base); // speed up
        assert!(bump(2, 5.0) < base); // wider beam
        assert!(bump(3, 0.05) > base); // absorptivity up
    }

    #[test]
    fn table1_box_shape() {
        let dom = table1_domain();
        assert_eq!(dom.dim(), 4);
        let total: usize = dom.dims.iter().map(|d| d.levels.unwrap()).product();
        assert_eq!(total, 420);
        assert!(dom.contains(&REF));
    }

    #[test]
    fn synthetic_dataset_noiseless_matches_forward() {
        let dom = table1_domain();
        let ds = synthetic_dataset(&dom, SampleMethod::BestCandidate, 30, 5, None).unwrap();
        assert_eq!(ds.len(), 30);
        for (x, y) in ds.features_raw.iter().zip(&ds.outputs) {
            assert_eq!(*y, synthetic_forward(x));
            assert!(dom.contains(x));
        }
        // domain comes from the box, not the sampled extrema
        assert_eq!(ds.domain[0], (50.0, 400.0));
    }

    #[test]
    fn synthetic_dataset_noise_deterministic() {
        let dom = table1_domain();
        let a = synthetic_dataset(&dom, SampleMethod::Stratified, 0, 3, Some(0.5)).unwrap();
        let b = synthetic_dataset(&dom, SampleMethod::Stratified, 0, 3, Some(0.5)).unwrap();
        assert_eq!(a.outputs, b.outputs);
        assert_eq!(a.len(), 420);
        let clean = synthetic_dataset(&dom, SampleMethod::Stratified, 0, 3, None).unwrap();
        assert_ne!(a.outputs, clean.outputs);
        assert_eq!(a.features_raw, clean.features_raw);
    }
}
