//! The generator's latent geometry, recovered through `SyntheticTruth`.

use hsmcfl_core::dataio::{generate_synthetic_with_truth, SyntheticSpec};

fn nearest_center(latent: &[f64], centers: &[Vec<f64>]) -> usize {
    let dist = |c: &Vec<f64>| c.iter().zip(latent).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..centers.len())
        .min_by(|&a, &b| dist(&centers[a]).total_cmp(&dist(&centers[b])))
        .unwrap()
}

fn spec(drift: f64, separation: f64) -> SyntheticSpec {
    SyntheticSpec {
        drift_rate: drift,
        noise_sigma: 1.0,
        center_separation: separation,
        ..SyntheticSpec::default()
    }
}

#[test]
fn well_separated_centers_are_recoverable() {
    // 6σ between centers in a 26-dim space
    let (ds, truth) = generate_synthetic_with_truth(&spec(0.0, 6.0)).unwrap();
    let hits = ds
        .samples()
        .iter()
        .filter(|s| nearest_center(&truth.to_latent(&s.features), &truth.centers) == s.label)
        .count();
    let rate = hits as f64 / ds.len() as f64;
    assert!(rate >= 0.99, "nearest-center accuracy {rate}");
}

#[test]
fn strong_drift_confuses_only_neighbours() {
    // low noise isolates the drift: each class slides toward the next one
    let s = SyntheticSpec {
        noise_sigma: 0.3,
        ..spec(0.9, 6.0)
    };
    let (ds, truth) = generate_synthetic_with_truth(&s).unwrap();
    let mut adjacent = 0;
    for sample in ds.samples() {
        let c = nearest_center(&truth.to_latent(&sample.features), &truth.centers);
        assert!(
            c == sample.label || c == sample.label + 1,
            "sample of class {} landed nearest class {c}",
            sample.label
        );
        if c != sample.label {
            adjacent += 1;
        }
    }
    assert!(adjacent > 0, "drift produced no overlap at all");
}

#[test]
fn raw_channels_have_heterogeneous_scales() {
    let (_, truth) = generate_synthetic_with_truth(&SyntheticSpec::default()).unwrap();
    let max = truth.scales.iter().cloned().fold(f64::MIN, f64::max);
    let min = truth.scales.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min > 10.0);
}
