use hsmcfl_core::hsm::{
    build_batches, cosine_similarity, hard_negative, hard_positive, MinerConfig, MiniBatch, Provenance, SimilarityView,
};
use hsmcfl_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_view(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize) -> SimilarityView {
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    // every class gets at least two members
    let labels: Vec<usize> = (0..n).map(|i| if i < 2 * k { i / 2 } else { rng.random_range(0..k) }).collect();
    SimilarityView::from_raw(&Matrix::from_vec(n, d, data), labels, k).unwrap()
}

fn scan(view: &SimilarityView, anchor: usize, positive: bool) -> usize {
    let v = view.vectors();
    let labels = view.labels();
    let mut best: Option<(usize, f64)> = None;
    for j in 0..view.len() {
        let same = labels[j] == labels[anchor];
        if (positive && (!same || j == anchor)) || (!positive && same) {
            continue;
        }
        let s = cosine_similarity(v.row(anchor), v.row(j)).unwrap();
        let better = match best {
            None => true,
            Some((_, b)) => if positive { s < b } else { s > b },
        };
        if better {
            best = Some((j, s));
        }
    }
    best.unwrap().0
}

#[test]
fn mining_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(8..200);
        let d = rng.random_range(2..12);
        let k = rng.random_range(2..5);
        let view = random_view(&mut rng, n, d, k);
        for _ in 0..5 {
            let a = rng.random_range(0..n);
            assert_eq!(hard_positive(&view, a).unwrap(), scan(&view, a, true));
            assert_eq!(hard_negative(&view, a).unwrap(), scan(&view, a, false));
        }
    }
}

#[test]
fn mining_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let (n, d, k) = (60, 5, 3);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let scaled: Vec<f64> = data
            .chunks(d)
            .flat_map(|row| {
                let c = rng.random_range(0.01..100.0);
                row.iter().map(move |x| x * c).collect::<Vec<_>>()
            })
            .collect();
        let a = SimilarityView::from_raw(&Matrix::from_vec(n, d, data), labels.clone(), k).unwrap();
        let b = SimilarityView::from_raw(&Matrix::from_vec(n, d, scaled), labels, k).unwrap();
        for anchor in 0..n {
            assert_eq!(hard_negative(&a, anchor).unwrap(), hard_negative(&b, anchor).unwrap());
            assert_eq!(hard_positive(&a, anchor).unwrap(), hard_positive(&b, anchor).unwrap());
        }
    }
}

fn check_batch(view: &SimilarityView, batch: &MiniBatch, bs: usize) {
    let labels = view.labels();
    assert_eq!(batch.len(), bs);
    let present: Vec<usize> = (0..view.class_count()).filter(|c| labels.contains(c)).collect();
    let opening = &batch.entries[..present.len()];
    let mut seen: Vec<usize> = opening.iter().map(|e| labels[e.index]).collect();
    seen.sort_unstable();
    assert_eq!(seen, present);
    assert!(opening.iter().all(|e| e.provenance == Provenance::Init));
    for (pos, e) in batch.entries.iter().enumerate().skip(present.len()) {
        assert!(e.index < view.len());
        match e.provenance {
            Provenance::Init => panic!("init entry past the opening"),
            Provenance::Random => assert!(e.anchor.is_none()),
            Provenance::HardPos | Provenance::HardNeg => {
                let a = e.anchor.unwrap();
                assert!(batch.entries[..pos].iter().any(|p| p.index == a));
                if e.provenance == Provenance::HardPos {
                    assert_eq!(labels[e.index], labels[a]);
                    assert_eq!(e.index, hard_positive(view, a).unwrap());
                } else {
                    assert_ne!(labels[e.index], labels[a]);
                    assert_eq!(e.index, hard_negative(view, a).unwrap());
                }
            }
        }
    }
}

#[test]
fn batches_satisfy_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.random_range(40..300);
        let k = rng.random_range(2..6);
        let view = random_view(&mut rng, n, 6, k);
        let cfg = MinerConfig {
            batch_size: rng.random_range(k..=24.max(k)),
            p_random: rng.random_range(0.0..1.0),
            seed: rng.random(),
            ..MinerConfig::default()
        };
        let batches = build_batches(&view, &cfg, &[]).unwrap();
        assert_eq!(batches.len(), n / cfg.batch_size);
        for b in &batches {
            check_batch(&view, b, cfg.batch_size);
        }
        checked += batches.len();
    }
}

#[test]
fn batches_are_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let view = random_view(&mut rng, 200, 6, 4);
    let cfg = MinerConfig {
        batch_size: 16,
        seed: 99,
        ..MinerConfig::default()
    };
    let a = build_batches(&view, &cfg, &[]).unwrap();
    assert_eq!(a, build_batches(&view, &cfg, &[]).unwrap());
    let other = build_batches(&view, &MinerConfig { seed: 100, ..cfg }, &[]).unwrap();
    assert_ne!(a, other);
}
