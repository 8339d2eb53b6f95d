use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub test_frac: f64,
    /// Fraction of the training portion moved to validation.
    pub val_frac_of_train: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.7,
            test_frac: 0.3,
            val_frac_of_train: 0.2,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitConfig {
    fn validate(&self) -> Result<()> {
        if !(self.train_frac > 0.0 && self.test_frac >= 0.0)
            || (self.train_frac + self.test_frac - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "train_frac ({}) + test_frac ({}) must equal 1",
                self.train_frac, self.test_frac
            )));
        }
        if !(0.0..1.0).contains(&self.val_frac_of_train) {
            return Err(Error::Config(format!(
                "val_frac_of_train must be in [0, 1), got {}",
                self.val_frac_of_train
            )));
        }
        Ok(())
    }

    fn split_count(&self) -> usize {
        1 + usize::from(self.test_frac > 0.0) + usize::from(self.val_frac_of_train > 0.0)
    }
}

/// Portion of `n` for a fraction, kept in `[1, n-1]` so neither side empties.
fn portion(n: usize, frac: f64) -> usize {
    if frac <= 0.0 || n < 2 {
        return 0;
    }
    ((n as f64 * frac).round() as usize).clamp(1, n - 1)
}

/// Tag each sample as train, val or test.
///
/// Within each group (one per class when stratified, else the whole set)
/// indices are shuffled with `seed`, then the first `round(n·test_frac)` go
/// to test and `round(rest·val_frac_of_train)` of the remainder to val.
pub fn split(ds: &Dataset, cfg: &SplitConfig) -> Result<Dataset> {
    cfg.validate()?;
    let needed = cfg.split_count();
    for (class, &count) in ds.class_sizes().iter().enumerate() {
        if count < needed {
            return Err(Error::ClassTooSmall {
                class,
                count,
                needed,
            });
        }
    }

    let groups: Vec<Vec<usize>> = if cfg.stratified {
        let mut g = vec![Vec::new(); ds.class_count()];
        for (i, s) in ds.samples().iter().enumerate() {
            g[s.label].push(i);
        }
        g
    } else {
        vec![(0..ds.len()).collect()]
    };

    let mut rng = rng::rng(cfg.seed);
    let mut tags = vec![Split::Train; ds.len()];
    for mut group in groups {
        group.shuffle(&mut rng);
        let n_test = portion(group.len(), cfg.test_frac);
        let n_val = portion(group.len() - n_test, cfg.val_frac_of_train);
        for &i in &group[..n_test] {
            tags[i] = Split::Test;
        }
        for &i in &group[n_test..n_test + n_val] {
            tags[i] = Split::Val;
        }
    }
    let mut out = ds.clone();
    out.set_split_assignment(tags);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Sample;
    use proptest::prelude::*;

    fn ds_with_sizes(sizes: &[usize]) -> Dataset {
        let mut samples = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                let t = samples.len();
                samples.push(Sample {
                    features: vec![t as f64],
                    label: c,
                    timestamp_index: t,
                });
            }
        }
        Dataset::new(samples, sizes.len()).unwrap()
    }

    fn counts(ds: &Dataset, split: Split) -> Vec<usize> {
        let mut c = vec![0; ds.class_count()];
        for i in ds.indices_of(split) {
            c[ds.samples()[i].label] += 1;
        }
        c
    }

    #[test]
    fn default_fractions_on_one_hundred() {
        let ds = split(&ds_with_sizes(&[100]), &SplitConfig::default()).unwrap();
        assert_eq!(ds.indices_of(Split::Train).len(), 56);
        assert_eq!(ds.indices_of(Split::Val).len(), 14);
        assert_eq!(ds.indices_of(Split::Test).len(), 30);
    }

    #[test]
    fn same_seed_same_assignment() {
        let base = ds_with_sizes(&[40, 30, 30]);
        let cfg = SplitConfig {
            seed: 9,
            ..Default::default()
        };
        let a = split(&base, &cfg).unwrap();
        let b = split(&base, &cfg).unwrap();
        assert_eq!(a.split_assignment(), b.split_assignment());
        let c = split(&base, &SplitConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.split_assignment(), c.split_assignment());
    }

    #[test]
    fn stratified_imbalanced_test_counts() {
        let ds = split(&ds_with_sizes(&[90, 10]), &SplitConfig::default()).unwrap();
        let test = counts(&ds, Split::Test);
        // proportional arithmetic: 90 * 0.3 = 27, 10 * 0.3 = 3
        assert!((test[0] as i64 - 27).abs() <= 1);
        assert!((test[1] as i64 - 3).abs() <= 1);
    }

    #[test]
    fn tiny_class_is_named() {
        let err = split(&ds_with_sizes(&[50, 2]), &SplitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { class: 1, count: 2, needed: 3 }));
    }

    #[test]
    fn bad_fractions_rejected() {
        let base = ds_with_sizes(&[10]);
        let cfg = SplitConfig {
            train_frac: 0.6,
            ..Default::default()
        };
        assert!(split(&base, &cfg).is_err());
        let cfg = SplitConfig {
            val_frac_of_train: 1.0,
            ..Default::default()
        };
        assert!(split(&base, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn split_is_stratified_partition(
            sizes in proptest::collection::vec(3usize..200, 1..6),
            seed in any::<u64>(),
        ) {
            let base = ds_with_sizes(&sizes);
            let cfg = SplitConfig { seed, ..Default::default() };
            let ds = split(&base, &cfg).unwrap();
            let mut seen = vec![0; ds.len()];
            for s in [Split::Train, Split::Val, Split::Test] {
                for i in ds.indices_of(s) {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let test = counts(&ds, Split::Test);
            let val = counts(&ds, Split::Val);
            for (c, &n) in sizes.iter().enumerate() {
                let want_test = n as f64 * 0.3;
                prop_assert!((test[c] as f64 - want_test).abs() <= 1.0);
                let want_val = (n - test[c]) as f64 * 0.2;
                prop_assert!((val[c] as f64 - want_val).abs() <= 1.0);
            }
        }
    }
}
