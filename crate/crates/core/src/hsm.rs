//! Hard-sample mining mini-batch construction.
//!
//! Each batch starts from one random sample per class (or, when a pool of
//! misclassified samples is supplied, one random sample from that pool) and
//! is then extended until it holds `batch_size` entries. Every extension
//! step either appends a uniformly random training sample, with probability
//! `p_random`, or picks a random anchor already in the batch and appends its
//! hard positive (same class, lowest cosine similarity) followed by its hard
//! negative (other class, highest cosine similarity). An append that would
//! overflow the batch is dropped.
//!
//! Mining scans the whole training set. Similarities are dot products of
//! the view's pre-normalized rows; ties go to the lowest index.

use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataio::LabeledSet;
use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::{dot, norm, Matrix};
use crate::nn::{l2_normalize_rows, Network};
use crate::rng;

/// Unit-norm representations of the training set used for mining.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityView {
    vectors: Matrix,
    labels: Vec<usize>,
    class_count: usize,
    by_class: Vec<Vec<usize>>,
}

impl SimilarityView {
    /// `vectors` rows must be unit-norm within 1e-9 (all-zero rows are
    /// tolerated and have similarity 0 to everything).
    pub fn new(vectors: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if vectors.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: vectors.rows(),
                right: labels.len(),
            });
        }
        if vectors.rows() == 0 {
            return Err(Error::EmptyInput("similarity view"));
        }
        for i in 0..vectors.rows() {
            let n = norm(vectors.row(i));
            if n != 0.0 && (n - 1.0).abs() > 1e-9 {
                return Err(Error::NotUnitNorm { row: i, norm: n });
            }
        }
        let mut by_class = vec![Vec::new(); class_count];
        for (i, &l) in labels.iter().enumerate() {
            if l >= class_count {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    class_count,
                });
            }
            by_class[l].push(i);
        }
        Ok(Self {
            vectors,
            labels,
            class_count,
            by_class,
        })
    }

    /// Row-normalize `raw` and wrap it.
    pub fn from_raw(raw: &Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        Self::new(l2_normalize_rows(raw).rows, labels, class_count)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    fn sim(&self, a: usize, b: usize) -> f64 {
        dot(self.vectors.row(a), self.vectors.row(b))
    }
}

/// Which representation fills the view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewStage {
    /// Normalized raw features (no learned embedding yet).
    Cfl,
    /// Encoder outputs, before the projection head.
    Mlp,
}

pub fn refresh_view(encoder: &Network, set: &LabeledSet, stage: ViewStage) -> Result<SimilarityView> {
    let raw = match stage {
        ViewStage::Cfl => set.features.clone(),
        ViewStage::Mlp => encoder.predict(&set.features)?,
    };
    SimilarityView::from_raw(&raw, set.labels.clone(), set.class_count)
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Other-class sample most similar to `anchor`.
pub fn hard_negative(view: &SimilarityView, anchor: usize) -> Result<usize> {
    mine(view, anchor, Target::Negative, None, None)
}

/// Same-class sample (excluding `anchor`) least similar to it.
pub fn hard_positive(view: &SimilarityView, anchor: usize) -> Result<usize> {
    mine(view, anchor, Target::Positive, None, None)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Target {
    Positive,
    Negative,
}

fn mine(
    view: &SimilarityView,
    anchor: usize,
    target: Target,
    exclude: Option<&[bool]>,
    pool: Option<&[usize]>,
) -> Result<usize> {
    let label = view.labels[anchor];
    let eligible = |j: usize| -> bool {
        let same = view.labels[j] == label;
        let ok = match target {
            Target::Positive => same && j != anchor,
            Target::Negative => !same,
        };
        ok && exclude.is_none_or(|ex| !ex[j])
    };
    let maximize = target == Target::Negative;
    let best = match pool {
        Some(pool) => exec::select_best(
            pool.len(),
            |k| eligible(pool[k]).then(|| view.sim(anchor, pool[k])),
            maximize,
        )
        .map(|(k, s)| (pool[k], s)),
        None => exec::select_best(
            view.len(),
            |j| eligible(j).then(|| view.sim(anchor, j)),
            maximize,
        ),
    };
    best.map(|(j, _)| j).ok_or(match target {
        Target::Positive => Error::SingletonClass(anchor),
        Target::Negative => Error::NoNegative(anchor),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Init,
    Random,
    HardPos,
    HardNeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub index: usize,
    pub provenance: Provenance,
    /// Anchor the sample was mined against (hard picks only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniBatch {
    pub entries: Vec<BatchEntry>,
}

impl MiniBatch {
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, index: usize, provenance: Provenance, anchor: Option<usize>) {
        self.entries.push(BatchEntry {
            index,
            provenance,
            anchor,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    pub batch_size: usize,
    /// Probability that an extension step appends a random sample instead
    /// of mining.
    pub p_random: f64,
    /// Accepted for compatibility with the two-threshold formulation; unused.
    pub p2: Option<f64>,
    pub seed: u64,
    /// Skip samples already in the batch when mining.
    pub exclude_in_batch: bool,
    /// Mine over a uniform subsample of this size instead of the full set.
    pub candidate_pool: Option<usize>,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            p_random: 0.4,
            p2: None,
            seed: 0,
            exclude_in_batch: false,
            candidate_pool: None,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if !(0.0..=1.0).contains(&self.p_random) {
            return Err(Error::Config(format!(
                "p_random must be in [0, 1], got {}",
                self.p_random
            )));
        }
        if self.candidate_pool == Some(0) {
            return Err(Error::Config("candidate_pool must be positive".into()));
        }
        Ok(())
    }
}

/// Build `⌊N / batch_size⌋` hard-sample batches over `view`.
///
/// With an empty `init_pool` each batch opens with one random sample of
/// every class present in the view; otherwise with one random member of
/// `init_pool`. Deterministic for a given `cfg.seed`.
pub fn build_batches(view: &SimilarityView, cfg: &MinerConfig, init_pool: &[usize]) -> Result<Vec<MiniBatch>> {
    cfg.validate()?;
    if cfg.p2.is_some() {
        log::warn!("miner threshold p2 has no effect and is ignored");
    }
    let n = view.len();
    let present: Vec<usize> = (0..view.class_count)
        .filter(|&c| !view.by_class[c].is_empty())
        .collect();
    if init_pool.is_empty() && cfg.batch_size < present.len() {
        return Err(Error::Config(format!(
            "batch_size {} cannot hold one sample from each of {} classes",
            cfg.batch_size,
            present.len()
        )));
    }
    if let Some(&bad) = init_pool.iter().find(|&&i| i >= n) {
        return Err(Error::Config(format!("init pool index {bad} out of range ({n} samples)")));
    }

    let mut rng = rng::rng(cfg.seed);
    let bs = cfg.batch_size;
    let mut batches = Vec::with_capacity(n / bs);
    let mut in_batch = vec![false; n];
    for _ in 0..n / bs {
        let mut batch = MiniBatch {
            entries: Vec::with_capacity(bs),
        };
        if init_pool.is_empty() {
            for &c in &present {
                let members = &view.by_class[c];
                batch.push(members[rng.random_range(0..members.len())], Provenance::Init, None);
            }
        } else {
            batch.push(init_pool[rng.random_range(0..init_pool.len())], Provenance::Init, None);
        }
        if cfg.exclude_in_batch {
            batch.entries.iter().for_each(|e| in_batch[e.index] = true);
        }

        while batch.len() < bs {
            if rng.random::<f64>() < cfg.p_random {
                let j = rng.random_range(0..n);
                batch.push(j, Provenance::Random, None);
                if cfg.exclude_in_batch {
                    in_batch[j] = true;
                }
                continue;
            }
            let anchor = batch.entries[rng.random_range(0..batch.len())].index;
            for target in [Target::Positive, Target::Negative] {
                if batch.len() >= bs {
                    break;
                }
                let pool = cfg
                    .candidate_pool
                    .filter(|&m| m < n)
                    .map(|m| index::sample(&mut rng, n, m).into_vec());
                let exclude = cfg.exclude_in_batch.then_some(in_batch.as_slice());
                let mined = mine(view, anchor, target, exclude, pool.as_deref()).or_else(|e| {
                    if pool.is_some() {
                        mine(view, anchor, target, exclude, None)
                    } else {
                        Err(e)
                    }
                });
                let (j, tag, a) = match (mined, target) {
                    (Ok(j), Target::Positive) => (j, Provenance::HardPos, Some(anchor)),
                    (Ok(j), Target::Negative) => (j, Provenance::HardNeg, Some(anchor)),
                    (Err(Error::SingletonClass(_) | Error::NoNegative(_)), _) => {
                        (rng.random_range(0..n), Provenance::Random, None)
                    }
                    (Err(e), _) => return Err(e),
                };
                batch.push(j, tag, a);
                if cfg.exclude_in_batch {
                    in_batch[j] = true;
                }
            }
        }
        if cfg.exclude_in_batch {
            batch.entries.iter().for_each(|e| in_batch[e.index] = false);
        }
        batches.push(batch);
    }
    Ok(batches)
}

/// Shuffle `0..n` and cut it into `⌊n / batch_size⌋` full batches.
pub fn uniform_batches(n: usize, batch_size: usize, rng: &mut rng::Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    order
        .chunks_exact(batch_size.max(1))
        .map(|c| c.to_vec())
        .collect()
}

/// One JSON object per line: `{"batch": b, "entries": [...]}`.
pub fn write_batches_jsonl(batches: &[MiniBatch], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (b, batch) in batches.iter().enumerate() {
        let line = serde_json::json!({ "batch": b, "entries": batch.entries });
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
