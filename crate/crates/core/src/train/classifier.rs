use super::{init_network, BatchEvent, Hooks, Phase, TrainConfig};
use crate::dataio::LabeledSet;
use crate::error::{Error, Result, ResultExt};
use crate::hsm::{build_batches, uniform_batches, SimilarityView};
use crate::matrix::Matrix;
use crate::metrics::MetricsBundle;
use crate::nn::{softmax_cross_entropy, Network, OptimizerState};
use crate::rng;

#[derive(Debug, Clone)]
pub struct ClassifierOutcome {
    pub classifier: Network,
    /// Mean batch cross-entropy, indexed `[stage][epoch]`.
    pub loss_trace: Vec<Vec<f64>>,
    /// Misclassified training samples after each stage.
    pub pool_sizes: Vec<usize>,
    pub stage_seconds: Vec<f64>,
    /// Epoch count (over all stages) at which early stopping fired.
    pub stopped_after: Option<usize>,
}

/// Arg-max class per row; ties go to the lowest class index.
pub fn predict_labels(logits: &Matrix) -> Vec<usize> {
    logits
        .iter_rows()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 { (c, v) } else { best })
                .0
        })
        .collect()
}

/// Row indices the classifier gets wrong on `inputs`.
pub fn misclassified(classifier: &Network, inputs: &Matrix, labels: &[usize]) -> Result<Vec<usize>> {
    let predicted = predict_labels(&classifier.predict(inputs)?);
    Ok((0..labels.len()).filter(|&i| predicted[i] != labels[i]).collect())
}

/// Train a classifier with softmax cross-entropy on the outputs of the
/// frozen `encoder`.
///
/// With hard-sample mining on, each stage mines batches once over the
/// normalized encoder outputs, opening every batch from the pool of training
/// samples the classifier misclassified after the previous stage (per-class
/// openings when the pool is empty). The encoder is never modified.
pub fn train_classifier(
    train: &LabeledSet,
    val: Option<&LabeledSet>,
    encoder: &Network,
    cfg: &TrainConfig,
    hooks: &mut dyn Hooks,
) -> Result<ClassifierOutcome> {
    cfg.validate()?;
    if train.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "training set of {} samples cannot fill a batch of {}",
            train.len(),
            cfg.batch_size
        )));
    }
    let embedded = encoder.predict(&train.features)?;
    let val_embedded = match val.filter(|v| cfg.early_stopping.enabled && !v.is_empty()) {
        Some(v) => Some((encoder.predict(&v.features)?, v)),
        None => None,
    };
    let view = if cfg.ablation.hsm_in_mlp {
        Some(SimilarityView::from_raw(&embedded, train.labels.clone(), train.class_count)?)
    } else {
        None
    };

    let mut classifier = init_network(
        &cfg.model.classifier_specs(train.class_count),
        rng::sub_seed(cfg.seed, rng::CLASSIFIER_INIT),
    )?;
    let mut opt = OptimizerState::new(&classifier, cfg.optimizer, cfg.learning_rate)?;
    let mut pool: Vec<usize> = Vec::new();
    let mut out = ClassifierOutcome {
        classifier: classifier.clone(),
        loss_trace: Vec::with_capacity(cfg.num_stages),
        pool_sizes: Vec::with_capacity(cfg.num_stages),
        stage_seconds: Vec::with_capacity(cfg.num_stages),
        stopped_after: None,
    };
    let mut best: Option<(f64, Network)> = None;
    let mut since_best = 0;
    let mut epochs_run = 0;

    'stages: for stage in 0..cfg.num_stages {
        let started = std::time::Instant::now();
        let mined = match &view {
            Some(view) if cfg.epochs > 0 => {
                let miner = cfg.miner_config(rng::stage_seed(cfg.seed, rng::MLP_MINER, stage));
                let batches = build_batches(view, &miner, &pool).context(|| format!("mlp stage {stage}"))?;
                Some(batches.iter().map(|b| b.indices()).collect::<Vec<_>>())
            }
            _ => None,
        };
        let mut epoch_losses = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let batches = match &mined {
                Some(b) => b.clone(),
                None => uniform_batches(
                    train.len(),
                    cfg.batch_size,
                    &mut rng::rng(rng::epoch_seed(cfg.seed, rng::MLP_SHUFFLE, stage, epoch)),
                ),
            };
            let mut total = 0.0;
            for (b, indices) in batches.iter().enumerate() {
                let mut x = embedded.gather_rows(indices);
                let labels: Vec<usize> = indices.iter().map(|&i| train.labels[i]).collect();
                hooks.augment(Phase::Mlp, &mut x, &labels);
                let step = (|| {
                    let cache = classifier.forward(&x)?;
                    let ce = softmax_cross_entropy(cache.output(), &labels)?;
                    let grads = classifier.backward(&cache, &ce.grad)?;
                    opt.step(&mut classifier, &grads)?;
                    Ok::<_, Error>((ce.loss, cache.output().cols()))
                })();
                let (loss, k) = step.context(|| format!("mlp stage {stage} epoch {epoch} batch {b}"))?;
                hooks.on_batch(&BatchEvent {
                    phase: Phase::Mlp,
                    stage,
                    epoch,
                    batch: b,
                    indices,
                    output_shape: (indices.len(), k),
                    loss,
                });
                total += loss;
            }
            epoch_losses.push(total / batches.len().max(1) as f64);
            epochs_run += 1;

            if let Some((val_x, val_set)) = &val_embedded {
                let predicted = predict_labels(&classifier.predict(val_x)?);
                let score = MetricsBundle::evaluate(&val_set.labels, &predicted, val_set.class_count)?.macro_gmean;
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    best = Some((score, classifier.clone()));
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= cfg.early_stopping.patience {
                        out.loss_trace.push(epoch_losses);
                        out.pool_sizes.push(misclassified(&classifier, &embedded, &train.labels)?.len());
                        out.stage_seconds.push(started.elapsed().as_secs_f64());
                        out.stopped_after = Some(epochs_run);
                        break 'stages;
                    }
                }
            }
        }
        out.loss_trace.push(epoch_losses);
        let wrong = misclassified(&classifier, &embedded, &train.labels)?;
        out.pool_sizes.push(wrong.len());
        if view.is_some() {
            pool = wrong;
        }
        out.stage_seconds.push(started.elapsed().as_secs_f64());
    }
    out.classifier = match best {
        Some((_, best)) => best,
        None => classifier,
    };
    Ok(out)
}
