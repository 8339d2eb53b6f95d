use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    init_network, train_cfl, train_classifier, AblationCell, ContrastiveModel, NoHooks, TrainConfig,
};
use super::classifier::predict_labels;
use crate::dataio::{format_real, Dataset, LabeledSet, Split};
use crate::error::{Error, Result, ResultExt};
use crate::exec;
use crate::hsm::uniform_batches;
use crate::metrics::MetricsBundle;
use crate::nn::{mlp_specs, softmax_cross_entropy, Activation, Network, OptimizerState};
use crate::rng;

use super::Hooks;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub cfl_seconds: Vec<f64>,
    pub mlp_seconds: Vec<f64>,
}

/// Everything a single pipeline run produced, minus the networks.
///
/// Wall-clock timings are kept out of the serialized form so that reruns
/// serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub cell: AblationCell,
    pub seed: u64,
    pub config: TrainConfig,
    /// `[stage][epoch]` mean contrastive loss.
    pub cfl_loss: Vec<Vec<f64>>,
    /// `[stage][epoch]` mean classifier cross-entropy.
    pub classifier_loss: Vec<Vec<f64>>,
    pub misclassified_pool_sizes: Vec<usize>,
    pub early_stopped_after: Option<usize>,
    pub train: MetricsBundle,
    pub val: Option<MetricsBundle>,
    pub test: MetricsBundle,
    #[serde(skip)]
    pub timings: StageTimings,
}

pub struct PipelineOutput {
    pub model: ContrastiveModel,
    pub classifier: Network,
    pub report: TrainReport,
}

/// Contrastive training, classifier training and evaluation on every split.
pub fn run_pipeline(ds: &Dataset, cfg: &TrainConfig, hooks: &mut dyn Hooks) -> Result<PipelineOutput> {
    if ds.split_assignment().is_none() {
        return Err(Error::Config("dataset has no train/val/test assignment".into()));
    }
    let train = ds.labeled_set(Split::Train);
    let val = ds.labeled_set(Split::Val);
    let test = ds.labeled_set(Split::Test);

    let cfl = train_cfl(&train, cfg, hooks)?;
    let mlp = train_classifier(&train, Some(&val), &cfl.model.encoder, cfg, hooks)?;
    let evaluate = |set: &LabeledSet| evaluate(&cfl.model.encoder, &mlp.classifier, set);
    let report = TrainReport {
        cell: cfg.cell(),
        seed: cfg.seed,
        config: cfg.clone(),
        cfl_loss: cfl.loss_trace,
        classifier_loss: mlp.loss_trace,
        misclassified_pool_sizes: mlp.pool_sizes,
        early_stopped_after: mlp.stopped_after,
        train: evaluate(&train).context(|| "train split")?,
        val: if val.is_empty() {
            None
        } else {
            Some(evaluate(&val).context(|| "val split")?)
        },
        test: evaluate(&test).context(|| "test split")?,
        timings: StageTimings {
            cfl_seconds: cfl.stage_seconds,
            mlp_seconds: mlp.stage_seconds,
        },
    };
    Ok(PipelineOutput {
        model: cfl.model,
        classifier: mlp.classifier,
        report,
    })
}

pub fn evaluate(encoder: &Network, classifier: &Network, set: &LabeledSet) -> Result<MetricsBundle> {
    let logits = classifier.predict(&encoder.predict(&set.features)?)?;
    MetricsBundle::evaluate(&set.labels, &predict_labels(&logits), set.class_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if let Some(&first) = values.first().filter(|&&f| values.iter().all(|&v| v == f)) {
            return Self { mean: first, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_gmean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: AblationCell,
    pub runs: Vec<RunSummary>,
    pub accuracy: MeanStd,
    pub macro_gmean: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub base_seed: u64,
    pub repeats: usize,
    pub cells: Vec<CellSummary>,
}

impl ExperimentReport {
    pub fn cell(&self, cell: AblationCell) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.cell == cell)
    }

    /// `cell,accuracy_mean,accuracy_std,macro_gmean_mean,macro_gmean_std`
    /// in the order the cells were requested.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,accuracy_mean,accuracy_std,macro_gmean_mean,macro_gmean_std\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                c.cell.name(),
                c.accuracy.mean,
                c.accuracy.std,
                c.macro_gmean.mean,
                c.macro_gmean.std
            ));
        }
        out
    }
}

/// Run every requested cell `repeats` times with seeds `cfg.seed + r`,
/// test-split metrics aggregated per cell. Runs execute in parallel; results
/// are merged in cell order, then seed order.
pub fn run_experiment(ds: &Dataset, cfg: &TrainConfig, repeats: usize, cells: &[AblationCell]) -> Result<ExperimentReport> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    cfg.validate()?;
    let jobs: Vec<(AblationCell, u64)> = cells
        .iter()
        .flat_map(|&cell| (0..repeats as u64).map(move |r| (cell, cfg.seed.wrapping_add(r))))
        .collect();
    let results = exec::map_jobs(jobs.clone(), |(cell, seed)| {
        let run_cfg = TrainConfig {
            seed,
            ..cfg.with_cell(cell)
        };
        run_pipeline(ds, &run_cfg, &mut NoHooks)
            .map(|out| RunSummary {
                seed,
                accuracy: out.report.test.accuracy,
                macro_gmean: out.report.test.macro_gmean,
            })
            .context(|| format!("{} seed {seed}", cell.name()))
    });
    let mut results = results.into_iter();
    let mut summaries = Vec::with_capacity(cells.len());
    for &cell in cells {
        let runs = results.by_ref().take(repeats).collect::<Result<Vec<_>>>()?;
        let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        let gm: Vec<f64> = runs.iter().map(|r| r.macro_gmean).collect();
        summaries.push(CellSummary {
            cell,
            accuracy: MeanStd::of(&acc),
            macro_gmean: MeanStd::of(&gm),
            runs,
        });
    }
    Ok(ExperimentReport {
        base_seed: cfg.seed,
        repeats,
        cells: summaries,
    })
}

/// Reference classifier without contrastive pretraining or mining: the
/// encoder's layer widths followed by a linear output layer, trained on
/// raw features with uniform batches for `num_stages × epochs` epochs.
/// Returns test-split metrics.
pub fn train_plain_mlp(ds: &Dataset, cfg: &TrainConfig) -> Result<MetricsBundle> {
    cfg.validate()?;
    let train = ds.labeled_set(Split::Train);
    let test = ds.labeled_set(Split::Test);
    let mut hidden = cfg.model.encoder_hidden.clone();
    hidden.push(cfg.model.embedding_dim);
    let specs = mlp_specs(ds.feature_count(), &hidden, ds.class_count(), Activation::Identity);
    let seed = rng::sub_seed(cfg.seed, rng::BASELINE);
    let mut net = init_network(&specs, seed)?;
    let mut opt = OptimizerState::new(&net, cfg.optimizer, cfg.learning_rate)?;
    for epoch in 0..cfg.num_stages * cfg.epochs {
        let mut r = rng::rng(rng::epoch_seed(seed, 0, 0, epoch));
        for indices in uniform_batches(train.len(), cfg.batch_size, &mut r) {
            let x = train.features.gather_rows(&indices);
            let labels: Vec<usize> = indices.iter().map(|&i| train.labels[i]).collect();
            let cache = net.forward(&x)?;
            let ce = softmax_cross_entropy(cache.output(), &labels)?;
            let grads = net.backward(&cache, &ce.grad)?;
            opt.step(&mut net, &grads)?;
        }
    }
    let predicted = predict_labels(&net.predict(&test.features)?);
    MetricsBundle::evaluate(&test.labels, &predicted, test.class_count)
}

/// Encoder outputs as CSV: header `e0,…,e{E-1},label`, one row per sample.
pub fn export_embeddings(encoder: &Network, set: &LabeledSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = encoder.output_dim();
    let mut out = String::new();
    for j in 0..dim {
        out.push_str(&format!("e{j},"));
    }
    out.push_str("label\n");
    if !set.is_empty() {
        let embedded = encoder.predict(&set.features)?;
        for (row, label) in embedded.iter_rows().zip(&set.labels) {
            for &v in row {
                out.push_str(&format_real(v));
                out.push(',');
            }
            out.push_str(&format!("{label}\n"));
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
