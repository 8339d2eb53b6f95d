use super::{init_network, BatchEvent, Hooks, Phase, TrainConfig};
use crate::dataio::LabeledSet;
use crate::error::{Error, Result, ResultExt};
use crate::hsm::{build_batches, refresh_view, uniform_batches, ViewStage};
use crate::nn::{l2_normalize_rows, l2_normalize_rows_backward, Network, OptimizerState};
use crate::rng;
use crate::supcon::{supcon_loss_and_grad, ContrastiveBatch};

/// Encoder plus the projection head used only by the contrastive loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveModel {
    pub encoder: Network,
    pub projection: Network,
}

impl ContrastiveModel {
    pub fn init(input_dim: usize, cfg: &TrainConfig) -> Result<Self> {
        Ok(Self {
            encoder: init_network(
                &cfg.model.encoder_specs(input_dim),
                rng::sub_seed(cfg.seed, rng::ENCODER_INIT),
            )?,
            projection: init_network(
                &cfg.model.projection_specs(),
                rng::sub_seed(cfg.seed, rng::PROJECTION_INIT),
            )?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CflOutcome {
    pub model: ContrastiveModel,
    /// Mean batch loss, indexed `[stage][epoch]`.
    pub loss_trace: Vec<Vec<f64>>,
    pub stage_seconds: Vec<f64>,
}

/// Train the encoder and projection head with the supervised contrastive
/// loss on L2-normalized projections.
///
/// With hard-sample mining on, each stage rebuilds the similarity view
/// (normalized raw features in the first stage, encoder outputs after that)
/// and mines one set of batches reused for every epoch of the stage.
/// Otherwise each epoch reshuffles the training set into uniform batches.
pub fn train_cfl(train: &LabeledSet, cfg: &TrainConfig, hooks: &mut dyn Hooks) -> Result<CflOutcome> {
    cfg.validate()?;
    if train.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "training set of {} samples cannot fill a batch of {}",
            train.len(),
            cfg.batch_size
        )));
    }
    let mut model = ContrastiveModel::init(train.features.cols(), cfg)?;
    let mut enc_opt = OptimizerState::new(&model.encoder, cfg.optimizer, cfg.learning_rate)?;
    let mut proj_opt = OptimizerState::new(&model.projection, cfg.optimizer, cfg.learning_rate)?;
    let mut loss_trace = Vec::with_capacity(cfg.num_stages);
    let mut stage_seconds = Vec::with_capacity(cfg.num_stages);

    for stage in 0..cfg.num_stages {
        let started = std::time::Instant::now();
        let mined = if cfg.ablation.hsm_in_cfl && cfg.epochs > 0 {
            let view_stage = if stage == 0 { ViewStage::Cfl } else { ViewStage::Mlp };
            let view = refresh_view(&model.encoder, train, view_stage).context(|| format!("cfl stage {stage}"))?;
            let miner = cfg.miner_config(rng::stage_seed(cfg.seed, rng::CFL_MINER, stage));
            let batches = build_batches(&view, &miner, &[]).context(|| format!("cfl stage {stage}"))?;
            Some(batches.iter().map(|b| b.indices()).collect::<Vec<_>>())
        } else {
            None
        };

        let mut epoch_losses = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let batches = match &mined {
                Some(b) => b.clone(),
                None => uniform_batches(
                    train.len(),
                    cfg.batch_size,
                    &mut rng::rng(rng::epoch_seed(cfg.seed, rng::CFL_SHUFFLE, stage, epoch)),
                ),
            };
            let mut total = 0.0;
            for (b, indices) in batches.iter().enumerate() {
                let loss = cfl_step(&mut model, &mut enc_opt, &mut proj_opt, train, indices, cfg, hooks, (stage, epoch, b))
                    .context(|| format!("cfl stage {stage} epoch {epoch} batch {b}"))?;
                total += loss;
            }
            epoch_losses.push(total / batches.len().max(1) as f64);
        }
        loss_trace.push(epoch_losses);
        stage_seconds.push(started.elapsed().as_secs_f64());
    }
    Ok(CflOutcome {
        model,
        loss_trace,
        stage_seconds,
    })
}

#[allow(clippy::too_many_arguments)]
fn cfl_step(
    model: &mut ContrastiveModel,
    enc_opt: &mut OptimizerState,
    proj_opt: &mut OptimizerState,
    train: &LabeledSet,
    indices: &[usize],
    cfg: &TrainConfig,
    hooks: &mut dyn Hooks,
    (stage, epoch, batch): (usize, usize, usize),
) -> Result<f64> {
    let mut x = train.features.gather_rows(indices);
    let labels: Vec<usize> = indices.iter().map(|&i| train.labels[i]).collect();
    hooks.augment(Phase::Cfl, &mut x, &labels);

    let enc_cache = model.encoder.forward(&x)?;
    let proj_cache = model.projection.forward(enc_cache.output())?;
    let z = l2_normalize_rows(proj_cache.output());
    let (loss, grad_z) = supcon_loss_and_grad(&ContrastiveBatch::new(&z.rows, &labels, cfg.temperature)?);
    let grad_proj = l2_normalize_rows_backward(&z, &grad_z);
    let proj_grads = model.projection.backward(&proj_cache, &grad_proj)?;
    let enc_grads = model.encoder.backward(&enc_cache, &proj_grads.input)?;
    proj_opt.step(&mut model.projection, &proj_grads)?;
    enc_opt.step(&mut model.encoder, &enc_grads)?;

    hooks.on_batch(&BatchEvent {
        phase: Phase::Cfl,
        stage,
        epoch,
        batch,
        indices,
        output_shape: (z.rows.rows(), z.rows.cols()),
        loss,
    });
    Ok(loss)
}
