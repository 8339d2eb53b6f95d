//! Two-stage training: contrastive feature learning for the encoder, then a
//! classifier on the frozen encoder's outputs, each stage fed by hard-sample
//! batches (or uniform batches when the corresponding ablation flag is off).

mod cfl;
mod classifier;
mod experiment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsm::MinerConfig;
use crate::matrix::Matrix;
use crate::nn::{mlp_specs, Activation, LayerSpec, Network, OptimizerKind};

pub use cfl::{train_cfl, CflOutcome, ContrastiveModel};
pub use classifier::{misclassified, predict_labels, train_classifier, ClassifierOutcome};
pub use experiment::{
    evaluate, export_embeddings, run_experiment, run_pipeline, train_plain_mlp, CellSummary, ExperimentReport, MeanStd,
    PipelineOutput, RunSummary, StageTimings, TrainReport,
};

/// Layer widths of the encoder, projection head and classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder_hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub projection_dim: usize,
    pub classifier_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder_hidden: vec![128],
            embedding_dim: 64,
            projection_dim: 32,
            classifier_hidden: vec![64],
        }
    }
}

impl ModelConfig {
    pub fn encoder_specs(&self, input_dim: usize) -> Vec<LayerSpec> {
        mlp_specs(input_dim, &self.encoder_hidden, self.embedding_dim, Activation::Identity)
    }

    pub fn projection_specs(&self) -> Vec<LayerSpec> {
        mlp_specs(self.embedding_dim, &[], self.projection_dim, Activation::Identity)
    }

    pub fn classifier_specs(&self, class_count: usize) -> Vec<LayerSpec> {
        mlp_specs(self.embedding_dim, &self.classifier_hidden, class_count, Activation::Identity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub hsm_in_cfl: bool,
    pub hsm_in_mlp: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationCell::Hsmcfl.flags()
    }
}

impl AblationFlags {
    pub fn cell(self) -> AblationCell {
        match (self.hsm_in_cfl, self.hsm_in_mlp) {
            (true, true) => AblationCell::Hsmcfl,
            (true, false) => AblationCell::HsmCflMlp,
            (false, true) => AblationCell::CflHsmMlp,
            (false, false) => AblationCell::CflMlp,
        }
    }
}

/// The four on/off combinations of hard-sample mining across both stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationCell {
    #[serde(rename = "HSMCFL")]
    Hsmcfl,
    #[serde(rename = "HSM+CFL-MLP")]
    HsmCflMlp,
    #[serde(rename = "CFL-HSM+MLP")]
    CflHsmMlp,
    #[serde(rename = "CFL-MLP")]
    CflMlp,
}

impl AblationCell {
    /// Table order.
    pub const ALL: [AblationCell; 4] = [
        AblationCell::Hsmcfl,
        AblationCell::HsmCflMlp,
        AblationCell::CflHsmMlp,
        AblationCell::CflMlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationCell::Hsmcfl => "HSMCFL",
            AblationCell::HsmCflMlp => "HSM+CFL-MLP",
            AblationCell::CflHsmMlp => "CFL-HSM+MLP",
            AblationCell::CflMlp => "CFL-MLP",
        }
    }

    pub fn flags(self) -> AblationFlags {
        let (hsm_in_cfl, hsm_in_mlp) = match self {
            AblationCell::Hsmcfl => (true, true),
            AblationCell::HsmCflMlp => (true, false),
            AblationCell::CflHsmMlp => (false, true),
            AblationCell::CflMlp => (false, false),
        };
        AblationFlags { hsm_in_cfl, hsm_in_mlp }
    }
}

impl std::str::FromStr for AblationCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationCell::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown ablation cell {s:?}")))
    }
}

/// Stop classifier training once validation macro G-mean has not improved
/// for `patience` epochs, restoring the best parameters seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarlyStopping {
    pub enabled: bool,
    pub patience: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        Self {
            enabled: false,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs per stage.
    pub epochs: usize,
    pub temperature: f64,
    pub num_stages: usize,
    /// `batch_size` and `seed` here are overwritten from the fields above.
    pub miner: MinerConfig,
    pub ablation: AblationFlags,
    pub seed: u64,
    pub early_stopping: EarlyStopping,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            optimizer: OptimizerKind::default(),
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 20,
            temperature: 0.1,
            num_stages: 4,
            miner: MinerConfig::default(),
            ablation: AblationFlags::default(),
            seed: 0,
            early_stopping: EarlyStopping::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive")))
            }
        };
        positive("learning_rate", self.learning_rate > 0.0 && self.learning_rate.is_finite())?;
        positive("temperature", self.temperature > 0.0 && self.temperature.is_finite())?;
        positive("num_stages", self.num_stages >= 1)?;
        positive("model.embedding_dim", self.model.embedding_dim >= 1)?;
        positive("model.projection_dim", self.model.projection_dim >= 1)?;
        positive(
            "hidden widths",
            self.model.encoder_hidden.iter().chain(&self.model.classifier_hidden).all(|&w| w >= 1),
        )?;
        self.miner_config(0).validate()
    }

    pub(crate) fn miner_config(&self, seed: u64) -> MinerConfig {
        MinerConfig {
            batch_size: self.batch_size,
            seed,
            ..self.miner.clone()
        }
    }

    pub fn cell(&self) -> AblationCell {
        self.ablation.cell()
    }

    pub fn with_cell(&self, cell: AblationCell) -> Self {
        Self {
            ablation: cell.flags(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cfl,
    Mlp,
}

/// What a single optimizer step saw.
#[derive(Debug, Clone, Copy)]
pub struct BatchEvent<'a> {
    pub phase: Phase,
    pub stage: usize,
    pub epoch: usize,
    pub batch: usize,
    /// Row indices into the training set.
    pub indices: &'a [usize],
    /// Shape of the loss input (projected embeddings or logits).
    pub output_shape: (usize, usize),
    pub loss: f64,
}

/// Observation and augmentation points inside the training loops.
pub trait Hooks {
    fn on_batch(&mut self, _event: &BatchEvent<'_>) {}

    /// Called on every input batch before the forward pass.
    fn augment(&mut self, _phase: Phase, _inputs: &mut Matrix, _labels: &[usize]) {}
}

pub struct NoHooks;

impl Hooks for NoHooks {}

pub(crate) fn init_network(specs: &[LayerSpec], seed: u64) -> Result<Network> {
    Network::init(specs, &mut crate::rng::rng(seed))
}
