//! Conclusion infilling with a sequence-to-sequence denoiser, in an unsupervised
//! (pretrained only) and a supervised (fine-tuned) variant, plus recovery of the infilled
//! conclusion from the decoded argument.

pub mod extract;
pub mod tiny;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsError;
use crate::text::MASK;

pub use extract::{extract_infill, Extracted, MIN_ANCHOR};
pub use tiny::{TinyDenoiser, TinyDenoiserParams};
pub use train::{
    finetune, generate_conclusions, hyperparameter_trials_gen, sample_configs, FinetuneOutcome, GenerationSpace,
    TrialOutcome,
};

pub const EPOCHS: usize = 3;
pub const WARMUP_STEPS: usize = 50;
pub const BEAM_SIZE: usize = 5;
pub const BATCH_RANGE: (usize, usize) = (4, 8);
pub const LR_RANGE: (f64, f64) = (5e-6, 5e-5);

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("input must contain exactly one {MASK} marker: {0:?}")]
    MaskPrecondition(String),
    #[error("model produced an empty sequence for {0:?}")]
    DecodeFailure(String),
    #[error("non-finite training loss at epoch {epoch}, step {step}")]
    DivergenceDetected { epoch: usize, step: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("model state: {0}")]
    Model(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, GeneratorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationVariant {
    Unsupervised,
    Supervised,
}

impl fmt::Display for GenerationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unsupervised => "unsupervised",
            Self::Supervised => "supervised",
        })
    }
}

impl FromStr for GenerationVariant {
    type Err = GeneratorError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unsupervised" => Ok(Self::Unsupervised),
            "supervised" => Ok(Self::Supervised),
            _ => Err(GeneratorError::InvalidConfig(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RawGenerationConfig {
    variant: GenerationVariant,
    batch_size: usize,
    learning_rate: f64,
    epochs: usize,
    warmup_steps: usize,
    beam_size: usize,
    seed: u64,
}

/// Training and decoding settings. Ranges are enforced on construction and on
/// deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenerationConfig", into = "RawGenerationConfig")]
pub struct GenerationConfig {
    variant: GenerationVariant,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
}

impl GenerationConfig {
    pub fn new(variant: GenerationVariant, batch_size: usize, learning_rate: f64, seed: u64) -> Result<Self> {
        if !(BATCH_RANGE.0..=BATCH_RANGE.1).contains(&batch_size) {
            return Err(GeneratorError::InvalidConfig(format!(
                "batch size {batch_size} outside [{}, {}]",
                BATCH_RANGE.0, BATCH_RANGE.1
            )));
        }
        if !(LR_RANGE.0..=LR_RANGE.1).contains(&learning_rate) {
            return Err(GeneratorError::InvalidConfig(format!(
                "learning rate {learning_rate} outside [{}, {}]",
                LR_RANGE.0, LR_RANGE.1
            )));
        }
        Ok(Self { variant, batch_size, learning_rate, seed })
    }

    pub fn variant(&self) -> GenerationVariant {
        self.variant
    }
    pub fn batch_size(&self) -> usize {
        self.batch_size
    }
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn epochs(&self) -> usize {
        EPOCHS
    }
    pub fn warmup_steps(&self) -> usize {
        WARMUP_STEPS
    }
    pub fn beam_size(&self) -> usize {
        BEAM_SIZE
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

impl TryFrom<RawGenerationConfig> for GenerationConfig {
    type Error = GeneratorError;

    fn try_from(raw: RawGenerationConfig) -> Result<Self> {
        if raw.epochs != EPOCHS || raw.warmup_steps != WARMUP_STEPS || raw.beam_size != BEAM_SIZE {
            return Err(GeneratorError::InvalidConfig(format!(
                "epochs, warm-up and beam are fixed at {EPOCHS}, {WARMUP_STEPS}, {BEAM_SIZE}"
            )));
        }
        Self::new(raw.variant, raw.batch_size, raw.learning_rate, raw.seed)
    }
}

impl From<GenerationConfig> for RawGenerationConfig {
    fn from(c: GenerationConfig) -> Self {
        Self {
            variant: c.variant,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            epochs: EPOCHS,
            warmup_steps: WARMUP_STEPS,
            beam_size: BEAM_SIZE,
            seed: c.seed,
        }
    }
}

/// Bounds on decoding, in model tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeLimits {
    pub min_span: usize,
    pub max_span: usize,
    pub max_len: usize,
}

impl Default for DecodeLimits {
    fn default() -> Self {
        Self { min_span: 3, max_span: 60, max_len: 512 }
    }
}

/// Model handle: beam decoding of a masked text into a full text, and gradient steps on
/// batches of (masked source, full target) pairs.
pub trait Seq2Seq: Clone + Send + Sync {
    fn beam_decode(&self, masked: &str, beam: usize, limits: DecodeLimits) -> Result<String>;

    /// One optimizer step at learning rate `lr`; returns the batch's mean token
    /// cross-entropy before the update.
    fn train_step(&mut self, batch: &[(&str, &str)], lr: f64) -> Result<f64>;

    /// Mean token cross-entropy without updating.
    fn loss(&self, batch: &[(&str, &str)]) -> f64;
}

pub fn mask_count(text: &str) -> usize {
    text.matches(MASK).count()
}

/// Decoded full sequence for a text with exactly one mask marker.
pub fn generate_infill<M: Seq2Seq>(model: &M, masked: &str, config: &GenerationConfig) -> Result<String> {
    if mask_count(masked) != 1 {
        return Err(GeneratorError::MaskPrecondition(masked.to_string()));
    }
    let out = model.beam_decode(masked, config.beam_size(), DecodeLimits::default())?;
    if out.trim().is_empty() {
        return Err(GeneratorError::DecodeFailure(masked.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedConclusion {
    pub argument_id: String,
    pub pair_id: String,
    pub text: String,
    pub run: usize,
    pub fold: usize,
    pub variant: GenerationVariant,
    pub raw_infilled: String,
    #[serde(default)]
    pub extraction_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointScore {
    pub epoch: usize,
    /// Mean rescaled BERTScore F1 of extracted conclusions on validation pairs; the
    /// selection criterion.
    pub validation_bertscore: f64,
    pub validation_bertscore_raw: f64,
    pub train_loss: f64,
}
