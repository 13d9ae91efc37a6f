use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    decide, ClassifierConfig, ClassifierError, Prediction, Result, SequenceClassifier, VariantInput, VariantKind,
    BATCH_RANGE, DEFAULT_THRESHOLD, LR_RANGE,
};
use crate::corpus::Label;
use crate::metrics::classification_report;
use crate::seeds::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierCheckpoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_macro_f1: f64,
}

/// A trained encoder bound to the variant it was trained on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierModel<E> {
    pub kind: VariantKind,
    pub encoder: E,
    pub config: ClassifierConfig,
    pub threshold: f64,
    pub checkpoints: Vec<ClassifierCheckpoint>,
    /// 1-based epoch of the kept checkpoint.
    pub selected_epoch: usize,
}

impl<E> ClassifierModel<E> {
    pub fn selected(&self) -> &ClassifierCheckpoint {
        &self.checkpoints[self.selected_epoch - 1]
    }
}

fn common_kind(inputs: &[VariantInput], expected: Option<VariantKind>) -> Result<Option<VariantKind>> {
    let mut kind = expected;
    for i in inputs {
        match kind {
            None => kind = Some(i.kind),
            Some(k) if k != i.kind => {
                return Err(ClassifierError::VariantMismatch {
                    trained: k,
                    found: i.kind,
                    argument_id: i.argument_id.clone(),
                })
            }
            _ => {}
        }
    }
    Ok(kind)
}

fn macro_f1<E: SequenceClassifier>(encoder: &E, inputs: &[VariantInput], threshold: f64) -> Result<f64> {
    let texts: Vec<&str> = inputs.iter().map(|i| i.serialized.as_str()).collect();
    let predicted: Vec<Label> = encoder.probabilities(&texts).into_iter().map(|p| decide(p, threshold)).collect();
    let gold: Vec<Label> = inputs.iter().map(|i| i.label).collect();
    Ok(classification_report(&predicted, &gold)?.macro_f1)
}

/// Trains a copy of `base` for three epochs on the soft macro-F1 loss and keeps the
/// epoch checkpoint with the best validation macro F1 (earliest on ties; the final epoch
/// when there is no validation data).
pub fn train_classifier<E: SequenceClassifier>(
    base: &E,
    train: &[VariantInput],
    val: &[VariantInput],
    config: &ClassifierConfig,
) -> Result<ClassifierModel<E>> {
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let kind = common_kind(train, None)?.expect("non-empty");
    common_kind(val, Some(kind))?;
    let mut encoder = base.clone();
    let mut snapshots = Vec::with_capacity(config.epochs());
    let mut checkpoints = Vec::with_capacity(config.epochs());
    let mut step = 0;
    for epoch in 1..=config.epochs() {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng(derive_seed(config.seed(), &[epoch as u64])));
        let (mut loss_sum, mut batches) = (0.0, 0);
        for chunk in order.chunks(config.batch_size()) {
            step += 1;
            let texts: Vec<&str> = chunk.iter().map(|&i| train[i].serialized.as_str()).collect();
            let labels: Vec<f64> = chunk.iter().map(|&i| train[i].label.as_indicator() as f64).collect();
            let loss = encoder.train_step(&texts, &labels, config.learning_rate())?;
            if !loss.is_finite() {
                return Err(ClassifierError::DivergenceDetected { epoch, step });
            }
            loss_sum += loss;
            batches += 1;
        }
        let validation_macro_f1 = if val.is_empty() { 0.0 } else { macro_f1(&encoder, val, DEFAULT_THRESHOLD)? };
        checkpoints.push(ClassifierCheckpoint { epoch, train_loss: loss_sum / batches as f64, validation_macro_f1 });
        snapshots.push(encoder.clone());
    }
    let selected_epoch = if val.is_empty() {
        config.epochs()
    } else {
        checkpoints
            .iter()
            .fold(&checkpoints[0], |b, c| if c.validation_macro_f1 > b.validation_macro_f1 { c } else { b })
            .epoch
    };
    Ok(ClassifierModel {
        kind,
        encoder: snapshots.swap_remove(selected_epoch - 1),
        config: *config,
        threshold: DEFAULT_THRESHOLD,
        checkpoints,
        selected_epoch,
    })
}

/// One prediction per input, in input order.
pub fn predict<E: SequenceClassifier>(model: &ClassifierModel<E>, inputs: &[VariantInput]) -> Result<Vec<Prediction>> {
    common_kind(inputs, Some(model.kind))?;
    Ok(inputs
        .par_chunks(64)
        .flat_map_iter(|chunk| {
            let texts: Vec<&str> = chunk.iter().map(|i| i.serialized.as_str()).collect();
            let probs = model.encoder.probabilities(&texts);
            chunk.iter().zip(probs).map(|(i, p)| Prediction {
                argument_id: i.argument_id.clone(),
                kind: i.kind,
                probability_sufficient: p,
                predicted_label: decide(p, model.threshold),
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpace {
    pub batch_size: (usize, usize),
    pub learning_rate: (f64, f64),
}

impl Default for ClassifierSpace {
    fn default() -> Self {
        Self { batch_size: BATCH_RANGE, learning_rate: LR_RANGE }
    }
}

/// Seeded random configurations: batch size uniform, learning rate log-uniform.
pub fn sample_classifier_configs(space: &ClassifierSpace, n_trials: usize, seed: u64) -> Result<Vec<ClassifierConfig>> {
    let (b_lo, b_hi) = space.batch_size;
    let (l_lo, l_hi) = space.learning_rate;
    if b_lo > b_hi || l_lo > l_hi {
        return Err(ClassifierError::InvalidConfig(format!("empty search space {space:?}")));
    }
    (0..n_trials as u64)
        .map(|t| {
            let mut g = rng(derive_seed(seed, &[t]));
            let batch = g.random_range(b_lo..=b_hi);
            let lr = if l_lo == l_hi { l_lo } else { g.random_range(l_lo.ln()..=l_hi.ln()).exp().clamp(l_lo, l_hi) };
            ClassifierConfig::new(batch, lr, derive_seed(seed, &[t, 1]))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ClassifierTrials<E> {
    pub best: ClassifierModel<E>,
    /// Every trial's configuration with its selected checkpoint's validation macro F1.
    pub trials: Vec<(ClassifierConfig, f64)>,
}

/// Random search: one trained model per sampled configuration, keeping the best by
/// validation macro F1 (earliest on ties).
pub fn hyperparameter_trials_cls<E: SequenceClassifier>(
    base: &E,
    space: &ClassifierSpace,
    train: &[VariantInput],
    val: &[VariantInput],
    n_trials: usize,
    seed: u64,
) -> Result<ClassifierTrials<E>> {
    if n_trials == 0 {
        return Err(ClassifierError::InvalidConfig("at least one trial is required".into()));
    }
    let configs = sample_classifier_configs(space, n_trials, seed)?;
    let mut models: Vec<ClassifierModel<E>> =
        configs.par_iter().map(|c| train_classifier(base, train, val, c)).collect::<Result<_>>()?;
    let trials: Vec<(ClassifierConfig, f64)> =
        models.iter().map(|m| (m.config, m.selected().validation_macro_f1)).collect();
    let best = (0..trials.len()).fold(0, |b, i| if trials[i].1 > trials[b].1 { i } else { b });
    Ok(ClassifierTrials { best: models.swap_remove(best), trials })
}
