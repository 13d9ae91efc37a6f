use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    extract_infill, generate_infill, CheckpointScore, GeneratedConclusion, GenerationConfig, GenerationVariant,
    GeneratorError, Result, Seq2Seq, BATCH_RANGE, LR_RANGE,
};
use crate::corpus::MaskedArgumentPair;
use crate::metrics::Scorer;
use crate::nn::CosineSchedule;
use crate::seeds::{derive_seed, rng};

#[derive(Debug, Clone)]
pub struct FinetuneOutcome<M> {
    pub model: M,
    pub config: GenerationConfig,
    pub checkpoints: Vec<CheckpointScore>,
    /// 1-based epoch of the returned checkpoint.
    pub selected_epoch: usize,
}

impl<M> FinetuneOutcome<M> {
    pub fn selected(&self) -> &CheckpointScore {
        &self.checkpoints[self.selected_epoch - 1]
    }
}

/// Decodes and extracts conclusions for `pairs`, in input order.
pub fn generate_conclusions<M: Seq2Seq>(
    model: &M,
    pairs: &[&MaskedArgumentPair],
    config: &GenerationConfig,
    run: usize,
    fold: usize,
) -> Result<Vec<GeneratedConclusion>> {
    pairs
        .par_iter()
        .map(|p| {
            let raw = generate_infill(model, &p.source, config)?;
            let e =
                extract_infill(&p.source, &raw).ok_or_else(|| GeneratorError::MaskPrecondition(p.source.clone()))?;
            Ok(GeneratedConclusion {
                argument_id: p.argument_id.clone(),
                pair_id: p.pair_id.clone(),
                extraction_fallback: e.fallback,
                text: e.text,
                run,
                fold,
                variant: config.variant(),
                raw_infilled: raw,
            })
        })
        .collect()
}

/// Mean (raw, rescaled) BERTScore F1 of extracted conclusions against gold conclusions.
fn validation_score<M: Seq2Seq>(
    model: &M,
    val: &[&MaskedArgumentPair],
    config: &GenerationConfig,
    scorer: &Scorer,
) -> Result<(f64, f64)> {
    let generated = generate_conclusions(model, val, config, 0, 0)?;
    let pairs: Vec<(String, String)> =
        generated.into_iter().zip(val).map(|(g, p)| (g.text, p.conclusion.clone())).collect();
    Ok(scorer.mean_f1(&pairs)?)
}

/// Fine-tunes a copy of `base` for three epochs with token cross-entropy on
/// (masked source, full target), scoring a checkpoint on the validation pairs after each
/// epoch and returning the best one by rescaled BERTScore (earliest on ties; the final
/// epoch when there are no validation pairs).
pub fn finetune<M: Seq2Seq>(
    base: &M,
    train: &[&MaskedArgumentPair],
    val: &[&MaskedArgumentPair],
    config: &GenerationConfig,
    scorer: &Scorer,
) -> Result<FinetuneOutcome<M>> {
    if train.is_empty() {
        return Err(GeneratorError::EmptyTrainingSet);
    }
    let steps_per_epoch = train.len().div_ceil(config.batch_size());
    let schedule = CosineSchedule {
        base_lr: config.learning_rate(),
        warmup_steps: config.warmup_steps(),
        total_steps: steps_per_epoch * config.epochs(),
    };
    let mut model = base.clone();
    let mut snapshots = Vec::with_capacity(config.epochs());
    let mut checkpoints = Vec::with_capacity(config.epochs());
    let mut step = 0;
    for epoch in 1..=config.epochs() {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng(derive_seed(config.seed(), &[epoch as u64])));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size()) {
            step += 1;
            let batch: Vec<(&str, &str)> =
                chunk.iter().map(|&i| (train[i].source.as_str(), train[i].target.as_str())).collect();
            let loss = model.train_step(&batch, schedule.lr(step))?;
            if !loss.is_finite() {
                return Err(GeneratorError::DivergenceDetected { epoch, step });
            }
            loss_sum += loss;
        }
        let (raw, rescaled) = validation_score(&model, val, config, scorer)?;
        log::debug!("epoch {epoch}: loss {:.4}, validation BERTScore {rescaled:.4}", loss_sum / steps_per_epoch as f64);
        checkpoints.push(CheckpointScore {
            epoch,
            validation_bertscore: rescaled,
            validation_bertscore_raw: raw,
            train_loss: loss_sum / steps_per_epoch as f64,
        });
        snapshots.push(model.clone());
    }
    let selected_epoch = if val.is_empty() {
        config.epochs()
    } else {
        checkpoints
            .iter()
            .fold(&checkpoints[0], |best, c| if c.validation_bertscore > best.validation_bertscore { c } else { best })
            .epoch
    };
    Ok(FinetuneOutcome {
        model: snapshots.swap_remove(selected_epoch - 1),
        config: *config,
        checkpoints,
        selected_epoch,
    })
}

/// Search bounds for generator hyperparameters; must lie within the config ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpace {
    pub batch_size: (usize, usize),
    pub learning_rate: (f64, f64),
}

impl Default for GenerationSpace {
    fn default() -> Self {
        Self { batch_size: BATCH_RANGE, learning_rate: LR_RANGE }
    }
}

/// Seeded random configurations: batch size uniform, learning rate log-uniform. Trial
/// `t` draws from its own stream, so prefixes agree across trial counts.
pub fn sample_configs(
    space: &GenerationSpace,
    variant: GenerationVariant,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<GenerationConfig>> {
    let (b_lo, b_hi) = space.batch_size;
    let (l_lo, l_hi) = space.learning_rate;
    if b_lo > b_hi || l_lo > l_hi {
        return Err(GeneratorError::InvalidConfig(format!("empty search space {space:?}")));
    }
    (0..n_trials as u64)
        .map(|t| {
            let mut g = rng(derive_seed(seed, &[t]));
            let batch = g.random_range(b_lo..=b_hi);
            let lr = if l_lo == l_hi { l_lo } else { g.random_range(l_lo.ln()..=l_hi.ln()).exp().clamp(l_lo, l_hi) };
            GenerationConfig::new(variant, batch, lr, derive_seed(seed, &[t, 1]))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrialOutcome<M> {
    pub best: FinetuneOutcome<M>,
    /// Every trial's configuration with its selected checkpoint's validation score.
    pub trials: Vec<(GenerationConfig, f64)>,
}

/// Random search over `space`: fine-tunes one model per sampled configuration and keeps
/// the one whose selected checkpoint scores highest on validation (earliest on ties).
#[allow(clippy::too_many_arguments)]
pub fn hyperparameter_trials_gen<M: Seq2Seq>(
    base: &M,
    space: &GenerationSpace,
    train: &[&MaskedArgumentPair],
    val: &[&MaskedArgumentPair],
    n_trials: usize,
    seed: u64,
    scorer: &Scorer,
) -> Result<TrialOutcome<M>> {
    if n_trials == 0 {
        return Err(GeneratorError::InvalidConfig("at least one trial is required".into()));
    }
    let configs = sample_configs(space, GenerationVariant::Supervised, n_trials, seed)?;
    let mut outcomes: Vec<FinetuneOutcome<M>> =
        configs.par_iter().map(|c| finetune(base, train, val, c, scorer)).collect::<Result<_>>()?;
    let trials: Vec<(GenerationConfig, f64)> =
        outcomes.iter().map(|o| (o.config, o.selected().validation_bertscore)).collect();
    let best = (0..trials.len()).fold(0, |b, i| if trials[i].1 > trials[b].1 { i } else { b });
    Ok(TrialOutcome { best: outcomes.swap_remove(best), trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{DecodeLimits, TinyDenoiser, TinyDenoiserParams};
    use crate::metrics::HashedEmbedder;

    fn pair(i: usize, pre: &str, concl: &str) -> MaskedArgumentPair {
        MaskedArgumentPair {
            pair_id: format!("e_p{i}#c0"),
            argument_id: format!("e_p{i}"),
            essay_id: "e".into(),
            source: format!("{pre} Thus, <mask>."),
            target: format!("{pre} Thus, {concl}."),
            conclusion: concl.into(),
        }
    }

    fn toy_pairs() -> Vec<MaskedArgumentPair> {
        (0..10)
            .map(|i| pair(i, &format!("Fact number {i} holds for city {}.", i % 3), &format!("city {} is good", i % 3)))
            .collect()
    }

    /// Exact-copy stand-in that always returns the gold target of a known source.
    #[derive(Clone)]
    struct Oracle(Vec<(String, String)>, f64);

    impl Seq2Seq for Oracle {
        fn beam_decode(&self, masked: &str, _: usize, _: DecodeLimits) -> Result<String> {
            Ok(self.0.iter().find(|(s, _)| s == masked).map_or(String::new(), |(_, t)| t.clone()))
        }
        fn train_step(&mut self, _: &[(&str, &str)], _: f64) -> Result<f64> {
            Ok(self.1)
        }
        fn loss(&self, _: &[(&str, &str)]) -> f64 {
            self.1
        }
    }

    #[test]
    fn exact_decoder_recovers_gold() {
        let pairs = toy_pairs();
        let oracle = Oracle(pairs.iter().map(|p| (p.source.clone(), p.target.clone())).collect(), 0.0);
        let refs: Vec<&MaskedArgumentPair> = pairs.iter().collect();
        let c = GenerationConfig::new(GenerationVariant::Supervised, 4, 1e-5, 0).unwrap();
        let out = generate_conclusions(&oracle, &refs, &c, 1, 2).unwrap();
        for (g, p) in out.iter().zip(&pairs) {
            assert_eq!(g.text, p.conclusion);
            assert!(!g.extraction_fallback);
            assert_eq!((g.run, g.fold), (1, 2));
        }
    }

    #[test]
    fn divergence_and_empty_training_are_errors() {
        let pairs = toy_pairs();
        let refs: Vec<&MaskedArgumentPair> = pairs.iter().collect();
        let e = HashedEmbedder::default();
        let scorer = Scorer { embedder: &e, baseline: 0.2 };
        let c = GenerationConfig::new(GenerationVariant::Supervised, 4, 1e-5, 0).unwrap();
        let nan = Oracle(vec![], f64::NAN);
        assert!(matches!(
            finetune(&nan, &refs, &refs, &c, &scorer),
            Err(GeneratorError::DivergenceDetected { epoch: 1, step: 1 })
        ));
        assert!(matches!(finetune(&nan, &[], &refs, &c, &scorer), Err(GeneratorError::EmptyTrainingSet)));
    }

    #[test]
    fn tiny_finetune_reduces_loss_and_selects_argmax() {
        let pairs = toy_pairs();
        let (train, val): (Vec<&MaskedArgumentPair>, Vec<&MaskedArgumentPair>) =
            (pairs[..8].iter().collect(), pairs[8..].iter().collect());
        let sources: Vec<&str> = pairs.iter().map(|p| p.source.as_str()).collect();
        let base = TinyDenoiser::pretrained(&sources, TinyDenoiserParams::default(), 3)
            .unwrap()
            .with_extended_vocab(train.iter().map(|p| p.target.as_str()), 4);
        let e = HashedEmbedder::default();
        let scorer = Scorer { embedder: &e, baseline: 0.2 };
        let c = GenerationConfig::new(GenerationVariant::Supervised, 4, 5e-5, 11).unwrap();
        let out = finetune(&base, &train, &val, &c, &scorer).unwrap();
        assert_eq!(out.checkpoints.len(), 3);
        assert_eq!(out.checkpoints.iter().map(|c| c.epoch).collect::<Vec<_>>(), [1, 2, 3]);
        let losses: Vec<f64> = out.checkpoints.iter().map(|c| c.train_loss).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        let best = out.checkpoints.iter().map(|c| c.validation_bertscore).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.selected().validation_bertscore, best);
        let again = finetune(&base, &train, &val, &c, &scorer).unwrap();
        assert_eq!(again.checkpoints, out.checkpoints);
    }

    #[test]
    fn sampling_is_seeded_and_bounded() {
        let space = GenerationSpace::default();
        let a = sample_configs(&space, GenerationVariant::Supervised, 10, 5).unwrap();
        assert_eq!(a, sample_configs(&space, GenerationVariant::Supervised, 10, 5).unwrap());
        assert_ne!(a, sample_configs(&space, GenerationVariant::Supervised, 10, 6).unwrap());
        assert_eq!(a[..4], sample_configs(&space, GenerationVariant::Supervised, 4, 5).unwrap()[..]);
        assert_eq!(a.len(), 10);
        let point = GenerationSpace { batch_size: (6, 6), learning_rate: (2e-5, 2e-5) };
        for c in sample_configs(&point, GenerationVariant::Supervised, 3, 1).unwrap() {
            assert_eq!((c.batch_size(), c.learning_rate()), (6, 2e-5));
        }
        let outside = GenerationSpace { batch_size: (2, 16), learning_rate: LR_RANGE };
        assert!(sample_configs(&outside, GenerationVariant::Supervised, 50, 1).is_err());
    }

    #[test]
    fn trials_train_every_config_and_keep_the_best() {
        let pairs = toy_pairs();
        let refs: Vec<&MaskedArgumentPair> = pairs.iter().collect();
        let oracle = Oracle(pairs.iter().map(|p| (p.source.clone(), p.target.clone())).collect(), 1.0);
        let e = HashedEmbedder::default();
        let scorer = Scorer { embedder: &e, baseline: 0.2 };
        let out =
            hyperparameter_trials_gen(&oracle, &GenerationSpace::default(), &refs, &refs, 10, 3, &scorer).unwrap();
        assert_eq!(out.trials.len(), 10);
        assert_eq!(out.best.config, out.trials[0].0);
    }
}
