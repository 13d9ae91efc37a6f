use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::corpus::{FoldPlan, MaskedArgumentPair};
use crate::generator::{
    self, generate_conclusions, hyperparameter_trials_gen, CheckpointScore, GeneratedConclusion, GenerationConfig,
    GenerationSpace, GenerationVariant, Seq2Seq,
};
use crate::metrics::{mean_rouge, RougeScores, Scorer};
use crate::seeds::derive_seed;

/// What was trained and selected for one (run, fold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldGeneration {
    pub run: usize,
    pub fold: usize,
    pub variant: GenerationVariant,
    pub seed: u64,
    pub config: GenerationConfig,
    /// Empty for the unsupervised variant, which is not trained.
    pub checkpoints: Vec<CheckpointScore>,
    pub selected_epoch: Option<usize>,
    pub trials: Vec<(GenerationConfig, f64)>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Validation BERTScore used for selection is the rescaled F1; the raw F1 is kept in
    /// `checkpoints` alongside it.
    pub selection_metric: String,
}

#[derive(Debug, Clone)]
pub struct GenerationRun<M> {
    /// Ordered by run, fold and pair id.
    pub records: Vec<GeneratedConclusion>,
    pub folds: Vec<FoldGeneration>,
    /// Model used for each (run, fold).
    pub models: Vec<((usize, usize), M)>,
}

/// Generates a conclusion for every pair of every fold's test split.
///
/// `base` returns the starting model of a fold given its training pairs and seed. The
/// unsupervised variant decodes test pairs with that model directly and never reads
/// training pairs' targets; the supervised variant runs `n_trials` fine-tuning trials on
/// the fold's train/val split and decodes with the selected model.
#[allow(clippy::too_many_arguments)]
pub fn run_generation<M: Seq2Seq>(
    pairs: &[MaskedArgumentPair],
    plans: &[FoldPlan],
    variant: GenerationVariant,
    n_trials: usize,
    seed: u64,
    base: &(dyn Fn(&[&MaskedArgumentPair], u64) -> generator::Result<M> + Sync),
    scorer: &Scorer,
    jobs: usize,
) -> Result<GenerationRun<M>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidMatrix(e.to_string()))?;
    let per_fold: Vec<(FoldGeneration, Vec<GeneratedConclusion>, M)> = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| {
                let (train, val, test) = plan.partition(pairs, |p| p.essay_id.as_str());
                let fold_seed = derive_seed(seed, &[plan.run_index as u64, plan.fold_index as u64]);
                let (model, config, checkpoints, selected_epoch, trials) = match variant {
                    GenerationVariant::Unsupervised => {
                        let model = base(&[], fold_seed)?;
                        let config = GenerationConfig::new(variant, 4, 5e-6, fold_seed)?;
                        (model, config, vec![], None, vec![])
                    }
                    GenerationVariant::Supervised => {
                        let start = base(&train, fold_seed)?;
                        let out = hyperparameter_trials_gen(
                            &start,
                            &GenerationSpace::default(),
                            &train,
                            &val,
                            n_trials,
                            fold_seed,
                            scorer,
                        )?;
                        let best = out.best;
                        (best.model, best.config, best.checkpoints, Some(best.selected_epoch), out.trials)
                    }
                };
                let records = generate_conclusions(&model, &test, &config, plan.run_index, plan.fold_index)?;
                log::info!(
                    "generated {} conclusions for run {}, fold {}",
                    records.len(),
                    plan.run_index,
                    plan.fold_index
                );
                let fold = FoldGeneration {
                    run: plan.run_index,
                    fold: plan.fold_index,
                    variant,
                    seed: fold_seed,
                    config,
                    checkpoints,
                    selected_epoch,
                    trials,
                    n_train: train.len(),
                    n_val: val.len(),
                    n_test: test.len(),
                    selection_metric: "rescaled BERTScore F1".into(),
                };
                Ok((fold, records, model))
            })
            .collect::<Result<_>>()
    })?;
    let mut run = GenerationRun { records: vec![], folds: vec![], models: vec![] };
    for (fold, records, model) in per_fold {
        run.models.push(((fold.run, fold.fold), model));
        run.folds.push(fold);
        run.records.extend(records);
    }
    run.records.sort_by(|a, b| (a.run, a.fold, &a.pair_id).cmp(&(b.run, b.fold, &b.pair_id)));
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationEval {
    pub variant: GenerationVariant,
    pub conclusions: usize,
    pub rescaled_bertscore: f64,
    pub raw_bertscore: f64,
    pub rouge: RougeScores,
    pub extraction_fallbacks: usize,
}

/// Mean ROUGE and BERTScore of generated conclusions against the gold conclusions of
/// their pairs.
pub fn evaluate_generation(
    records: &[GeneratedConclusion],
    pairs: &[MaskedArgumentPair],
    variant: GenerationVariant,
    scorer: &Scorer,
) -> Result<GenerationEval> {
    let gold: HashMap<&str, &str> = pairs.iter().map(|p| (p.pair_id.as_str(), p.conclusion.as_str())).collect();
    let matched: Vec<(String, String)> = records
        .iter()
        .filter(|r| r.variant == variant)
        .filter_map(|r| gold.get(r.pair_id.as_str()).map(|g| (r.text.clone(), g.to_string())))
        .collect();
    let (raw, rescaled) = scorer.mean_f1(&matched)?;
    Ok(GenerationEval {
        variant,
        conclusions: matched.len(),
        rescaled_bertscore: rescaled,
        raw_bertscore: raw,
        rouge: mean_rouge(&matched),
        extraction_fallbacks: records.iter().filter(|r| r.variant == variant && r.extraction_fallback).count(),
    })
}
