use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentMatrix, HarnessError, Result};
use crate::classifier::{
    build_variant_input, hyperparameter_trials_cls, predict, ClassifierConfig, ClassifierModel, ClassifierSpace,
    SequenceClassifier, VariantInput, VariantKind,
};
use crate::corpus::{Argument, FoldPlan, Label};
use crate::generator::GeneratedConclusion;
use crate::metrics::{classification_report, ClassificationReport};
use crate::records::{self, Appender};
use crate::seeds::{derive_seed, label_hash};

pub const CELL_SCHEMA: &str = "cell";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub variant: VariantKind,
    pub run: usize,
    pub fold: usize,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, run {}, fold {})", self.variant, self.run, self.fold)
    }
}

/// Outcome of one evaluated cell, with what is needed to audit and reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub key: CellKey,
    pub seed: u64,
    pub trials: usize,
    pub config: ClassifierConfig,
    pub selected_epoch: usize,
    pub validation_macro_f1: f64,
    pub test: ClassificationReport,
    /// Essays whose arguments were used for training or model selection.
    pub fit_essays: BTreeSet<String>,
    pub test_essays: BTreeSet<String>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

/// Generated conclusions of primary pairs, by (run, argument id).
#[derive(Debug, Clone, Default)]
pub struct GeneratedIndex {
    map: HashMap<(usize, String), GeneratedConclusion>,
}

impl GeneratedIndex {
    /// Keeps only records of primary pairs.
    pub fn new(records: impl IntoIterator<Item = GeneratedConclusion>) -> Self {
        let map = records
            .into_iter()
            .filter(|g| g.pair_id.ends_with("#c0"))
            .map(|g| ((g.run, g.argument_id.clone()), g))
            .collect();
        Self { map }
    }

    pub fn get(&self, run: usize, argument_id: &str) -> Option<&GeneratedConclusion> {
        self.map.get(&(run, argument_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Serialized inputs of `kind` for `args`, taking generated conclusions from `run`.
pub fn variant_inputs(
    args: &[&Argument],
    kind: VariantKind,
    generated: &GeneratedIndex,
    run: usize,
) -> Result<Vec<VariantInput>> {
    args.iter()
        .map(|a| {
            let g = if kind.needs_generated() {
                Some(
                    generated
                        .get(run, &a.argument_id)
                        .ok_or_else(|| HarnessError::MissingGenerated { argument_id: a.argument_id.clone(), run })?,
                )
            } else {
                None
            };
            Ok(build_variant_input(a, g, kind)?)
        })
        .collect()
}

fn plan_for(plans: &[FoldPlan], run: usize, fold: usize) -> Result<&FoldPlan> {
    plans.iter().find(|p| p.run_index == run && p.fold_index == fold).ok_or(HarnessError::MissingPlan { run, fold })
}

/// Runs one cell's seeded hyperparameter trials on its fold's train/val split and scores
/// the selected model on the test split.
pub fn fit_cell<E: SequenceClassifier>(
    key: CellKey,
    matrix: &ExperimentMatrix,
    arguments: &[Argument],
    generated: &GeneratedIndex,
    plans: &[FoldPlan],
    base: &(dyn Fn(u64) -> E + Sync),
) -> Result<(CellRecord, ClassifierModel<E>)> {
    let plan = plan_for(plans, key.run, key.fold)?;
    let (train, val, test) = plan.partition(arguments, |a| a.essay_id.as_str());
    let seed = derive_seed(matrix.seed, &[key.run as u64, key.fold as u64, label_hash(&key.variant.to_string())]);
    let train_in = variant_inputs(&train, key.variant, generated, key.run)?;
    let val_in = variant_inputs(&val, key.variant, generated, key.run)?;
    let test_in = variant_inputs(&test, key.variant, generated, key.run)?;
    let encoder = base(seed);
    let trials = hyperparameter_trials_cls(
        &encoder,
        &ClassifierSpace::default(),
        &train_in,
        &val_in,
        matrix.trials_per_fold,
        seed,
    )?;
    let preds = predict(&trials.best, &test_in)?;
    let predicted: Vec<Label> = preds.iter().map(|p| p.predicted_label).collect();
    let gold: Vec<Label> = test_in.iter().map(|i| i.label).collect();
    let essays = |xs: &[&Argument]| xs.iter().map(|a| a.essay_id.clone()).collect::<BTreeSet<_>>();
    let mut fit_essays = essays(&train);
    fit_essays.extend(essays(&val));
    let report = classification_report(&predicted, &gold)?;
    log::info!("cell {key}: test macro F1 {:.3}", report.macro_f1);
    let record = CellRecord {
        key,
        seed,
        trials: trials.trials.len(),
        config: trials.best.config,
        selected_epoch: trials.best.selected_epoch,
        validation_macro_f1: trials.best.selected().validation_macro_f1,
        test: report,
        fit_essays,
        test_essays: essays(&test),
        n_train: train_in.len(),
        n_val: val_in.len(),
        n_test: test_in.len(),
    };
    Ok((record, trials.best))
}

/// Evaluates every cell of `matrix` not already present in `cells_path`, appending each
/// finished cell as it completes, and returns all cells ordered by key.
///
/// Cells are fitted with [`fit_cell`]; `base` builds a fresh encoder from a seed. At most
/// `jobs` cells run at once. Once all cells are done the file is rewritten in key order,
/// so equal seeds give identical files whatever the completion order.
pub fn run_matrix<E: SequenceClassifier>(
    matrix: &ExperimentMatrix,
    arguments: &[Argument],
    generated: &GeneratedIndex,
    plans: &[FoldPlan],
    base: &(dyn Fn(u64) -> E + Sync),
    cells_path: Option<&Path>,
    jobs: usize,
) -> Result<Vec<CellRecord>> {
    matrix.validate()?;
    let mut done: Vec<CellRecord> = match cells_path {
        Some(p) if p.exists() => records::read(p, CELL_SCHEMA)?,
        _ => Vec::new(),
    };
    let wanted: HashSet<CellKey> = matrix.cells().into_iter().collect();
    done.retain(|c| wanted.contains(&c.key));
    let finished: HashSet<CellKey> = done.iter().map(|c| c.key).collect();
    let pending: Vec<CellKey> = matrix.cells().into_iter().filter(|k| !finished.contains(k)).collect();
    log::info!("{} cells done, {} pending", finished.len(), pending.len());
    let appender = match cells_path {
        Some(p) => Some(Mutex::new(Appender::open(p, CELL_SCHEMA)?)),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidMatrix(e.to_string()))?;
    let fresh: Vec<CellRecord> = pool.install(|| {
        pending
            .par_iter()
            .map(|&key| {
                let (rec, _) = fit_cell(key, matrix, arguments, generated, plans, base)?;
                if let Some(a) = &appender {
                    a.lock().expect("appender lock").append(&rec)?;
                }
                Ok(rec)
            })
            .collect::<Result<_>>()
    })?;
    done.extend(fresh);
    done.sort_by_key(|c| c.key);
    audit_cells(&done, plans)?;
    if let Some(p) = cells_path {
        drop(appender);
        records::write(p, CELL_SCHEMA, &done, true)?;
    }
    Ok(done)
}

/// Checks that no cell trained or selected models on its own test essays, and that each
/// cell's test essays are exactly its fold plan's.
pub fn audit_cells(cells: &[CellRecord], plans: &[FoldPlan]) -> Result<()> {
    for c in cells {
        let plan = plan_for(plans, c.key.run, c.key.fold)?;
        let mut leaked: Vec<String> = c.fit_essays.intersection(&c.test_essays).cloned().collect();
        leaked.extend(c.fit_essays.intersection(&plan.test_essays).cloned());
        leaked.extend(c.test_essays.difference(&plan.test_essays).cloned());
        leaked.sort();
        leaked.dedup();
        if !leaked.is_empty() {
            return Err(HarnessError::Leak { cell: c.key, essays: leaked });
        }
    }
    Ok(())
}
