use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::{CorpusError, FoldPlan, Result};
use crate::seeds::{derive_seed, rng};

/// Repeated k-fold plan over essays.
///
/// Per run the essays are shuffled with a seed derived from `(seed, run)` and cut into
/// `folds` test blocks whose sizes differ by at most one. For each fold the remaining
/// essays are split 7:1 into train and validation (validation rounded, at least one
/// essay), which gives a 70/10/20 split for five folds.
pub fn make_fold_plan(essay_ids: &BTreeSet<String>, runs: usize, folds: usize, seed: u64) -> Result<Vec<FoldPlan>> {
    if runs < 1 {
        return Err(CorpusError::InvalidFolds("runs must be at least 1".into()));
    }
    if folds < 2 {
        return Err(CorpusError::InvalidFolds("folds must be at least 2".into()));
    }
    if essay_ids.len() < folds + 1 {
        return Err(CorpusError::InvalidFolds(format!(
            "{} essays cannot fill {folds} folds plus a validation set",
            essay_ids.len()
        )));
    }

    let n = essay_ids.len();
    let mut plans = Vec::with_capacity(runs * folds);
    for run in 0..runs {
        let mut order: Vec<&String> = essay_ids.iter().collect();
        order.shuffle(&mut rng(derive_seed(seed, &[run as u64])));

        let mut bounds = Vec::with_capacity(folds + 1);
        bounds.push(0usize);
        for f in 0..folds {
            let size = n / folds + usize::from(f < n % folds);
            bounds.push(bounds[f] + size);
        }

        for fold in 0..folds {
            let (lo, hi) = (bounds[fold], bounds[fold + 1]);
            let test: BTreeSet<String> = order[lo..hi].iter().map(|s| s.to_string()).collect();
            let rest: Vec<&String> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            let n_val = ((rest.len() as f64 / 8.0).round() as usize).clamp(1, rest.len() - 1);
            let split = rest.len() - n_val;
            plans.push(FoldPlan {
                run_index: run,
                fold_index: fold,
                train_essays: rest[..split].iter().map(|s| s.to_string()).collect(),
                val_essays: rest[split..].iter().map(|s| s.to_string()).collect(),
                test_essays: test,
            });
        }
    }
    Ok(plans)
}
