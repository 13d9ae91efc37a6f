use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CellKey, CellRecord, ExperimentMatrix, HarnessError, Result};
use crate::classifier::VariantKind;
use crate::metrics::{wilcoxon_one_sample, wilcoxon_signed_rank, MetricsError, WilcoxonResult};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (n − 1); the deviation of a single value is 0.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
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
pub struct AggregateResult {
    pub variant: VariantKind,
    pub accuracy: MeanStd,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
    /// Macro F1 of each run, averaged over its folds, in run order.
    pub run_macro_f1: Vec<f64>,
}

/// Per-variant means and standard deviations over run-level means, where each run-level
/// mean averages that run's folds. Fails if any cell of `matrix` is missing.
pub fn aggregate(cells: &[CellRecord], matrix: &ExperimentMatrix) -> Result<Vec<AggregateResult>> {
    let by_key: BTreeMap<CellKey, &CellRecord> = cells.iter().map(|c| (c.key, c)).collect();
    if let Some(&missing) = matrix.cells().iter().find(|k| !by_key.contains_key(k)) {
        return Err(HarnessError::MissingCell(missing));
    }
    let mut variants = matrix.variants.clone();
    variants.sort();
    Ok(variants
        .into_iter()
        .map(|variant| {
            let run_means = |f: &dyn Fn(&CellRecord) -> f64| -> Vec<f64> {
                (0..matrix.runs)
                    .map(|run| {
                        (0..matrix.folds).map(|fold| f(by_key[&CellKey { variant, run, fold }])).sum::<f64>()
                            / matrix.folds as f64
                    })
                    .collect()
            };
            let run_macro_f1 = run_means(&|c| c.test.macro_f1);
            AggregateResult {
                variant,
                accuracy: MeanStd::of(&run_means(&|c| c.test.accuracy)),
                macro_precision: MeanStd::of(&run_means(&|c| c.test.macro_precision)),
                macro_recall: MeanStd::of(&run_means(&|c| c.test.macro_recall)),
                macro_f1: MeanStd::of(&run_macro_f1),
                run_macro_f1,
            }
        })
        .collect())
}

/// Outcome of one comparison; `result` is absent when the test is undefined (for
/// example fewer than six non-zero differences), with the reason in `note`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceTest {
    pub label: String,
    pub result: Option<WilcoxonResult>,
    pub note: Option<String>,
    /// Significant and in favour of the variant.
    pub gain: bool,
}

impl SignificanceTest {
    fn from(label: &str, test: std::result::Result<WilcoxonResult, MetricsError>, mean_diff: f64) -> Self {
        match test {
            Ok(r) => {
                Self { label: label.into(), gain: r.significant() && mean_diff > 0.0, result: Some(r), note: None }
            }
            Err(e) => Self { label: label.into(), result: None, note: Some(e.to_string()), gain: false },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub variant: VariantKind,
    pub vs_baseline: SignificanceTest,
    pub vs_plain: Option<SignificanceTest>,
}

pub const ONE_SAMPLE_LABEL: &str = "one-sample signed-rank vs reported CNN macro F1";
pub const PAIRED_LABEL: &str = "paired signed-rank vs plain variant over run-level macro F1";

/// Signed-rank tests of each variant's run-level macro F1: one-sample against the
/// reported baseline constant (no per-run baseline scores are available), and paired
/// against the plain variant when it is present.
pub fn significance_table(results: &[AggregateResult], baseline_macro_f1: f64) -> Vec<SignificanceRow> {
    let plain = results.iter().find(|r| r.variant == VariantKind::Plain);
    results
        .iter()
        .map(|r| {
            let vs_baseline = SignificanceTest::from(
                ONE_SAMPLE_LABEL,
                wilcoxon_one_sample(&r.run_macro_f1, baseline_macro_f1),
                r.macro_f1.mean - baseline_macro_f1,
            );
            let vs_plain = plain.filter(|p| p.variant != r.variant).map(|p| {
                SignificanceTest::from(
                    PAIRED_LABEL,
                    wilcoxon_signed_rank(&r.run_macro_f1, &p.run_macro_f1),
                    r.macro_f1.mean - p.macro_f1.mean,
                )
            });
            SignificanceRow { variant: r.variant, vs_baseline, vs_plain }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClassifierConfig;
    use crate::metrics::ClassificationReport;
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;

    fn cell(variant: VariantKind, run: usize, fold: usize, f1: f64) -> CellRecord {
        CellRecord {
            key: CellKey { variant, run, fold },
            seed: 0,
            trials: 1,
            config: ClassifierConfig::new(16, 1e-5, 0).unwrap(),
            selected_epoch: 1,
            validation_macro_f1: 0.0,
            test: ClassificationReport {
                accuracy: f1,
                macro_precision: f1,
                macro_recall: f1,
                macro_f1: f1,
                ..Default::default()
            },
            fit_essays: Default::default(),
            test_essays: Default::default(),
            n_train: 0,
            n_val: 0,
            n_test: 0,
        }
    }

    fn matrix(runs: usize) -> ExperimentMatrix {
        ExperimentMatrix {
            variants: vec![VariantKind::Plain, VariantKind::All],
            runs,
            folds: 2,
            ..ExperimentMatrix::desk(0)
        }
    }

    #[test]
    fn std_is_over_run_means() {
        // run 0 folds .8/.9 -> .85; run 1 folds .7/.7 -> .70
        let m = ExperimentMatrix { variants: vec![VariantKind::Plain], runs: 2, folds: 2, ..ExperimentMatrix::desk(0) };
        let cells = vec![
            cell(VariantKind::Plain, 0, 0, 0.8),
            cell(VariantKind::Plain, 0, 1, 0.9),
            cell(VariantKind::Plain, 1, 0, 0.7),
            cell(VariantKind::Plain, 1, 1, 0.7),
        ];
        let a = &aggregate(&cells, &m).unwrap()[0];
        assert_abs_diff_eq!(a.macro_f1.mean, 0.775, epsilon = 1e-12);
        assert_abs_diff_eq!(a.macro_f1.std, (2.0 * 0.075f64.powi(2)).sqrt(), epsilon = 1e-12);
        assert_eq!(a.run_macro_f1.len(), 2);
    }

    #[test]
    fn missing_cells_and_order_invariance() {
        let m = matrix(3);
        let mut cells: Vec<CellRecord> = m
            .cells()
            .into_iter()
            .map(|k| cell(k.variant, k.run, k.fold, 0.5 + 0.01 * (k.run * 2 + k.fold) as f64))
            .collect();
        let a = aggregate(&cells, &m).unwrap();
        cells.shuffle(&mut crate::seeds::rng(3));
        assert_eq!(aggregate(&cells, &m).unwrap(), a);
        cells.pop();
        assert!(matches!(aggregate(&cells, &m), Err(HarnessError::MissingCell(_))));
    }

    #[test]
    fn identical_variant_is_not_flagged_and_uniform_shift_is() {
        let m = matrix(20);
        let base = |run: usize| 0.80 + 0.003 * run as f64;
        let cells: Vec<CellRecord> = m
            .cells()
            .into_iter()
            .map(|k| {
                cell(k.variant, k.run, k.fold, base(k.run) + if k.variant == VariantKind::All { 0.05 } else { 0.0 })
            })
            .collect();
        let results = aggregate(&cells, &m).unwrap();
        let table = significance_table(&results, 0.831);
        let plain = table.iter().find(|r| r.variant == VariantKind::Plain).unwrap();
        assert!(plain.vs_plain.is_none());
        let all = table.iter().find(|r| r.variant == VariantKind::All).unwrap();
        let t = all.vs_plain.as_ref().unwrap();
        assert!(t.gain);
        assert_abs_diff_eq!(t.result.unwrap().p_value, 2.0 / 2f64.powi(20), epsilon = 1e-15);

        let same = ExperimentMatrix { variants: vec![VariantKind::Plain, VariantKind::PremisesOnly], ..m };
        let cells: Vec<CellRecord> =
            same.cells().into_iter().map(|k| cell(k.variant, k.run, k.fold, base(k.run))).collect();
        let table = significance_table(&aggregate(&cells, &same).unwrap(), 0.831);
        let t = table[1].vs_plain.as_ref().unwrap();
        assert!(!t.gain && t.result.is_none() && t.note.is_some());
    }
}
