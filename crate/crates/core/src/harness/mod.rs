//! Experiment orchestration: per-fold generation, the (variant, run, fold) classification
//! matrix with hyperparameter trials, aggregation, significance tests and reports.

pub mod aggregate;
pub mod cells;
pub mod generation;
pub mod reference;
pub mod report;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, VariantKind};
use crate::corpus::CorpusError;
use crate::generator::{GenerationVariant, GeneratorError};
use crate::metrics::MetricsError;
use crate::records::RecordError;

pub use aggregate::{aggregate, significance_table, AggregateResult, MeanStd, SignificanceRow, SignificanceTest};
pub use cells::{audit_cells, fit_cell, run_matrix, variant_inputs, CellKey, CellRecord, GeneratedIndex, CELL_SCHEMA};
pub use generation::{evaluate_generation, run_generation, FoldGeneration, GenerationEval, GenerationRun};
pub use report::{render_text, Report, REPORT_SCHEMA};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cell {0} has no result")]
    MissingCell(CellKey),
    #[error("no generated conclusion for {argument_id} in run {run}")]
    MissingGenerated { argument_id: String, run: usize },
    #[error("no fold plan for run {run}, fold {fold}")]
    MissingPlan { run: usize, fold: usize },
    #[error("test essays leak into training or model selection in cell {cell}: {essays:?}")]
    Leak { cell: CellKey, essays: Vec<String> },
    #[error("invalid experiment matrix: {0}")]
    InvalidMatrix(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Record(#[from] RecordError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Whether results come from the tiny stand-in models on a shrunken matrix or from the
/// full-size setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Full,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMatrix {
    pub variants: Vec<VariantKind>,
    pub runs: usize,
    pub folds: usize,
    pub trials_per_fold: usize,
    pub seed: u64,
    pub generator_variant: GenerationVariant,
    pub scale: Scale,
}

impl ExperimentMatrix {
    /// 20 runs × 5 folds × 10 trials over all eight variants.
    pub fn full(seed: u64) -> Self {
        Self {
            variants: VariantKind::ALL.to_vec(),
            runs: 20,
            folds: 5,
            trials_per_fold: 10,
            seed,
            generator_variant: GenerationVariant::Supervised,
            scale: Scale::Full,
        }
    }

    /// 2 runs × 5 folds with the tiny stand-in models.
    pub fn desk(seed: u64) -> Self {
        Self { runs: 2, scale: Scale::Desk, ..Self::full(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.runs == 0 || self.folds < 2 || self.trials_per_fold == 0 {
            return Err(HarnessError::InvalidMatrix(format!(
                "{} variants, {} runs, {} folds, {} trials",
                self.variants.len(),
                self.runs,
                self.folds,
                self.trials_per_fold
            )));
        }
        let mut v = self.variants.clone();
        v.sort();
        v.dedup();
        if v.len() != self.variants.len() {
            return Err(HarnessError::InvalidMatrix("duplicate variants".into()));
        }
        Ok(())
    }

    /// Every cell, ordered by variant, run, fold.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut variants = self.variants.clone();
        variants.sort();
        variants
            .into_iter()
            .flat_map(|variant| {
                (0..self.runs).flat_map(move |run| (0..self.folds).map(move |fold| CellKey { variant, run, fold }))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_matrix_has_800_cells() {
        let m = ExperimentMatrix::full(1);
        m.validate().unwrap();
        assert_eq!(m.cells().len(), 800);
        assert_eq!(ExperimentMatrix::desk(1).cells().len(), 80);
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let mut m = ExperimentMatrix::desk(0);
        m.variants.push(VariantKind::Plain);
        assert!(m.validate().is_err());
        let m = ExperimentMatrix { folds: 1, ..ExperimentMatrix::desk(0) };
        assert!(m.validate().is_err());
    }
}
