//! Reference implementations of every evaluation measurement: ROUGE, BERTScore,
//! classification reports, Krippendorff's alpha, majority/rank analysis of Likert
//! annotations and the Wilcoxon signed-rank test. All functions are pure.

pub mod annotations;
pub mod bertscore;
pub mod classification;
pub mod krippendorff;
pub mod rouge;
pub mod wilcoxon;

use thiserror::Error;

pub use annotations::{
    analyze_annotations, majority_and_rank, render_agreement_table, AgreementRow, AnnotationRecord, Approach,
    ApproachSummary, Question,
};
pub use bertscore::{bertscore, empirical_baseline, BertScore, Embedder, HashedEmbedder, Scorer};
pub use classification::{classification_report, ClassScores, ClassificationReport};
pub use krippendorff::{alpha as krippendorff_alpha, Level};
pub use rouge::{lcs_len, mean_rouge, rouge_l, rouge_n, rouge_scores, RougeScores};
pub use wilcoxon::{wilcoxon_one_sample, wilcoxon_signed_rank, WilcoxonResult};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("too few non-zero differences ({0}) for the signed-rank test")]
    TooFewPairs(usize),
    #[error("item lacks one of the three approaches: {0}")]
    IncompleteItem(String),
    #[error("invalid annotation record: {0}")]
    InvalidRecord(String),
    #[error("embedder failure: {0}")]
    Embedder(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;
