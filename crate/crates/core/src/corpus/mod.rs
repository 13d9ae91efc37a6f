//! Annotated essay corpus: standoff parsing, argument extraction, sufficiency
//! labels, masked argument pairs and leakage-free fold plans.

mod arguments;
mod folds;
mod labels;
mod pairs;
mod standoff;
mod stats;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arguments::{extract_arguments, Extraction};
pub use folds::make_fold_plan;
pub use labels::{attach_labels, LabelColumns, LabelRow, LabelTable, MatchSummary};
pub use pairs::{build_masked_pairs, substitute_mask};
pub use standoff::{load_corpus, parse_standoff};
pub use stats::{CorpusStats, Discrepancy, ReferenceCounts};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("essay {essay_id}: span {span_id} surface {surface:?} does not match text slice {slice:?}")]
    OffsetMismatch { essay_id: String, span_id: String, surface: String, slice: String },
    #[error("essay {essay_id}, line {line}: malformed record: {reason}")]
    MalformedRecord { essay_id: String, line: usize, reason: String },
    #[error("essay {essay_id}: file is not valid UTF-8")]
    InvalidUtf8 { essay_id: String },
    #[error("label row {row} (essay {essay_id}) matches no argument")]
    UnmatchedLabel { row: usize, essay_id: String },
    #[error("{} argument(s) received no label, first: {}", .argument_ids.len(), .argument_ids.first().map(String::as_str).unwrap_or("-"))]
    UnlabeledArgument { argument_ids: Vec<String> },
    #[error("argument {argument_id} received conflicting labels")]
    ConflictingLabel { argument_id: String },
    #[error("label table: {0}")]
    LabelTable(String),
    #[error("argument {argument_id} already contains the mask marker")]
    MaskCollision { argument_id: String },
    #[error("invalid fold configuration: {0}")]
    InvalidFolds(String),
    #[error("duplicate essay id {0}")]
    DuplicateEssay(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpanKind {
    MajorClaim,
    Claim,
    Premise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Supports,
    Attacks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub target: String,
    pub kind: RelationKind,
}

/// One T-line of a standoff file. Offsets are character offsets into the essay text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSpan {
    pub span_id: String,
    pub kind: SpanKind,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub relations: Vec<Relation>,
    /// Stance attribute (`For` / `Against`) carried by claims, when annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssayDocument {
    pub essay_id: String,
    pub text: String,
    pub components: Vec<AnnotationSpan>,
}

impl EssayDocument {
    pub fn span(&self, span_id: &str) -> Option<&AnnotationSpan> {
        self.components.iter().find(|s| s.span_id == span_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Sufficient,
    Insufficient,
}

impl Label {
    /// 1 for the positive (sufficient) class.
    pub fn as_indicator(self) -> u8 {
        match self {
            Label::Sufficient => 1,
            Label::Insufficient => 0,
        }
    }

    pub fn from_indicator(v: u8) -> Self {
        if v == 1 {
            Label::Sufficient
        } else {
            Label::Insufficient
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sufficient" | "1" | "true" | "yes" => Some(Label::Sufficient),
            "insufficient" | "0" | "false" | "no" => Some(Label::Insufficient),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Sufficient => "sufficient",
            Label::Insufficient => "insufficient",
        })
    }
}

/// Half-open character range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conclusion {
    pub text: String,
    pub char_range: CharRange,
}

/// One argumentative paragraph: premises and the conclusion(s) they support.
///
/// `conclusion` is the primary claim (the one with most related premises). Further
/// claims of the same paragraph are kept in `other_conclusions`, in text order, so that
/// every annotated conclusion yields a masked pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub argument_id: String,
    pub essay_id: String,
    pub full_text: String,
    pub premises: Vec<String>,
    pub conclusion: String,
    pub conclusion_char_range: CharRange,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub other_conclusions: Vec<Conclusion>,
    #[serde(default)]
    pub label: Option<Label>,
}

impl Argument {
    pub fn conclusions(&self) -> impl Iterator<Item = Conclusion> + '_ {
        std::iter::once(Conclusion { text: self.conclusion.clone(), char_range: self.conclusion_char_range })
            .chain(self.other_conclusions.iter().cloned())
    }

    /// Text before and after the primary conclusion.
    pub fn split_at_conclusion(&self) -> (&str, &str) {
        let (b0, b1) = crate::text::byte_range_of(
            &self.full_text,
            self.conclusion_char_range.start,
            self.conclusion_char_range.end,
        );
        (&self.full_text[..b0], &self.full_text[b1..])
    }

    /// Checks the argument invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.premises.is_empty() || self.premises.iter().any(|p| p.is_empty()) {
            return Err(format!("{}: empty premises", self.argument_id));
        }
        if self.conclusion.is_empty() {
            return Err(format!("{}: empty conclusion", self.argument_id));
        }
        for c in self.conclusions() {
            let idx = crate::text::CharIndex::new(&self.full_text);
            if idx.slice(&self.full_text, c.char_range.start, c.char_range.end) != Some(c.text.as_str()) {
                return Err(format!("{}: conclusion {:?} not at {:?}", self.argument_id, c.text, c.char_range));
            }
        }
        Ok(())
    }
}

/// (argument with one conclusion masked, original argument) training instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedArgumentPair {
    pub pair_id: String,
    pub argument_id: String,
    pub essay_id: String,
    pub source: String,
    pub target: String,
    pub conclusion: String,
}

impl MaskedArgumentPair {
    /// True for the pair that masks the argument's primary conclusion.
    pub fn is_primary(&self) -> bool {
        self.pair_id.ends_with("#c0")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// 0-based, like the cells of an experiment matrix.
    pub run_index: usize,
    pub fold_index: usize,
    pub train_essays: BTreeSet<String>,
    pub val_essays: BTreeSet<String>,
    pub test_essays: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FoldPlan {
    pub fn split_of(&self, essay_id: &str) -> Option<Split> {
        if self.train_essays.contains(essay_id) {
            Some(Split::Train)
        } else if self.val_essays.contains(essay_id) {
            Some(Split::Val)
        } else if self.test_essays.contains(essay_id) {
            Some(Split::Test)
        } else {
            None
        }
    }

    /// Partitions items by the split of their essay; items of unknown essays are dropped.
    pub fn partition<'a, T>(
        &self,
        items: &'a [T],
        essay_of: impl Fn(&T) -> &str,
    ) -> (Vec<&'a T>, Vec<&'a T>, Vec<&'a T>) {
        let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
        for item in items {
            match self.split_of(essay_of(item)) {
                Some(Split::Train) => tr.push(item),
                Some(Split::Val) => va.push(item),
                Some(Split::Test) => te.push(item),
                None => {}
            }
        }
        (tr, va, te)
    }
}
