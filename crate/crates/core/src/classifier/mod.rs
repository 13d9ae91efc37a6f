//! Sufficiency classification over eight input variants that combine premises, the gold
//! conclusion and a generated conclusion, trained on a soft macro-F1 surrogate.

pub mod loss;
pub mod tiny;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Argument, Label};
use crate::generator::GeneratedConclusion;
use crate::metrics::MetricsError;
use crate::text::{SEP, UNK};

pub use loss::{soft_macro_f1_grad, soft_macro_f1_loss, SOFT_F1_EPS};
pub use tiny::{TinyEncoder, TinyEncoderParams};
pub use train::{
    hyperparameter_trials_cls, predict, sample_classifier_configs, train_classifier, ClassifierCheckpoint,
    ClassifierModel, ClassifierSpace, ClassifierTrials,
};

pub const EPOCHS: usize = 3;
pub const BATCH_RANGE: (usize, usize) = (16, 32);
pub const LR_RANGE: (f64, f64) = (1e-6, 5e-5);
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("variant {kind} needs a generated conclusion for {argument_id}")]
    MissingGenerated { argument_id: String, kind: VariantKind },
    #[error("argument {0} has no label")]
    Unlabeled(String),
    #[error("probability outside [0, 1] at index {index}: {value}")]
    DomainError { index: usize, value: f64 },
    #[error("non-finite training loss at epoch {epoch}, step {step}")]
    DivergenceDetected { epoch: usize, step: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("model trained on {trained} but input {argument_id} is {found}")]
    VariantMismatch { trained: VariantKind, found: VariantKind, argument_id: String },
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("model state: {0}")]
    Model(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantKind {
    Plain,
    PremisesOnly,
    ConclusionOnly,
    GeneratedOnly,
    PremisesPlusConclusion,
    PremisesPlusGenerated,
    ConclusionPlusGenerated,
    All,
}

impl VariantKind {
    pub const ALL: [VariantKind; 8] = [
        VariantKind::Plain,
        VariantKind::PremisesOnly,
        VariantKind::ConclusionOnly,
        VariantKind::GeneratedOnly,
        VariantKind::PremisesPlusConclusion,
        VariantKind::PremisesPlusGenerated,
        VariantKind::ConclusionPlusGenerated,
        VariantKind::All,
    ];

    pub fn needs_generated(self) -> bool {
        matches!(
            self,
            VariantKind::GeneratedOnly
                | VariantKind::PremisesPlusGenerated
                | VariantKind::ConclusionPlusGenerated
                | VariantKind::All
        )
    }

    /// Row label used in result tables.
    pub fn table_label(self) -> &'static str {
        match self {
            VariantKind::Plain => "RoBERTa",
            VariantKind::PremisesOnly => "Premises only",
            VariantKind::ConclusionOnly => "Conclusion only",
            VariantKind::GeneratedOnly => "Generated only",
            VariantKind::PremisesPlusConclusion => "Premises + conclusion",
            VariantKind::PremisesPlusGenerated => "Premises + generated",
            VariantKind::ConclusionPlusGenerated => "Conclusion + generated",
            VariantKind::All => "All",
        }
    }

    fn slug(self) -> &'static str {
        match self {
            VariantKind::Plain => "plain",
            VariantKind::PremisesOnly => "premises-only",
            VariantKind::ConclusionOnly => "conclusion-only",
            VariantKind::GeneratedOnly => "generated-only",
            VariantKind::PremisesPlusConclusion => "premises-plus-conclusion",
            VariantKind::PremisesPlusGenerated => "premises-plus-generated",
            VariantKind::ConclusionPlusGenerated => "conclusion-plus-generated",
            VariantKind::All => "all",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for VariantKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        VariantKind::ALL
            .into_iter()
            .find(|k| k.slug().replace('-', "") == norm || format!("{k:?}").to_ascii_lowercase() == norm)
            .ok_or_else(|| ClassifierError::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantInput {
    pub argument_id: String,
    pub kind: VariantKind,
    pub serialized: String,
    pub label: Label,
}

/// Serializes one argument for `kind`. Highlighted regions are delimited by separator
/// markers with one space inside each marker pair.
pub fn build_variant_input(
    arg: &Argument,
    generated: Option<&GeneratedConclusion>,
    kind: VariantKind,
) -> Result<VariantInput> {
    let label = arg.label.ok_or_else(|| ClassifierError::Unlabeled(arg.argument_id.clone()))?;
    let generated = match (kind.needs_generated(), generated) {
        (true, None) => {
            return Err(ClassifierError::MissingGenerated { argument_id: arg.argument_id.clone(), kind });
        }
        (_, g) => g.map(|g| g.text.as_str()).unwrap_or_default(),
    };
    let (pre, post) = arg.split_at_conclusion();
    let gold = arg.conclusion.as_str();
    let serialized = match kind {
        VariantKind::Plain => arg.full_text.clone(),
        VariantKind::PremisesOnly => format!("{pre}{UNK}{post}"),
        VariantKind::ConclusionOnly => gold.to_string(),
        VariantKind::GeneratedOnly => generated.to_string(),
        VariantKind::PremisesPlusConclusion => format!("{pre}{SEP} {gold} {SEP}{post}"),
        VariantKind::PremisesPlusGenerated => format!("{pre}{SEP} {generated} {SEP}{post}"),
        VariantKind::ConclusionPlusGenerated => format!("{gold} {SEP} {generated}"),
        VariantKind::All => format!("{pre}{SEP} {gold} {SEP}{SEP} {generated} {SEP}{post}"),
    };
    Ok(VariantInput { argument_id: arg.argument_id.clone(), kind, serialized, label })
}

/// Validated classifier training settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClassifierConfig", into = "RawClassifierConfig")]
pub struct ClassifierConfig {
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawClassifierConfig {
    batch_size: usize,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
}

impl ClassifierConfig {
    pub fn new(batch_size: usize, learning_rate: f64, seed: u64) -> Result<Self> {
        if !(BATCH_RANGE.0..=BATCH_RANGE.1).contains(&batch_size) {
            return Err(ClassifierError::InvalidConfig(format!(
                "batch size {batch_size} outside [{}, {}]",
                BATCH_RANGE.0, BATCH_RANGE.1
            )));
        }
        if !(LR_RANGE.0..=LR_RANGE.1).contains(&learning_rate) {
            return Err(ClassifierError::InvalidConfig(format!(
                "learning rate {learning_rate} outside [{}, {}]",
                LR_RANGE.0, LR_RANGE.1
            )));
        }
        Ok(Self { batch_size, learning_rate, seed })
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
}

impl TryFrom<RawClassifierConfig> for ClassifierConfig {
    type Error = ClassifierError;

    fn try_from(raw: RawClassifierConfig) -> Result<Self> {
        if raw.epochs != EPOCHS {
            return Err(ClassifierError::InvalidConfig(format!("epochs are fixed at {EPOCHS}")));
        }
        Self::new(raw.batch_size, raw.learning_rate, raw.seed)
    }
}

impl From<ClassifierConfig> for RawClassifierConfig {
    fn from(c: ClassifierConfig) -> Self {
        Self { batch_size: c.batch_size, learning_rate: c.learning_rate, epochs: EPOCHS, seed: c.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub argument_id: String,
    pub kind: VariantKind,
    pub probability_sufficient: f64,
    pub predicted_label: Label,
}

/// Sufficient iff the probability reaches the threshold.
pub fn decide(probability: f64, threshold: f64) -> Label {
    if probability >= threshold {
        Label::Sufficient
    } else {
        Label::Insufficient
    }
}

/// Encoder handle: probabilities of the positive class for serialized inputs, and
/// gradient steps on the soft macro-F1 loss.
pub trait SequenceClassifier: Clone + Send + Sync {
    fn probabilities(&self, texts: &[&str]) -> Vec<f64>;

    /// One optimizer step at learning rate `lr` on indicator labels; returns the batch
    /// loss before the update.
    fn train_step(&mut self, texts: &[&str], labels: &[f64], lr: f64) -> Result<f64>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CharRange;
    use proptest::prelude::*;

    const FIGURE_ONE: &str = "Furthermore, cooperation is essential to success because people can share ideas \
        and support each other when they work together. Therefore, people should cooperate rather than compete.";

    fn argument(pre: &str, concl: &str, post: &str) -> Argument {
        let full_text = format!("{pre}{concl}{post}");
        let start = pre.chars().count();
        Argument {
            argument_id: "essay001_p2".into(),
            essay_id: "essay001".into(),
            premises: vec![pre.trim().to_string()],
            conclusion: concl.into(),
            conclusion_char_range: CharRange::new(start, start + concl.chars().count()),
            full_text,
            other_conclusions: vec![],
            label: Some(Label::Sufficient),
        }
    }

    fn generated(text: &str) -> GeneratedConclusion {
        GeneratedConclusion {
            argument_id: "essay001_p2".into(),
            pair_id: "essay001_p2#c0".into(),
            text: text.into(),
            run: 0,
            fold: 0,
            variant: crate::generator::GenerationVariant::Supervised,
            raw_infilled: String::new(),
            extraction_fallback: false,
        }
    }

    #[test]
    fn serialization_rules() {
        let concl = "people should cooperate rather than compete";
        let pre = &FIGURE_ONE[..FIGURE_ONE.find(concl).unwrap()];
        let a = argument(pre, concl, ".");
        let g = generated("working together helps");
        let s = |k| build_variant_input(&a, Some(&g), k).unwrap().serialized;
        assert_eq!(s(VariantKind::Plain), FIGURE_ONE);
        assert_eq!(
            s(VariantKind::PremisesOnly),
            "Furthermore, cooperation is essential to success because people can share ideas and support \
             each other when they work together. Therefore, <unk>."
        );
        assert_eq!(s(VariantKind::ConclusionOnly), concl);
        assert_eq!(s(VariantKind::GeneratedOnly), "working together helps");
        assert_eq!(s(VariantKind::PremisesPlusConclusion), format!("{pre}</s> {concl} </s>."));
        assert_eq!(s(VariantKind::PremisesPlusGenerated), format!("{pre}</s> working together helps </s>."));
        assert_eq!(s(VariantKind::ConclusionPlusGenerated), format!("{concl} </s> working together helps"));
        assert_eq!(s(VariantKind::All), format!("{pre}</s> {concl} </s></s> working together helps </s>."));
        let ab = argument("", "A", "");
        assert_eq!(
            build_variant_input(&ab, Some(&generated("B")), VariantKind::ConclusionPlusGenerated).unwrap().serialized,
            "A </s> B"
        );
    }

    #[test]
    fn missing_generated_and_labels_are_errors() {
        let a = argument("Because x, ", "y", ".");
        for k in VariantKind::ALL {
            let r = build_variant_input(&a, None, k);
            assert_eq!(r.is_err(), k.needs_generated(), "{k}");
        }
        let mut unlabeled = a.clone();
        unlabeled.label = None;
        assert!(matches!(
            build_variant_input(&unlabeled, None, VariantKind::Plain),
            Err(ClassifierError::Unlabeled(_))
        ));
    }

    #[test]
    fn kinds_parse_from_display_and_debug_names() {
        for k in VariantKind::ALL {
            assert_eq!(k.to_string().parse::<VariantKind>().unwrap(), k);
            assert_eq!(format!("{k:?}").parse::<VariantKind>().unwrap(), k);
        }
        assert_eq!(VariantKind::ALL.len(), 8);
    }

    #[test]
    fn threshold_tie_is_sufficient() {
        assert_eq!(decide(0.5, DEFAULT_THRESHOLD), Label::Sufficient);
        assert_eq!(decide(0.4999, DEFAULT_THRESHOLD), Label::Insufficient);
    }

    #[test]
    fn config_ranges_enforced() {
        assert!(ClassifierConfig::new(16, 1e-6, 0).is_ok());
        assert!(ClassifierConfig::new(32, 5e-5, 0).is_ok());
        assert!(ClassifierConfig::new(15, 1e-5, 0).is_err());
        assert!(ClassifierConfig::new(16, 6e-5, 0).is_err());
        let c = ClassifierConfig::new(20, 1e-5, 3).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ClassifierConfig>(&s).unwrap(), c);
        assert!(serde_json::from_str::<ClassifierConfig>(&s.replace("\"epochs\":3", "\"epochs\":2")).is_err());
    }

    fn text() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z ,]{0,20}[a-z]"
    }

    proptest! {
        #[test]
        fn serialization_is_injective_in_the_parts_each_kind_uses(
            a in (text(), text(), text()),
            b in (text(), text(), text()),
        ) {
            let build = |(pre, c, g): &(String, String, String), k| {
                build_variant_input(&argument(&format!("{pre}. "), c, "."), Some(&generated(g)), k).unwrap().serialized
            };
            for k in VariantKind::ALL {
                let parts = |t: &(String, String, String)| match k {
                    VariantKind::Plain => (t.0.clone(), t.1.clone(), String::new()),
                    VariantKind::PremisesOnly => (t.0.clone(), String::new(), String::new()),
                    VariantKind::ConclusionOnly => (String::new(), t.1.clone(), String::new()),
                    VariantKind::GeneratedOnly => (String::new(), String::new(), t.2.clone()),
                    VariantKind::PremisesPlusConclusion => (t.0.clone(), t.1.clone(), String::new()),
                    VariantKind::PremisesPlusGenerated => (t.0.clone(), String::new(), t.2.clone()),
                    VariantKind::ConclusionPlusGenerated => (String::new(), t.1.clone(), t.2.clone()),
                    VariantKind::All => t.clone(),
                };
                // Plain concatenates premises and conclusion, so only the boundary-marked kinds are injective over splits
                if k == VariantKind::Plain {
                    continue;
                }
                if parts(&a) != parts(&b) {
                    prop_assert_ne!(build(&a, k), build(&b, k), "{}", k);
                }
            }
        }

        #[test]
        fn highlight_markers_are_balanced(parts in (text(), text(), text())) {
            for k in [VariantKind::PremisesPlusConclusion, VariantKind::PremisesPlusGenerated, VariantKind::All] {
                let s = build_variant_input(&argument(&format!("{}. ", parts.0), &parts.1, "."), Some(&generated(&parts.2)), k)
                    .unwrap()
                    .serialized;
                prop_assert_eq!(s.matches(SEP).count() % 2, 0);
            }
        }
    }
}
