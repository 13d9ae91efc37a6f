use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Argument, EssayDocument, Label, MaskedArgumentPair};
use crate::text::{count_sentences, tokenize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub essays: usize,
    pub arguments: usize,
    pub sufficient: usize,
    pub insufficient: usize,
    pub pairs: usize,
    pub unique_pair_arguments: usize,
    pub mean_sentences: f64,
    pub mean_tokens: f64,
    pub skipped_claims: usize,
}

/// Published counts of the full argument-annotated essay corpus with sufficiency labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCounts {
    pub essays: usize,
    pub arguments: usize,
    pub sufficient: usize,
    pub insufficient: usize,
    pub pairs: usize,
    pub mean_sentences: f64,
    pub mean_tokens: f64,
    pub sentence_tolerance: f64,
    pub token_tolerance: f64,
}

impl ReferenceCounts {
    pub const FULL_CORPUS: ReferenceCounts = ReferenceCounts {
        essays: 402,
        arguments: 1029,
        sufficient: 681,
        insufficient: 348,
        pairs: 1506,
        mean_sentences: 4.5,
        mean_tokens: 94.6,
        sentence_tolerance: 0.2,
        token_tolerance: 2.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub statistic: String,
    pub expected: String,
    pub observed: String,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, observed {}", self.statistic, self.expected, self.observed)
    }
}

impl CorpusStats {
    pub fn compute(
        essays: &[EssayDocument],
        arguments: &[Argument],
        pairs: &[MaskedArgumentPair],
        skipped_claims: usize,
    ) -> Self {
        let n = arguments.len().max(1) as f64;
        let count = |l| arguments.iter().filter(|a| a.label == Some(l)).count();
        let mut pair_args: Vec<&str> = pairs.iter().map(|p| p.argument_id.as_str()).collect();
        pair_args.sort_unstable();
        pair_args.dedup();
        Self {
            essays: essays.len(),
            arguments: arguments.len(),
            sufficient: count(Label::Sufficient),
            insufficient: count(Label::Insufficient),
            pairs: pairs.len(),
            unique_pair_arguments: pair_args.len(),
            mean_sentences: arguments.iter().map(|a| count_sentences(&a.full_text) as f64).sum::<f64>() / n,
            mean_tokens: arguments.iter().map(|a| tokenize(&a.full_text).len() as f64).sum::<f64>() / n,
            skipped_claims,
        }
    }

    /// Every statistic that differs from the reference (counts exactly, means within tolerance).
    pub fn discrepancies(&self, reference: &ReferenceCounts) -> Vec<Discrepancy> {
        let mut out = Vec::new();
        let mut exact = |name: &str, expected: usize, observed: usize| {
            if expected != observed {
                out.push(Discrepancy {
                    statistic: name.into(),
                    expected: expected.to_string(),
                    observed: observed.to_string(),
                });
            }
        };
        exact("essays", reference.essays, self.essays);
        exact("arguments", reference.arguments, self.arguments);
        exact("sufficient", reference.sufficient, self.sufficient);
        exact("insufficient", reference.insufficient, self.insufficient);
        exact("pairs", reference.pairs, self.pairs);
        let mut approx = |name: &str, expected: f64, tol: f64, observed: f64| {
            if (expected - observed).abs() > tol {
                out.push(Discrepancy {
                    statistic: name.into(),
                    expected: format!("{expected} ± {tol}"),
                    observed: format!("{observed:.2}"),
                });
            }
        };
        approx("mean sentences", reference.mean_sentences, reference.sentence_tolerance, self.mean_sentences);
        approx("mean tokens", reference.mean_tokens, reference.token_tolerance, self.mean_tokens);
        out
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |k: usize| 100.0 * k as f64 / self.arguments.max(1) as f64;
        writeln!(f, "essays              {}", self.essays)?;
        writeln!(f, "arguments           {}", self.arguments)?;
        writeln!(
            f,
            "labels              {} sufficient ({:.1}%), {} insufficient ({:.1}%)",
            self.sufficient,
            pct(self.sufficient),
            self.insufficient,
            pct(self.insufficient)
        )?;
        writeln!(f, "masked pairs        {} over {} arguments", self.pairs, self.unique_pair_arguments)?;
        writeln!(f, "mean length         {:.2} sentences, {:.2} tokens", self.mean_sentences, self.mean_tokens)?;
        write!(f, "skipped claims      {}", self.skipped_claims)
    }
}
