//! ROUGE-N and ROUGE-L F-scores on pre-tokenized sequences, scaled to [0, 100].
//!
//! Text-level helpers lowercase and split punctuation into separate tokens; there is
//! no stemming and no stopword removal.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::text::rouge_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScores {
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    pub rouge_l_f: f64,
}

fn f_score(overlap: f64, cand_total: f64, ref_total: f64) -> f64 {
    if overlap == 0.0 || cand_total == 0.0 || ref_total == 0.0 {
        return 0.0;
    }
    let p = overlap / cand_total;
    let r = overlap / ref_total;
    100.0 * 2.0 * p * r / (p + r)
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// F1 of clipped n-gram overlap. Zero when either side has no n-grams.
///
/// # Panics
/// If `n == 0`.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> f64 {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap: usize = cand.iter().map(|(g, &c)| refs.get(g).map_or(0, |&r| c.min(r))).sum();
    f_score(overlap as f64, candidate.len().saturating_sub(n - 1) as f64, reference.len().saturating_sub(n - 1) as f64)
}

/// Length of the longest common subsequence (two-row dynamic program).
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// F1 from the longest common subsequence. Zero on empty input.
pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> f64 {
    f_score(lcs_len(candidate, reference) as f64, candidate.len() as f64, reference.len() as f64)
}

/// ROUGE-1/2/L between two texts under the pinned preprocessing.
pub fn rouge_scores(candidate: &str, reference: &str) -> RougeScores {
    let c = rouge_tokens(candidate);
    let r = rouge_tokens(reference);
    RougeScores { rouge1_f: rouge_n(&c, &r, 1), rouge2_f: rouge_n(&c, &r, 2), rouge_l_f: rouge_l(&c, &r) }
}

/// Mean of per-pair scores over a corpus.
pub fn mean_rouge(pairs: &[(String, String)]) -> RougeScores {
    if pairs.is_empty() {
        return RougeScores::default();
    }
    let n = pairs.len() as f64;
    let sum = pairs.iter().fold(RougeScores::default(), |acc, (c, r)| {
        let s = rouge_scores(c, r);
        RougeScores {
            rouge1_f: acc.rouge1_f + s.rouge1_f,
            rouge2_f: acc.rouge2_f + s.rouge2_f,
            rouge_l_f: acc.rouge_l_f + s.rouge_l_f,
        }
    });
    RougeScores { rouge1_f: sum.rouge1_f / n, rouge2_f: sum.rouge2_f / n, rouge_l_f: sum.rouge_l_f / n }
}
