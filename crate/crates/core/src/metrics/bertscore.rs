//! Greedy-matching BERTScore over contextual token embeddings, with linear rescaling
//! against an empirical random-pair baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};
use crate::seeds::rng;
use crate::text::rouge_tokens;

/// Maps a token sequence to one unit-normalized contextual vector per token.
pub trait Embedder: Send + Sync {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>>;

    /// Embeds a raw text with the embedder's own tokenization.
    fn embed_text(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        self.embed(&rouge_tokens(text))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub rescaled_f1: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Precision, recall and F1 of greedy max-cosine matching between two embedded
/// sequences. Either side empty gives all zeros.
pub fn greedy_match(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> (f64, f64, f64) {
    if candidate.is_empty() || reference.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let best = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter().map(|u| to.iter().map(|v| dot(u, v)).fold(f64::NEG_INFINITY, f64::max)).sum::<f64>()
            / from.len() as f64
    };
    let p = best(candidate, reference);
    let r = best(reference, candidate);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

pub fn rescale(f1: f64, baseline: f64) -> f64 {
    (f1 - baseline) / (1.0 - baseline)
}

pub fn bertscore(candidate: &str, reference: &str, embedder: &dyn Embedder, baseline: f64) -> Result<BertScore> {
    let c = embedder.embed_text(candidate)?;
    let r = embedder.embed_text(reference)?;
    let (precision, recall, f1) = greedy_match(&c, &r);
    Ok(BertScore { precision, recall, f1, rescaled_f1: rescale(f1, baseline) })
}

/// Mean raw F1 over `n_pairs` random (candidate, reference) pairs of distinct texts.
pub fn empirical_baseline(texts: &[String], embedder: &dyn Embedder, n_pairs: usize, seed: u64) -> Result<f64> {
    if texts.len() < 2 {
        return Err(MetricsError::Embedder("baseline needs at least two texts".into()));
    }
    let embedded: Vec<Vec<Vec<f64>>> = texts.iter().map(|t| embedder.embed_text(t)).collect::<Result<_>>()?;
    let mut g = rng(seed);
    let mut total = 0.0;
    for _ in 0..n_pairs {
        let i = g.random_range(0..texts.len());
        let mut j = g.random_range(0..texts.len() - 1);
        if j >= i {
            j += 1;
        }
        total += greedy_match(&embedded[i], &embedded[j]).2;
    }
    Ok(total / n_pairs as f64)
}

/// Scoring context shared by generator checkpoint selection and reports.
pub struct Scorer<'a> {
    pub embedder: &'a dyn Embedder,
    pub baseline: f64,
}

impl Scorer<'_> {
    /// Mean (raw F1, rescaled F1) over (candidate, reference) pairs.
    pub fn mean_f1(&self, pairs: &[(String, String)]) -> Result<(f64, f64)> {
        if pairs.is_empty() {
            return Ok((0.0, 0.0));
        }
        let mut raw = 0.0;
        for (c, r) in pairs {
            raw += bertscore(c, r, self.embedder, self.baseline)?.f1;
        }
        let raw = raw / pairs.len() as f64;
        Ok((raw, rescale(raw, self.baseline)))
    }
}

/// Deterministic stand-in contextual embedder: hashed character-trigram counts of each
/// token mixed with its neighbours, unit-normalized. All coordinates are non-negative,
/// so cosines lie in [0, 1].
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    pub dim: usize,
    pub context_weight: f64,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self { dim: 64, context_weight: 0.35 }
    }
}

impl HashedEmbedder {
    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let padded: Vec<char> = format!("^{token}$").chars().collect();
        for w in padded.windows(3.min(padded.len())) {
            let h = w.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &c| (h ^ c as u64).wrapping_mul(0x0100_0000_01b3));
            v[(h % self.dim as u64) as usize] += 1.0;
        }
        v
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

impl Embedder for HashedEmbedder {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        let base: Vec<Vec<f64>> = tokens.iter().map(|t| self.token_vector(t)).collect();
        let out = (0..base.len())
            .map(|i| {
                let mut v = base[i].clone();
                for j in [i.wrapping_sub(1), i + 1] {
                    if let Some(n) = base.get(j) {
                        v.iter_mut().zip(n).for_each(|(a, b)| *a += self.context_weight * b);
                    }
                }
                normalize(&mut v);
                v
            })
            .collect();
        Ok(out)
    }
}
