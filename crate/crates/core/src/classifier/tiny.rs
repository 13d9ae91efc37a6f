//! Hashed bag-of-n-grams stand-in for a pretrained bidirectional encoder.
//!
//! Unigrams and bigrams are hashed into a bucket table; tokens inside a separator-
//! delimited region hash with a different salt, so highlighted text is distinguishable
//! from context. The pooled output is tanh of the mean bucket embedding, followed by a
//! linear layer to two logits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{soft_macro_f1_grad, ClassifierError, Result, SequenceClassifier};
use crate::nn::{gaussian_init, Adam};
use crate::seeds::rng;
use crate::text::{tokenize, SEP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TinyEncoderParams {
    pub buckets: usize,
    pub hidden: usize,
    pub init_std: f64,
    /// Multiplier mapping configured learning rates onto this model's scale.
    pub lr_scale: f64,
}

impl Default for TinyEncoderParams {
    fn default() -> Self {
        Self { buckets: 4096, hidden: 16, init_std: 0.1, lr_scale: 4000.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TinyEncoder {
    hyper: TinyEncoderParams,
    params: Vec<f64>,
    #[serde(skip)]
    adam: Option<Adam>,
}

fn fnv(parts: &[&str], salt: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ salt;
    for p in parts {
        for b in p.bytes().chain(std::iter::once(0xff)) {
            h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl TinyEncoder {
    pub fn new(hyper: TinyEncoderParams, seed: u64) -> Self {
        let len = hyper.buckets * hyper.hidden + 2 * hyper.hidden + 2;
        let mut params = gaussian_init(len, hyper.init_std, &mut rng(seed));
        params[len - 2..].iter_mut().for_each(|b| *b = 0.0);
        Self { hyper, params, adam: None }
    }

    fn head(&self) -> usize {
        self.hyper.buckets * self.hyper.hidden
    }

    /// Bucket indices of a serialized input, one per unigram and bigram.
    pub fn features(&self, text: &str) -> Vec<usize> {
        let lower = text.to_lowercase();
        let mut region = 0u64;
        let mut toks: Vec<(&str, u64)> = Vec::new();
        for t in tokenize(&lower) {
            if t == SEP {
                region ^= 1;
            }
            toks.push((t, region));
        }
        let b = self.hyper.buckets as u64;
        let mut out: Vec<usize> = toks.iter().map(|&(t, r)| (fnv(&[t], r) % b) as usize).collect();
        out.extend(toks.windows(2).map(|w| (fnv(&[w[0].0, w[1].0], 2 + w[1].1) % b) as usize));
        if out.is_empty() {
            out.push((fnv(&[], 7) % b) as usize);
        }
        out
    }

    /// Pooled hidden state and probability of the positive class.
    fn forward(&self, feats: &[usize]) -> (Vec<f64>, f64) {
        let h = self.hyper.hidden;
        let mut pooled = vec![0.0; h];
        for &f in feats {
            pooled.iter_mut().zip(&self.params[f * h..(f + 1) * h]).for_each(|(a, b)| *a += b);
        }
        let n = feats.len() as f64;
        pooled.iter_mut().for_each(|x| *x = (*x / n).tanh());
        let w = &self.params[self.head()..];
        let z0: f64 = pooled.iter().zip(&w[..h]).map(|(a, b)| a * b).sum::<f64>() + w[2 * h];
        let z1: f64 = pooled.iter().zip(&w[h..2 * h]).map(|(a, b)| a * b).sum::<f64>() + w[2 * h + 1];
        let p = 1.0 / (1.0 + (z0 - z1).exp());
        (pooled, p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| ClassifierError::Model(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ClassifierError::Model(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| ClassifierError::Model(format!("{}: {e}", path.display())))?;
        let m: Self = serde_json::from_slice(&bytes).map_err(|e| ClassifierError::Model(e.to_string()))?;
        if m.params.len() != m.hyper.buckets * m.hyper.hidden + 2 * m.hyper.hidden + 2 {
            return Err(ClassifierError::Model("parameter count does not match shape".into()));
        }
        Ok(m)
    }

    /// Loss and gradient over all parameters for one batch.
    fn loss_and_grad(&self, texts: &[&str], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
        let h = self.hyper.hidden;
        let feats: Vec<Vec<usize>> = texts.iter().map(|t| self.features(t)).collect();
        let fwd: Vec<(Vec<f64>, f64)> = feats.iter().map(|f| self.forward(f)).collect();
        let probs: Vec<f64> = fwd.iter().map(|f| f.1).collect();
        let (loss, dp) = soft_macro_f1_grad(&probs, labels)?;
        let mut grad = vec![0.0; self.params.len()];
        let head = self.head();
        for ((f, (pooled, p)), dpi) in feats.iter().zip(&fwd).zip(&dp) {
            // p = σ(z1 − z0)
            let dz = dpi * p * (1.0 - p);
            let mut dpooled = vec![0.0; h];
            for k in 0..h {
                grad[head + k] -= dz * pooled[k];
                grad[head + h + k] += dz * pooled[k];
                dpooled[k] = dz * (self.params[head + h + k] - self.params[head + k]);
            }
            grad[head + 2 * h] -= dz;
            grad[head + 2 * h + 1] += dz;
            let n = f.len() as f64;
            for &b in f {
                for k in 0..h {
                    grad[b * h + k] += dpooled[k] * (1.0 - pooled[k] * pooled[k]) / n;
                }
            }
        }
        Ok((loss, grad))
    }
}

impl SequenceClassifier for TinyEncoder {
    fn probabilities(&self, texts: &[&str]) -> Vec<f64> {
        texts.iter().map(|t| self.forward(&self.features(t)).1).collect()
    }

    fn train_step(&mut self, texts: &[&str], labels: &[f64], lr: f64) -> Result<f64> {
        let (loss, grad) = self.loss_and_grad(texts, labels)?;
        let len = self.params.len();
        let adam = self.adam.get_or_insert_with(|| Adam::new(len));
        adam.step(&mut self.params, &grad, lr * self.hyper.lr_scale);
        Ok(loss)
    }
}
