//! Minimal numeric building blocks for the desk-scale stand-in models: Adam over flat
//! parameter buffers, learning-rate schedules and softmax helpers.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Adam state for one flat parameter buffer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// Applies one bias-corrected update. Entries with zero gradient still decay their
    /// moments, as in dense Adam.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Linear warm-up followed by cosine decay to zero over `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineSchedule {
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl CosineSchedule {
    /// Learning rate for the 1-based optimizer step `step`.
    pub fn lr(&self, step: usize) -> f64 {
        if step <= self.warmup_steps && self.warmup_steps > 0 {
            return self.base_lr * step as f64 / self.warmup_steps as f64;
        }
        let decay_steps = self.total_steps.saturating_sub(self.warmup_steps).max(1);
        let progress = ((step - self.warmup_steps) as f64 / decay_steps as f64).min(1.0);
        self.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

pub fn gaussian_init<R: Rng>(len: usize, std: f64, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..len).map(|_| normal.sample(rng)).collect()
}

/// Numerically stable softmax, in place.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in logits.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in logits.iter_mut() {
        *x /= sum;
    }
}

/// log-sum-exp of the logits.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn warmup_then_cosine() {
        let s = CosineSchedule { base_lr: 1.0, warmup_steps: 50, total_steps: 150 };
        assert_abs_diff_eq!(s.lr(1), 0.02);
        assert_abs_diff_eq!(s.lr(50), 1.0);
        assert_abs_diff_eq!(s.lr(100), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lr(150), 0.0, epsilon = 1e-12);
        assert!(s.lr(75) > s.lr(76));
        let short = CosineSchedule { base_lr: 1.0, warmup_steps: 50, total_steps: 24 };
        assert_abs_diff_eq!(short.lr(24), 24.0 / 50.0);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adam::new(2);
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut x, &g, 0.01);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-3), "{x:?}");
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut l = vec![1000.0, 1001.0, 999.0];
        softmax_in_place(&mut l);
        assert_abs_diff_eq!(l.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln());
    }
}
