use super::{ClassifierError, Result};

pub const SOFT_F1_EPS: f64 = 1e-7;

fn check(probabilities: &[f64], labels: &[f64]) -> Result<()> {
    if probabilities.is_empty() || probabilities.len() != labels.len() {
        return Err(ClassifierError::InvalidConfig(format!(
            "soft F1 needs equal non-empty vectors, got {} and {}",
            probabilities.len(),
            labels.len()
        )));
    }
    match probabilities.iter().position(|p| !(0.0..=1.0).contains(p)) {
        Some(index) => Err(ClassifierError::DomainError { index, value: probabilities[index] }),
        None => Ok(()),
    }
}

struct Sums {
    tp_pos: f64,
    den_pos: f64,
    tp_neg: f64,
    den_neg: f64,
}

fn sums(p: &[f64], y: &[f64]) -> Sums {
    let mut s = Sums { tp_pos: 0.0, den_pos: 0.0, tp_neg: 0.0, den_neg: 0.0 };
    for (&p, &y) in p.iter().zip(y) {
        s.tp_pos += p * y;
        s.den_pos += p + y;
        s.tp_neg += (1.0 - p) * (1.0 - y);
        s.den_neg += (1.0 - p) + (1.0 - y);
    }
    s
}

/// 1 − mean of the soft F1 of the positive class and of the complemented negative class.
pub fn soft_macro_f1_loss(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    check(probabilities, labels)?;
    let s = sums(probabilities, labels);
    let f_pos = (2.0 * s.tp_pos + SOFT_F1_EPS) / (s.den_pos + SOFT_F1_EPS);
    let f_neg = (2.0 * s.tp_neg + SOFT_F1_EPS) / (s.den_neg + SOFT_F1_EPS);
    Ok(1.0 - 0.5 * (f_pos + f_neg))
}

/// Loss and its gradient with respect to each probability.
pub fn soft_macro_f1_grad(probabilities: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = soft_macro_f1_loss(probabilities, labels)?;
    let s = sums(probabilities, labels);
    let (np, dp) = (2.0 * s.tp_pos + SOFT_F1_EPS, s.den_pos + SOFT_F1_EPS);
    let (nn, dn) = (2.0 * s.tp_neg + SOFT_F1_EPS, s.den_neg + SOFT_F1_EPS);
    let grad = labels
        .iter()
        .map(|&y| {
            // d f_pos/dp = (2y·D − N)/D², d f_neg/dp = (−2(1−y)·D + N)/D²
            let d_pos = (2.0 * y * dp - np) / (dp * dp);
            let d_neg = (-2.0 * (1.0 - y) * dn + nn) / (dn * dn);
            -0.5 * (d_pos + d_neg)
        })
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::metrics::classification_report;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn perfect_and_anti_predictions() {
        let y = [1.0, 0.0, 1.0, 1.0, 0.0];
        assert_abs_diff_eq!(soft_macro_f1_loss(&y, &y).unwrap(), 0.0, epsilon = 1e-7);
        let anti: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
        assert_abs_diff_eq!(soft_macro_f1_loss(&anti, &y).unwrap(), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn domain_is_checked() {
        assert!(matches!(
            soft_macro_f1_loss(&[0.5, 1.2], &[1.0, 0.0]),
            Err(ClassifierError::DomainError { index: 1, .. })
        ));
        assert!(soft_macro_f1_loss(&[], &[]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut g = crate::seeds::rng(17);
        let p: Vec<f64> = (0..16).map(|_| g.random_range(0.05..0.95)).collect();
        let y: Vec<f64> = (0..16).map(|_| if g.random_bool(0.6) { 1.0 } else { 0.0 }).collect();
        let (_, grad) = soft_macro_f1_grad(&p, &y).unwrap();
        let h = 1e-6;
        for i in 0..p.len() {
            let (mut plus, mut minus) = (p.clone(), p.clone());
            plus[i] += h;
            minus[i] -= h;
            let fd = (soft_macro_f1_loss(&plus, &y).unwrap() - soft_macro_f1_loss(&minus, &y).unwrap()) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-4, "index {i}: analytic {} vs numeric {fd}", grad[i]);
        }
    }

    proptest! {
        #[test]
        fn vertices_match_the_evaluation_metric(bits in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40)) {
            let p: Vec<f64> = bits.iter().map(|b| b.0 as u8 as f64).collect();
            let y: Vec<f64> = bits.iter().map(|b| b.1 as u8 as f64).collect();
            let to_labels = |v: &[f64]| v.iter().map(|&x| Label::from_indicator(x as u8)).collect::<Vec<_>>();
            let report = classification_report(&to_labels(&p), &to_labels(&y)).unwrap();
            prop_assert!((soft_macro_f1_loss(&p, &y).unwrap() - (1.0 - report.macro_f1)).abs() < 1e-5);
        }

        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((0.0..=1.0f64, any::<bool>()), 1..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut crate::seeds::rng(seed));
            let split = |v: &[(f64, bool)]| -> (Vec<f64>, Vec<f64>) { v.iter().map(|&(p, y)| (p, y as u8 as f64)).unzip() };
            let (p1, y1) = split(&pairs);
            let (p2, y2) = split(&shuffled);
            prop_assert!((soft_macro_f1_loss(&p1, &y1).unwrap() - soft_macro_f1_loss(&p2, &y2).unwrap()).abs() < 1e-12);
        }
    }
}
