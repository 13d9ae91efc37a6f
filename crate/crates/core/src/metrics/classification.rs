use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};
use crate::corpus::Label;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub sufficient: ClassScores,
    pub insufficient: ClassScores,
}

/// Scores of one class from its confusion counts.
///
/// A class that is absent from both gold and predictions scores 1 on every measure
/// (vacuous agreement); a class that is absent from one side only scores 0 where the
/// ratio is undefined.
fn class_scores(tp: usize, fp: usize, fn_: usize) -> ClassScores {
    let support = tp + fn_;
    if tp + fp + fn_ == 0 {
        return ClassScores { precision: 1.0, recall: 1.0, f1: 1.0, support };
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    ClassScores {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        support,
    }
}

pub fn classification_report(predictions: &[Label], labels: &[Label]) -> Result<ClassificationReport> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (p, y) in predictions.iter().zip(labels) {
        match (p, y) {
            (Label::Sufficient, Label::Sufficient) => tp += 1,
            (Label::Insufficient, Label::Insufficient) => tn += 1,
            (Label::Sufficient, Label::Insufficient) => fp += 1,
            (Label::Insufficient, Label::Sufficient) => fn_ += 1,
        }
    }
    let pos = class_scores(tp, fp, fn_);
    let neg = class_scores(tn, fn_, fp);
    Ok(ClassificationReport {
        accuracy: (tp + tn) as f64 / labels.len() as f64,
        macro_precision: (pos.precision + neg.precision) / 2.0,
        macro_recall: (pos.recall + neg.recall) / 2.0,
        macro_f1: (pos.f1 + neg.f1) / 2.0,
        sufficient: pos,
        insufficient: neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use Label::{Insufficient as N, Sufficient as S};

    #[test]
    fn perfect_predictions() {
        let y = [S, N, S, S, N];
        let r = classification_report(&y, &y).unwrap();
        for v in [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1] {
            assert_abs_diff_eq!(v, 1.0);
        }
        let single = [S, S];
        assert_abs_diff_eq!(classification_report(&single, &single).unwrap().macro_f1, 1.0);
    }

    #[test]
    fn majority_baseline_closed_form() {
        let mut y = vec![S; 681];
        y.extend(vec![N; 348]);
        let r = classification_report(&vec![S; 1029], &y).unwrap();
        let prior = 681.0 / 1029.0;
        assert_abs_diff_eq!(r.accuracy, prior, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sufficient.f1, 2.0 * prior / (1.0 + prior), epsilon = 1e-12);
        assert_eq!(r.insufficient.f1, 0.0);
        assert_eq!(r.insufficient.precision, 0.0);
        assert!((r.accuracy - 0.662).abs() < 0.001);
        assert!((r.macro_f1 - 0.398).abs() < 0.001);
    }

    #[test]
    fn hand_computed_confusion() {
        // tp=2 fn=1 fp=1 tn=1
        let p = [S, S, N, S, N];
        let y = [S, S, S, N, N];
        let r = classification_report(&p, &y).unwrap();
        assert_abs_diff_eq!(r.accuracy, 0.6);
        assert_abs_diff_eq!(r.sufficient.precision, 2.0 / 3.0);
        assert_abs_diff_eq!(r.sufficient.recall, 2.0 / 3.0);
        assert_abs_diff_eq!(r.insufficient.precision, 0.5);
        assert_abs_diff_eq!(r.insufficient.recall, 0.5);
        assert_abs_diff_eq!(r.macro_f1, (2.0 / 3.0 + 0.5) / 2.0);
        assert_eq!(r.sufficient.support, 3);
    }

    #[test]
    fn errors() {
        assert!(matches!(classification_report(&[S], &[S, N]), Err(MetricsError::LengthMismatch(1, 2))));
        assert!(matches!(classification_report(&[], &[]), Err(MetricsError::Empty)));
    }
}
