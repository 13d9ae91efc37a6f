//! Analysis of the manual Likert study: agreement, majority-score distributions, mean
//! scores and per-item ranks of the three conclusion sources.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::krippendorff::{alpha, Level};
use super::{MetricsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    GroundTruth,
    Unsupervised,
    Supervised,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::GroundTruth, Approach::Unsupervised, Approach::Supervised];
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::GroundTruth => "Ground truth",
            Approach::Unsupervised => "Generator (unsupervised)",
            Approach::Supervised => "Generator (supervised)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Question {
    Q1,
    Q2,
    Q3,
}

impl Question {
    pub const ALL: [Question; 3] = [Question::Q1, Question::Q2, Question::Q3];

    pub fn text(self) -> &'static str {
        match self {
            Question::Q1 => "Are the premises sufficient to draw the conclusion?",
            Question::Q2 => "How likely is it that the conclusion will be inferred from the context?",
            Question::Q3 => "How can the conclusion be composed from the context?",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub approach: Approach,
    pub question: Question,
    pub annotator_id: u8,
    pub score: u8,
}

/// Checks score range and uniqueness of (item, approach, question, annotator).
pub fn validate_records(records: &[AnnotationRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !(1..=5).contains(&r.score) {
            return Err(MetricsError::InvalidRecord(format!("{}: score {} outside 1..5", r.item_id, r.score)));
        }
        if !seen.insert((&r.item_id, r.approach, r.question, r.annotator_id)) {
            return Err(MetricsError::InvalidRecord(format!(
                "duplicate annotation for item {} / {:?} / {:?} / annotator {}",
                r.item_id, r.approach, r.question, r.annotator_id
            )));
        }
    }
    Ok(())
}

/// Unique mode of the scores, `None` when two or more scores share the highest count.
pub fn majority_score(scores: &[u8]) -> Option<u8> {
    let mut counts = [0usize; 6];
    for &s in scores {
        counts[s as usize] += 1;
    }
    let best = *counts.iter().max()?;
    if best == 0 {
        return None;
    }
    let mut modes = (1..=5u8).filter(|&s| counts[s as usize] == best);
    let first = modes.next();
    if modes.next().is_some() {
        None
    } else {
        first
    }
}

/// Score representing an item: its unique mode, else the (lower) median of its scores.
pub fn representative_score(scores: &[u8]) -> u8 {
    majority_score(scores).unwrap_or_else(|| {
        let mut s = scores.to_vec();
        s.sort_unstable();
        s[(s.len() - 1) / 2]
    })
}

/// Ranks values descending (1 = highest); ties receive the mean of their positions.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub question: Question,
    pub approach: Approach,
    pub items: usize,
    /// Share of items whose scores have a unique mode.
    pub majority_rate: f64,
    /// Items per representative score 1..=5.
    pub distribution: [usize; 5],
    pub mean_score: f64,
    pub mean_rank: f64,
}

/// Per (question, approach): majority rate, score distribution, mean score and mean rank.
///
/// Items whose scores have no unique mode count against the majority rate and are
/// represented by their median score in the distribution, the mean score and the ranking.
pub fn majority_and_rank(records: &[AnnotationRecord]) -> Result<Vec<ApproachSummary>> {
    validate_records(records)?;
    // question -> item -> approach -> scores
    let mut grouped: BTreeMap<Question, BTreeMap<&str, BTreeMap<Approach, Vec<u8>>>> = BTreeMap::new();
    for r in records {
        grouped
            .entry(r.question)
            .or_default()
            .entry(&r.item_id)
            .or_default()
            .entry(r.approach)
            .or_default()
            .push(r.score);
    }

    let mut out = Vec::new();
    for (question, items) in grouped {
        let mut acc: BTreeMap<Approach, (usize, [usize; 5], f64, f64)> = BTreeMap::new();
        for (item, by_approach) in &items {
            if by_approach.len() != Approach::ALL.len() {
                return Err(MetricsError::IncompleteItem(format!("{item} ({question:?})")));
            }
            let scores: Vec<f64> =
                Approach::ALL.iter().map(|a| f64::from(representative_score(&by_approach[a]))).collect();
            let ranks = rank_descending(&scores);
            for (k, a) in Approach::ALL.iter().enumerate() {
                let e = acc.entry(*a).or_insert((0, [0; 5], 0.0, 0.0));
                if majority_score(&by_approach[a]).is_some() {
                    e.0 += 1;
                }
                e.1[scores[k] as usize - 1] += 1;
                e.2 += scores[k];
                e.3 += ranks[k];
            }
        }
        let n = items.len() as f64;
        for (approach, (majority, distribution, score_sum, rank_sum)) in acc {
            out.push(ApproachSummary {
                question,
                approach,
                items: items.len(),
                majority_rate: majority as f64 / n,
                distribution,
                mean_score: score_sum / n,
                mean_rank: rank_sum / n,
            });
        }
    }
    Ok(out)
}

/// One row of the agreement table: alpha plus the majority/rank summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub alpha: Option<f64>,
    pub level: Level,
    #[serde(flatten)]
    pub summary: ApproachSummary,
}

/// Full analysis of an annotation study, one row per (question, approach).
pub fn analyze_annotations(records: &[AnnotationRecord], level: Level) -> Result<Vec<AgreementRow>> {
    let summaries = majority_and_rank(records)?;
    summaries
        .into_iter()
        .map(|summary| {
            let mut units: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
            for r in records.iter().filter(|r| r.question == summary.question && r.approach == summary.approach) {
                units.entry(&r.item_id).or_default().push(i64::from(r.score));
            }
            let units: Vec<Vec<i64>> = units.into_values().collect();
            let a = match alpha(&units, level) {
                Ok(a) => Some(a),
                Err(MetricsError::Undefined(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(AgreementRow { alpha: a, level, summary })
        })
        .collect()
}

/// Aligned text table in the layout of the agreement / majority / mean-results table.
pub fn render_agreement_table(rows: &[AgreementRow]) -> String {
    let level = rows.first().map(|r| r.level).unwrap_or_default();
    let mut out = format!(
        "{:<3} {:<26} {:>6} {:>9}   {:>4} {:>4} {:>4} {:>4} {:>4}   {:>6} {:>6}\n",
        "#", "Approach", "alpha", "Majority", "1", "2", "3", "4", "5", "Score", "Rank"
    );
    for r in rows {
        let s = &r.summary;
        out.push_str(&format!(
            "{:<3} {:<26} {:>6} {:>8.0}%   {:>4} {:>4} {:>4} {:>4} {:>4}   {:>6.2} {:>6.2}\n",
            format!("{:?}", s.question),
            s.approach.to_string(),
            r.alpha.map_or("n/a".to_string(), |a| format!("{a:.2}")),
            100.0 * s.majority_rate,
            s.distribution[0],
            s.distribution[1],
            s.distribution[2],
            s.distribution[3],
            s.distribution[4],
            s.mean_score,
            s.mean_rank
        ));
    }
    out.push_str(&format!("alpha measurement level: {level}\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(item: &str, approach: Approach, question: Question, annotator: u8, score: u8) -> AnnotationRecord {
        AnnotationRecord { item_id: item.into(), approach, question, annotator_id: annotator, score }
    }

    #[test]
    fn tie_averaged_ranks() {
        assert_eq!(rank_descending(&[4.0, 3.0, 3.0]), vec![1.0, 2.5, 2.5]);
        assert_eq!(rank_descending(&[2.0, 5.0, 2.0]), vec![2.5, 1.0, 2.5]);
        assert_eq!(rank_descending(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn majority_requires_unique_mode() {
        assert_eq!(majority_score(&[4, 4, 4, 1, 2]), Some(4));
        assert_eq!(majority_score(&[2, 2, 1, 3, 4]), Some(2));
        assert_eq!(majority_score(&[2, 2, 4, 4, 5]), None);
        assert_eq!(representative_score(&[2, 2, 4, 4, 5]), 4);
        assert_eq!(majority_score(&[]), None);
    }

    #[test]
    fn one_item_summary() {
        let mut records = Vec::new();
        for (approach, scores) in [
            (Approach::GroundTruth, [4, 4, 4, 2, 1]),
            (Approach::Unsupervised, [3, 3, 1, 2, 5]),
            (Approach::Supervised, [3, 3, 3, 4, 5]),
        ] {
            for (a, s) in scores.iter().enumerate() {
                records.push(rec("i1", approach, Question::Q1, a as u8 + 1, *s));
            }
        }
        let rows = majority_and_rank(&records).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].approach, Approach::GroundTruth);
        assert_eq!(rows[0].mean_rank, 1.0);
        assert_eq!(rows[1].mean_rank, 2.5);
        assert_eq!(rows[2].mean_rank, 2.5);
        assert_eq!(rows[0].distribution, [0, 0, 0, 1, 0]);
        assert_abs_diff_eq!(rows[1].mean_score, 3.0);
    }

    #[test]
    fn incomplete_item_is_rejected() {
        let records = vec![rec("i1", Approach::GroundTruth, Question::Q2, 1, 3)];
        assert!(matches!(majority_and_rank(&records), Err(MetricsError::IncompleteItem(_))));
    }

    #[test]
    fn invalid_records_are_rejected() {
        let bad = vec![rec("i1", Approach::GroundTruth, Question::Q2, 1, 6)];
        assert!(matches!(validate_records(&bad), Err(MetricsError::InvalidRecord(_))));
        let dup = vec![
            rec("i1", Approach::GroundTruth, Question::Q2, 1, 3),
            rec("i1", Approach::GroundTruth, Question::Q2, 1, 4),
        ];
        assert!(matches!(validate_records(&dup), Err(MetricsError::InvalidRecord(_))));
    }

    #[test]
    fn majority_rate_matches_exhaustive_mode_counting() {
        // every 5-annotator score tuple over {1..5}: the unique-mode share, counted by brute force
        let mut unique = 0usize;
        let mut total = 0usize;
        let mut records = Vec::new();
        for code in 0..5usize.pow(5) {
            let scores: Vec<u8> = (0..5).map(|k| (code / 5usize.pow(k) % 5) as u8 + 1).collect();
            let mut counts = [0; 6];
            scores.iter().for_each(|&s| counts[s as usize] += 1);
            let max = *counts.iter().max().unwrap();
            total += 1;
            if counts.iter().filter(|&&c| c == max).count() == 1 {
                unique += 1;
            }
            let id = format!("item{code}");
            for approach in Approach::ALL {
                for (a, s) in scores.iter().enumerate() {
                    records.push(rec(&id, approach, Question::Q3, a as u8 + 1, *s));
                }
            }
        }
        let rows = majority_and_rank(&records).unwrap();
        for r in rows {
            assert_abs_diff_eq!(r.majority_rate, unique as f64 / total as f64, epsilon = 1e-12);
            assert_eq!(r.distribution.iter().sum::<usize>(), total);
            assert_abs_diff_eq!(r.mean_rank, 2.0);
        }
    }
}
