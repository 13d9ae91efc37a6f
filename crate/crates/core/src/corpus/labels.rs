use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{Argument, CorpusError, Label, Result};
use crate::text::normalize_for_matching;

/// Minimum normalized edit similarity for the fuzzy label-matching fallback.
pub const FUZZY_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelColumns {
    pub essay: String,
    pub text: String,
    pub label: String,
}

impl Default for LabelColumns {
    fn default() -> Self {
        Self { essay: "ESSAY".into(), text: "TEXT".into(), label: "ANNOTATION".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub essay_id: String,
    pub text: String,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelTable {
    pub rows: Vec<LabelRow>,
}

/// Maps essay identifiers such as `essay001.txt`, `Essay 1` or `1` onto the file-stem
/// form used by the corpus (`essay001`).
fn canonical_essay_id(raw: &str) -> String {
    let s = raw.trim().trim_end_matches(".txt").trim_end_matches(".ann");
    let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
    let rest: String = s.chars().filter(|c| !c.is_ascii_digit() && !c.is_whitespace()).collect();
    if !digits.is_empty() && (rest.is_empty() || rest.eq_ignore_ascii_case("essay")) {
        let n: u64 = digits.parse().unwrap_or(0);
        format!("essay{n:03}")
    } else {
        s.to_string()
    }
}

impl LabelTable {
    /// Reads a tab-separated table with a header row naming the configured columns.
    pub fn from_tsv<R: Read>(reader: R, columns: &LabelColumns) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').flexible(false).from_reader(reader);
        let headers = rdr.headers().map_err(|e| CorpusError::LabelTable(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| CorpusError::LabelTable(format!("missing column {name:?}")))
        };
        let (ei, ti, li) = (col(&columns.essay)?, col(&columns.text)?, col(&columns.label)?);
        let mut rows = Vec::new();
        for (n, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| CorpusError::LabelTable(e.to_string()))?;
            let raw_label = record.get(li).unwrap_or_default();
            let label = Label::parse(raw_label)
                .ok_or_else(|| CorpusError::LabelTable(format!("row {}: unknown label {raw_label:?}", n + 1)))?;
            rows.push(LabelRow {
                essay_id: canonical_essay_id(record.get(ei).unwrap_or_default()),
                text: record.get(ti).unwrap_or_default().to_string(),
                label,
            });
        }
        Ok(Self { rows })
    }

    pub fn to_tsv(&self, columns: &LabelColumns) -> String {
        let mut out = format!("{}\t{}\t{}\n", columns.essay, columns.text, columns.label);
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{}\n", r.essay_id, r.text, r.label));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchSummary {
    pub exact: usize,
    pub fuzzy: usize,
}

/// Attaches a sufficiency label to every argument.
///
/// Rows match arguments of the same essay by normalized text; rows without an exact
/// match fall back to the most similar argument when its normalized edit similarity
/// reaches [`FUZZY_THRESHOLD`].
pub fn attach_labels(args: Vec<Argument>, table: &LabelTable) -> Result<(Vec<Argument>, MatchSummary)> {
    let mut args = args;
    let normalized: Vec<String> = args.iter().map(|a| normalize_for_matching(&a.full_text)).collect();
    let mut by_essay: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, a) in args.iter().enumerate() {
        by_essay.entry(a.essay_id.as_str()).or_default().push(i);
    }

    let mut assigned: Vec<Option<Label>> = vec![None; args.len()];
    let mut summary = MatchSummary::default();
    for (row_no, row) in table.rows.iter().enumerate() {
        let candidates = by_essay.get(row.essay_id.as_str()).map(Vec::as_slice).unwrap_or_default();
        let needle = normalize_for_matching(&row.text);
        let hit = match candidates.iter().find(|&&i| normalized[i] == needle) {
            Some(&i) => {
                summary.exact += 1;
                Some(i)
            }
            None => {
                let best = candidates
                    .iter()
                    .map(|&i| (i, strsim::normalized_levenshtein(&normalized[i], &needle)))
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match best {
                    Some((i, sim)) if sim >= FUZZY_THRESHOLD => {
                        log::info!(
                            "label row {} matched {} by fuzzy fallback (similarity {sim:.4})",
                            row_no + 1,
                            args[i].argument_id
                        );
                        summary.fuzzy += 1;
                        Some(i)
                    }
                    _ => None,
                }
            }
        };
        let i = hit.ok_or_else(|| CorpusError::UnmatchedLabel { row: row_no + 1, essay_id: row.essay_id.clone() })?;
        match assigned[i] {
            Some(prev) if prev != row.label => {
                return Err(CorpusError::ConflictingLabel { argument_id: args[i].argument_id.clone() })
            }
            _ => assigned[i] = Some(row.label),
        }
    }

    let unlabeled: Vec<String> =
        args.iter().zip(&assigned).filter(|(_, l)| l.is_none()).map(|(a, _)| a.argument_id.clone()).collect();
    if !unlabeled.is_empty() {
        return Err(CorpusError::UnlabeledArgument { argument_ids: unlabeled });
    }
    for (a, l) in args.iter_mut().zip(assigned) {
        a.label = l;
    }
    Ok((args, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CharRange;

    fn arg(id: &str, essay: &str, text: &str) -> Argument {
        Argument {
            argument_id: id.into(),
            essay_id: essay.into(),
            full_text: text.into(),
            premises: vec!["p".into()],
            conclusion: text[..1].into(),
            conclusion_char_range: CharRange::new(0, 1),
            other_conclusions: vec![],
            label: None,
        }
    }

    fn args() -> Vec<Argument> {
        vec![
            arg("essay001_p2", "essay001", "It's said that \"museums\" matter a great deal to everyone."),
            arg("essay001_p3", "essay001", "Another paragraph entirely about public transport."),
        ]
    }

    #[test]
    fn reads_tsv_with_configured_columns() {
        let tsv =
            "ESSAY\tARGUMENT\tTEXT\tANNOTATION\nessay001.txt\t1\tfoo bar\tsufficient\nEssay 2\t1\tbaz\tinsufficient\n";
        let t = LabelTable::from_tsv(tsv.as_bytes(), &LabelColumns::default()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].essay_id, "essay001");
        assert_eq!(t.rows[1].essay_id, "essay002");
        assert_eq!(t.rows[1].label, Label::Insufficient);

        let cols = LabelColumns { essay: "id".into(), text: "arg".into(), label: "y".into() };
        let t = LabelTable::from_tsv("y\tid\targ\n1\tessay009\tq\n".as_bytes(), &cols).unwrap();
        assert_eq!(t.rows[0], LabelRow { essay_id: "essay009".into(), text: "q".into(), label: Label::Sufficient });
        assert!(LabelTable::from_tsv("a\tb\n".as_bytes(), &LabelColumns::default()).is_err());
    }

    #[test]
    fn empty_table_leaves_everything_unlabeled() {
        match attach_labels(args(), &LabelTable::default()) {
            Err(CorpusError::UnlabeledArgument { argument_ids }) => {
                assert_eq!(argument_ids.len(), 2)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn curly_quotes_match_through_normalization() {
        let table = LabelTable {
            rows: vec![
                LabelRow {
                    essay_id: "essay001".into(),
                    text: "It\u{2019}s said that \u{201C}museums\u{201D} matter a  great deal to everyone.".into(),
                    label: Label::Sufficient,
                },
                LabelRow {
                    essay_id: "essay001".into(),
                    text: "Another paragraph entirely about public transport.".into(),
                    label: Label::Insufficient,
                },
            ],
        };
        let (labeled, summary) = attach_labels(args(), &table).unwrap();
        assert_eq!(summary, MatchSummary { exact: 2, fuzzy: 0 });
        assert_eq!(labeled[0].label, Some(Label::Sufficient));
        assert_eq!(labeled[1].label, Some(Label::Insufficient));
    }

    #[test]
    fn near_duplicate_text_uses_fuzzy_fallback() {
        let table = LabelTable {
            rows: vec![
                LabelRow {
                    essay_id: "essay001".into(),
                    text: "It's said that \"museums\" matter a great deal to everyone!".into(),
                    label: Label::Insufficient,
                },
                LabelRow {
                    essay_id: "essay001".into(),
                    text: "Another paragraph entirely about public transport.".into(),
                    label: Label::Sufficient,
                },
            ],
        };
        let (labeled, summary) = attach_labels(args(), &table).unwrap();
        assert_eq!(summary, MatchSummary { exact: 1, fuzzy: 1 });
        assert_eq!(labeled[0].label, Some(Label::Insufficient));
    }

    #[test]
    fn unrelated_row_is_unmatched() {
        let table = LabelTable {
            rows: vec![LabelRow {
                essay_id: "essay001".into(),
                text: "Something else".into(),
                label: Label::Sufficient,
            }],
        };
        assert!(matches!(attach_labels(args(), &table), Err(CorpusError::UnmatchedLabel { row: 1, .. })));
        // same text but wrong essay
        let table = LabelTable {
            rows: vec![LabelRow {
                essay_id: "essay002".into(),
                text: "Another paragraph entirely about public transport.".into(),
                label: Label::Sufficient,
            }],
        };
        assert!(matches!(attach_labels(args(), &table), Err(CorpusError::UnmatchedLabel { .. })));
    }

    #[test]
    fn conflicting_rows_are_rejected() {
        let row = |label| LabelRow {
            essay_id: "essay001".into(),
            text: "Another paragraph entirely about public transport.".into(),
            label,
        };
        let table = LabelTable { rows: vec![row(Label::Sufficient), row(Label::Insufficient)] };
        assert!(matches!(attach_labels(args(), &table), Err(CorpusError::ConflictingLabel { .. })));
    }
}
