use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{AnnotationSpan, CorpusError, EssayDocument, Relation, RelationKind, Result, SpanKind};
use crate::text::CharIndex;

fn malformed(essay_id: &str, line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRecord { essay_id: essay_id.to_string(), line, reason: reason.into() }
}

/// Parses one essay from its raw text and its standoff annotation file.
///
/// T-lines become spans (`T1<TAB>Claim 10 25<TAB>surface`), R-lines become relations
/// on their source span (`R1<TAB>supports Arg1:T4 Arg2:T3`), A-lines set the stance
/// attribute (`A1<TAB>Stance T3 For`). `#` note lines are ignored.
pub fn parse_standoff(essay_id: &str, essay_text: &[u8], annotation: &[u8]) -> Result<EssayDocument> {
    let text = std::str::from_utf8(essay_text)
        .map_err(|_| CorpusError::InvalidUtf8 { essay_id: essay_id.to_string() })?
        .to_string();
    let ann =
        std::str::from_utf8(annotation).map_err(|_| CorpusError::InvalidUtf8 { essay_id: essay_id.to_string() })?;
    let index = CharIndex::new(&text);

    let mut spans: Vec<AnnotationSpan> = Vec::new();
    let mut relations: Vec<(usize, String, String, RelationKind)> = Vec::new();
    let mut stances: Vec<(usize, String, String)> = Vec::new();

    for (i, raw) in ann.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default();
        let body = fields.next().ok_or_else(|| malformed(essay_id, line_no, "missing tab-separated body"))?;
        match id.chars().next() {
            Some('T') => {
                let surface =
                    fields.next().ok_or_else(|| malformed(essay_id, line_no, "T-line without surface text"))?;
                let mut parts = body.split(' ');
                let kind = match parts.next() {
                    Some("MajorClaim") => SpanKind::MajorClaim,
                    Some("Claim") => SpanKind::Claim,
                    Some("Premise") => SpanKind::Premise,
                    other => return Err(malformed(essay_id, line_no, format!("unknown span type {other:?}"))),
                };
                let offsets: Vec<&str> = parts.collect();
                if offsets.len() != 2 || offsets.iter().any(|o| o.contains(';')) {
                    return Err(malformed(essay_id, line_no, "expected one contiguous offset pair"));
                }
                let parse =
                    |s: &str| s.parse::<usize>().map_err(|_| malformed(essay_id, line_no, format!("bad offset {s:?}")));
                let (start, end) = (parse(offsets[0])?, parse(offsets[1])?);
                if start >= end {
                    return Err(malformed(essay_id, line_no, format!("empty span [{start},{end})")));
                }
                let slice = index.slice(&text, start, end).ok_or_else(|| CorpusError::OffsetMismatch {
                    essay_id: essay_id.to_string(),
                    span_id: id.to_string(),
                    surface: surface.to_string(),
                    slice: format!("<out of bounds: text has {} chars>", index.char_len()),
                })?;
                if slice != surface {
                    return Err(CorpusError::OffsetMismatch {
                        essay_id: essay_id.to_string(),
                        span_id: id.to_string(),
                        surface: surface.to_string(),
                        slice: slice.to_string(),
                    });
                }
                spans.push(AnnotationSpan {
                    span_id: id.to_string(),
                    kind,
                    start,
                    end,
                    surface: surface.to_string(),
                    relations: Vec::new(),
                    stance: None,
                });
            }
            Some('R') => {
                let parts: Vec<&str> = body.split_whitespace().collect();
                let kind = match parts.first() {
                    Some(&"supports") => RelationKind::Supports,
                    Some(&"attacks") => RelationKind::Attacks,
                    other => return Err(malformed(essay_id, line_no, format!("unknown relation {other:?}"))),
                };
                let arg = |prefix: &str| {
                    parts
                        .iter()
                        .find_map(|p| p.strip_prefix(prefix))
                        .map(str::to_string)
                        .ok_or_else(|| malformed(essay_id, line_no, format!("relation without {prefix}")))
                };
                relations.push((line_no, arg("Arg1:")?, arg("Arg2:")?, kind));
            }
            Some('A') => {
                let parts: Vec<&str> = body.split_whitespace().collect();
                match parts.as_slice() {
                    ["Stance", target, value] => stances.push((line_no, target.to_string(), value.to_string())),
                    [_, _, ..] => {} // other attributes are not used
                    _ => return Err(malformed(essay_id, line_no, "attribute needs a name and a target")),
                }
            }
            _ => return Err(malformed(essay_id, line_no, format!("unknown record id {id:?}"))),
        }
    }

    let position: HashMap<String, usize> = spans.iter().enumerate().map(|(i, s)| (s.span_id.clone(), i)).collect();
    if position.len() != spans.len() {
        return Err(malformed(essay_id, 0, "duplicate span id"));
    }
    for (line_no, source, target, kind) in relations {
        let (Some(&src), true) = (position.get(&source), position.contains_key(&target)) else {
            return Err(malformed(
                essay_id,
                line_no,
                format!("relation {source} -> {target} references an unknown span"),
            ));
        };
        spans[src].relations.push(Relation { target, kind });
    }
    for (line_no, target, value) in stances {
        let idx = *position
            .get(&target)
            .ok_or_else(|| malformed(essay_id, line_no, format!("attribute on unknown span {target}")))?;
        spans[idx].stance = Some(value);
    }
    spans.sort_by_key(|s| (s.start, s.end));

    Ok(EssayDocument { essay_id: essay_id.to_string(), text, components: spans })
}

/// Loads every `<id>.txt` + `<id>.ann` pair in a directory, sorted by essay id.
pub fn load_corpus(dir: &Path) -> Result<Vec<EssayDocument>> {
    let mut ids: Vec<String> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("ann") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    let mut seen = HashSet::new();
    for id in &ids {
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateEssay(id.clone()));
        }
    }
    ids.par_iter()
        .map(|id| {
            let text = fs::read(dir.join(format!("{id}.txt")))?;
            let ann = fs::read(dir.join(format!("{id}.ann")))?;
            parse_standoff(id, &text, &ann)
        })
        .collect()
}
