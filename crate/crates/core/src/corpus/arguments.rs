use std::collections::{HashMap, HashSet};

use super::{AnnotationSpan, Argument, CharRange, Conclusion, EssayDocument, SpanKind};
use crate::text::CharIndex;

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub arguments: Vec<Argument>,
    /// Claims that sit in paragraphs where no claim has a related premise.
    pub skipped_claims: usize,
}

/// Paragraph character ranges (non-empty lines), trimmed of surrounding whitespace.
fn paragraphs(text: &str) -> Vec<CharRange> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    for line in text.split('\n') {
        let len = line.chars().count();
        let lead = line.chars().take_while(|c| c.is_whitespace()).count();
        let trail = line.chars().rev().take_while(|c| c.is_whitespace()).count();
        if lead < len {
            out.push(CharRange::new(offset + lead, offset + len - trail));
        }
        offset += len + 1;
    }
    out
}

/// Premises (transitively) supporting or attacking `claim` through relations among `spans`.
fn related_premises(claim: &AnnotationSpan, spans: &[&AnnotationSpan]) -> HashSet<String> {
    let mut incoming: HashMap<&str, Vec<&str>> = HashMap::new();
    for s in spans.iter().filter(|s| s.kind == SpanKind::Premise) {
        for r in &s.relations {
            incoming.entry(r.target.as_str()).or_default().push(&s.span_id);
        }
    }
    let mut found = HashSet::new();
    let mut stack = vec![claim.span_id.as_str()];
    while let Some(node) = stack.pop() {
        for &src in incoming.get(node).into_iter().flatten() {
            if found.insert(src.to_string()) {
                stack.push(src);
            }
        }
    }
    found
}

/// One argument per paragraph in which at least one claim has a related premise.
///
/// The argument text is the whole paragraph; the primary conclusion is the claim with
/// the most related premises (earliest on ties), further claims of the paragraph are
/// kept as additional conclusions.
pub fn extract_arguments(doc: &EssayDocument) -> Extraction {
    let index = CharIndex::new(&doc.text);
    let mut extraction = Extraction::default();

    for (p_no, para) in paragraphs(&doc.text).into_iter().enumerate() {
        let inside: Vec<&AnnotationSpan> =
            doc.components.iter().filter(|s| s.start >= para.start && s.end <= para.end).collect();
        let claims: Vec<&AnnotationSpan> = inside.iter().copied().filter(|s| s.kind == SpanKind::Claim).collect();
        if claims.is_empty() {
            continue;
        }
        let support: Vec<usize> = claims.iter().map(|c| related_premises(c, &inside).len()).collect();
        let best = support.iter().copied().max().unwrap_or(0);
        if best == 0 {
            extraction.skipped_claims += claims.len();
            continue;
        }
        let primary = support.iter().position(|&n| n == best).unwrap();

        let full_text = index.slice(&doc.text, para.start, para.end).expect("paragraph within text").to_string();
        let local = |s: &AnnotationSpan| Conclusion {
            text: s.surface.clone(),
            char_range: CharRange::new(s.start - para.start, s.end - para.start),
        };
        let premises = inside.iter().filter(|s| s.kind == SpanKind::Premise).map(|s| s.surface.clone()).collect();
        let main = local(claims[primary]);
        let other_conclusions =
            claims.iter().enumerate().filter(|&(i, _)| i != primary).map(|(_, c)| local(c)).collect();

        extraction.arguments.push(Argument {
            argument_id: format!("{}_p{}", doc.essay_id, p_no + 1),
            essay_id: doc.essay_id.clone(),
            full_text,
            premises,
            conclusion: main.text,
            conclusion_char_range: main.char_range,
            other_conclusions,
            label: None,
        });
    }
    extraction
}
