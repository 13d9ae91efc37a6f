use crate::text::MASK;

/// Minimum anchor length, in characters, on each side of the infilled span.
pub const MIN_ANCHOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub text: String,
    /// Set when no anchors could be aligned and the text was recovered by stripping exact
    /// prefix/suffix matches only.
    pub fallback: bool,
}

fn char_suffix(s: &str, n_chars: usize) -> &str {
    let skip = s.chars().count().saturating_sub(n_chars);
    let b = s.char_indices().nth(skip).map_or(s.len(), |(b, _)| b);
    &s[b..]
}

fn char_prefix(s: &str, n_chars: usize) -> &str {
    let b = s.char_indices().nth(n_chars).map_or(s.len(), |(b, _)| b);
    &s[..b]
}

/// Occurrence of `needle` in `hay` whose start is closest to `expected` (byte offsets).
fn closest_match(hay: &str, needle: &str, expected: usize) -> Option<usize> {
    hay.match_indices(needle).map(|(i, _)| i).min_by_key(|&i| (i as isize - expected as isize).unsigned_abs())
}

/// Left boundary (byte offset in `infilled`) after the longest alignable tail of `prefix`.
fn left_boundary(prefix: &str, infilled: &str) -> Option<usize> {
    let len = prefix.chars().count();
    if len == 0 {
        return Some(0);
    }
    let min = len.min(MIN_ANCHOR);
    (min..=len).rev().find_map(|n| {
        let anchor = char_suffix(prefix, n);
        closest_match(infilled, anchor, prefix.len() - anchor.len()).map(|i| i + anchor.len())
    })
}

/// Right boundary (byte offset in `infilled`) before the longest alignable head of `suffix`,
/// searched at or after `from`.
fn right_boundary(suffix: &str, infilled: &str, from: usize) -> Option<usize> {
    let len = suffix.chars().count();
    if len == 0 {
        return Some(infilled.len());
    }
    let min = len.min(MIN_ANCHOR);
    let expected = infilled.len().saturating_sub(suffix.len()).saturating_sub(from);
    (min..=len).rev().find_map(|n| {
        let anchor = char_prefix(suffix, n);
        closest_match(&infilled[from..], anchor, expected).map(|i| from + i)
    })
}

/// Recovers the infilled conclusion from a decoded argument.
///
/// The masked text is split at its marker into prefix and suffix. The tail of the prefix
/// and the head of the suffix are aligned in the decoded text, starting from the whole
/// prefix/suffix and shrinking down to [`MIN_ANCHOR`] characters; the text between the
/// anchors is the conclusion. If alignment fails, exact prefix/suffix matches are stripped
/// from the decoded text and the fallback flag is set.
///
/// Returns `None` when `masked` does not contain exactly one marker.
pub fn extract_infill(masked: &str, infilled: &str) -> Option<Extracted> {
    let (prefix, suffix) = masked.split_once(MASK)?;
    if suffix.contains(MASK) {
        return None;
    }
    let aligned = left_boundary(prefix, infilled).and_then(|l| right_boundary(suffix, infilled, l).map(|r| (l, r)));
    if let Some((l, r)) = aligned {
        let text = infilled[l..r].trim();
        if !text.is_empty() {
            return Some(Extracted { text: text.to_string(), fallback: false });
        }
    }
    let mut rest = infilled;
    if !prefix.is_empty() {
        rest = rest.strip_prefix(prefix).unwrap_or(rest);
    }
    if !suffix.is_empty() {
        rest = rest.strip_suffix(suffix).unwrap_or(rest);
    }
    Some(Extracted { text: rest.trim().to_string(), fallback: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::substitute_mask;
    use proptest::prelude::*;

    #[test]
    fn exact_anchors() {
        let e = extract_infill("Thus, <mask>.", "Thus, museums matter.").unwrap();
        assert_eq!(e, Extracted { text: "museums matter".into(), fallback: false });
    }

    #[test]
    fn paraphrased_suffix_uses_shortened_anchor() {
        let masked = "First of all, <mask>. Children visit them every weekend with their parents.";
        let infilled =
            "First of all, museums are places of learning. Children visit them every week with their parents.";
        let e = extract_infill(masked, infilled).unwrap();
        assert_eq!(e.text, "museums are places of learning");
        assert!(!e.fallback);
    }

    #[test]
    fn dropped_contexts_fall_back() {
        let masked = "In my opinion, <mask>, because public transport is cheaper than driving.";
        let infilled = "cars are expensive";
        let e = extract_infill(masked, infilled).unwrap();
        assert_eq!(e, Extracted { text: "cars are expensive".into(), fallback: true });
    }

    #[test]
    fn conclusion_at_the_edges() {
        let e =
            extract_infill("<mask>. Because kids learn there.", "Museums matter. Because kids learn there.").unwrap();
        assert_eq!(e.text, "Museums matter");
        let e = extract_infill("Because kids learn there, <mask>", "Because kids learn there, museums matter").unwrap();
        assert_eq!(e.text, "museums matter");
    }

    #[test]
    fn repeated_context_phrases_pick_the_aligned_occurrence() {
        let masked = "we should act now. Thus, <mask>. Thus, we should act now.";
        let gold = "the government must fund museums";
        let e = extract_infill(masked, &substitute_mask(masked, gold).unwrap()).unwrap();
        assert_eq!(e.text, gold);
    }

    #[test]
    fn requires_one_marker() {
        assert!(extract_infill("no marker", "x").is_none());
        assert!(extract_infill("<mask> <mask>", "x").is_none());
    }

    proptest! {
        #[test]
        fn exact_decoder_round_trips(
            prefix in "[A-Za-z ,.]{0,40}",
            gold in "[a-z][a-z ]{0,30}[a-z]",
            suffix in "[A-Za-z ,.]{0,40}",
        ) {
            let masked = format!("{prefix}{MASK}{suffix}");
            let decoded = substitute_mask(&masked, &gold).unwrap();
            let e = extract_infill(&masked, &decoded).unwrap();
            prop_assert_eq!(e.text, gold);
            prop_assert!(!e.fallback);
        }
    }
}
