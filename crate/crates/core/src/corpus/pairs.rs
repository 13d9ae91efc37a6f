use super::{Argument, CorpusError, MaskedArgumentPair, Result};
use crate::text::{byte_range_of, MASK};

/// Replaces the single mask marker of `source` with `filler`.
pub fn substitute_mask(source: &str, filler: &str) -> Option<String> {
    let (pre, post) = source.split_once(MASK)?;
    if post.contains(MASK) {
        return None;
    }
    Some(format!("{pre}{filler}{post}"))
}

/// One masked pair per annotated conclusion of each argument; the primary conclusion's
/// pair is `#c0`, further conclusions follow in text order.
pub fn build_masked_pairs(args: &[Argument]) -> Result<Vec<MaskedArgumentPair>> {
    let mut pairs = Vec::new();
    for a in args {
        if a.full_text.contains(MASK) {
            return Err(CorpusError::MaskCollision { argument_id: a.argument_id.clone() });
        }
        for (k, c) in a.conclusions().enumerate() {
            let (b0, b1) = byte_range_of(&a.full_text, c.char_range.start, c.char_range.end);
            let source = format!("{}{}{}", &a.full_text[..b0], MASK, &a.full_text[b1..]);
            pairs.push(MaskedArgumentPair {
                pair_id: format!("{}#c{k}", a.argument_id),
                argument_id: a.argument_id.clone(),
                essay_id: a.essay_id.clone(),
                source,
                target: a.full_text.clone(),
                conclusion: c.text,
            });
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CharRange, Conclusion};

    fn argument(text: &str, concl: &str) -> Argument {
        let start = text.find(concl).unwrap();
        Argument {
            argument_id: "e_p1".into(),
            essay_id: "e".into(),
            full_text: text.into(),
            premises: vec!["Y".into()],
            conclusion: concl.into(),
            conclusion_char_range: CharRange::new(start, start + concl.len()),
            other_conclusions: vec![],
            label: None,
        }
    }

    #[test]
    fn masks_the_conclusion() {
        let pairs = build_masked_pairs(&[argument("Thus, X. Because Y.", "X")]).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].source, "Thus, <mask>. Because Y.");
        assert_eq!(pairs[0].target, "Thus, X. Because Y.");
        assert_eq!(pairs[0].pair_id, "e_p1#c0");
        assert!(pairs[0].is_primary());
        assert_eq!(substitute_mask(&pairs[0].source, "X").unwrap(), pairs[0].target);
    }

    #[test]
    fn every_conclusion_yields_a_pair() {
        let mut a = argument("A holds. B holds because C.", "B holds");
        a.other_conclusions.push(Conclusion { text: "A holds".into(), char_range: CharRange::new(0, 7) });
        let pairs = build_masked_pairs(&[a]).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].source, "A holds. <mask> because C.");
        assert_eq!(pairs[1].source, "<mask>. B holds because C.");
        assert_eq!(pairs[1].pair_id, "e_p1#c1");
        for p in &pairs {
            assert_eq!(substitute_mask(&p.source, &p.conclusion).unwrap(), p.target);
        }
    }

    #[test]
    fn mask_literal_collides() {
        let a = argument("Thus, X <mask>. Because Y.", "X");
        assert!(matches!(build_masked_pairs(&[a]), Err(CorpusError::MaskCollision { .. })));
    }

    #[test]
    fn substitute_requires_exactly_one_marker() {
        assert_eq!(substitute_mask("no marker", "x"), None);
        assert_eq!(substitute_mask("<mask> and <mask>", "x"), None);
    }
}
