//! Text primitives shared across the pipeline: word/punctuation tokenization,
//! sentence counting, normalization for label matching and detokenization.

use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

/// Literal mask marker used in masked argument sources.
pub const MASK: &str = "<mask>";
/// Sequence separator / highlight marker in the intermediate text format.
pub const SEP: &str = "</s>";
/// Unknown-token placeholder used by the premises-only variant.
pub const UNK: &str = "<unk>";

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    // special markers first, then words with inner apostrophes, then single punctuation marks
    Regex::new(r"</s>|<mask>|<unk>|\w+(?:['’]\w+)*|[^\w\s]").unwrap()
});

static SENTENCE_END_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"[.!?]+["'”’)]*\s+["'“‘(]*\p{Lu}"#).unwrap());

/// Whitespace-plus-punctuation tokenization.
pub fn tokenize(text: &str) -> Vec<&str> {
    TOKEN_RE.find_iter(text).map(|m| m.as_str()).collect()
}

/// Lowercased tokens with punctuation kept as separate tokens (ROUGE preprocessing).
pub fn rouge_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(str::to_lowercase).collect()
}

/// Number of sentences: one plus the count of terminal punctuation runs followed by
/// whitespace and an uppercase letter. Empty text has zero sentences.
pub fn count_sentences(text: &str) -> usize {
    if text.trim().is_empty() {
        return 0;
    }
    1 + SENTENCE_END_RE.find_iter(text).count()
}

fn unify_quote(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' | '`' | '\u{00B4}' => '\'',
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' | '\u{00AB}' | '\u{00BB}' => '"',
        _ => c,
    }
}

/// NFC, unified quote glyphs, collapsed whitespace, trimmed.
pub fn normalize_for_matching(text: &str) -> String {
    let nfc: String = text.nfc().map(unify_quote).collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Joins tokens back into text, attaching closing punctuation to the left.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = false;
    for tok in tokens {
        let tok = tok.as_ref();
        let attach_left = matches!(tok, "." | "," | ";" | ":" | "!" | "?" | ")" | "]" | "%" | "'s");
        if !out.is_empty() && !attach_left && !glue_next {
            out.push(' ');
        }
        out.push_str(tok);
        glue_next = matches!(tok, "(" | "[");
    }
    out
}

/// Character-offset view of a string, for standoff offsets measured in code points.
#[derive(Debug, Clone)]
pub struct CharIndex {
    byte_offsets: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        let mut byte_offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        byte_offsets.push(text.len());
        Self { byte_offsets }
    }

    pub fn char_len(&self) -> usize {
        self.byte_offsets.len() - 1
    }

    /// Byte offset of a character offset, `None` when out of bounds.
    pub fn byte(&self, char_offset: usize) -> Option<usize> {
        self.byte_offsets.get(char_offset).copied()
    }

    /// Character offset of a byte offset that lies on a char boundary.
    pub fn char_of_byte(&self, byte: usize) -> Option<usize> {
        self.byte_offsets.binary_search(&byte).ok()
    }

    pub fn slice<'a>(&self, text: &'a str, start: usize, end: usize) -> Option<&'a str> {
        let (b0, b1) = (self.byte(start)?, self.byte(end)?);
        text.get(b0..b1)
    }
}

/// Converts a byte range into a character range of the same text.
pub fn char_range_of(text: &str, byte_start: usize, byte_end: usize) -> (usize, usize) {
    (text[..byte_start].chars().count(), text[..byte_end].chars().count())
}

/// Byte range of a character range.
pub fn byte_range_of(text: &str, char_start: usize, char_end: usize) -> (usize, usize) {
    let idx = CharIndex::new(text);
    (idx.byte(char_start).expect("char start in bounds"), idx.byte(char_end).expect("char end in bounds"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_words_and_punctuation() {
        assert_eq!(tokenize("Thus, museums don't matter."), vec!["Thus", ",", "museums", "don't", "matter", "."]);
        assert_eq!(tokenize("a </s> b <mask>."), vec!["a", "</s>", "b", "<mask>", "."]);
    }

    #[test]
    fn counts_sentences() {
        assert_eq!(count_sentences(""), 0);
        assert_eq!(count_sentences("One sentence only."), 1);
        assert_eq!(count_sentences("First one. Second one! Third? yes."), 3);
        assert_eq!(count_sentences("He said \"Stop.\" Then left."), 2);
        // abbreviations followed by lowercase do not split
        assert_eq!(count_sentences("It costs approx. ten dollars."), 1);
    }

    #[test]
    fn normalizes_quotes_and_whitespace() {
        assert_eq!(normalize_for_matching("  It\u{2019}s   \u{201C}fine\u{201D}\n"), "It's \"fine\"");
        // NFC composes e + combining acute
        assert_eq!(normalize_for_matching("caf\u{0065}\u{0301}"), "caf\u{00E9}");
    }

    #[test]
    fn detokenize_attaches_punctuation() {
        let toks = tokenize("Thus, museums matter (a lot).");
        assert_eq!(detokenize(&toks), "Thus, museums matter (a lot).");
    }

    #[test]
    fn char_index_handles_multibyte() {
        let text = "caf\u{00E9} ok";
        let idx = CharIndex::new(text);
        assert_eq!(idx.char_len(), 7);
        assert_eq!(idx.slice(text, 5, 7), Some("ok"));
        assert_eq!(idx.slice(text, 3, 4), Some("\u{00E9}"));
        assert_eq!(idx.byte(8), None);
        assert_eq!(char_range_of(text, 6, 8), (5, 7));
    }
}
