//! Whitespace and Unicode normalisation shared by the parser and the diff.

use alloc::string::String;

use unicode_normalization::UnicodeNormalization;

/// Collapse every whitespace run to a single space and trim the ends.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// NFC-normalise and collapse whitespace; the only normalisation applied to
/// sentences before comparison.
pub fn normalize_sentence(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    collapse_whitespace(&nfc)
}

/// Number of whitespace-separated words.
pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}
