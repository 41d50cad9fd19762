//! Character-level edit distance over Unicode scalar values.

use alloc::vec::Vec;

/// Minimum number of single-character insertions, deletions and
/// substitutions turning `a` into `b`.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance_chars(&a, &b)
}

pub(crate) fn edit_distance_chars(a: &[char], b: &[char]) -> usize {
    // Keep the shorter sequence in the row.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }

    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(lc != sc);
            row[j + 1] = (diag + cost).min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[short.len()]
}

/// `1 - distance / max(len_a, len_b)`, with two empty strings fully similar.
///
/// Evaluated as `(max - distance) / max` so that ratios such as 3/5 round to
/// the same double as the literal `0.6`; threshold comparisons stay exact.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    similarity_chars(&a, &b)
}

pub(crate) fn similarity_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    let distance = edit_distance_chars(a, b);
    (longest - distance) as f64 / longest as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_one() {
        assert_eq!(normalized_levenshtein("abc", "abc"), 1.0);
        assert_eq!(normalized_levenshtein("", ""), 1.0);
    }

    #[test]
    fn kitten_sitting() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(normalized_levenshtein("kitten", "sitting"), 4.0 / 7.0);
        assert!((normalized_levenshtein("kitten", "sitting") - 0.5714).abs() < 1e-4);
    }

    #[test]
    fn empty_against_nonempty() {
        assert_eq!(normalized_levenshtein("", "x"), 0.0);
        assert_eq!(edit_distance("", "абв"), 3);
    }

    #[test]
    fn counts_scalar_values_not_bytes() {
        assert_eq!(edit_distance("дома", "тома"), 1);
        assert_eq!(normalized_levenshtein("ёж", "еж"), 0.5);
    }

    #[test]
    fn three_fifths_equals_literal() {
        // two substitutions over five characters
        assert_eq!(normalized_levenshtein("abcde", "abcxy"), 0.6);
    }
}
