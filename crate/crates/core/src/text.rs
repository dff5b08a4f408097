//! Small text utilities shared by the classifier, validators and spatial
//! rewriting.

use std::collections::BTreeSet;
use std::ops::Range;

use regex::RegexBuilder;

/// Words that carry no task content. Spatial prepositions are deliberately
/// absent: "on", "over", "under" change where an object goes.
pub const STOPWORDS: &[&str] = &[
    "a",
    "an",
    "the",
    "and",
    "or",
    "but",
    "so",
    "then",
    "to",
    "of",
    "for",
    "it",
    "its",
    "this",
    "that",
    "these",
    "those",
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "am",
    "do",
    "does",
    "did",
    "you",
    "your",
    "yours",
    "we",
    "our",
    "i",
    "me",
    "my",
    "they",
    "them",
    "their",
    "he",
    "she",
    "his",
    "her",
    "him",
    "please",
    "carefully",
    "first",
    "just",
    "very",
    "really",
    "also",
    "can",
    "could",
    "should",
    "would",
    "will",
    "shall",
    "may",
    "might",
    "must",
    "s",
    "t",
    "any",
    "some",
    "there",
    "here",
    "as",
    "at",
    "by",
    "if",
    "once",
    "which",
    "who",
    "what",
];

/// Clause markers counted by the syntactic complexity score: coordinating
/// conjunctions joining clauses and common subordinators.
pub const CLAUSE_MARKERS: &[&str] = &[
    "and", "but", "or", "so", "because", "although", "though", "while", "when", "whenever",
    "which", "that", "who", "whom", "whose", "where", "if", "unless", "until", "since", "after",
    "before", "once",
];

/// Number of Unicode scalar values; all length rules count characters, not
/// bytes.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Lowercased alphanumeric words in order.
pub fn words(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Distinct lowercased non-stopword tokens.
pub fn content_words(s: &str) -> BTreeSet<String> {
    words(s)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

pub fn clause_marker_count(s: &str) -> usize {
    words(s)
        .filter(|w| CLAUSE_MARKERS.contains(&w.as_str()))
        .count()
}

/// Byte ranges of every case-insensitive whole-word occurrence of `needle`
/// in `haystack`. A multi-word needle matches with any run of whitespace
/// between its words.
pub fn find_whole_word(haystack: &str, needle: &str) -> Vec<Range<usize>> {
    let parts: Vec<String> = needle.split_whitespace().map(regex::escape).collect();
    if parts.is_empty() {
        return Vec::new();
    }
    let pattern = format!(r"(?:^|\b){}(?:\b|$)", parts.join(r"\s+"));
    let re = RegexBuilder::new(&pattern)
        .case_insensitive(true)
        .build()
        .expect("escaped pattern is valid");
    re.find_iter(haystack)
        .map(|m| m.range())
        .filter(|r| is_word_boundary(haystack, r.start, r.end))
        .collect()
}

fn is_word_boundary(s: &str, start: usize, end: usize) -> bool {
    let before = s[..start].chars().next_back();
    let after = s[end..].chars().next();
    !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
}

pub fn contains_whole_word(haystack: &str, needle: &str) -> bool {
    !find_whole_word(haystack, needle).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_word_rejects_plurals() {
        assert!(find_whole_word("pick up the mugs", "mug").is_empty());
        assert_eq!(find_whole_word("Mug, mug", "mug"), vec![0..3, 5..8]);
    }

    #[test]
    fn multi_word_needles() {
        let t = "Place the Coffee  Mug here";
        assert_eq!(find_whole_word(t, "coffee mug"), vec![10..21]);
    }

    #[test]
    fn content_words_drop_stopwords() {
        let w = content_words("Place dripper on mug and pour water");
        let got: Vec<_> = w.iter().map(String::as_str).collect();
        assert_eq!(got, vec!["dripper", "mug", "on", "place", "pour", "water"]);
    }

    #[test]
    fn char_len_counts_scalars() {
        assert_eq!(char_len("Alice’s"), 7);
    }
}
