use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Text normalization shared by every metric.
///
/// `Whitespace` lowercases and splits on whitespace, leaving punctuation
/// attached to its word. `WordPunct` additionally splits every punctuation
/// character into its own token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    #[default]
    Whitespace,
    WordPunct,
}

impl Normalizer {
    pub fn tokenize(self, text: &str) -> TokenSequence {
        let lower = text.to_lowercase();
        let tokens = match self {
            Normalizer::Whitespace => lower.split_whitespace().map(str::to_string).collect(),
            Normalizer::WordPunct => {
                let mut tokens = Vec::new();
                for word in lower.split_whitespace() {
                    let mut current = String::new();
                    for ch in word.chars() {
                        if ch.is_alphanumeric() || ch == '_' {
                            current.push(ch);
                        } else {
                            if !current.is_empty() {
                                tokens.push(std::mem::take(&mut current));
                            }
                            tokens.push(ch.to_string());
                        }
                    }
                    if !current.is_empty() {
                        tokens.push(current);
                    }
                }
                tokens
            }
        };
        TokenSequence { tokens }
    }
}

impl fmt::Display for Normalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalizer::Whitespace => "whitespace (lowercased)",
            Normalizer::WordPunct => "word+punctuation (lowercased)",
        })
    }
}

/// Tokenizes with the default normalizer.
pub fn tokenize(text: &str) -> TokenSequence {
    Normalizer::default().tokenize(text)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        TokenSequence { tokens: tokens.into_iter().map(Into::into).collect() }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

/// N-gram counts in a fixed (lexicographic) order, so float sums over them
/// are reproducible from run to run.
pub(crate) type NgramCounts<'a> = BTreeMap<&'a [String], usize>;

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> NgramCounts<'_> {
    let mut counts = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Σ min(count_a(g), count_b(g)) over n-grams.
pub(crate) fn clipped_overlap(a: &NgramCounts<'_>, b: &NgramCounts<'_>) -> usize {
    a.iter().map(|(g, &c)| c.min(b.get(g).copied().unwrap_or(0))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_punct_splits_punctuation() {
        assert_eq!(Normalizer::WordPunct.tokenize("The cat.").tokens(), ["the", "cat", "."]);
    }

    #[test]
    fn whitespace_keeps_punctuation_attached() {
        assert_eq!(tokenize("The  cat.\n").tokens(), ["the", "cat."]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(Normalizer::WordPunct.tokenize("   ").is_empty());
    }

    #[test]
    fn idempotent() {
        for n in [Normalizer::Whitespace, Normalizer::WordPunct] {
            let s = "Dick Van Dyke's role (1974-75), \"Negative Reaction\"!";
            let once = n.tokenize(s);
            assert_eq!(n.tokenize(&once.join()), once);
        }
    }

    #[test]
    fn ngrams() {
        let t = TokenSequence::from_tokens(["a", "b", "a", "b"]);
        let c = ngram_counts(t.tokens(), 2);
        assert_eq!(c.len(), 2);
        assert_eq!(c[&["a".to_string(), "b".to_string()][..]], 2);
        assert!(ngram_counts(t.tokens(), 5).is_empty());
    }
}
