use serde::{Deserialize, Serialize};

use super::tokenize::{clipped_overlap, ngram_counts, TokenSequence};
use super::MetricError;

/// Precision, recall and their harmonic mean (β = 1).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Prf { precision, recall, f: harmonic_mean(precision, recall) }
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// ROUGE-N with clipped n-gram counts.
pub fn rouge_n(candidate: &TokenSequence, reference: &TokenSequence, n: usize) -> Result<Prf, MetricError> {
    if n == 0 {
        return Err(MetricError::InvalidOrder);
    }
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let cand = ngram_counts(candidate.tokens(), n);
    let refs = ngram_counts(reference.tokens(), n);
    let overlap = clipped_overlap(&cand, &refs);
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    Ok(Prf::new(ratio(overlap, cand_total), ratio(overlap, ref_total)))
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L: P = LCS/|candidate|, R = LCS/|reference|, F with β = 1.
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> Result<Prf, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let l = lcs_len(candidate.tokens(), reference.tokens());
    Ok(Prf::new(ratio(l, candidate.len()), ratio(l, reference.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::from_tokens(s.split_whitespace())
    }

    #[test]
    fn identical_is_perfect() {
        let a = seq("the cat sat on the mat");
        for n in 1..=3 {
            assert_eq!(rouge_n(&a, &a, n).unwrap(), Prf { precision: 1.0, recall: 1.0, f: 1.0 });
        }
        assert_eq!(rouge_l(&a, &a).unwrap().f, 1.0);
    }

    #[test]
    fn short_candidate_scores_zero() {
        let r = rouge_n(&seq("cat"), &seq("the cat sat"), 2).unwrap();
        assert_eq!(r, Prf::default());
    }

    #[test]
    fn empty_reference_rejected() {
        assert!(matches!(rouge_l(&seq("a"), &seq("")), Err(MetricError::EmptyReference)));
        assert!(matches!(rouge_n(&seq("a"), &seq(""), 1), Err(MetricError::EmptyReference)));
        assert!(matches!(rouge_n(&seq("a"), &seq("a"), 0), Err(MetricError::InvalidOrder)));
    }

    /// Multiset intersection by exhaustive pairing: each candidate n-gram
    /// consumes at most one unused identical reference n-gram.
    fn brute_overlap(c: &[&str], r: &[&str], n: usize) -> (usize, usize, usize) {
        let cg: Vec<&[&str]> = c.windows(n).collect();
        let rg: Vec<&[&str]> = r.windows(n).collect();
        let mut used = vec![false; rg.len()];
        let mut hits = 0;
        for g in &cg {
            if let Some(k) = (0..rg.len()).find(|&k| !used[k] && rg[k] == *g) {
                used[k] = true;
                hits += 1;
            }
        }
        (hits, cg.len(), rg.len())
    }

    #[test]
    fn shared_bigrams_fixture() {
        let c = ["a", "b", "c", "d", "e"];
        let r = ["a", "b", "c", "d", "x"];
        let (hits, cn, rn) = brute_overlap(&c, &r, 2);
        assert_eq!((hits, cn, rn), (3, 4, 4));
        let got = rouge_n(&seq(&c.join(" ")), &seq(&r.join(" ")), 2).unwrap();
        assert_eq!(got.precision, hits as f64 / cn as f64);
        assert_eq!(got.recall, hits as f64 / rn as f64);
        assert!((got.f - 0.75).abs() < 1e-12);
    }

    #[test]
    fn repeated_ngrams_are_clipped() {
        let c = ["the", "the", "the", "cat", "the"];
        let r = ["the", "cat", "the", "cat", "on"];
        for n in 1..=3 {
            let (hits, cn, rn) = brute_overlap(&c, &r, n);
            let got = rouge_n(&seq(&c.join(" ")), &seq(&r.join(" ")), n).unwrap();
            assert_eq!(got.precision, hits as f64 / cn as f64, "n={n}");
            assert_eq!(got.recall, hits as f64 / rn as f64, "n={n}");
        }
    }

    #[test]
    fn lcs_basics() {
        assert_eq!(lcs_len(&[1, 2, 3, 4], &[2, 4, 3]), 2);
        assert_eq!(lcs_len::<u8>(&[], &[1]), 0);
    }
}
