use std::collections::HashMap;

use super::tokenize::{ngram_counts, TokenSequence};
use super::MetricError;

/// Stand-in for a zero higher-order precision inside the log.
pub const SMOOTHING_EPSILON: f64 = 1e-9;

/// Clipped n-gram matches and candidate n-gram total for one order.
pub fn modified_precision(candidate: &TokenSequence, references: &[TokenSequence], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate.tokens(), n);
    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
    for reference in references {
        for (gram, count) in ngram_counts(reference.tokens(), n) {
            let slot = max_ref.entry(gram).or_insert(0);
            *slot = (*slot).max(count);
        }
    }
    let clipped = cand
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (clipped, candidate.len().saturating_sub(n - 1))
}

/// Reference length closest to `candidate_len`; ties go to the shorter one.
fn closest_ref_len(candidate_len: usize, references: &[TokenSequence]) -> usize {
    references
        .iter()
        .map(TokenSequence::len)
        .min_by_key(|&r| (r.abs_diff(candidate_len), r))
        .unwrap_or(0)
}

fn brevity_penalty(candidate_len: usize, ref_len: usize) -> f64 {
    if candidate_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / candidate_len as f64).exp()
    }
}

fn combine(counts: &[(usize, usize)], candidate_len: usize, ref_len: usize) -> f64 {
    let orders: Vec<&(usize, usize)> = counts.iter().filter(|(_, total)| *total > 0).collect();
    if orders.is_empty() || orders[0].0 == 0 {
        return 0.0;
    }
    let log_sum: f64 = orders
        .iter()
        .map(|&&(clipped, total)| {
            if clipped == 0 {
                SMOOTHING_EPSILON.ln()
            } else {
                (clipped as f64 / total as f64).ln()
            }
        })
        .sum();
    brevity_penalty(candidate_len, ref_len) * (log_sum / orders.len() as f64).exp()
}

fn check(candidate: &TokenSequence, references: &[TokenSequence]) -> Result<(), MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    if references.is_empty() || references.iter().any(TokenSequence::is_empty) {
        return Err(MetricError::EmptyReference);
    }
    Ok(())
}

/// Sentence BLEU: geometric mean of modified precisions for orders
/// `1..=min(max_n, |candidate|)` times the brevity penalty.
///
/// Zero unigram matches give 0; a zero higher-order count is replaced by
/// [`SMOOTHING_EPSILON`].
pub fn bleu(candidate: &TokenSequence, references: &[TokenSequence], max_n: usize) -> Result<f64, MetricError> {
    check(candidate, references)?;
    if max_n == 0 {
        return Err(MetricError::InvalidOrder);
    }
    let counts: Vec<(usize, usize)> = (1..=max_n.min(candidate.len()))
        .map(|n| modified_precision(candidate, references, n))
        .collect();
    Ok(combine(&counts, candidate.len(), closest_ref_len(candidate.len(), references)))
}

/// Corpus BLEU over pooled counts and pooled lengths.
pub fn corpus_bleu(pairs: &[(TokenSequence, Vec<TokenSequence>)], max_n: usize) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if max_n == 0 {
        return Err(MetricError::InvalidOrder);
    }
    let mut pooled = vec![(0usize, 0usize); max_n];
    let (mut cand_len, mut ref_len) = (0, 0);
    for (candidate, references) in pairs {
        check(candidate, references)?;
        for (n, slot) in pooled.iter_mut().enumerate() {
            let (clipped, total) = modified_precision(candidate, references, n + 1);
            slot.0 += clipped;
            slot.1 += total;
        }
        cand_len += candidate.len();
        ref_len += closest_ref_len(candidate.len(), references);
    }
    Ok(combine(&pooled, cand_len, ref_len))
}
