//! PARENT with the word-overlap entailment model.
//!
//! The table lexicon is the set of normalized tokens of every header and
//! cell. An n-gram's entailment probability is the fraction of its tokens in
//! the lexicon. Tokens are compared with edge punctuation trimmed, so a
//! sentence-final "gordon." is entailed by a cell holding "Gordon".
//!
//! * Precision of order n: each candidate n-gram counts as correct with
//!   probability `p + (1 - p) * w`, where `p = min(1, ref_count / cand_count)`
//!   and `w` is its entailment probability.
//! * Reference recall of order n: reference n-grams weighted by `w`, credited
//!   with `min(1, cand_count / ref_count)`.
//! * Table recall: mean over non-empty cells of LCS(cell, candidate) / |cell|.
//! * Recall = ref_recall^(1-λ) · table_recall^λ; F is the harmonic mean.
//!
//! Orders run `1..=min(max_n, length)`. Zero higher-order values and a zero
//! table recall are smoothed to [`PARENT_SMOOTHING`].

use std::collections::HashSet;

use super::rouge::{harmonic_mean, lcs_len, Prf};
use super::tokenize::{ngram_counts, Normalizer, TokenSequence};
use super::MetricError;
use crate::table::Table;

pub const PARENT_SMOOTHING: f64 = 1e-5;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_MAX_ORDER: usize = 4;

/// Token with leading and trailing non-alphanumerics removed (kept whole if nothing remains).
pub(crate) fn entailment_key(token: &str) -> &str {
    let trimmed = token.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        token
    } else {
        trimmed
    }
}

#[derive(Debug, Clone)]
pub struct TableLexicon {
    words: HashSet<String>,
    cells: Vec<Vec<String>>,
}

impl TableLexicon {
    pub fn new(table: &Table, normalizer: Normalizer) -> Self {
        let mut words = HashSet::new();
        let mut cells = Vec::new();
        let keys = |text: &str| -> Vec<String> {
            normalizer
                .tokenize(text)
                .tokens()
                .iter()
                .map(|t| entailment_key(t).to_string())
                .collect()
        };
        for name in table.header() {
            words.extend(keys(name));
        }
        for row in table.rows() {
            for cell in row {
                let tokens = keys(cell);
                words.extend(tokens.iter().cloned());
                if !tokens.is_empty() {
                    cells.push(tokens);
                }
            }
        }
        TableLexicon { words, cells }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(entailment_key(token))
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn entailment(&self, gram: &[String]) -> f64 {
        let hits = gram.iter().filter(|t| self.contains(t)).count();
        hits as f64 / gram.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParentConfig {
    pub lambda: f64,
    pub max_order: usize,
    pub normalizer: Normalizer,
}

impl Default for ParentConfig {
    fn default() -> Self {
        ParentConfig {
            lambda: DEFAULT_LAMBDA,
            max_order: DEFAULT_MAX_ORDER,
            normalizer: Normalizer::default(),
        }
    }
}

fn geometric_mean(values: &[f64]) -> f64 {
    if values.is_empty() || values.contains(&0.0) {
        return 0.0;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

fn smooth_higher_orders(values: &mut [f64]) {
    for v in values.iter_mut().skip(1) {
        if *v == 0.0 {
            *v = PARENT_SMOOTHING;
        }
    }
}

pub fn parent(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    table: &Table,
    config: &ParentConfig,
) -> Result<Prf, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(MetricError::InvalidParameter(format!("lambda {} outside [0, 1]", config.lambda)));
    }
    if config.max_order == 0 {
        return Err(MetricError::InvalidOrder);
    }
    let lexicon = TableLexicon::new(table, config.normalizer);
    if lexicon.is_empty() {
        return Err(MetricError::EmptyTable);
    }
    parent_with_lexicon(candidate, reference, &lexicon, config)
}

pub fn parent_with_lexicon(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    lexicon: &TableLexicon,
    config: &ParentConfig,
) -> Result<Prf, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let cand = candidate.tokens();
    let refr = reference.tokens();

    let mut precisions = Vec::new();
    for n in 1..=config.max_order.min(cand.len()) {
        let cand_counts = ngram_counts(cand, n);
        let ref_counts = ngram_counts(refr, n);
        let (mut num, mut den) = (0.0, 0.0);
        for (gram, &count) in &cand_counts {
            let count = count as f64;
            let in_ref = (ref_counts.get(gram).copied().unwrap_or(0) as f64 / count).min(1.0);
            num += count * (in_ref + (1.0 - in_ref) * lexicon.entailment(gram));
            den += count;
        }
        precisions.push(num / den);
    }

    let mut ref_recalls = Vec::new();
    for n in 1..=config.max_order.min(refr.len()) {
        let cand_counts = ngram_counts(cand, n);
        let ref_counts = ngram_counts(refr, n);
        let (mut num, mut den) = (0.0, 0.0);
        for (gram, &count) in &ref_counts {
            let count = count as f64;
            let w = lexicon.entailment(gram);
            let in_cand = (cand_counts.get(gram).copied().unwrap_or(0) as f64 / count).min(1.0);
            num += count * w * in_cand;
            den += count * w;
        }
        ref_recalls.push(if den == 0.0 { 1.0 } else { num / den });
    }

    smooth_higher_orders(&mut precisions);
    smooth_higher_orders(&mut ref_recalls);
    let precision = geometric_mean(&precisions);
    let ref_recall = geometric_mean(&ref_recalls);

    let cand_keys: Vec<&str> = cand.iter().map(|t| entailment_key(t)).collect();
    let mut table_recall = if lexicon.cells.is_empty() {
        0.0
    } else {
        lexicon
            .cells
            .iter()
            .map(|cell| {
                let cell: Vec<&str> = cell.iter().map(String::as_str).collect();
                lcs_len(&cell, &cand_keys) as f64 / cell.len() as f64
            })
            .sum::<f64>()
            / lexicon.cells.len() as f64
    };
    if table_recall == 0.0 {
        table_recall = PARENT_SMOOTHING;
    }

    let recall = if ref_recall == 0.0 {
        0.0
    } else {
        ((1.0 - config.lambda) * ref_recall.ln() + config.lambda * table_recall.ln()).exp()
    };
    Ok(Prf { precision, recall, f: harmonic_mean(precision, recall) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(header: &[&str], rows: &[&[&str]]) -> Table {
        Table::new(
            "t",
            "",
            header.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        )
        .unwrap()
    }

    fn seq(s: &str) -> TokenSequence {
        Normalizer::default().tokenize(s)
    }

    #[test]
    fn full_entailment_identity() {
        let t = table(&["name", "team"], &[&["ana lima", "reds"]]);
        let s = seq("ana lima reds");
        let r = parent(&s, &s, &t, &ParentConfig::default()).unwrap();
        assert_eq!(r, Prf { precision: 1.0, recall: 1.0, f: 1.0 });
    }

    #[test]
    fn unsupported_candidate_scores_zero() {
        let t = table(&["name"], &[&["ana"]]);
        let r = parent(&seq("zebra quartz"), &seq("ana won"), &t, &ParentConfig::default()).unwrap();
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.f, 0.0);
    }

    #[test]
    fn edge_punctuation_is_ignored_for_entailment() {
        let t = table(&["victim"], &[&["Don Gordon"]]);
        let lex = TableLexicon::new(&t, Normalizer::Whitespace);
        assert!(lex.contains("gordon."));
        assert!(lex.contains("\"don"));
        assert!(!lex.contains("gordo"));
    }

    #[test]
    fn errors() {
        let t = table(&["a"], &[&["x"]]);
        assert!(matches!(parent(&seq("x"), &seq(""), &t, &ParentConfig::default()), Err(MetricError::EmptyReference)));
        let bad = ParentConfig { lambda: 2.0, ..ParentConfig::default() };
        assert!(parent(&seq("x"), &seq("x"), &t, &bad).is_err());
    }
}
