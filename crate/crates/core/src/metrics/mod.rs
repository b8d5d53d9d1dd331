//! Summary quality metrics and rater agreement.

pub mod bleu;
pub mod icc;
pub mod parent;
pub mod report;
pub mod rouge;
pub mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{bleu, corpus_bleu, modified_precision};
pub use icc::{icc, two_way_anova, AnovaTable, IccForm, RatingMatrix};
pub use parent::{parent, parent_with_lexicon, ParentConfig, TableLexicon};
pub use report::{aggregate, AggregateReport, MetricReport};
pub use rouge::{harmonic_mean, lcs_len, rouge_l, rouge_n, Prf};
pub use tokenize::{tokenize, Normalizer, TokenSequence};

use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("table has no tokens")]
    EmptyTable,
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("ratings have zero variance; ICC is undefined")]
    ZeroVariance,
    #[error("{0}")]
    InvalidParameter(String),
}

/// Settings shared by every per-example score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub normalizer: Normalizer,
    pub bleu_max_n: usize,
    pub parent_lambda: f64,
    pub parent_max_order: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            normalizer: Normalizer::default(),
            bleu_max_n: 4,
            parent_lambda: parent::DEFAULT_LAMBDA,
            parent_max_order: parent::DEFAULT_MAX_ORDER,
        }
    }
}

impl MetricConfig {
    pub fn parent_config(&self) -> ParentConfig {
        ParentConfig { lambda: self.parent_lambda, max_order: self.parent_max_order, normalizer: self.normalizer }
    }

    /// One-line description for report headers.
    pub fn describe(&self) -> String {
        format!(
            "tokens: {}; BLEU orders 1..{} sentence-level, epsilon {:e}; ROUGE F beta=1; PARENT lambda {}, orders 1..{}",
            self.normalizer,
            self.bleu_max_n,
            bleu::SMOOTHING_EPSILON,
            self.parent_lambda,
            self.parent_max_order
        )
    }
}

/// Scores one summary against its reference. PARENT is computed only when a
/// table is supplied. An empty candidate scores 0 everywhere.
pub fn score(
    candidate: &str,
    reference: &str,
    table: Option<&Table>,
    config: &MetricConfig,
) -> Result<MetricReport, MetricError> {
    let cand = config.normalizer.tokenize(candidate);
    let refr = config.normalizer.tokenize(reference);
    if refr.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if cand.is_empty() {
        return Ok(MetricReport { parent: table.map(|_| Prf::default()), ..MetricReport::default() });
    }
    let parent = match table {
        Some(t) => Some(parent::parent(&cand, &refr, t, &config.parent_config())?),
        None => None,
    };
    Ok(MetricReport {
        bleu: bleu(&cand, std::slice::from_ref(&refr), config.bleu_max_n)?,
        rouge1: rouge_n(&cand, &refr, 1)?,
        rouge2: rouge_n(&cand, &refr, 2)?,
        rouge_l: rouge_l(&cand, &refr)?,
        parent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_text_scores_one() {
        let r = score("Ana Lima won twice.", "ana lima won twice.", None, &MetricConfig::default()).unwrap();
        assert_eq!(r.bleu, 1.0);
        assert_eq!(r.rouge1.f, 1.0);
        assert_eq!(r.rouge2.f, 1.0);
        assert_eq!(r.rouge_l.f, 1.0);
        assert!(r.parent.is_none());
    }

    #[test]
    fn empty_candidate_is_zero() {
        let r = score("", "something", None, &MetricConfig::default()).unwrap();
        assert_eq!(r, MetricReport::default());
        assert_eq!(score("x", " ", None, &MetricConfig::default()), Err(MetricError::EmptyReference));
    }
}
