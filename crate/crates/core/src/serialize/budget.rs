//! Token budgets and row-boundary truncation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::flatten::SEGMENT_SEPARATOR;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Number of whitespace-separated words.
    #[default]
    WhitespaceWords,
    /// Characters divided by four, rounded up.
    CharsDiv4,
}

impl Estimator {
    pub fn estimate(self, text: &str) -> usize {
        match self {
            Estimator::WhitespaceWords => text.split_whitespace().count(),
            Estimator::CharsDiv4 => text.chars().count().div_ceil(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BudgetError {
    #[error("token budget must be positive")]
    Zero,
    #[error("budget of {max_tokens} tokens cannot fit the first segment ({needed} tokens)")]
    TooSmall { max_tokens: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBudget")]
pub struct TokenBudget {
    max_tokens: usize,
    estimator: Estimator,
}

#[derive(Deserialize)]
struct RawBudget {
    max_tokens: usize,
    #[serde(default)]
    estimator: Estimator,
}

impl TryFrom<RawBudget> for TokenBudget {
    type Error = BudgetError;
    fn try_from(raw: RawBudget) -> Result<Self, BudgetError> {
        TokenBudget::new(raw.max_tokens, raw.estimator)
    }
}

impl TokenBudget {
    pub fn new(max_tokens: usize, estimator: Estimator) -> Result<Self, BudgetError> {
        if max_tokens == 0 {
            return Err(BudgetError::Zero);
        }
        Ok(TokenBudget { max_tokens, estimator })
    }

    /// 512-token preset (T5 / Flan-T5 input limit).
    pub fn preset_512() -> Self {
        TokenBudget { max_tokens: 512, estimator: Estimator::WhitespaceWords }
    }

    /// 1024-token preset (BART / OmniTab input limit).
    pub fn preset_1024() -> Self {
        TokenBudget { max_tokens: 1024, estimator: Estimator::WhitespaceWords }
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn estimate(&self, text: &str) -> usize {
        self.estimator.estimate(text)
    }
}

/// Keeps the longest prefix of whole `" ; "` segments whose estimate fits.
///
/// Returns the input unchanged when it already fits. Errors when not even the
/// first segment (the title segment, when present) fits.
pub fn truncate_to_budget(flattened: &str, budget: &TokenBudget) -> Result<(String, bool), BudgetError> {
    if budget.estimate(flattened) <= budget.max_tokens {
        return Ok((flattened.to_string(), false));
    }
    let segments: Vec<&str> = flattened.split(SEGMENT_SEPARATOR).collect();
    let mut kept = String::new();
    for (i, segment) in segments.iter().enumerate() {
        let candidate = if i == 0 {
            segment.to_string()
        } else {
            format!("{kept}{SEGMENT_SEPARATOR}{segment}")
        };
        if budget.estimate(&candidate) > budget.max_tokens {
            if i == 0 {
                return Err(BudgetError::TooSmall {
                    max_tokens: budget.max_tokens,
                    needed: budget.estimate(segment),
                });
            }
            break;
        }
        kept = candidate;
    }
    Ok((kept, true))
}
