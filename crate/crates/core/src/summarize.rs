//! Query-focused summarization of one example, with or without decomposition.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{DecomposeError, DecompositionResult, Decomposer};
use crate::llm::{LlmError, ModelEndpoint, Purpose};
use crate::serialize::budget::{truncate_to_budget, BudgetError, TokenBudget};
use crate::serialize::flatten::{flatten_table, FlattenStyle};
use crate::serialize::prompt::{build_summarization_prompt, PromptBundle, PromptTemplate};
use crate::table::{QtExample, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Original,
    Decomposed,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Original, Mode::Decomposed];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Original => "original",
            Mode::Decomposed => "decomposed",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" => Ok(Mode::Original),
            "decomposed" => Ok(Mode::Decomposed),
            other => Err(format!("unknown mode {other:?} (expected original or decomposed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResult {
    pub example_id: String,
    pub mode: Mode,
    pub summary_text: String,
    pub truncated_input: bool,
    /// Present exactly when `mode` is decomposed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionResult>,
    /// Estimated size of the full summarization prompt.
    pub prompt_estimate: usize,
    pub summary_fingerprint: String,
}

impl SummaryResult {
    pub fn decomposition_fingerprint(&self) -> Option<&str> {
        self.decomposition.as_ref()?.request_fingerprint.as_deref()
    }
}

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("decomposed mode requested but no decomposer is configured")]
    MissingDecomposer,
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error("example {example_id}: {source}")]
    Budget {
        example_id: String,
        #[source]
        source: BudgetError,
    },
    #[error("summarization of example {example_id} failed: {source}")]
    Llm {
        example_id: String,
        #[source]
        source: LlmError,
    },
    #[error("summarizer returned an empty summary for example {example_id}")]
    EmptySummary { example_id: String },
}

impl SummarizeError {
    pub fn example_id(&self) -> Option<&str> {
        match self {
            SummarizeError::MissingDecomposer => None,
            SummarizeError::Decompose(e) => Some(&e.example_id),
            SummarizeError::Budget { example_id, .. }
            | SummarizeError::Llm { example_id, .. }
            | SummarizeError::EmptySummary { example_id } => Some(example_id),
        }
    }
}

/// Endpoint, template and input budget for the summarization call.
#[derive(Debug, Clone)]
pub struct Summarizer {
    pub endpoint: ModelEndpoint,
    pub template: PromptTemplate,
    pub budget: TokenBudget,
    pub style: FlattenStyle,
}

impl Summarizer {
    pub fn new(endpoint: ModelEndpoint, budget: TokenBudget) -> Self {
        Summarizer {
            endpoint,
            template: PromptTemplate::default_summarization(),
            budget,
            style: FlattenStyle::default(),
        }
    }

    fn bundle(&self, flattened: &str, question: &str, title: &str) -> (PromptBundle, usize) {
        let bundle = build_summarization_prompt(&self.template, flattened, question, title, self.budget.estimator());
        let estimate = self.budget.estimate(&bundle.full_text());
        (bundle, estimate)
    }

    /// Flattens `table` and cuts whole rows until the complete prompt fits the budget.
    ///
    /// Returns the prompt, its estimate and whether rows were dropped.
    pub fn prepare(&self, table: &Table, question: &str) -> Result<(PromptBundle, usize, bool), BudgetError> {
        let flattened = flatten_table(table, self.style);
        let (bundle, estimate) = self.bundle(&flattened, question, table.title());
        let max = self.budget.max_tokens();
        if estimate <= max {
            return Ok((bundle, estimate, false));
        }
        let (_, overhead) = self.bundle("", question, table.title());
        let mut room = max.saturating_sub(overhead);
        loop {
            let inner = TokenBudget::new(room, self.budget.estimator()).map_err(|_| BudgetError::TooSmall {
                max_tokens: max,
                needed: overhead + 1,
            })?;
            let (cut, _) = truncate_to_budget(&flattened, &inner).map_err(|e| match e {
                BudgetError::TooSmall { needed, .. } => BudgetError::TooSmall { max_tokens: max, needed: needed + overhead },
                other => other,
            })?;
            let (bundle, estimate) = self.bundle(&cut, question, table.title());
            if estimate <= max {
                return Ok((bundle, estimate, true));
            }
            // Estimators that are not additive across the join can overshoot by a little.
            room -= 1;
        }
    }

    pub fn summarize_table(&self, example_id: &str, table: &Table, question: &str) -> Result<Summary, SummarizeError> {
        let (bundle, prompt_estimate, truncated_input) = self
            .prepare(table, question)
            .map_err(|source| SummarizeError::Budget { example_id: example_id.to_string(), source })?;
        let response = self
            .endpoint
            .call(bundle.full_text(), Purpose::Summarize)
            .map_err(|source| SummarizeError::Llm { example_id: example_id.to_string(), source })?;
        if response.text.trim().is_empty() {
            return Err(SummarizeError::EmptySummary { example_id: example_id.to_string() });
        }
        Ok(Summary {
            text: response.text,
            truncated_input,
            prompt_estimate,
            fingerprint: response.request_fingerprint,
        })
    }
}

/// Output of one summarization call.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub truncated_input: bool,
    pub prompt_estimate: usize,
    pub fingerprint: String,
}

/// Runs one example through the chosen arm.
///
/// Decomposed mode asks the decomposer first and summarizes the projected
/// table; original mode summarizes the full table.
pub fn summarize_example(
    example: &QtExample,
    mode: Mode,
    summarizer: &Summarizer,
    decomposer: Option<&Decomposer>,
) -> Result<SummaryResult, SummarizeError> {
    let decomposition = match mode {
        Mode::Original => None,
        Mode::Decomposed => Some(decomposer.ok_or(SummarizeError::MissingDecomposer)?.decompose(example)?),
    };
    summarize_with(example, mode, summarizer, decomposition)
}

/// Like [`summarize_example`] but with a decomposition computed elsewhere.
pub fn summarize_with(
    example: &QtExample,
    mode: Mode,
    summarizer: &Summarizer,
    decomposition: Option<DecompositionResult>,
) -> Result<SummaryResult, SummarizeError> {
    let table = match (&decomposition, mode) {
        (Some(d), Mode::Decomposed) => &d.decomposed,
        (None, Mode::Original) => &example.table,
        (None, Mode::Decomposed) => return Err(SummarizeError::MissingDecomposer),
        (Some(_), Mode::Original) => return summarize_with(example, mode, summarizer, None),
    };
    let summary = summarizer.summarize_table(&example.example_id, table, &example.query)?;
    Ok(SummaryResult {
        example_id: example.example_id.clone(),
        mode,
        summary_text: summary.text,
        truncated_input: summary.truncated_input,
        decomposition,
        prompt_estimate: summary.prompt_estimate,
        summary_fingerprint: summary.fingerprint,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::llm::{fingerprint, Completer, LlmRequest, LlmResponse};
    use crate::serialize::budget::Estimator;

    /// Echoes the prompt for summaries; answers `columns` for decompositions.
    struct Scripted {
        columns: String,
        seen: Mutex<Vec<String>>,
    }

    impl Completer for Scripted {
        fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
            self.seen.lock().unwrap().push(request.prompt.clone());
            let text = match request.purpose {
                Purpose::Decompose => self.columns.clone(),
                Purpose::Summarize => request.prompt.clone(),
            };
            Ok(LlmResponse {
                text,
                cached: false,
                latency_ms: 0,
                request_fingerprint: fingerprint(request),
                attempts: 1,
            })
        }
    }

    fn setup(columns: &str) -> (Arc<Scripted>, Summarizer, Decomposer) {
        let mock = Arc::new(Scripted { columns: columns.to_string(), seen: Mutex::new(Vec::new()) });
        let endpoint = ModelEndpoint::new(mock.clone(), "mock");
        (mock, Summarizer::new(endpoint.clone(), TokenBudget::preset_512()), Decomposer::new(endpoint))
    }

    fn example(rows: usize) -> QtExample {
        QtExample {
            example_id: "ex1".into(),
            table: Table::new(
                "t1",
                "Results",
                vec!["Year".into(), "Team".into(), "Goals".into()],
                (0..rows).map(|i| vec![format!("{}", 2000 + i), format!("club{i}"), format!("{i}")]).collect(),
            )
            .unwrap(),
            query: "How many goals?".into(),
            reference_summary: None,
        }
    }

    #[test]
    fn original_mode_sees_full_table() {
        let (_, s, _) = setup("");
        let ex = example(2);
        let r = summarize_example(&ex, Mode::Original, &s, None).unwrap();
        assert!(r.summary_text.contains(&flatten_table(&ex.table, FlattenStyle::default())));
        assert!(r.decomposition.is_none());
        assert!(!r.truncated_input);
    }

    #[test]
    fn decomposed_prompt_holds_only_selected_pairs() {
        let (mock, s, d) = setup("The relevant column is Goals.");
        let r = summarize_example(&example(2), Mode::Decomposed, &s, Some(&d)).unwrap();
        let prompt = mock.seen.lock().unwrap().last().unwrap().clone();
        assert!(prompt.contains("title: Results ; Goals: 0 ; Goals: 1"));
        assert!(!prompt.contains("Team:") && !prompt.contains("Year:"));
        assert_eq!(r.decomposition.unwrap().selected_columns, ["Goals"]);
    }

    #[test]
    fn oversized_table_is_cut_to_budget() {
        let (_, s, _) = setup("");
        let r = summarize_example(&example(300), Mode::Original, &s, None).unwrap();
        assert!(r.truncated_input);
        assert!(r.prompt_estimate <= 512);
        assert_eq!(Estimator::WhitespaceWords.estimate(&r.summary_text), r.prompt_estimate);
    }

    #[test]
    fn char_estimator_also_fits() {
        let (_, mut s, _) = setup("");
        s.budget = TokenBudget::new(300, Estimator::CharsDiv4).unwrap();
        let r = summarize_example(&example(200), Mode::Original, &s, None).unwrap();
        assert!(r.truncated_input);
        assert!(Estimator::CharsDiv4.estimate(&r.summary_text) <= 300);
    }

    #[test]
    fn decomposed_without_decomposer() {
        let (_, s, _) = setup("");
        assert!(matches!(
            summarize_example(&example(1), Mode::Decomposed, &s, None),
            Err(SummarizeError::MissingDecomposer)
        ));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Decomposed".parse::<Mode>().unwrap(), Mode::Decomposed);
        assert!("both".parse::<Mode>().is_err());
    }
}
