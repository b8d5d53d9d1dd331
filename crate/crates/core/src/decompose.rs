//! LLM-guided column decomposition.
//!
//! The decomposer model is shown the question, the table in markdown and the
//! title, and asked which columns matter. Its free-text answer is scanned for
//! header names; matched columns are projected out of the source table with
//! every row kept. When no header name is found the whole table is kept, so
//! decomposition itself never fails.
//!
//! Matching is case-insensitive over word tokens (maximal alphanumeric runs),
//! so a header must appear as a whole phrase. Overlapping header names are
//! resolved longest first: in "Date of Birth" only the `Date of Birth` column
//! fires, not `Date`. Single-character headers must match case-sensitively, so
//! a column named `A` is not selected by the article "a".

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{LlmError, ModelEndpoint, Purpose};
use crate::serialize::budget::Estimator;
use crate::serialize::prompt::{build_decomposition_prompt, PromptTemplate};
use crate::table::{QtExample, Table};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub source_table_id: String,
    /// Names of the kept columns in source order (one entry per kept column).
    pub selected_columns: Vec<String>,
    pub raw_model_output: String,
    pub fallback_used: bool,
    pub decomposed: Table,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_fingerprint: Option<String>,
}

#[derive(Debug, Error)]
#[error("decomposition of example {example_id} failed: {source}")]
pub struct DecomposeError {
    pub example_id: String,
    #[source]
    pub source: LlmError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Token {
    lower: String,
    original: String,
    is_word: bool,
}

fn match_tokens(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            tokens.push(Token { lower: word.to_lowercase(), original: std::mem::take(word), is_word: true });
        }
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            flush(&mut word, &mut tokens);
            if !ch.is_whitespace() {
                tokens.push(Token { lower: ch.to_lowercase().collect(), original: ch.to_string(), is_word: false });
            }
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

struct HeaderKey {
    name: String,
    tokens: Vec<Token>,
    words_only: bool,
    case_sensitive: bool,
}

impl HeaderKey {
    fn new(name: &str) -> Option<HeaderKey> {
        let all = match_tokens(name);
        let words: Vec<Token> = all.iter().filter(|t| t.is_word).cloned().collect();
        let (tokens, words_only) = if words.is_empty() { (all, false) } else { (words, true) };
        if tokens.is_empty() {
            return None;
        }
        Some(HeaderKey {
            name: name.to_string(),
            tokens,
            words_only,
            case_sensitive: name.chars().count() == 1,
        })
    }

    fn token_eq(&self, a: &Token, b: &Token) -> bool {
        if self.case_sensitive {
            a.original == b.original
        } else {
            a.lower == b.lower
        }
    }
}

/// Returns, in header order, every column whose name appears in `output_text`.
///
/// Duplicate header names are kept positionally: each column bearing a
/// matched name contributes one entry.
pub fn extract_relevant_columns(output_text: &str, table: &Table) -> Vec<String> {
    matched_column_indices(output_text, table)
        .into_iter()
        .map(|i| table.header()[i].clone())
        .collect()
}

fn matched_column_indices(output_text: &str, table: &Table) -> Vec<usize> {
    let text = match_tokens(output_text);
    // Positions of word tokens within the full token stream.
    let word_positions: Vec<usize> = text.iter().enumerate().filter(|(_, t)| t.is_word).map(|(i, _)| i).collect();

    let mut keys: Vec<HeaderKey> = Vec::new();
    for name in table.header() {
        if !keys.iter().any(|k| &k.name == name) {
            keys.extend(HeaderKey::new(name));
        }
    }
    // Longest first; ties keep header order (stable sort).
    keys.sort_by_key(|k| std::cmp::Reverse(k.tokens.len()));

    let mut consumed = vec![false; text.len()];
    let mut matched_names: Vec<&str> = Vec::new();
    for key in &keys {
        let stream: Vec<usize> = if key.words_only { word_positions.clone() } else { (0..text.len()).collect() };
        let n = key.tokens.len();
        if stream.len() < n {
            continue;
        }
        let mut hit = false;
        for start in 0..=stream.len() - n {
            let window = &stream[start..start + n];
            let equal = window.iter().zip(&key.tokens).all(|(&pos, tok)| key.token_eq(&text[pos], tok));
            if !equal {
                continue;
            }
            let span = window[0]..=window[n - 1];
            if span.clone().any(|p| consumed[p]) {
                continue;
            }
            for p in span {
                consumed[p] = true;
            }
            hit = true;
        }
        if hit {
            matched_names.push(&key.name);
        }
    }

    table
        .header()
        .iter()
        .enumerate()
        .filter(|(_, name)| matched_names.contains(&name.as_str()))
        .map(|(i, _)| i)
        .collect()
}

/// Builds the decomposed table from the model's answer, falling back to all
/// columns when the answer names none.
pub fn create_decomposed_table(table: &Table, output_text: &str) -> DecompositionResult {
    let indices = matched_column_indices(output_text, table);
    let (indices, fallback_used) = if indices.is_empty() {
        ((0..table.num_columns()).collect::<Vec<_>>(), true)
    } else {
        (indices, false)
    };
    let decomposed = table.project(&indices);
    DecompositionResult {
        source_table_id: table.id().to_string(),
        selected_columns: decomposed.header().to_vec(),
        raw_model_output: output_text.to_string(),
        fallback_used,
        decomposed,
        request_fingerprint: None,
    }
}

/// Prompt template and endpoint for the decomposition call.
#[derive(Debug, Clone)]
pub struct Decomposer {
    pub endpoint: ModelEndpoint,
    pub template: PromptTemplate,
    pub estimator: Estimator,
}

impl Decomposer {
    pub fn new(endpoint: ModelEndpoint) -> Self {
        Decomposer {
            endpoint,
            template: PromptTemplate::default_decomposition(),
            estimator: Estimator::default(),
        }
    }

    /// Prompt → completion → column projection for one example.
    pub fn decompose(&self, example: &QtExample) -> Result<DecompositionResult, DecomposeError> {
        let table = &example.table;
        let prompt = build_decomposition_prompt(&self.template, table, &example.query, table.title(), self.estimator);
        let response = self
            .endpoint
            .call(prompt.full_text(), Purpose::Decompose)
            .map_err(|source| DecomposeError { example_id: example.example_id.clone(), source })?;
        let mut result = create_decomposed_table(table, &response.text);
        result.request_fingerprint = Some(response.request_fingerprint);
        Ok(result)
    }
}

pub fn decompose(example: &QtExample, decomposer: &Decomposer) -> Result<DecompositionResult, DecomposeError> {
    decomposer.decompose(example)
}
