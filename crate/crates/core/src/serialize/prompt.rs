//! Prompt templates for the decomposer and the summarizer.
//!
//! Templates are plain text with `{question}`, `{table_markdown}`, `{title}`,
//! `{flattened}` and `{columns}` placeholders. Substitution is a single pass,
//! so placeholder-like text inside a question or cell is never expanded.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::budget::Estimator;
use super::markdown::to_markdown;
use crate::table::Table;

/// Reconstructed decomposition instructions: list the relevant columns verbatim.
pub const DEFAULT_DECOMPOSITION_PREAMBLE: &str =
    "You are given a table in markdown format and a question about it.";

pub const DEFAULT_DECOMPOSITION_BODY: &str = "\
Identify which columns of the table are relevant to answering the question. \
Available columns: {columns}. \
List only the relevant column names, copied exactly as they appear in the table header, separated by commas. \
Do not answer the question.

Question: {question}

Table:
{table_markdown}

Title: {title}";

pub const DEFAULT_SUMMARIZATION_PREAMBLE: &str =
    "You write short, factual summaries of tables that answer a user's question.";

pub const DEFAULT_SUMMARIZATION_BODY: &str = "\
Using only the information in the table below, write a concise natural-language summary that answers the question.

Table: {flattened}

Question: {question}

Summary:";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("failed to read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template is missing placeholder {{{0}}}")]
    MissingPlaceholder(&'static str),
    #[error("placeholders must appear in the order question, table_markdown, title")]
    Order,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub preamble: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TemplateKind {
    Decomposition,
    Summarization,
}

impl PromptTemplate {
    pub fn default_decomposition() -> Self {
        PromptTemplate {
            preamble: DEFAULT_DECOMPOSITION_PREAMBLE.into(),
            body: DEFAULT_DECOMPOSITION_BODY.into(),
        }
    }

    pub fn default_summarization() -> Self {
        PromptTemplate {
            preamble: DEFAULT_SUMMARIZATION_PREAMBLE.into(),
            body: DEFAULT_SUMMARIZATION_BODY.into(),
        }
    }

    pub fn decomposition(preamble: impl Into<String>, body: impl Into<String>) -> Result<Self, TemplateError> {
        let t = PromptTemplate { preamble: preamble.into(), body: body.into() };
        t.check(TemplateKind::Decomposition)?;
        Ok(t)
    }

    pub fn summarization(preamble: impl Into<String>, body: impl Into<String>) -> Result<Self, TemplateError> {
        let t = PromptTemplate { preamble: preamble.into(), body: body.into() };
        t.check(TemplateKind::Summarization)?;
        Ok(t)
    }

    /// Loads a decomposition body from a file; `preamble` of `None` keeps the default.
    pub fn load_decomposition(body_path: &Path, preamble: Option<&str>) -> Result<Self, TemplateError> {
        let body = read(body_path)?;
        Self::decomposition(preamble.unwrap_or(DEFAULT_DECOMPOSITION_PREAMBLE), body)
    }

    pub fn load_summarization(body_path: &Path, preamble: Option<&str>) -> Result<Self, TemplateError> {
        let body = read(body_path)?;
        Self::summarization(preamble.unwrap_or(DEFAULT_SUMMARIZATION_PREAMBLE), body)
    }

    fn check(&self, kind: TemplateKind) -> Result<(), TemplateError> {
        let find = |name: &'static str| {
            self.body
                .find(&format!("{{{name}}}"))
                .ok_or(TemplateError::MissingPlaceholder(name))
        };
        match kind {
            TemplateKind::Decomposition => {
                let q = find("question")?;
                let t = find("table_markdown")?;
                let ti = find("title")?;
                if !(q < t && t < ti) {
                    return Err(TemplateError::Order);
                }
            }
            TemplateKind::Summarization => {
                find("flattened")?;
                find("question")?;
            }
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, TemplateError> {
    fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Substitutes `{name}` placeholders in one left-to-right pass.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let substituted = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(key, _)| *key == name)
                .map(|(_, value)| (close, *value))
        });
        match substituted {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_or_preamble: String,
    pub body: String,
    /// Estimate of `body` under the configured estimator.
    pub token_estimate: usize,
}

impl PromptBundle {
    /// Preamble and body as sent to the endpoint.
    pub fn full_text(&self) -> String {
        if self.system_or_preamble.trim().is_empty() {
            self.body.clone()
        } else {
            format!("{}\n\n{}", self.system_or_preamble, self.body)
        }
    }
}

pub fn build_decomposition_prompt(
    template: &PromptTemplate,
    table: &Table,
    question: &str,
    title: &str,
    estimator: Estimator,
) -> PromptBundle {
    let markdown = to_markdown(table);
    let columns = table.header().join(", ");
    let body = render(
        &template.body,
        &[
            ("columns", &columns),
            ("question", question),
            ("table_markdown", &markdown),
            ("title", title),
        ],
    );
    PromptBundle {
        system_or_preamble: template.preamble.clone(),
        token_estimate: estimator.estimate(&body),
        body,
    }
}

pub fn build_summarization_prompt(
    template: &PromptTemplate,
    flattened: &str,
    question: &str,
    title: &str,
    estimator: Estimator,
) -> PromptBundle {
    let body = render(
        &template.body,
        &[("flattened", flattened), ("question", question), ("title", title)],
    );
    PromptBundle {
        system_or_preamble: template.preamble.clone(),
        token_estimate: estimator.estimate(&body),
        body,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        Table::new(
            "t1",
            "Season 4",
            vec!["Date".into(), "Opponent".into(), "Score".into()],
            vec![vec!["May 1".into(), "Reds".into(), "3-1".into()]],
        )
        .unwrap()
    }

    #[test]
    fn render_is_single_pass() {
        let out = render("a {x} b {y} {unknown}", &[("x", "{y}"), ("y", "Y")]);
        assert_eq!(out, "a {y} b Y {unknown}");
        assert_eq!(render("{", &[]), "{");
        assert_eq!(render("}{x", &[("x", "1")]), "}{x");
    }

    #[test]
    fn decomposition_prompt_layout() {
        let t = table();
        let q = "Who won on May 1?";
        let p = build_decomposition_prompt(&PromptTemplate::default_decomposition(), &t, q, t.title(), Estimator::WhitespaceWords);
        let md = to_markdown(&t);
        assert!(p.body.contains(&md));
        assert_eq!(p.body.matches(q).count(), 1);
        assert!(p.body.contains("Available columns: Date, Opponent, Score."));
        let instr = p.body.find("relevant").unwrap();
        let qi = p.body.find(q).unwrap();
        let ti = p.body.find(&md).unwrap();
        let title = p.body.rfind("Title: Season 4").unwrap();
        assert!(instr < qi && qi < ti && ti < title);
        assert_eq!(p.token_estimate, Estimator::WhitespaceWords.estimate(&p.body));
    }

    #[test]
    fn summarization_prompt_contents() {
        let p = build_summarization_prompt(
            &PromptTemplate::default_summarization(),
            "a: 1",
            "what is a?",
            "",
            Estimator::CharsDiv4,
        );
        assert!(p.body.contains("a: 1") && p.body.contains("what is a?"));
        assert_eq!(p.body.matches("title:").count(), 0);
        assert_eq!(p.token_estimate, Estimator::CharsDiv4.estimate(&p.body));
    }

    #[test]
    fn template_validation() {
        assert!(matches!(
            PromptTemplate::decomposition("", "{table_markdown} {question} {title}"),
            Err(TemplateError::Order)
        ));
        assert!(matches!(
            PromptTemplate::summarization("", "{question}"),
            Err(TemplateError::MissingPlaceholder("flattened"))
        ));
        assert!(PromptTemplate::decomposition("", DEFAULT_DECOMPOSITION_BODY).is_ok());
    }
}
