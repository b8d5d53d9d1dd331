//! Table serialization: markdown for the decomposer, "key: value" flattening
//! for the summarizer, prompt construction and token budgets.

pub mod budget;
pub mod flatten;
pub mod markdown;
pub mod prompt;

pub use budget::{truncate_to_budget, BudgetError, Estimator, TokenBudget};
pub use flatten::{flatten_segments, flatten_table, FlattenStyle};
pub use markdown::{parse_markdown, parse_markdown_with, to_markdown, MarkdownError};
pub use prompt::{build_decomposition_prompt, build_summarization_prompt, PromptBundle, PromptTemplate, TemplateError};
