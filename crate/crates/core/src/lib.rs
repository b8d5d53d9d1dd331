//! Query-focused table summarization with LLM-guided column decomposition.
//!
//! A table is narrowed to the columns a decomposer model names, flattened to
//! `key: value` text, summarized by a generation endpoint and scored with
//! BLEU, ROUGE, PARENT and human-agreement statistics.

pub mod annotate;
pub mod dataset;
pub mod decompose;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod serialize;
pub mod summarize;
pub mod table;

pub use dataset::{load_dataset, sample_split, DatasetError, DatasetSplit, SchemaMode};
pub use decompose::{create_decomposed_table, extract_relevant_columns, DecompositionResult, Decomposer};
pub use llm::{ClientConfig, Completer, LlmClient, LlmError, ModelEndpoint};
pub use metrics::{MetricConfig, MetricError, MetricReport};
pub use serialize::{flatten_table, parse_markdown, to_markdown, Estimator, TokenBudget};
pub use summarize::{summarize_example, Mode, SummaryResult, Summarizer};
pub use table::{QtExample, Table, TableError};
