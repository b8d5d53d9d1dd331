//! Loading, validating and sampling QTSUMM-style datasets.
//!
//! Two containers are accepted: newline-delimited JSON records, or a single
//! top-level JSON array of records. Field names follow [`FieldMap`], which
//! can be overridden to follow upstream naming drift (e.g. `table_id`).

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::table::{QtExample, Table, TableError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("record {record}: malformed: {reason}")]
    Malformed { record: usize, reason: String },
    #[error("record {record}: {source}")]
    Table {
        record: usize,
        #[source]
        source: TableError,
    },
    #[error("record {record}: duplicate example_id {id:?}")]
    DuplicateId { record: usize, id: String },
    #[error("dataset contains no usable records")]
    Empty,
    #[error("sample size {size} exceeds population {population}")]
    SampleTooLarge { size: usize, population: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaMode {
    #[default]
    Strict,
    Lenient,
}

/// Names of the record fields in the source files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub example_id: String,
    pub query: String,
    pub summary: String,
    pub table: String,
    pub table_id: String,
    pub title: String,
    pub header: String,
    pub rows: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            example_id: "example_id".into(),
            query: "query".into(),
            summary: "summary".into(),
            table: "table".into(),
            table_id: "id".into(),
            title: "title".into(),
            header: "header".into(),
            rows: "rows".into(),
        }
    }
}

/// A record that lenient loading skipped. `record` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub record: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub examples: Vec<QtExample>,
    pub skipped: Vec<SkippedRecord>,
}

/// Loads a dataset file with the default field names.
pub fn load_dataset(path: &Path, mode: SchemaMode) -> Result<LoadedDataset, DatasetError> {
    load_dataset_with(path, mode, &FieldMap::default())
}

pub fn load_dataset_with(
    path: &Path,
    mode: SchemaMode,
    fields: &FieldMap,
) -> Result<LoadedDataset, DatasetError> {
    if !path.exists() {
        return Err(DatasetError::NotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, mode, fields)
}

/// Parses dataset text (JSONL or a top-level array).
pub fn parse_dataset(
    text: &str,
    mode: SchemaMode,
    fields: &FieldMap,
) -> Result<LoadedDataset, DatasetError> {
    let records: Vec<Result<Value, String>> = if text.trim_start().starts_with('[') {
        match serde_json::from_str::<Vec<Value>>(text) {
            Ok(values) => values.into_iter().map(Ok).collect(),
            Err(e) => {
                return Err(DatasetError::Malformed {
                    record: 1,
                    reason: format!("top-level array: {e}"),
                })
            }
        }
    } else {
        text.lines()
            .filter(|line| !line.trim().is_empty())
            .map(|line| serde_json::from_str::<Value>(line).map_err(|e| e.to_string()))
            .collect()
    };

    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in records.into_iter().enumerate() {
        let number = i + 1;
        let parsed = record
            .map_err(|reason| DatasetError::Malformed { record: number, reason })
            .and_then(|value| record_to_example(&value, number, fields))
            .and_then(|example| {
                if seen.contains(&example.example_id) {
                    Err(DatasetError::DuplicateId {
                        record: number,
                        id: example.example_id,
                    })
                } else {
                    Ok(example)
                }
            });
        match (parsed, mode) {
            (Ok(example), _) => {
                seen.insert(example.example_id.clone());
                examples.push(example);
            }
            (Err(e), SchemaMode::Strict) => return Err(e),
            (Err(e), SchemaMode::Lenient) => {
                log::warn!("skipping record {number}: {e}");
                skipped.push(SkippedRecord {
                    record: number,
                    reason: e.to_string(),
                });
            }
        }
    }
    if examples.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(LoadedDataset { examples, skipped })
}

fn record_to_example(value: &Value, record: usize, fields: &FieldMap) -> Result<QtExample, DatasetError> {
    let malformed = |reason: String| DatasetError::Malformed { record, reason };
    let obj = value
        .as_object()
        .ok_or_else(|| malformed("record is not an object".into()))?;
    let example_id = required_str(obj, &fields.example_id).map_err(malformed)?;
    if example_id.trim().is_empty() {
        return Err(malformed("empty example_id".into()));
    }
    let query = required_str(obj, &fields.query).map_err(malformed)?;
    if query.trim().is_empty() {
        return Err(malformed("empty query".into()));
    }
    let reference_summary = match obj.get(&fields.summary) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(malformed(format!("field {:?} is not a string", fields.summary))),
    };
    let table_obj = obj
        .get(&fields.table)
        .and_then(Value::as_object)
        .ok_or_else(|| malformed(format!("missing object field {:?}", fields.table)))?;
    let id = required_str(table_obj, &fields.table_id).map_err(malformed)?;
    let title = match table_obj.get(&fields.title) {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(malformed(format!("field {:?} is not a string", fields.title))),
    };
    let header = string_array(table_obj.get(&fields.header), &fields.header).map_err(malformed)?;
    let rows = match table_obj.get(&fields.rows) {
        Some(Value::Array(rows)) => rows
            .iter()
            .map(|row| string_array(Some(row), &fields.rows))
            .collect::<Result<Vec<_>, _>>()
            .map_err(malformed)?,
        _ => return Err(malformed(format!("missing array field {:?}", fields.rows))),
    };
    let table = Table::new(id, title, header, rows).map_err(|source| DatasetError::Table { record, source })?;
    Ok(QtExample {
        example_id,
        table,
        query,
        reference_summary,
    })
}

fn required_str(obj: &Map<String, Value>, key: &str) -> Result<String, String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("field {key:?} is not a string")),
        None => Err(format!("missing field {key:?}")),
    }
}

fn string_array(value: Option<&Value>, key: &str) -> Result<Vec<String>, String> {
    match value {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                other => Err(format!("{key:?} holds a non-string value {other}")),
            })
            .collect(),
        _ => Err(format!("missing array field {key:?}")),
    }
}

/// Writes examples as JSONL in the default schema.
pub fn write_dataset(path: &Path, examples: &[QtExample]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for example in examples {
        serde_json::to_writer(&mut out, example)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub examples: Vec<QtExample>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn ids(&self) -> Vec<&str> {
        self.examples.iter().map(|e| e.example_id.as_str()).collect()
    }
}

/// Uniform sample without replacement; the order is fixed by `seed`.
pub fn sample_split(
    examples: &[QtExample],
    name: SplitName,
    size: usize,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    let picked = sample_indices(examples.len(), size, seed)?;
    Ok(DatasetSplit {
        name,
        examples: picked.into_iter().map(|i| examples[i].clone()).collect(),
        seed,
    })
}

pub(crate) fn sample_indices(population: usize, size: usize, seed: u64) -> Result<Vec<usize>, DatasetError> {
    if size > population {
        return Err(DatasetError::SampleTooLarge { size, population });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, population, size).into_vec())
}

/// Sizes of the train / test / validation slices used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSizes {
    pub train: usize,
    pub test: usize,
    pub validation: usize,
}

impl Default for SliceSizes {
    fn default() -> Self {
        SliceSizes {
            train: 2000,
            test: 500,
            validation: 200,
        }
    }
}

/// Draws disjoint train, test and validation splits (by query-summary pair).
pub fn sample_slices(
    examples: &[QtExample],
    sizes: SliceSizes,
    seed: u64,
) -> Result<[DatasetSplit; 3], DatasetError> {
    let total = sizes.train + sizes.test + sizes.validation;
    let order = sample_indices(examples.len(), total, seed)?;
    let take = |range: std::ops::Range<usize>| -> Vec<QtExample> {
        order[range].iter().map(|&i| examples[i].clone()).collect()
    };
    let test_end = sizes.train + sizes.test;
    Ok([
        DatasetSplit { name: SplitName::Train, examples: take(0..sizes.train), seed },
        DatasetSplit { name: SplitName::Test, examples: take(sizes.train..test_end), seed },
        DatasetSplit { name: SplitName::Validation, examples: take(test_end..total), seed },
    ])
}
