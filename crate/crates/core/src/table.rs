//! Table and dataset-record data model.
//!
//! A [`Table`] is a rectangular grid of raw cell strings with an id, a title
//! and a header. Construction goes through [`Table::new`], which enforces the
//! structural invariants; everything that is merely suspicious (duplicate
//! column names) is reported by [`validate_table`] instead of rejected.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("table id is empty")]
    EmptyId,
    #[error("empty header")]
    EmptyHeader,
    #[error("header column {column} is empty")]
    EmptyHeaderName { column: usize },
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
}

/// A rectangular table. Cells are stored verbatim; no numeric typing is inferred.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct Table {
    id: String,
    title: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

#[derive(Deserialize)]
struct RawTable {
    id: String,
    #[serde(default)]
    title: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl TryFrom<RawTable> for Table {
    type Error = TableError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        Table::new(raw.id, raw.title, raw.header, raw.rows)
    }
}

impl Table {
    /// Builds a table, trimming header names and checking rectangularity.
    ///
    /// Row numbers in errors are 1-based.
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        header: Vec<String>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, TableError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(TableError::EmptyId);
        }
        if header.is_empty() {
            return Err(TableError::EmptyHeader);
        }
        let header: Vec<String> = header.into_iter().map(|h| h.trim().to_string()).collect();
        if let Some(column) = header.iter().position(|h| h.is_empty()) {
            return Err(TableError::EmptyHeaderName { column });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(TableError::Ragged {
                    row: i + 1,
                    expected: header.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Table {
            id,
            title: title.into(),
            header,
            rows,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.header.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Keeps the given column positions (in the order given), all rows, same id and title.
    ///
    /// Panics if `columns` is empty or holds an out-of-range index.
    pub fn project(&self, columns: &[usize]) -> Table {
        assert!(!columns.is_empty(), "projection needs at least one column");
        let header = columns.iter().map(|&c| self.header[c].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|row| columns.iter().map(|&c| row[c].clone()).collect())
            .collect();
        Table {
            id: self.id.clone(),
            title: self.title.clone(),
            header,
            rows,
        }
    }
}

/// One dataset record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QtExample {
    pub example_id: String,
    pub table: Table,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "summary")]
    pub reference_summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyId,
    EmptyHeader,
    EmptyHeaderName { column: usize },
    DuplicateHeaderName { name: String, columns: Vec<usize> },
    /// `row` is 1-based.
    RaggedRow { row: usize, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "empty id"),
            Violation::EmptyHeader => write!(f, "empty header"),
            Violation::EmptyHeaderName { column } => write!(f, "empty header name at column {column}"),
            Violation::DuplicateHeaderName { name, columns } => {
                write!(f, "duplicate header name {name:?} at columns {columns:?}")
            }
            Violation::RaggedRow { row, expected, found } => {
                write!(f, "row {row} has {found} cells, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the raw parts of a table without constructing it.
pub fn validate_parts(id: &str, header: &[String], rows: &[Vec<String>]) -> ValidationReport {
    let mut violations = Vec::new();
    if id.trim().is_empty() {
        violations.push(Violation::EmptyId);
    }
    if header.is_empty() {
        violations.push(Violation::EmptyHeader);
    }
    let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
    for (column, name) in header.iter().enumerate() {
        let name = name.trim();
        if name.is_empty() {
            violations.push(Violation::EmptyHeaderName { column });
        } else {
            positions.entry(name).or_default().push(column);
        }
    }
    let mut duplicates: Vec<_> = positions
        .into_iter()
        .filter(|(_, cols)| cols.len() > 1)
        .map(|(name, columns)| Violation::DuplicateHeaderName {
            name: name.to_string(),
            columns,
        })
        .collect();
    duplicates.sort_by_key(|v| match v {
        Violation::DuplicateHeaderName { columns, .. } => columns[0],
        _ => 0,
    });
    violations.extend(duplicates);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            violations.push(Violation::RaggedRow {
                row: i + 1,
                expected: header.len(),
                found: row.len(),
            });
        }
    }
    ValidationReport { violations }
}

/// Reports invariant violations of a table. Duplicate header names are the
/// only violation a constructed [`Table`] can still carry.
pub fn validate_table(table: &Table) -> ValidationReport {
    validate_parts(&table.id, &table.header, &table.rows)
}
