//! "key: value" linearization of tables for sequence models.
//!
//! Format: `title: <title> ; <col>: <val>, <col>: <val> ; <col>: <val>, ...`
//! The title segment is omitted when the title is blank.

use serde::{Deserialize, Serialize};

use crate::table::Table;

pub const SEGMENT_SEPARATOR: &str = " ; ";
pub const PAIR_SEPARATOR: &str = ", ";
pub const KEY_VALUE_SEPARATOR: &str = ": ";
pub const TITLE_KEY: &str = "title";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlattenStyle {
    #[default]
    KeyvalueRows,
}

impl FlattenStyle {
    /// Human description recorded in run reports.
    pub fn describe(self) -> &'static str {
        match self {
            FlattenStyle::KeyvalueRows => "title: <title> ; <col>: <val>, <col>: <val> ; ... (rows joined by \" ; \")",
        }
    }
}

/// Segments in output order: optional title segment, then one per row.
pub fn flatten_segments(table: &Table, style: FlattenStyle) -> Vec<String> {
    let FlattenStyle::KeyvalueRows = style;
    let mut segments = Vec::with_capacity(table.num_rows() + 1);
    if !table.title().trim().is_empty() {
        segments.push(format!("{TITLE_KEY}{KEY_VALUE_SEPARATOR}{}", table.title()));
    }
    for row in table.rows() {
        let pairs: Vec<String> = table
            .header()
            .iter()
            .zip(row)
            .map(|(key, value)| format!("{key}{KEY_VALUE_SEPARATOR}{value}"))
            .collect();
        segments.push(pairs.join(PAIR_SEPARATOR));
    }
    segments
}

pub fn flatten_table(table: &Table, style: FlattenStyle) -> String {
    flatten_segments(table, style).join(SEGMENT_SEPARATOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(title: &str, header: &[&str], rows: &[&[&str]]) -> Table {
        Table::new(
            "t",
            title,
            header.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_cell() {
        let t = table("T", &["Name"], &[&["Ana"]]);
        assert_eq!(flatten_table(&t, FlattenStyle::KeyvalueRows), "title: T ; Name: Ana");
    }

    #[test]
    fn two_by_two_counts() {
        let t = table("T", &["a", "b"], &[&["1", "2"], &["3", "4"]]);
        let segments = flatten_segments(&t, FlattenStyle::KeyvalueRows);
        let rows = &segments[1..];
        assert_eq!(rows.len(), 2);
        for seg in rows {
            assert_eq!(seg.matches(KEY_VALUE_SEPARATOR).count(), 2);
        }
        assert_eq!(
            flatten_table(&t, FlattenStyle::KeyvalueRows),
            "title: T ; a: 1, b: 2 ; a: 3, b: 4"
        );
    }

    #[test]
    fn blank_title_is_omitted() {
        let t = table("  ", &["a"], &[&["1"]]);
        assert_eq!(flatten_table(&t, FlattenStyle::KeyvalueRows), "a: 1");
    }
}
