//! Pipe-table markdown writer and its inverse.
//!
//! Cells are escaped so that [`parse_markdown`] recovers them exactly:
//! `\` becomes `\\`, `|` becomes `\|` and a newline becomes `\n`. Each cell is
//! padded with one space on either side, and the parser strips exactly that
//! padding, so cells with edge whitespace also survive.

use thiserror::Error;

use crate::table::{Table, TableError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkdownError {
    #[error("markdown table is empty")]
    Empty,
    #[error("line 2: missing or malformed separator line")]
    BadSeparator,
    #[error("line {line}: {found} cells, expected {expected}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: not a pipe-delimited row")]
    NotARow { line: usize },
    #[error(transparent)]
    Table(#[from] TableError),
}

fn escape_cell(cell: &str, out: &mut String) {
    for ch in cell.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

fn write_row<'a>(cells: impl Iterator<Item = &'a String>, out: &mut String) {
    out.push('|');
    for cell in cells {
        out.push(' ');
        escape_cell(cell, out);
        out.push_str(" |");
    }
}

/// Renders the table as a pipe table: header, separator, one line per row.
/// No trailing newline.
pub fn to_markdown(table: &Table) -> String {
    let mut out = String::new();
    write_row(table.header().iter(), &mut out);
    out.push_str("\n|");
    for _ in table.header() {
        out.push_str(" --- |");
    }
    for row in table.rows() {
        out.push('\n');
        write_row(row.iter(), &mut out);
    }
    out
}

/// Splits one line on unescaped pipes and unescapes each cell.
fn split_row(line: &str, line_no: usize) -> Result<Vec<String>, MarkdownError> {
    let trimmed = line.trim_end_matches(['\r']);
    let body = trimmed.trim_start();
    let body = body.strip_prefix('|').ok_or(MarkdownError::NotARow { line: line_no })?;

    let mut cells = Vec::new();
    let mut raw = String::new();
    let mut closed = false;
    let mut chars = body.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => {
                match chars.next() {
                    Some('n') => raw.push('\n'),
                    Some('r') => raw.push('\r'),
                    Some(other) => raw.push(other),
                    None => raw.push('\\'),
                }
                closed = false;
            }
            '|' => {
                cells.push(strip_padding(&raw));
                raw.clear();
                closed = true;
            }
            c => {
                raw.push(c);
                if !c.is_whitespace() {
                    closed = false;
                }
            }
        }
    }
    if !closed {
        // No closing pipe after the last cell.
        if !raw.trim().is_empty() {
            cells.push(strip_padding(&raw));
        }
    }
    Ok(cells)
}

fn strip_padding(raw: &str) -> String {
    let s = raw.strip_prefix(' ').unwrap_or(raw);
    s.strip_suffix(' ').unwrap_or(s).to_string()
}

fn is_separator_cell(cell: &str) -> bool {
    let c = cell.trim();
    let c = c.strip_prefix(':').unwrap_or(c);
    let c = c.strip_suffix(':').unwrap_or(c);
    !c.is_empty() && c.chars().all(|ch| ch == '-')
}

/// Parses a pipe table back into a [`Table`] with the given id and title.
pub fn parse_markdown_with(text: &str, id: &str, title: &str) -> Result<Table, MarkdownError> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let (head, rest) = lines.split_first().ok_or(MarkdownError::Empty)?;
    let header = split_row(head, 1)?;
    let (separator, body) = rest.split_first().ok_or(MarkdownError::BadSeparator)?;
    let sep_cells = split_row(separator, 2).map_err(|_| MarkdownError::BadSeparator)?;
    if sep_cells.len() != header.len() || !sep_cells.iter().all(|c| is_separator_cell(c)) {
        return Err(MarkdownError::BadSeparator);
    }
    let mut rows = Vec::with_capacity(body.len());
    for (i, line) in body.iter().enumerate() {
        let line_no = i + 3;
        let cells = split_row(line, line_no)?;
        if cells.len() != header.len() {
            return Err(MarkdownError::Ragged {
                line: line_no,
                expected: header.len(),
                found: cells.len(),
            });
        }
        rows.push(cells);
    }
    Ok(Table::new(id, title, header, rows)?)
}

/// Parses a pipe table. Markdown carries no id or title, so the result has id
/// `"markdown"` and an empty title; use [`parse_markdown_with`] to set them.
pub fn parse_markdown(text: &str) -> Result<Table, MarkdownError> {
    parse_markdown_with(text, "markdown", "")
}
