//! Notebook file model: parse `.ipynb` JSON and reconstruct executed-cell order.

use serde::{Deserialize, Serialize};

use crate::error::NotebookError;

/// One cell of a notebook, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeCell {
    /// Position of the cell in the file, stable across operations.
    pub index: usize,
    /// Execution count; absent means the cell was never executed.
    pub execution_count: Option<u64>,
    /// Cell source text with original line breaks.
    pub source: String,
    /// True for `code` cells; markdown and raw cells are retained but flagged.
    pub is_code: bool,
}

/// A parsed notebook: every cell in file order plus format metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notebook {
    pub cells: Vec<CodeCell>,
    pub format_version: (i64, i64),
    pub source_path: String,
}

/// Controls how `executed_cells` treats duplicate execution counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    /// Duplicate counts are an error (clean corpora guarantee unique counts).
    #[default]
    Error,
    /// Keep the last occurrence in file order; real notebooks may carry stale counts.
    LastWins,
}

fn line_col(bytes: &[u8], offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for &b in bytes.iter().take(offset) {
        if b == b'\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut cur_line = 1;
    let mut offset = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if cur_line == line {
            offset = i;
            break;
        }
        if b == b'\n' {
            cur_line += 1;
        }
    }
    offset + column.saturating_sub(1)
}

/// Join an nbformat `source` field, which is either a string or a list of lines.
fn join_source(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Array(parts) => parts
            .iter()
            .map(|p| p.as_str().unwrap_or_default())
            .collect::<String>(),
        _ => String::new(),
    }
}

/// Parse raw `.ipynb` bytes into a [`Notebook`].
///
/// Markdown and raw cells are retained but flagged non-code. Only format
/// version 4.x is accepted.
pub fn parse_notebook(bytes: &[u8], source_path: &str) -> Result<Notebook, NotebookError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let (line, column) = line_col(bytes, e.valid_up_to());
        NotebookError::Malformed {
            offset: e.valid_up_to(),
            line,
            column,
            message: "input is not UTF-8".into(),
        }
    })?;
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| NotebookError::Malformed {
            offset: byte_offset(bytes, e.line(), e.column()),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;

    let major = doc.get("nbformat").and_then(|v| v.as_i64()).unwrap_or(0);
    let minor = doc
        .get("nbformat_minor")
        .and_then(|v| v.as_i64())
        .unwrap_or(0);
    if major != 4 {
        return Err(NotebookError::UnsupportedVersion { major, minor });
    }

    let cells = doc
        .get("cells")
        .and_then(|v| v.as_array())
        .ok_or(NotebookError::MissingCells)?;

    let mut out = Vec::with_capacity(cells.len());
    for (index, cell) in cells.iter().enumerate() {
        let kind = cell
            .get("cell_type")
            .and_then(|v| v.as_str())
            .ok_or_else(|| NotebookError::BadCell {
                index,
                message: "missing cell_type".into(),
            })?;
        let is_code = kind == "code";
        let execution_count = if is_code {
            match cell.get("execution_count") {
                None | Some(serde_json::Value::Null) => None,
                Some(v) => {
                    let n = v.as_i64().ok_or_else(|| NotebookError::BadCell {
                        index,
                        message: "execution_count is not an integer".into(),
                    })?;
                    if n <= 0 {
                        return Err(NotebookError::BadCell {
                            index,
                            message: format!("execution_count must be positive, got {n}"),
                        });
                    }
                    Some(n as u64)
                }
            }
        } else {
            None
        };
        let source = cell.get("source").map(join_source).unwrap_or_default();
        out.push(CodeCell {
            index,
            execution_count,
            source,
            is_code,
        });
    }

    Ok(Notebook {
        cells: out,
        format_version: (major, minor),
        source_path: source_path.to_string(),
    })
}

/// Code cells with a present execution count, sorted ascending by count.
///
/// Unexecuted and non-code cells are excluded. Duplicate counts follow
/// `policy`.
pub fn executed_cells(
    nb: &Notebook,
    policy: DuplicatePolicy,
) -> Result<Vec<CodeCell>, NotebookError> {
    let mut executed: Vec<&CodeCell> = nb
        .cells
        .iter()
        .filter(|c| c.is_code && c.execution_count.is_some())
        .collect();
    executed.sort_by_key(|c| (c.execution_count.unwrap(), c.index));

    let mut out: Vec<CodeCell> = Vec::with_capacity(executed.len());
    for cell in executed {
        if let Some(prev) = out.last() {
            if prev.execution_count == cell.execution_count {
                match policy {
                    DuplicatePolicy::Error => {
                        return Err(NotebookError::DuplicateExecutionCount {
                            count: cell.execution_count.unwrap(),
                            first: prev.index,
                            second: cell.index,
                        });
                    }
                    DuplicatePolicy::LastWins => {
                        out.pop();
                    }
                }
            }
        }
        out.push(cell.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nb_json(cells: &[(&str, Option<u64>, &str)]) -> Vec<u8> {
        let cells: Vec<serde_json::Value> = cells
            .iter()
            .map(|(kind, count, src)| {
                serde_json::json!({
                    "cell_type": kind,
                    "execution_count": count,
                    "source": src,
                })
            })
            .collect();
        serde_json::to_vec(&serde_json::json!({
            "nbformat": 4, "nbformat_minor": 5, "cells": cells,
        }))
        .unwrap()
    }

    #[test]
    fn single_executed_code_cell() {
        let nb = parse_notebook(&nb_json(&[("code", Some(1), "x = 1\n")]), "t.ipynb").unwrap();
        assert_eq!(nb.cells.len(), 1);
        assert_eq!(nb.cells[0].execution_count, Some(1));
        assert!(nb.cells[0].is_code);
        assert_eq!(executed_cells(&nb, DuplicatePolicy::Error).unwrap().len(), 1);
    }

    #[test]
    fn null_count_is_unexecuted() {
        let nb = parse_notebook(&nb_json(&[("code", None, "y\n")]), "t.ipynb").unwrap();
        assert_eq!(nb.cells[0].execution_count, None);
        assert!(executed_cells(&nb, DuplicatePolicy::Error).unwrap().is_empty());
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let mut bytes = nb_json(&[("code", Some(1), "x")]);
        bytes.truncate(bytes.len() / 2);
        match parse_notebook(&bytes, "t.ipynb") {
            Err(NotebookError::Malformed { offset, .. }) => assert!(offset > 0),
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_version() {
        let bytes =
            serde_json::to_vec(&serde_json::json!({"nbformat": 3, "cells": []})).unwrap();
        assert!(matches!(
            parse_notebook(&bytes, "t.ipynb"),
            Err(NotebookError::UnsupportedVersion { major: 3, .. })
        ));
    }

    #[test]
    fn execution_order_sorts_by_count() {
        let nb = parse_notebook(
            &nb_json(&[("code", Some(2), "b"), ("code", None, "c"), ("code", Some(1), "a")]),
            "t.ipynb",
        )
        .unwrap();
        let order = executed_cells(&nb, DuplicatePolicy::Error).unwrap();
        let counts: Vec<u64> = order.iter().map(|c| c.execution_count.unwrap()).collect();
        assert_eq!(counts, vec![1, 2]);
        assert_eq!(order[0].source, "a");
    }

    #[test]
    fn identity_order_for_clean_counts() {
        let cells: Vec<(&str, Option<u64>, &str)> =
            vec![("code", Some(1), "a"), ("code", Some(2), "b"), ("code", Some(3), "c")];
        let nb = parse_notebook(&nb_json(&cells), "t.ipynb").unwrap();
        let order = executed_cells(&nb, DuplicatePolicy::Error).unwrap();
        let idx: Vec<usize> = order.iter().map(|c| c.index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
    }

    #[test]
    fn duplicate_counts_error_by_default() {
        let nb = parse_notebook(
            &nb_json(&[("code", Some(1), "a"), ("code", Some(1), "b")]),
            "t.ipynb",
        )
        .unwrap();
        assert!(matches!(
            executed_cells(&nb, DuplicatePolicy::Error),
            Err(NotebookError::DuplicateExecutionCount { count: 1, .. })
        ));
        let last = executed_cells(&nb, DuplicatePolicy::LastWins).unwrap();
        assert_eq!(last.len(), 1);
        assert_eq!(last[0].source, "b");
    }

    #[test]
    fn markdown_cells_flagged_non_code() {
        let nb = parse_notebook(
            &nb_json(&[("markdown", None, "# title"), ("code", Some(1), "x=1")]),
            "t.ipynb",
        )
        .unwrap();
        assert!(!nb.cells[0].is_code);
        assert_eq!(executed_cells(&nb, DuplicatePolicy::Error).unwrap().len(), 1);
    }

    #[test]
    fn source_as_line_list_joins() {
        let bytes = serde_json::to_vec(&serde_json::json!({
            "nbformat": 4, "nbformat_minor": 2,
            "cells": [{"cell_type": "code", "execution_count": 1,
                       "source": ["import numpy as np\n", "x = np.ones(3)\n"]}],
        }))
        .unwrap();
        let nb = parse_notebook(&bytes, "t.ipynb").unwrap();
        assert_eq!(nb.cells[0].source, "import numpy as np\nx = np.ones(3)\n");
    }

    #[test]
    fn counts_strictly_increasing() {
        let nb = parse_notebook(
            &nb_json(&[("code", Some(5), "e"), ("code", Some(3), "c"), ("code", Some(4), "d")]),
            "t.ipynb",
        )
        .unwrap();
        let order = executed_cells(&nb, DuplicatePolicy::Error).unwrap();
        let counts: Vec<u64> = order.iter().map(|c| c.execution_count.unwrap()).collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn line_col_of_offset() {
        let bytes = b"ab\ncd\nef";
        assert_eq!(line_col(bytes, 0), (1, 1));
        assert_eq!(line_col(bytes, 4), (2, 2));
        assert_eq!(line_col(bytes, 6), (3, 1));
    }
}
