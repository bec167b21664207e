//! Text formats: whitespace-separated edge lists and numeric CSV datasets.
//!
//! Edge lists hold one edge per line, `u v w` or `u v wplus wminus`, with
//! 0-based node ids. Blank lines and lines starting with `#` are skipped.
//! The node count is one more than the largest id seen.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::clustering::SignedGraph;
use crate::error::{Error, Result};
use crate::graph::{Graph, WeightedGraph};
use crate::metric_learning::Dataset;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

struct Row {
    line: usize,
    u: usize,
    v: usize,
    w: Vec<f64>,
}

fn parse_rows(text: &str, path: &Path, width: usize) -> Result<(usize, Vec<Row>)> {
    let mut rows = Vec::new();
    let mut n = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.len() != 2 + width {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", 2 + width, tokens.len()),
            ));
        }
        let node = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| parse_error(path, line, format!("invalid node id {t:?}")))
        };
        let (u, v) = (node(tokens[0])?, node(tokens[1])?);
        if u == v {
            return Err(parse_error(path, line, format!("self-loop on node {u}")));
        }
        let w = tokens[2..]
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
                Ok(x) => Err(parse_error(
                    path,
                    line,
                    format!("weight {x} must be finite and nonnegative"),
                )),
                Err(_) => Err(parse_error(path, line, format!("invalid weight {t:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        n = n.max(u.max(v) + 1);
        rows.push(Row { line, u, v, w });
    }
    // report duplicates with the line of the second occurrence
    let mut seen = std::collections::HashMap::new();
    for r in &rows {
        let key = (r.u.min(r.v), r.u.max(r.v));
        if let Some(first) = seen.insert(key, r.line) {
            return Err(parse_error(
                path,
                r.line,
                format!(
                    "duplicate edge ({}, {}), first on line {first}",
                    key.0, key.1
                ),
            ));
        }
    }
    Ok((n, rows))
}

pub fn read_edge_list(path: &Path) -> Result<WeightedGraph> {
    let (n, rows) = parse_rows(&read_text(path)?, path, 1)?;
    let edges: Vec<(usize, usize, f64)> = rows.iter().map(|r| (r.u, r.v, r.w[0])).collect();
    WeightedGraph::new(n, &edges)
}

pub fn read_signed_edge_list(path: &Path) -> Result<SignedGraph> {
    let (n, rows) = parse_rows(&read_text(path)?, path, 2)?;
    let edges: Vec<(usize, usize, f64, f64)> =
        rows.iter().map(|r| (r.u, r.v, r.w[0], r.w[1])).collect();
    SignedGraph::new(n, &edges)
}

/// Writes `u v value` lines in edge order. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_edge_list(graph: &Graph, values: &[f64], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        out.push_str(&format!("{u} {v} {}\n", values[e]));
    }
    out
}

pub fn format_signed_edge_list(graph: &SignedGraph) -> String {
    let mut out = String::new();
    for (e, &(u, v)) in graph.graph.edges().iter().enumerate() {
        out.push_str(&format!("{u} {v} {} {}\n", graph.wplus[e], graph.wminus[e]));
    }
    out
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(contents).map_err(io_err)
}

pub fn write_edge_list(path: &Path, graph: &WeightedGraph) -> Result<()> {
    write_file(
        path,
        format_edge_list(&graph.graph, &graph.weights, &[]).as_bytes(),
    )
}

/// Comma-separated numeric rows, label in the last column. A first line that
/// does not parse as numbers is treated as a header.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            body.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if features.is_empty() && width.is_none() => {
                width = Some(body.split(',').count());
                continue;
            }
            Err(e) => return Err(parse_error(path, line, format!("non-numeric field: {e}"))),
        };
        if values.len() < 2 {
            return Err(parse_error(
                path,
                line,
                "need at least one feature and a label",
            ));
        }
        if let Some(w) = width {
            if values.len() != w {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected {w} columns, found {}", values.len()),
                ));
            }
        }
        width = Some(values.len());
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_error(path, line, "non-finite value"));
        }
        let label = values[values.len() - 1];
        if label.fract() != 0.0 {
            return Err(parse_error(
                path,
                line,
                format!("label {label} is not an integer"),
            ));
        }
        labels.push(label as i64);
        features.push(values[..values.len() - 1].to_vec());
    }
    if features.is_empty() {
        return Err(parse_error(path, 0, "no data rows"));
    }
    Dataset::new(features, labels)
}

pub fn format_dataset_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for (row, label) in data.features.iter().zip(&data.labels) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{label}\n"));
    }
    out
}
