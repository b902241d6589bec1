//! Text formats for graphs and vertex functions.
//!
//! Graph files start with a header line `n m` followed by `m` lines `i j`
//! (0-based vertex indices). Vertex functions are either one decimal per
//! line or a JSON array. In both formats blank lines and lines starting
//! with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::graph::{Graph, GraphError, VertexFunction};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid function: {0}")]
    Function(String),
}

fn line_error(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Line {
        line,
        message: message.into(),
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn two_indices(line: usize, text: &str) -> Result<(usize, usize), ParseError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    let [a, b] = fields[..] else {
        return Err(line_error(
            line,
            format!("expected two integers, found {:?}", text),
        ));
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| line_error(line, format!("not a vertex index: {s:?}")))
    };
    Ok((parse(a)?, parse(b)?))
}

pub fn parse_graph_str(text: &str) -> Result<Graph, ParseError> {
    let mut lines = content_lines(text);
    let Some((header_line, header)) = lines.next() else {
        return Err(line_error(1, "missing header `n m`"));
    };
    let (n, m) = two_indices(header_line, header)?;
    if n < 2 {
        return Err(line_error(
            header_line,
            GraphError::TooFewVertices(n).to_string(),
        ));
    }
    let mut edges = Vec::with_capacity(m);
    let mut seen = std::collections::HashSet::new();
    let mut last_line = header_line;
    for (line, text) in lines {
        if edges.len() == m {
            return Err(line_error(
                line,
                format!("more than the {m} edges declared in the header"),
            ));
        }
        let (i, j) = two_indices(line, text)?;
        for v in [i, j] {
            if v >= n {
                let err = GraphError::VertexOutOfRange {
                    index: v,
                    vertex_count: n,
                };
                return Err(line_error(line, err.to_string()));
            }
        }
        if i == j {
            return Err(line_error(line, GraphError::SelfLoop(i).to_string()));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(line_error(
                line,
                GraphError::DuplicateEdge(i, j).to_string(),
            ));
        }
        edges.push((i, j));
        last_line = line;
    }
    if edges.len() < m {
        return Err(line_error(
            last_line,
            format!("header declares {m} edges, found {}", edges.len()),
        ));
    }
    Ok(Graph::from_edges(n, &edges)?)
}

pub fn parse_graph(path: &Path) -> Result<Graph, ParseError> {
    parse_graph_str(&read(path)?)
}

/// Canonical form: header, then each edge once as `i j` with `i < j`, in
/// lexicographic order.
pub fn serialize_graph(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.vertex_count(), g.edge_count());
    for &(i, j) in g.edges() {
        writeln!(out, "{i} {j}").expect("writing to a String");
    }
    out
}

/// One value per line, in the shortest form that reads back exactly.
pub fn serialize_function(u: &VertexFunction) -> String {
    u.iter().map(|v| format!("{v:?}\n")).collect()
}

/// Vertex function from file contents: a JSON array or one value per line.
pub fn parse_function_str(text: &str, n: usize) -> Result<VertexFunction, ParseError> {
    let values = if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<f64>>(text).map_err(|e| line_error(e.line(), e.to_string()))?
    } else {
        content_lines(text)
            .map(|(line, s)| {
                s.parse::<f64>()
                    .map_err(|_| line_error(line, format!("not a number: {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.len() != n {
        return Err(GraphError::DimensionMismatch {
            expected: n,
            found: values.len(),
        }
        .into());
    }
    Ok(VertexFunction::new(values)?)
}

/// Resolves a function argument: `const:c`, a bare number, an inline JSON
/// array, or the path of a file.
pub fn parse_function(spec: &str, n: usize) -> Result<VertexFunction, ParseError> {
    let spec = spec.trim();
    let constant = |s: &str| match s.parse::<f64>() {
        Ok(c) if c.is_finite() => Ok(VertexFunction::constant(n, c)),
        _ => Err(ParseError::Function(format!(
            "not a finite constant: {s:?}"
        ))),
    };
    if let Some(c) = spec.strip_prefix("const:") {
        return constant(c.trim());
    }
    if spec.starts_with('[') {
        return parse_function_str(spec, n);
    }
    if spec.parse::<f64>().is_ok() {
        return constant(spec);
    }
    parse_function_str(&read(Path::new(spec))?, n)
}

fn read(path: &Path) -> Result<String, ParseError> {
    std::fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(err: ParseError) -> usize {
        match err {
            ParseError::Line { line, .. } => line,
            other => panic!("expected a line error, got {other}"),
        }
    }

    #[test]
    fn k2() {
        let g = parse_graph_str("2 1\n0 1").unwrap();
        assert_eq!(g, Graph::complete(2).unwrap());
    }

    #[test]
    fn comments_and_blank_lines() {
        let g = parse_graph_str("# triangle\n3 3\n\n0 1\n2 1\n0 2\n").unwrap();
        assert_eq!(g, Graph::complete(3).unwrap());
    }

    #[test]
    fn isolated_vertex() {
        let err = parse_graph_str("3 1\n0 1").unwrap_err();
        assert!(matches!(err, ParseError::Graph(GraphError::NotConnected)));
        assert_eq!(err.to_string(), "graph not connected");
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(line_of(parse_graph_str("3 2\n0 1\n1 x\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_graph_str("3 2\n0 1\n1 1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_graph_str("3 2\n0 1\n1 0\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_graph_str("3 2\n0 1\n1 3\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_graph_str("3 2\n0 1\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_graph_str("3 1\n0 1\n1 2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_graph_str("\n\n3\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_graph_str("").unwrap_err()), 1);
    }

    #[test]
    fn graph_round_trip_normalizes() {
        let g = parse_graph_str("4 4\n3 0\n1 0\n2 1\n3 2\n").unwrap();
        let text = serialize_graph(&g);
        assert_eq!(text, "4 4\n0 1\n0 3\n1 2\n2 3\n");
        assert_eq!(parse_graph_str(&text).unwrap(), g);
        assert_eq!(serialize_graph(&parse_graph_str(&text).unwrap()), text);
    }

    #[test]
    fn function_specs() {
        assert_eq!(parse_function("const:-1", 3).unwrap().values(), &[-1.0; 3]);
        assert_eq!(parse_function("0.25", 2).unwrap().values(), &[0.25, 0.25]);
        assert_eq!(
            parse_function("[1, -2.5]", 2).unwrap().values(),
            &[1.0, -2.5]
        );
        assert!(matches!(
            parse_function("const:nan", 2),
            Err(ParseError::Function(_))
        ));
        assert!(matches!(
            parse_function("[1, 2]", 3),
            Err(ParseError::Graph(GraphError::DimensionMismatch {
                expected: 3,
                found: 2
            }))
        ));
        assert!(matches!(
            parse_function("/nonexistent/f.txt", 2),
            Err(ParseError::Io { .. })
        ));
    }

    #[test]
    fn function_lines() {
        let u = parse_function_str("# f\n1.5\n\n-2\n", 2).unwrap();
        assert_eq!(u.values(), &[1.5, -2.0]);
        assert_eq!(line_of(parse_function_str("1\nfoo\n", 2).unwrap_err()), 2);
    }

    #[test]
    fn function_round_trip_is_exact() {
        let u = VertexFunction::new(vec![0.1, -1.0 / 3.0, 1e-300, 12345.678]).unwrap();
        let text = serialize_function(&u);
        assert_eq!(parse_function_str(&text, 4).unwrap(), u);
    }
}
