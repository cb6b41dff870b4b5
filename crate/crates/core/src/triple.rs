//! `(source, query, target)` triples and their JSON-Lines file format.
//!
//! One object per line:
//! `{"source": {"nodes": ["boy","holding","racket"], "edges": [[0,1],[1,2]]},
//!   "query": ["show","me","a","girl"], "target": {...}}`
//! Node arrays are label lists indexed by node id; edges are `[head, tail]`
//! id pairs. Files are UTF-8 with LF line endings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, SceneGraph};

/// One supervised example: modify `source` according to `query` into `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub source: SceneGraph,
    pub query: Vec<String>,
    pub target: SceneGraph,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TripleJson {
    source: GraphJson,
    query: Vec<String>,
    target: GraphJson,
}

#[derive(Debug, Error)]
pub enum TripleIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

impl GraphJson {
    pub fn from_graph(g: &SceneGraph) -> Self {
        Self {
            nodes: g.labels().map(str::to_string).collect(),
            edges: g.edges().map(|e| (e.head.index(), e.tail.index())).collect(),
        }
    }

    pub fn to_graph(&self) -> Result<SceneGraph, GraphError> {
        SceneGraph::from_parts(&self.nodes, self.edges.iter().copied())
    }
}

impl Triple {
    fn to_json(&self) -> TripleJson {
        TripleJson {
            source: GraphJson::from_graph(&self.source),
            query: self.query.clone(),
            target: GraphJson::from_graph(&self.target),
        }
    }

    /// Serializes to one JSON line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("triple serialization cannot fail")
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let raw: TripleJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if raw.query.is_empty() {
            return Err("field \"query\" must be non-empty".to_string());
        }
        let source = raw
            .source
            .to_graph()
            .map_err(|e| format!("field \"source\": {e}"))?;
        let target = raw
            .target
            .to_graph()
            .map_err(|e| format!("field \"target\": {e}"))?;
        Ok(Triple {
            source,
            query: raw.query,
            target,
        })
    }
}

pub fn read_triples(path: impl AsRef<Path>) -> Result<Vec<Triple>, TripleIoError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| TripleIoError::Io {
        path: display.clone(),
        source,
    })?;
    let mut triples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TripleIoError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let triple = Triple::from_json_line(&line).map_err(|message| TripleIoError::Malformed {
            path: display.clone(),
            line: idx + 1,
            message,
        })?;
        triples.push(triple);
    }
    Ok(triples)
}

pub fn write_triples(path: impl AsRef<Path>, triples: &[Triple]) -> Result<(), TripleIoError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let io_err = |source| TripleIoError::Io {
        path: display.clone(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for t in triples {
        w.write_all(t.to_json_line().as_bytes()).map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// The node sequence the expansion-time machinery feeds the graph encoder:
/// source labels in canonical order.
pub fn canonical_labels(g: &SceneGraph) -> Vec<String> {
    g.canonical_order()
        .into_iter()
        .map(|id: NodeId| g.label(id).to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_triple() -> Triple {
        Triple {
            source: SceneGraph::from_parts(["boy", "holding", "racket"], [(0, 1), (1, 2)])
                .unwrap(),
            query: vec!["show".into(), "me".into(), "a".into(), "girl".into()],
            target: SceneGraph::from_parts(["girl", "holding", "racket"], [(0, 1), (1, 2)])
                .unwrap(),
        }
    }

    #[test]
    fn one_line_one_triple() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        write_triples(&path, &[sample_triple()]).unwrap();
        let back = read_triples(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], sample_triple());
    }

    #[test]
    fn missing_query_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = sample_triple().to_json_line();
        let bad = r#"{"source": {"nodes": [], "edges": []}, "target": {"nodes": [], "edges": []}}"#;
        std::fs::write(&path, format!("{good}\n{bad}\n")).unwrap();
        let err = read_triples(&path).unwrap_err();
        match err {
            TripleIoError::Malformed { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("query"), "message was: {message}");
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn empty_query_rejected() {
        let line = r#"{"source":{"nodes":["a"],"edges":[]},"query":[],"target":{"nodes":["a"],"edges":[]}}"#;
        assert!(Triple::from_json_line(line).is_err());
    }
}
