//! Text formats for graphs and hypothesis lists.
//!
//! Graphs are edge lists, one `NAME1 MARK NAME2 [ambiguous]` per line with
//! `MARK` one of `---`, `-->`, `<--`, `<->`. An optional first line
//! `# vertices: N1 N2 ...` fixes the vertex set and its order; other lines
//! starting with `#` and blank lines are ignored. Written graphs always
//! carry the header and list edges by vertex pair.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::fdr::{AssertedEdge, Hypothesis, HypothesisSet};
use crate::graph::{EdgeMark, MixedGraph};
use crate::ledger::HypothesisId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

const HEADER: &str = "# vertices:";

pub fn parse_mark(s: &str) -> Option<EdgeMark> {
    match s {
        "---" => Some(EdgeMark::Undirected),
        "-->" => Some(EdgeMark::DirectedForward),
        "<--" => Some(EdgeMark::DirectedBackward),
        "<->" => Some(EdgeMark::Bidirected),
        _ => None,
    }
}

pub fn write_graph(graph: &MixedGraph, names: &[String]) -> String {
    assert_eq!(names.len(), graph.vertex_count(), "one name per vertex");
    let mut out = String::from(HEADER);
    for n in names {
        out.push(' ');
        out.push_str(n);
    }
    out.push('\n');
    for (a, b, mark) in graph.edges() {
        let _ = write!(out, "{} {} {}", names[a], mark, names[b]);
        if graph.is_ambiguous(a, b) {
            out.push_str(" ambiguous");
        }
        out.push('\n');
    }
    out
}

/// Parses an edge list. Vertex names come from the header, else from
/// `names`, else from first appearance.
pub fn read_graph(text: &str, names: Option<&[String]>) -> Result<(MixedGraph, Vec<String>), ParseError> {
    let mut vertex_names: Option<Vec<String>> = names.map(<[String]>::to_vec);
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix(HEADER) {
            if !edges.is_empty() {
                return Err(err(line_no, "vertex header must precede all edges"));
            }
            vertex_names = Some(rest.split_whitespace().map(str::to_owned).collect());
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let ambiguous = match fields.len() {
            3 => false,
            4 if fields[3] == "ambiguous" => true,
            4 => return Err(err(line_no, format!("unknown flag {:?}", fields[3]))),
            _ => return Err(err(line_no, "expected `NAME MARK NAME [ambiguous]`")),
        };
        let mark = parse_mark(fields[1])
            .ok_or_else(|| err(line_no, format!("unknown edge mark {:?}", fields[1])))?;
        if ambiguous && mark != EdgeMark::Undirected {
            return Err(err(line_no, "only undirected edges can be ambiguous"));
        }
        edges.push((line_no, fields[0].to_owned(), mark, fields[2].to_owned(), ambiguous));
    }

    let names = match vertex_names {
        Some(v) => v,
        None => {
            let mut v: Vec<String> = Vec::new();
            for (_, a, _, b, _) in &edges {
                for n in [a, b] {
                    if !v.contains(n) {
                        v.push(n.clone());
                    }
                }
            }
            v
        }
    };
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    if index.len() != names.len() {
        return Err(err(1, "duplicate vertex name"));
    }
    let mut graph = MixedGraph::empty(names.len());
    for (line_no, a, mark, b, ambiguous) in edges {
        let lookup = |n: &str| {
            index
                .get(n)
                .copied()
                .ok_or_else(|| err(line_no, format!("unknown vertex {n:?}")))
        };
        let (ia, ib) = (lookup(&a)?, lookup(&b)?);
        if ia == ib {
            return Err(err(line_no, "self-loop"));
        }
        if graph.adjacent(ia, ib) {
            return Err(err(line_no, "pair listed twice"));
        }
        graph.set_mark(ia, ib, mark);
        if ambiguous {
            graph.make_ambiguous(ia, ib);
        }
    }
    Ok((graph, names))
}

fn edge_token(e: &AssertedEdge, names: &[String]) -> String {
    format!("{}{}{}", names[e.a], e.mark, names[e.b])
}

/// CSV with columns `id,p_value,edges`; edges are `;`-separated
/// `NAME1MARKNAME2` tokens such as `X1-->X2`.
pub fn write_hypotheses(set: &HypothesisSet, names: &[String]) -> String {
    let mut out = String::from("id,p_value,edges\n");
    for h in set.entries() {
        let edges: Vec<String> = h.edges.iter().map(|e| edge_token(e, names)).collect();
        let _ = writeln!(out, "{},{:?},{}", h.id.0, h.p_value, edges.join(";"));
    }
    out
}

pub fn read_hypotheses(text: &str, names: &[String]) -> Result<HypothesisSet, ParseError> {
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || (i == 0 && line.starts_with("id,")) {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (Some(id), Some(p), Some(edges)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(line_no, "expected `id,p_value,edges`"));
        };
        let id: u32 = id.parse().map_err(|_| err(line_no, format!("bad id {id:?}")))?;
        let p_value: f64 = p.parse().map_err(|_| err(line_no, format!("bad p-value {p:?}")))?;
        let mut asserted = Vec::new();
        for tok in edges.split(';').filter(|t| !t.is_empty()) {
            let (a, mark, b) = ["---", "-->", "<--", "<->"]
                .iter()
                .find_map(|m| tok.split_once(m).map(|(a, b)| (a, *m, b)))
                .ok_or_else(|| err(line_no, format!("bad edge {tok:?}")))?;
            let lookup = |n: &str| {
                index
                    .get(n)
                    .copied()
                    .ok_or_else(|| err(line_no, format!("unknown vertex {n:?}")))
            };
            asserted.push(AssertedEdge {
                a: lookup(a)?,
                b: lookup(b)?,
                mark: parse_mark(mark).expect("listed above"),
            });
        }
        entries.push(Hypothesis {
            id: HypothesisId(id),
            p_value,
            edges: asserted,
        });
    }
    HypothesisSet::new(entries).map_err(|e| err(0, e.to_string()))
}
