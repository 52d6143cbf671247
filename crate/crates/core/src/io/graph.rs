use std::fmt::Write as _;

use super::{parse_f64, parse_int};
use crate::error::{Error, Result};
use crate::model::{AffinityVector, Hypergraph};

const MAGIC: &str = "NTGRAPH1";

/// A hypergraph with its comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDump {
    pub meta: Vec<String>,
    pub graph: Hypergraph,
}

/// `NTGRAPH1`, `#` comments, `n,D,κ_1..κ_D`, then one `d,ids...,affinity...`
/// line per tuple.
pub fn parse_graph(text: &str, path: &str) -> Result<GraphDump> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(Error::parse(path, 1, format!("expected {MAGIC} header"))),
    }
    let mut meta = Vec::new();
    let mut graph: Option<Hypergraph> = None;
    for (ln, line) in lines {
        if let Some(c) = line.strip_prefix('#') {
            if graph.is_some() {
                return Err(Error::parse(path, ln, "comments must precede the size line"));
            }
            meta.push(c.to_string());
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        match &mut graph {
            None => {
                if f.len() < 2 {
                    return Err(Error::parse(path, ln, "size line needs n and D"));
                }
                let n: usize = parse_int(path, ln, f[0], "n")?;
                let d: usize = parse_int(path, ln, f[1], "D")?;
                if f.len() != 2 + d {
                    return Err(Error::parse(path, ln, format!("expected {d} arities")));
                }
                let arities = f[2..]
                    .iter()
                    .map(|a| parse_int(path, ln, a, "arity"))
                    .collect::<Result<Vec<usize>>>()?;
                graph = Some(Hypergraph::new(n, arities).map_err(|e| Error::parse(path, ln, e.to_string()))?);
            }
            Some(g) => {
                let d: usize = parse_int(path, ln, f[0], "degree")?;
                let k = g
                    .arity(d)
                    .ok_or_else(|| Error::parse(path, ln, format!("degree {d} outside 1..={}", g.max_degree())))?;
                if f.len() != 1 + d + k {
                    return Err(Error::parse(path, ln, format!("degree {d} line needs {d} ids and {k} affinities")));
                }
                let nodes = f[1..=d]
                    .iter()
                    .map(|v| parse_int(path, ln, v, "node id"))
                    .collect::<Result<Vec<usize>>>()?;
                let aff = f[1 + d..]
                    .iter()
                    .map(|v| parse_f64(path, ln, v, "affinity"))
                    .collect::<Result<Vec<f64>>>()?;
                let aff = AffinityVector::new(aff).map_err(|e| Error::parse(path, ln, e.to_string()))?;
                if !g.insert(&nodes, aff).map_err(|e| Error::parse(path, ln, e.to_string()))? {
                    return Err(Error::parse(path, ln, "duplicate tuple"));
                }
            }
        }
    }
    let graph = graph.ok_or_else(|| Error::parse(path, 1, "missing size line"))?;
    Ok(GraphDump { meta, graph })
}

pub fn emit_graph(dump: &GraphDump) -> String {
    let g = &dump.graph;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    for m in &dump.meta {
        let _ = writeln!(s, "#{m}");
    }
    let _ = write!(s, "{},{}", g.num_nodes(), g.max_degree());
    for k in g.arities() {
        let _ = write!(s, ",{k}");
    }
    s.push('\n');
    for d in 1..=g.max_degree() {
        for e in g.sorted_edges(d) {
            let _ = write!(s, "{d}");
            for v in &e.nodes {
                let _ = write!(s, ",{v}");
            }
            for a in e.affinity.values() {
                let _ = write!(s, ",{a}");
            }
            s.push('\n');
        }
    }
    s
}
