//! Undirected simple graph over dense integer node ids, plus edge-list and
//! label file I/O.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Undirected, unweighted simple graph. Adjacency lists are sorted and
/// symmetric; no self-loops, no duplicate neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<u32>>,
    edge_count: usize,
}

/// Counts of input lines dropped while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl Graph {
    /// Build a graph from an edge iterator. Duplicate edges and self-loops
    /// are dropped and counted in the report.
    pub fn from_edges_reported<I>(n: usize, edges: I) -> Result<(Graph, LoadReport)>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut set: BTreeSet<(u32, u32)> = BTreeSet::new();
        let mut report = LoadReport::default();
        for (u, v) in edges {
            if u as usize >= n {
                return Err(Error::NodeRange { id: u, n });
            }
            if v as usize >= n {
                return Err(Error::NodeRange { id: v, n });
            }
            if u == v {
                report.self_loops += 1;
                continue;
            }
            let key = (u.min(v), u.max(v));
            if !set.insert(key) {
                report.duplicates += 1;
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &set {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok((
            Graph {
                adjacency,
                edge_count: set.len(),
            },
            report,
        ))
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        Ok(Self::from_edges_reported(n, edges)?.0)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, node: u32) -> Result<usize> {
        self.adjacency
            .get(node as usize)
            .map(Vec::len)
            .ok_or(Error::NodeRange {
                id: node,
                n: self.n(),
            })
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adjacency
            .get(u as usize)
            .map(|list| list.binary_search(&v).is_ok())
            .unwrap_or(false)
    }

    /// Iterate undirected edges as (u, v) with u < v, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            let u = u as u32;
            list.iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }
}

/// Per-node label sets for the classification task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    labels: Vec<Vec<u32>>,
    num_labels: usize,
    multilabel: bool,
}

impl LabelTable {
    pub fn new(labels: Vec<Vec<u32>>) -> LabelTable {
        let num_labels = labels
            .iter()
            .flat_map(|set| set.iter().copied())
            .max()
            .map(|m| m as usize + 1)
            .unwrap_or(0);
        let multilabel = labels.iter().any(|set| set.len() > 1);
        LabelTable {
            labels,
            num_labels,
            multilabel,
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn multilabel(&self) -> bool {
        self.multilabel
    }

    /// Sorted label ids of a node; empty for unlabeled nodes.
    pub fn labels_of(&self, node: u32) -> &[u32] {
        &self.labels[node as usize]
    }

    pub fn labeled_nodes(&self) -> Vec<u32> {
        (0..self.labels.len() as u32)
            .filter(|&v| !self.labels[v as usize].is_empty())
            .collect()
    }
}

/// Difference between two graphs on the same node set. Pairs are stored
/// with the smaller id first, in sorted order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeDelta {
    pub added: Vec<(u32, u32)>,
    pub removed: Vec<(u32, u32)>,
}

impl EdgeDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

/// Edges present in `observed` but not `pristine` (added) and vice versa
/// (removed).
pub fn edge_diff(observed: &Graph, pristine: &Graph) -> Result<EdgeDelta> {
    if observed.n() != pristine.n() {
        return Err(Error::Shape(format!(
            "node counts differ: {} vs {}",
            observed.n(),
            pristine.n()
        )));
    }
    let added = observed
        .edges()
        .filter(|&(u, v)| !pristine.has_edge(u, v))
        .collect();
    let removed = pristine
        .edges()
        .filter(|&(u, v)| !observed.has_edge(u, v))
        .collect();
    Ok(EdgeDelta { added, removed })
}

fn parse_node(token: &str, line: usize) -> Result<u32> {
    token.parse::<u32>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected non-negative integer, got {token:?}"),
    })
}

/// Read an edge list: one "u v" pair per line, "#" comments ignored, an
/// optional leading "%n <count>" line fixing the node count. Without the
/// header, n = 1 + max id seen.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<(Graph, LoadReport)> {
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut fixed_n: Option<usize> = None;
    let mut max_id: Option<u32> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("%n") {
            let count = rest.trim().parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad node-count header {trimmed:?}"),
            })?;
            fixed_n = Some(count);
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (u, v) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => (parse_node(a, line_no)?, parse_node(b, line_no)?),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected two node ids, got {trimmed:?}"),
                })
            }
        };
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v));
    }
    let n = fixed_n.unwrap_or_else(|| max_id.map_or(0, |m| m as usize + 1));
    Graph::from_edges_reported(n, edges)
}

/// Write an edge list readable by `load_edge_list`, including the node
/// count header so isolated trailing nodes survive a round trip.
pub fn write_edge_list<W: Write>(writer: &mut W, graph: &Graph) -> Result<()> {
    writeln!(writer, "%n {}", graph.n())?;
    for (u, v) in graph.edges() {
        writeln!(writer, "{u} {v}")?;
    }
    Ok(())
}

/// Read a label file: one "node label" pair per line; repeated node ids
/// accumulate a label set.
pub fn load_labels<R: BufRead>(reader: R, n: usize) -> Result<LabelTable> {
    let mut labels: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (node, label) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => (parse_node(a, line_no)?, parse_node(b, line_no)?),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected \"node label\", got {trimmed:?}"),
                })
            }
        };
        if node as usize >= n {
            return Err(Error::NodeRange { id: node, n });
        }
        labels[node as usize].insert(label);
    }
    Ok(LabelTable::new(
        labels.into_iter().map(|s| s.into_iter().collect()).collect(),
    ))
}
