//! Time-evolving multigraphs built from `source,destination,timestamp[,value]`
//! edge rows.
//!
//! Nodes get dense indices in order of first appearance. Edges are stably
//! sorted by timestamp, and per-node incoming/outgoing edge lists are kept in
//! compressed (CSR) form so that each list is already in time order.

use std::collections::HashSet;
use std::io::{BufRead, Read};

use indexmap::IndexSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphMode {
    #[default]
    Unipartite,
    Bipartite,
}

impl std::str::FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unipartite" => Ok(GraphMode::Unipartite),
            "bipartite" => Ok(GraphMode::Bipartite),
            other => Err(Error::InvalidArgument(format!("unknown graph mode {other}"))),
        }
    }
}

/// One edge with its endpoints resolved to dense node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub destination: usize,
    pub timestamp: i64,
    pub value: f64,
}

/// An edge before node resolution, as read from a file or produced by the
/// synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub source: String,
    pub destination: String,
    pub timestamp: i64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub mode: GraphMode,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: false,
            mode: GraphMode::Unipartite,
        }
    }
}

/// Compressed adjacency: `targets[offsets[v]..offsets[v + 1]]` are the edge
/// indices attached to node `v`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    fn build(n: usize, keys: impl Iterator<Item = usize> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for k in keys.clone() {
            offsets[k + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0usize; offsets[n]];
        for (edge, k) in keys.enumerate() {
            targets[cursor[k]] = edge;
            cursor[k] += 1;
        }
        Self { offsets, targets }
    }

    fn get(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Immutable time-ordered multigraph.
#[derive(Debug, Clone)]
pub struct TGraph {
    edges: Vec<Edge>,
    nodes: IndexSet<String>,
    mode: GraphMode,
    incoming: Csr,
    outgoing: Csr,
}

impl TGraph {
    /// Builds a graph from unresolved records. Self-loops appear in both the
    /// incoming and the outgoing list of their node.
    pub fn from_records<I>(records: I, mode: GraphMode) -> Result<Self>
    where
        I: IntoIterator<Item = EdgeRecord>,
    {
        let mut nodes: IndexSet<String> = IndexSet::new();
        let mut edges = Vec::new();
        for r in records {
            if r.source.is_empty() || r.destination.is_empty() {
                return Err(Error::Validation("empty node id".into()));
            }
            if r.timestamp < 0 {
                return Err(Error::Validation(format!("negative timestamp {}", r.timestamp)));
            }
            if !(r.value >= 0.0 && r.value.is_finite()) {
                return Err(Error::Validation(format!("invalid edge value {}", r.value)));
            }
            let (source, _) = nodes.insert_full(r.source);
            let (destination, _) = nodes.insert_full(r.destination);
            edges.push(Edge {
                source,
                destination,
                timestamp: r.timestamp,
                value: r.value,
            });
        }
        if edges.is_empty() {
            return Err(Error::NoEdges);
        }
        if mode == GraphMode::Bipartite {
            let sources: HashSet<usize> = edges.iter().map(|e| e.source).collect();
            if let Some(e) = edges.iter().find(|e| sources.contains(&e.destination)) {
                return Err(Error::Validation(format!(
                    "bipartite graph: node {} is both a source and a destination",
                    nodes[e.destination]
                )));
            }
        }
        // stable: equal timestamps keep input order
        edges.sort_by_key(|e| e.timestamp);

        let n = nodes.len();
        let incoming = Csr::build(n, edges.iter().map(|e| e.destination));
        let outgoing = Csr::build(n, edges.iter().map(|e| e.source));
        Ok(Self {
            edges,
            nodes,
            mode,
            incoming,
            outgoing,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_id(&self, index: usize) -> Option<&str> {
        self.nodes.get_index(index).map(String::as_str)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.get_index_of(id)
    }

    pub fn node_ids(&self) -> impl ExactSizeIterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    /// Indices (into [`TGraph::edges`]) of edges ending at `v`, in time order.
    pub fn incoming(&self, v: usize) -> &[usize] {
        self.incoming.get(v)
    }

    /// Indices of edges leaving `v`, in time order.
    pub fn outgoing(&self, v: usize) -> &[usize] {
        self.outgoing.get(v)
    }
}

/// Reads delimiter-separated edge rows. A missing fourth column means value
/// 1.0. Line numbers in errors are 1-based and count the header.
pub fn parse_edges<R: Read>(input: R, options: &ParseOptions) -> Result<TGraph> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let fail = |message: String| Error::Parse { line, message };
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != 3 && row.len() != 4 {
            return Err(fail(format!("expected 3 or 4 columns, found {}", row.len())));
        }
        let (source, destination) = (&row[0], &row[1]);
        if source.is_empty() || destination.is_empty() {
            return Err(fail("empty node id".into()));
        }
        let timestamp: i64 = row[2]
            .parse()
            .map_err(|_| fail(format!("non-numeric timestamp {:?}", &row[2])))?;
        if timestamp < 0 {
            return Err(fail(format!("negative timestamp {timestamp}")));
        }
        let value = match row.get(3) {
            Some(raw) => {
                let v: f64 = raw.parse().map_err(|_| fail(format!("non-numeric value {raw:?}")))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(fail(format!("invalid value {raw}")));
                }
                v
            }
            None => 1.0,
        };
        records.push(EdgeRecord {
            source: source.to_owned(),
            destination: destination.to_owned(),
            timestamp,
            value,
        });
    }
    TGraph::from_records(records, options.mode)
}

/// Anomalous nodes either found in-tool or supplied externally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyOrigin {
    Detected,
    Dictated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalySet {
    members: Vec<usize>,
    origin: AnomalyOrigin,
}

impl AnomalySet {
    /// Validates membership against a graph of `n` nodes.
    pub fn new(members: Vec<usize>, origin: AnomalyOrigin, n: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyAnomalies);
        }
        let mut seen = HashSet::with_capacity(members.len());
        for &m in &members {
            if m >= n {
                return Err(Error::Validation(format!(
                    "anomaly index {m} out of range for {n} nodes"
                )));
            }
            if !seen.insert(m) {
                return Err(Error::DuplicateAnomaly(m.to_string()));
            }
        }
        Ok(Self { members, origin })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn origin(&self) -> AnomalyOrigin {
        self.origin
    }
}

/// One node id per line; blank lines and `#` comments are skipped.
pub fn load_anomalies<R: BufRead>(input: R, graph: &TGraph) -> Result<AnomalySet> {
    let mut members = Vec::new();
    let mut seen = HashSet::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<anomalies>", e))?;
        let token = line.trim();
        if token.is_empty() || token.starts_with('#') {
            continue;
        }
        let index = graph
            .node_index(token)
            .ok_or_else(|| Error::UnknownNode(token.to_owned()))?;
        if !seen.insert(index) {
            return Err(Error::DuplicateAnomaly(token.to_owned()));
        }
        members.push(index);
    }
    AnomalySet::new(members, AnomalyOrigin::Dictated, graph.node_count())
}
