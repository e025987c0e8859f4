//! Actor networks: document co-occurrence graphs and the curated
//! sender-receiver graph.

mod io;

pub use io::{
    export, read_graph, read_graphml, read_node_link, write_dot, write_graphml, write_node_link, GraphFormat,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kblink::LinkedActor;
use crate::linkage::AliasDictionary;
use crate::ner::Mention;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed manual network row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("malformed graph file: {0}")]
    MalformedGraph(String),
    #[error("unknown graph format {0:?}")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeAttrs {
    pub canonical: String,
    pub kb_id: Option<String>,
    pub country: Option<String>,
}

/// Undirected simple graph with positive integer edge weights. Nodes are keyed
/// by name and edges by name pairs `(u, v)` with `u < v`, so iteration order
/// is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeightedGraph {
    nodes: BTreeMap<String, NodeAttrs>,
    edges: BTreeMap<(String, String), u64>,
}

fn edge_key(u: &str, v: &str) -> (String, String) {
    if u <= v {
        (u.to_string(), v.to_string())
    } else {
        (v.to_string(), u.to_string())
    }
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a node, replacing attributes of an existing one.
    pub fn add_node(&mut self, id: impl Into<String>, attrs: NodeAttrs) {
        self.nodes.insert(id.into(), attrs);
    }

    fn ensure_node(&mut self, id: &str) {
        if !self.nodes.contains_key(id) {
            self.nodes.insert(
                id.to_string(),
                NodeAttrs {
                    canonical: id.to_string(),
                    ..Default::default()
                },
            );
        }
    }

    /// Add `weight` to edge `{u, v}`, creating missing nodes. Self-loops and
    /// zero weights are ignored; returns whether anything was added.
    pub fn add_weight(&mut self, u: &str, v: &str, weight: u64) -> bool {
        if u == v || weight == 0 {
            return false;
        }
        self.ensure_node(u);
        self.ensure_node(v);
        *self.edges.entry(edge_key(u, v)).or_insert(0) += weight;
        true
    }

    pub fn weight(&self, u: &str, v: &str) -> Option<u64> {
        self.edges.get(&edge_key(u, v)).copied()
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &str) -> Option<&NodeAttrs> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, &NodeAttrs)> {
        self.nodes.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.edges.iter().map(|((u, v), w)| (u.as_str(), v.as_str(), *w))
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn remove_isolates(&mut self) {
        let mut used: BTreeSet<&str> = BTreeSet::new();
        for (u, v) in self.edges.keys() {
            used.insert(u);
            used.insert(v);
        }
        let used: BTreeSet<String> = used.into_iter().map(str::to_string).collect();
        self.nodes.retain(|k, _| used.contains(k));
    }

    /// Index form for numerical work: nodes in name order, adjacency lists
    /// sorted by neighbour index.
    pub fn indexed(&self) -> IndexedGraph {
        let names: Vec<String> = self.nodes.keys().cloned().collect();
        let pos: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); names.len()];
        for ((u, v), w) in &self.edges {
            let (a, b) = (pos[u.as_str()], pos[v.as_str()]);
            adj[a].push((b, *w));
            adj[b].push((a, *w));
        }
        for list in &mut adj {
            list.sort_by_key(|(n, _)| *n);
        }
        IndexedGraph { names, adj }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedGraph {
    pub names: Vec<String>,
    pub adj: Vec<Vec<(usize, u64)>>,
}

impl IndexedGraph {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Distinct linked actors mentioned in each document. Surfaces resolve through
/// the alias dictionary; actors without a KB id are left out.
pub fn actors_by_document(
    mentions: &[Mention],
    aliases: &AliasDictionary,
    actors: &[LinkedActor],
) -> BTreeMap<String, BTreeSet<String>> {
    let linked: BTreeSet<&str> = actors
        .iter()
        .filter(|a| a.kb_id.is_some())
        .map(|a| a.canonical_name.as_str())
        .collect();
    let mut by_doc: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for m in mentions {
        if let Some(c) = aliases.resolve(&m.surface) {
            if linked.contains(c) {
                by_doc.entry(m.doc_id.clone()).or_default().insert(c.to_string());
            }
        }
    }
    by_doc
}

fn pairs(actors: &BTreeSet<String>) -> Vec<(&str, &str)> {
    let list: Vec<&str> = actors.iter().map(String::as_str).collect();
    let mut out = Vec::with_capacity(list.len() * list.len().saturating_sub(1) / 2);
    for (i, a) in list.iter().enumerate() {
        for b in &list[i + 1..] {
            out.push((*a, *b));
        }
    }
    out
}

/// Edge weight = number of documents mentioning both actors.
pub fn build_cooccurrence(mentions: &[Mention], aliases: &AliasDictionary, actors: &[LinkedActor]) -> WeightedGraph {
    let by_doc = actors_by_document(mentions, aliases, actors);
    let doc_sets: Vec<&BTreeSet<String>> = by_doc.values().collect();
    let partial: Vec<BTreeMap<(String, String), u64>> = crate::par::map(&doc_sets, |set| {
        pairs(set)
            .into_iter()
            .map(|(a, b)| ((a.to_string(), b.to_string()), 1))
            .collect()
    });
    let mut g = WeightedGraph::new();
    let attrs: HashMap<&str, &LinkedActor> = actors.iter().map(|a| (a.canonical_name.as_str(), a)).collect();
    for name in by_doc.values().flatten() {
        let a = attrs[name.as_str()];
        g.add_node(
            name.clone(),
            NodeAttrs {
                canonical: name.clone(),
                kb_id: a.kb_id.clone(),
                country: a.country.clone(),
            },
        );
    }
    for counts in partial {
        for ((a, b), w) in counts {
            g.add_weight(&a, &b, w);
        }
    }
    g
}

/// Documents witnessing each co-occurrence edge.
pub fn cooccurrence_witnesses(by_doc: &BTreeMap<String, BTreeSet<String>>) -> BTreeMap<(String, String), Vec<String>> {
    let mut out: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for (doc, set) in by_doc {
        for (a, b) in pairs(set) {
            out.entry((a.to_string(), b.to_string())).or_default().push(doc.clone());
        }
    }
    out
}

/// Drop edges lighter than `min_weight`, then (unless `keep_isolates`) nodes
/// left without edges.
pub fn prune(graph: &WeightedGraph, min_weight: u64, keep_isolates: bool) -> WeightedGraph {
    let mut g = graph.clone();
    g.edges.retain(|_, w| *w >= min_weight);
    if !keep_isolates {
        g.remove_isolates();
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualRow {
    pub sender: String,
    pub receiver: String,
    pub doc_id: String,
}

/// Read the `sender,receiver,doc_id` table.
pub fn read_manual_rows<R: Read>(reader: R) -> Result<Vec<ManualRow>, NetworkError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (idx, rec) in rdr.deserialize::<ManualRow>().enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| NetworkError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if rec.sender.trim().is_empty() || rec.receiver.trim().is_empty() {
            return Err(NetworkError::MalformedRow {
                row,
                message: "empty sender or receiver".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

fn resolve_name(name: &str, aliases: Option<&AliasDictionary>) -> String {
    let name = name.trim();
    aliases
        .and_then(|a| a.resolve(name))
        .map(str::to_string)
        .unwrap_or_else(|| name.to_string())
}

/// Undirected letter-count graph; names resolve through the alias dictionary
/// when given, otherwise stay as written.
pub fn manual_network(rows: &[ManualRow], aliases: Option<&AliasDictionary>) -> WeightedGraph {
    let mut g = WeightedGraph::new();
    for r in rows {
        let (s, t) = (resolve_name(&r.sender, aliases), resolve_name(&r.receiver, aliases));
        if !g.add_weight(&s, &t, 1) {
            log::warn!("letter {} from {s:?} to itself ignored", r.doc_id);
        }
    }
    g
}

pub fn manual_witnesses(
    rows: &[ManualRow],
    aliases: Option<&AliasDictionary>,
) -> BTreeMap<(String, String), Vec<String>> {
    let mut out: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for r in rows {
        let (s, t) = (resolve_name(&r.sender, aliases), resolve_name(&r.receiver, aliases));
        if s != t {
            let docs = out.entry(edge_key(&s, &t)).or_default();
            if !docs.contains(&r.doc_id) {
                docs.push(r.doc_id.clone());
            }
        }
    }
    out
}

pub fn load_manual_network<R: Read>(
    reader: R,
    aliases: Option<&AliasDictionary>,
) -> Result<WeightedGraph, NetworkError> {
    Ok(manual_network(&read_manual_rows(reader)?, aliases))
}
