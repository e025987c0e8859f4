use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::{NetworkError, NodeAttrs, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    GraphMl,
    NodeLink,
    Dot,
}

impl FromStr for GraphFormat {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "graphml" => Ok(Self::GraphMl),
            "json" | "node-link" => Ok(Self::NodeLink),
            "dot" | "gv" => Ok(Self::Dot),
            other => Err(NetworkError::UnknownFormat(other.to_string())),
        }
    }
}

impl GraphFormat {
    pub fn from_path(path: &Path) -> Result<Self, NetworkError> {
        path.extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| NetworkError::UnknownFormat(path.display().to_string()))?
            .parse()
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::GraphMl => "graphml",
            Self::NodeLink => "json",
            Self::Dot => "dot",
        }
    }
}

const NODE_KEYS: [&str; 3] = ["canonical", "kb_id", "country"];

pub fn write_graphml<W: Write>(mut w: W, g: &WeightedGraph) -> std::io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    for k in NODE_KEYS {
        writeln!(w, r#"  <key id="{k}" for="node" attr.name="{k}" attr.type="string"/>"#)?;
    }
    writeln!(
        w,
        r#"  <key id="weight" for="edge" attr.name="weight" attr.type="long"/>"#
    )?;
    writeln!(w, r#"  <graph id="G" edgedefault="undirected">"#)?;
    for (id, a) in g.nodes() {
        write!(w, r#"    <node id="{}">"#, escape(id))?;
        write!(w, r#"<data key="canonical">{}</data>"#, escape(a.canonical.as_str()))?;
        if let Some(kb) = &a.kb_id {
            write!(w, r#"<data key="kb_id">{}</data>"#, escape(kb.as_str()))?;
        }
        if let Some(c) = &a.country {
            write!(w, r#"<data key="country">{}</data>"#, escape(c.as_str()))?;
        }
        writeln!(w, "</node>")?;
    }
    for (u, v, weight) in g.edges() {
        writeln!(
            w,
            r#"    <edge source="{}" target="{}"><data key="weight">{weight}</data></edge>"#,
            escape(u),
            escape(v)
        )?;
    }
    writeln!(w, "  </graph>")?;
    writeln!(w, "</graphml>")
}

fn malformed(msg: impl Into<String>) -> NetworkError {
    NetworkError::MalformedGraph(msg.into())
}

fn attrs_of(e: &BytesStart<'_>) -> Result<HashMap<String, String>, NetworkError> {
    let mut out = HashMap::new();
    for a in e.attributes() {
        let a = a.map_err(|e| malformed(e.to_string()))?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a.unescape_value().map_err(|e| malformed(e.to_string()))?.into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn parse_weight(s: &str) -> Result<u64, NetworkError> {
    let s = s.trim();
    if let Ok(w) = s.parse::<u64>() {
        return Ok(w);
    }
    match s.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 => Ok(f as u64),
        _ => Err(malformed(format!("edge weight {s:?} is not a non-negative integer"))),
    }
}

enum Open {
    Node {
        id: String,
        data: HashMap<String, String>,
    },
    Edge {
        source: String,
        target: String,
        data: HashMap<String, String>,
    },
}

/// Read a GraphML file written by this crate or by common graph tools.
/// Data keys are matched through their `attr.name`; edges without a weight
/// count as weight 1 and parallel edges add up.
pub fn read_graphml<R: Read>(mut reader: R) -> Result<WeightedGraph, NetworkError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut xml = Reader::from_str(&text);
    xml.config_mut().trim_text(true);

    let mut key_names: HashMap<String, String> = HashMap::new();
    let mut open: Option<Open> = None;
    let mut data_key: Option<String> = None;
    let mut nodes: Vec<(String, HashMap<String, String>)> = Vec::new();
    let mut edges: Vec<(String, String, HashMap<String, String>)> = Vec::new();

    fn close(
        open: Open,
        nodes: &mut Vec<(String, HashMap<String, String>)>,
        edges: &mut Vec<(String, String, HashMap<String, String>)>,
    ) {
        match open {
            Open::Node { id, data } => nodes.push((id, data)),
            Open::Edge { source, target, data } => edges.push((source, target, data)),
        }
    }

    loop {
        let event = xml.read_event().map_err(|e| malformed(e.to_string()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                let attrs = attrs_of(e)?;
                match e.local_name().as_ref() {
                    b"graph" => {
                        if attrs.get("edgedefault").map(String::as_str) == Some("directed") {
                            log::warn!("directed graph read as undirected");
                        }
                    }
                    b"key" => {
                        let id = attrs.get("id").ok_or_else(|| malformed("key without id"))?;
                        let name = attrs.get("attr.name").unwrap_or(id);
                        key_names.insert(id.clone(), name.clone());
                    }
                    b"node" => {
                        let id = attrs.get("id").ok_or_else(|| malformed("node without id"))?.clone();
                        let o = Open::Node {
                            id,
                            data: HashMap::new(),
                        };
                        if empty {
                            close(o, &mut nodes, &mut edges);
                        } else {
                            open = Some(o);
                        }
                    }
                    b"edge" => {
                        let source = attrs
                            .get("source")
                            .ok_or_else(|| malformed("edge without source"))?
                            .clone();
                        let target = attrs
                            .get("target")
                            .ok_or_else(|| malformed("edge without target"))?
                            .clone();
                        let o = Open::Edge {
                            source,
                            target,
                            data: HashMap::new(),
                        };
                        if empty {
                            close(o, &mut nodes, &mut edges);
                        } else {
                            open = Some(o);
                        }
                    }
                    b"data" if !empty => {
                        data_key = attrs.get("key").cloned();
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if let (Some(k), Some(o)) = (&data_key, open.as_mut()) {
                    let value = t.unescape().map_err(|e| malformed(e.to_string()))?.into_owned();
                    let name = key_names.get(k).cloned().unwrap_or_else(|| k.clone());
                    match o {
                        Open::Node { data, .. } | Open::Edge { data, .. } => {
                            data.insert(name, value);
                        }
                    }
                }
            }
            Event::End(e) => match e.local_name().as_ref() {
                b"data" => data_key = None,
                b"node" | b"edge" => {
                    if let Some(o) = open.take() {
                        close(o, &mut nodes, &mut edges);
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }

    let mut g = WeightedGraph::new();
    for (id, mut data) in nodes {
        let canonical = data.remove("canonical").unwrap_or_else(|| id.clone());
        g.add_node(
            id,
            NodeAttrs {
                canonical,
                kb_id: data.remove("kb_id"),
                country: data.remove("country"),
            },
        );
    }
    for (u, v, data) in edges {
        let w = data.get("weight").map(|s| parse_weight(s)).transpose()?.unwrap_or(1);
        g.add_weight(&u, &v, w);
    }
    Ok(g)
}

#[derive(Serialize, Deserialize)]
struct NodeLinkNode {
    id: String,
    #[serde(default)]
    canonical: Option<String>,
    #[serde(default)]
    kb_id: Option<String>,
    #[serde(default)]
    country: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct NodeLinkEdge {
    source: String,
    target: String,
    #[serde(default = "unit_weight")]
    weight: u64,
}

fn unit_weight() -> u64 {
    1
}

#[derive(Serialize, Deserialize)]
struct NodeLink {
    #[serde(default)]
    directed: bool,
    #[serde(default)]
    multigraph: bool,
    nodes: Vec<NodeLinkNode>,
    #[serde(alias = "edges")]
    links: Vec<NodeLinkEdge>,
}

/// Node-link JSON in the layout used by common graph libraries.
pub fn write_node_link<W: Write>(mut w: W, g: &WeightedGraph) -> std::io::Result<()> {
    let doc = NodeLink {
        directed: false,
        multigraph: false,
        nodes: g
            .nodes()
            .map(|(id, a)| NodeLinkNode {
                id: id.to_string(),
                canonical: Some(a.canonical.clone()),
                kb_id: a.kb_id.clone(),
                country: a.country.clone(),
            })
            .collect(),
        links: g
            .edges()
            .map(|(u, v, weight)| NodeLinkEdge {
                source: u.to_string(),
                target: v.to_string(),
                weight,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")
}

pub fn read_node_link<R: Read>(reader: R) -> Result<WeightedGraph, NetworkError> {
    let doc: NodeLink = serde_json::from_reader(reader).map_err(|e| malformed(e.to_string()))?;
    let mut g = WeightedGraph::new();
    for n in doc.nodes {
        let canonical = n.canonical.unwrap_or_else(|| n.id.clone());
        g.add_node(
            n.id,
            NodeAttrs {
                canonical,
                kb_id: n.kb_id,
                country: n.country,
            },
        );
    }
    for e in doc.links {
        g.add_weight(&e.source, &e.target, e.weight);
    }
    Ok(g)
}

fn dot_str(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn write_dot<W: Write>(mut w: W, g: &WeightedGraph) -> std::io::Result<()> {
    writeln!(w, "graph actors {{")?;
    for (id, a) in g.nodes() {
        let mut attrs = vec![format!("canonical={}", dot_str(&a.canonical))];
        if let Some(kb) = &a.kb_id {
            attrs.push(format!("kb_id={}", dot_str(kb)));
        }
        if let Some(c) = &a.country {
            attrs.push(format!("country={}", dot_str(c)));
        }
        writeln!(w, "  {} [{}];", dot_str(id), attrs.join(", "))?;
    }
    for (u, v, weight) in g.edges() {
        writeln!(w, "  {} -- {} [weight={weight}];", dot_str(u), dot_str(v))?;
    }
    writeln!(w, "}}")
}

pub fn export<W: Write>(w: W, g: &WeightedGraph, format: GraphFormat) -> std::io::Result<()> {
    match format {
        GraphFormat::GraphMl => write_graphml(w, g),
        GraphFormat::NodeLink => write_node_link(w, g),
        GraphFormat::Dot => write_dot(w, g),
    }
}

/// Read a GraphML or node-link JSON graph, choosing by file extension.
pub fn read_graph(path: &Path) -> Result<WeightedGraph, NetworkError> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    match GraphFormat::from_path(path)? {
        GraphFormat::GraphMl => read_graphml(f),
        GraphFormat::NodeLink => read_node_link(f),
        GraphFormat::Dot => Err(NetworkError::UnknownFormat("dot (export only)".into())),
    }
}
