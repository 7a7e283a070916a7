//! AMR graphs of questions: node/edge model, Penman I/O and path queries.

mod path;
mod penman;

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use path::{supporting_tokens, undirected_shortest_path, AmrPath};
pub use penman::{parse_penman, serialize_penman};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AmrError {
    #[error("malformed Penman at byte {offset}: {message}")]
    MalformedPenman { offset: usize, message: String },
    #[error("alignment for `{node}` refers to {detail}")]
    DanglingAlignment { node: String, detail: String },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
    #[error("no path between `{0}` and `{1}`")]
    NoPath(String, String),
}

/// Identifier of an AMR node: the Penman variable, or `parent:role` for
/// attribute constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// `(v / concept)` instance.
    Variable,
    /// Attribute constant; `quoted` records whether it was a string literal.
    Constant { quoted: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub concept: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, NodeKind::Constant { .. })
    }
}

/// A directed edge in normalized direction. `inverted` is set when the
/// source text used the `-of` form, i.e. the edge was written on `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub source: NodeId,
    pub role: String,
    pub target: NodeId,
    pub inverted: bool,
}

/// A question: surface tokens with coarse part-of-speech tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
}

impl Question {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        tokens: Vec<String>,
        pos: Vec<String>,
    ) -> Result<Self, AmrError> {
        if tokens.is_empty() {
            return Err(AmrError::InvalidQuestion("no tokens".into()));
        }
        if tokens.len() != pos.len() {
            return Err(AmrError::InvalidQuestion(format!("{} tokens but {} POS tags", tokens.len(), pos.len())));
        }
        Ok(Question { id: id.into(), text: text.into(), tokens, pos })
    }

    /// NOUN or PROPN.
    pub fn is_noun(&self, index: usize) -> bool {
        matches!(self.pos.get(index).map(String::as_str), Some("NOUN") | Some("PROPN"))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// External node annotations that do not live in the Penman string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(default)]
    pub alignments: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub wiki: BTreeMap<String, String>,
    /// Bound for alignment indices; unchecked when absent.
    #[serde(default)]
    pub token_count: Option<usize>,
}

/// Rooted, labeled, directed graph. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<Edge>,
    root: NodeId,
    wiki: BTreeMap<NodeId, Vec<String>>,
    align: BTreeMap<NodeId, BTreeSet<usize>>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl AmrGraph {
    pub fn builder() -> AmrGraphBuilder {
        AmrGraphBuilder::default()
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn concept(&self, id: &str) -> Option<&str> {
        self.nodes.get(id).map(|n| n.concept.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &Node)> {
        self.nodes.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges leaving `id` in normalized direction.
    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.source.as_str() == id)
    }

    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.target.as_str() == id)
    }

    /// Undirected neighbours in ascending id order.
    pub fn neighbors(&self, id: &str) -> impl Iterator<Item = &NodeId> {
        self.adjacency.get(id).into_iter().flatten()
    }

    /// All KG links attached to `id` (normally zero or one).
    pub fn wiki_links(&self, id: &str) -> &[String] {
        self.wiki.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn wiki_nodes(&self) -> impl Iterator<Item = (&NodeId, &[String])> {
        self.wiki.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn alignment(&self, id: &str) -> Option<&BTreeSet<usize>> {
        self.align.get(id)
    }

    pub fn first_token(&self, id: &str) -> Option<usize> {
        self.align.get(id).and_then(|s| s.iter().next().copied())
    }

    /// The node plus its `:name` targets and their `:opN` constants.
    pub fn name_subgraph(&self, id: &str) -> Vec<&NodeId> {
        let mut out = Vec::new();
        let Some((key, _)) = self.nodes.get_key_value(id) else {
            return out;
        };
        out.push(key);
        for name_edge in self.outgoing(key.as_str()).filter(|e| e.role == "name") {
            out.push(&name_edge.target);
            for op in self.outgoing(name_edge.target.as_str()).filter(|e| is_op_role(&e.role)) {
                out.push(&op.target);
            }
        }
        out
    }
}

pub(crate) fn is_op_role(role: &str) -> bool {
    role.strip_prefix("op").is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Incremental constructor that validates graph invariants on `build`.
#[derive(Debug, Default, Clone)]
pub struct AmrGraphBuilder {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<Edge>,
    root: Option<NodeId>,
    wiki: BTreeMap<NodeId, Vec<String>>,
    align: BTreeMap<NodeId, BTreeSet<usize>>,
    token_count: Option<usize>,
}

impl AmrGraphBuilder {
    pub fn node(mut self, id: &str, concept: &str) -> Self {
        self.add_node(id.into(), Node { concept: concept.into(), kind: NodeKind::Variable });
        self
    }

    pub fn constant(mut self, id: &str, value: &str, quoted: bool) -> Self {
        self.add_node(id.into(), Node { concept: value.into(), kind: NodeKind::Constant { quoted } });
        self
    }

    pub fn edge(mut self, source: &str, role: &str, target: &str) -> Self {
        self.add_edge(Edge { source: source.into(), role: role.into(), target: target.into(), inverted: false });
        self
    }

    pub fn root(mut self, id: &str) -> Self {
        self.root = Some(id.into());
        self
    }

    pub fn wiki(mut self, id: &str, iri: &str) -> Self {
        self.add_wiki(id.into(), iri.into());
        self
    }

    pub fn align(mut self, id: &str, tokens: &[usize]) -> Self {
        self.align.entry(id.into()).or_default().extend(tokens.iter().copied());
        self
    }

    pub fn token_count(mut self, n: usize) -> Self {
        self.token_count = Some(n);
        self
    }

    pub(crate) fn add_node(&mut self, id: NodeId, node: Node) -> bool {
        if self.nodes.contains_key(&id) {
            return false;
        }
        if self.root.is_none() {
            self.root = Some(id.clone());
        }
        self.nodes.insert(id, node);
        true
    }

    pub(crate) fn add_edge(&mut self, edge: Edge) {
        self.edges.push(edge);
    }

    pub(crate) fn add_wiki(&mut self, id: NodeId, iri: String) {
        let links = self.wiki.entry(id).or_default();
        if !links.contains(&iri) {
            links.push(iri);
        }
    }

    pub(crate) fn has_node(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub(crate) fn apply_sidecar(&mut self, sidecar: &Sidecar) {
        if let Some(n) = sidecar.token_count {
            self.token_count = Some(n);
        }
        for (node, tokens) in &sidecar.alignments {
            self.align.entry(node.as_str().into()).or_default().extend(tokens.iter().copied());
        }
        for (node, iri) in &sidecar.wiki {
            self.add_wiki(node.as_str().into(), iri.clone());
        }
    }

    pub fn build(self) -> Result<AmrGraph, AmrError> {
        let root = self.root.ok_or_else(|| AmrError::InvalidGraph("empty graph".into()))?;
        if !self.nodes.contains_key(&root) {
            return Err(AmrError::InvalidGraph(format!("root `{root}` is not a node")));
        }
        let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> =
            self.nodes.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        for e in &self.edges {
            for end in [&e.source, &e.target] {
                if !self.nodes.contains_key(end) {
                    return Err(AmrError::InvalidGraph(format!("edge endpoint `{end}` is not a node")));
                }
            }
            if e.source != e.target {
                adjacency.get_mut(&e.source).unwrap().insert(e.target.clone());
                adjacency.get_mut(&e.target).unwrap().insert(e.source.clone());
            }
        }
        for (node, tokens) in &self.align {
            if !self.nodes.contains_key(node) {
                return Err(AmrError::DanglingAlignment { node: node.to_string(), detail: "an unknown node".into() });
            }
            if let (Some(limit), Some(&max)) = (self.token_count, tokens.iter().next_back()) {
                if max >= limit {
                    return Err(AmrError::DanglingAlignment {
                        node: node.to_string(),
                        detail: format!("token {max} but the question has {limit} tokens"),
                    });
                }
            }
        }
        for node in self.wiki.keys() {
            if !self.nodes.contains_key(node) {
                return Err(AmrError::DanglingAlignment {
                    node: node.to_string(),
                    detail: "an unknown node (wiki link)".into(),
                });
            }
        }

        // connectivity, undirected
        let mut seen = BTreeSet::new();
        let mut frontier = vec![&root];
        while let Some(n) = frontier.pop() {
            if seen.insert(n) {
                frontier.extend(adjacency[n].iter());
            }
        }
        if seen.len() != self.nodes.len() {
            return Err(AmrError::InvalidGraph("graph is not connected".into()));
        }

        Ok(AmrGraph { nodes: self.nodes, edges: self.edges, root, wiki: self.wiki, align: self.align, adjacency })
    }
}
