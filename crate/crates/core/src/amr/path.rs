use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{AmrError, AmrGraph, NodeId, Question};

/// A simple path in the undirected view of an AMR graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AmrPath {
    nodes: Vec<NodeId>,
}

impl AmrPath {
    /// Checks adjacency and simplicity against `g`.
    pub fn new(g: &AmrGraph, nodes: Vec<NodeId>) -> Result<Self, AmrError> {
        if nodes.len() < 2 {
            return Err(AmrError::InvalidGraph("a path needs at least two nodes".into()));
        }
        let distinct: BTreeSet<&NodeId> = nodes.iter().collect();
        if distinct.len() != nodes.len() {
            return Err(AmrError::InvalidGraph("path repeats a node".into()));
        }
        for w in nodes.windows(2) {
            if !g.neighbors(w[0].as_str()).any(|n| n == &w[1]) {
                return Err(AmrError::InvalidGraph(format!("`{}` and `{}` are not adjacent", w[0], w[1])));
            }
        }
        Ok(AmrPath { nodes })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn endpoint_a(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn endpoint_b(&self) -> &NodeId {
        self.nodes.last().expect("non-empty path")
    }

    /// Number of nodes on the path.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reversed(&self) -> AmrPath {
        AmrPath { nodes: self.nodes.iter().rev().cloned().collect() }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n.as_str() == id)
    }

    pub fn interior(&self) -> &[NodeId] {
        &self.nodes[1..self.nodes.len() - 1]
    }
}

impl fmt::Display for AmrPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for n in &self.nodes {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            f.write_str(n.as_str())?;
        }
        Ok(())
    }
}

/// Shortest undirected path from `a` to `b`. Among equally short paths the
/// lexicographically smallest id sequence is taken, read from the smaller
/// endpoint, so `path(b, a)` is always `path(a, b)` reversed.
pub fn undirected_shortest_path(g: &AmrGraph, a: &str, b: &str) -> Result<AmrPath, AmrError> {
    for end in [a, b] {
        if !g.contains(end) {
            return Err(AmrError::InvalidGraph(format!("`{end}` is not a node")));
        }
    }
    if a == b {
        return Err(AmrError::InvalidGraph(format!("path endpoints are both `{a}`")));
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };

    let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
    dist.insert(hi, 0);
    let mut queue = VecDeque::from([hi]);
    while let Some(n) = queue.pop_front() {
        let d = dist[n];
        for m in g.neighbors(n) {
            if !dist.contains_key(m.as_str()) {
                dist.insert(m.as_str(), d + 1);
                queue.push_back(m.as_str());
            }
        }
    }
    let Some(&total) = dist.get(lo) else {
        return Err(AmrError::NoPath(a.into(), b.into()));
    };

    let mut nodes = vec![NodeId::from(lo)];
    let mut cur = lo;
    for remaining in (0..total).rev() {
        // neighbours iterate in ascending order, so the first hit is the smallest
        let next =
            g.neighbors(cur).find(|m| dist.get(m.as_str()) == Some(&remaining)).expect("BFS layer has a predecessor");
        nodes.push(next.clone());
        cur = next.as_str();
    }
    if lo != a {
        nodes.reverse();
    }
    Ok(AmrPath { nodes })
}

/// Question tokens aligned to the path, plus the name subgraph of any
/// endpoint that carries a KG link. Ascending, deduplicated.
pub fn supporting_tokens(g: &AmrGraph, path: &AmrPath, q: &Question) -> Vec<usize> {
    let mut out = BTreeSet::new();
    let mut add = |id: &str| {
        if let Some(tokens) = g.alignment(id) {
            out.extend(tokens.iter().copied().filter(|&t| t < q.len()));
        }
    };
    for n in path.nodes() {
        add(n.as_str());
    }
    for end in [path.endpoint_a(), path.endpoint_b()] {
        if !g.wiki_links(end.as_str()).is_empty() {
            for n in g.name_subgraph(end.as_str()) {
                add(n.as_str());
            }
        }
    }
    out.into_iter().collect()
}
