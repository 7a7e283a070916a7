//! Alignment rules that assign SPARQL roles to AMR nodes.
//!
//! Three roles exist: the unknown (projected variable), KG entities (nodes
//! carrying a `:wiki` link) and optional intermediate variables. The unknown
//! is found by a fixed precedence of patterns; intermediates are only
//! candidates, and the transition system decides whether to use them.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::amr::{undirected_shortest_path, AmrGraph, NodeId, Question};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("node `{node}` carries {count} wiki links")]
    DuplicateWiki { node: String, count: usize },
    #[error("node `{0}` is both the unknown and a KG entity")]
    RoleConflict(String),
}

/// Which pattern identified the unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownRule {
    /// `amr-unknown`, or the node it modifies.
    A,
    /// `ARG1` of an imperative.
    B,
    /// `ARG5` of `have-degree-91` whose `ARG1` is `amr-unknown`.
    C,
    /// No pattern fired; the graph root stands in and the question is
    /// treated as having no projected variable.
    Root,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntermediateRule {
    /// Noun-aligned node strictly inside an entity/unknown path.
    E,
    /// `ARG2` of `have-degree-91`.
    F,
    /// `ARG1` of `have-quant-91`.
    G,
    /// Target of `:time`.
    H,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Unknown {
    pub node: NodeId,
    pub rule: UnknownRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Entity {
    pub node: NodeId,
    pub iri: String,
    pub name_tokens: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Intermediate {
    pub node: NodeId,
    pub rule: IntermediateRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoleAnnotation {
    pub unknown: NodeId,
    pub unknown_rule: UnknownRule,
    pub entities: Vec<Entity>,
    pub intermediates: Vec<Intermediate>,
}

impl RoleAnnotation {
    /// False when the unknown is only the root fallback.
    pub fn has_unknown(&self) -> bool {
        self.unknown_rule != UnknownRule::Root
    }

    pub fn entity(&self, node: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.node.as_str() == node)
    }

    pub fn intermediate_index(&self, node: &str) -> Option<usize> {
        self.intermediates.iter().position(|i| i.node.as_str() == node)
    }
}

const PARTNER_ROLES: &[&str] = &["mod", "domain", "quant"];

fn is_degree_arg1(g: &AmrGraph, node: &str) -> bool {
    g.incoming(node).any(|e| e.role == "ARG1" && g.concept(e.source.as_str()) == Some("have-degree-91"))
}

/// `:polarity amr-unknown` marks a yes/no question, not a wh-focus.
fn is_polarity(g: &AmrGraph, node: &str) -> bool {
    g.incoming(node).any(|e| e.role == "polarity")
}

fn rule_a(g: &AmrGraph) -> Option<NodeId> {
    let (id, _) = g
        .nodes()
        .filter(|(_, n)| !n.is_constant() && n.concept == "amr-unknown")
        .find(|(id, _)| !is_degree_arg1(g, id.as_str()) && !is_polarity(g, id.as_str()))?;
    let partner = g
        .edges()
        .iter()
        .filter(|e| PARTNER_ROLES.contains(&e.role.as_str()))
        .filter_map(|e| {
            if &e.target == id {
                Some(&e.source)
            } else if &e.source == id {
                Some(&e.target)
            } else {
                None
            }
        })
        .find(|other| g.node(other.as_str()).is_some_and(|n| !n.is_constant()));
    Some(partner.unwrap_or(id).clone())
}

fn rule_b(g: &AmrGraph) -> Option<NodeId> {
    g.nodes().find_map(|(id, _)| {
        let imperative =
            g.outgoing(id.as_str()).any(|e| e.role == "mode" && g.concept(e.target.as_str()) == Some("imperative"));
        if !imperative {
            return None;
        }
        g.outgoing(id.as_str()).find(|e| e.role == "ARG1").map(|e| e.target.clone())
    })
}

fn rule_c(g: &AmrGraph) -> Option<NodeId> {
    g.nodes().filter(|(_, n)| n.concept == "have-degree-91").find_map(|(id, _)| {
        let asks =
            g.outgoing(id.as_str()).any(|e| e.role == "ARG1" && g.concept(e.target.as_str()) == Some("amr-unknown"));
        if !asks {
            return None;
        }
        g.outgoing(id.as_str()).find(|e| e.role == "ARG5").map(|e| e.target.clone())
    })
}

fn root_fallback(g: &AmrGraph) -> NodeId {
    let usable = |id: &str| g.node(id).is_some_and(|n| !n.is_constant()) && g.wiki_links(id).is_empty();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([g.root()]);
    while let Some(n) = queue.pop_front() {
        if !seen.insert(n) {
            continue;
        }
        if usable(n.as_str()) {
            return n.clone();
        }
        queue.extend(g.neighbors(n.as_str()));
    }
    g.root().clone()
}

/// First matching rule in order (a), (b), (c); the root otherwise.
pub fn classify_unknown(g: &AmrGraph) -> Unknown {
    if let Some(node) = rule_a(g) {
        return Unknown { node, rule: UnknownRule::A };
    }
    if let Some(node) = rule_b(g) {
        return Unknown { node, rule: UnknownRule::B };
    }
    if let Some(node) = rule_c(g) {
        return Unknown { node, rule: UnknownRule::C };
    }
    Unknown { node: root_fallback(g), rule: UnknownRule::Root }
}

/// Every wiki-linked node, ordered by the first token of its name.
pub fn classify_entities(g: &AmrGraph) -> Result<Vec<Entity>, RuleError> {
    let mut out = Vec::new();
    for (node, links) in g.wiki_nodes() {
        match links {
            [] => continue,
            [iri] => {
                let tokens: BTreeSet<usize> = g
                    .name_subgraph(node.as_str())
                    .into_iter()
                    .filter_map(|n| g.alignment(n.as_str()))
                    .flatten()
                    .copied()
                    .collect();
                out.push(Entity { node: node.clone(), iri: iri.clone(), name_tokens: tokens.into_iter().collect() });
            }
            many => {
                return Err(RuleError::DuplicateWiki { node: node.to_string(), count: many.len() });
            }
        }
    }
    out.sort_by(|a, b| {
        let key = |e: &Entity| (e.name_tokens.first().copied().unwrap_or(usize::MAX), e.node.clone());
        key(a).cmp(&key(b))
    });
    Ok(out)
}

/// Candidate intermediate variables from rules (e) through (h).
pub fn classify_intermediates(g: &AmrGraph, unknown: &NodeId, entities: &[Entity], q: &Question) -> Vec<Intermediate> {
    let excluded: BTreeSet<&NodeId> = entities.iter().map(|e| &e.node).chain([unknown]).collect();
    let mut found: Vec<Intermediate> = Vec::new();
    let mut push = |node: &NodeId, rule: IntermediateRule| {
        let usable = g.node(node.as_str()).is_some_and(|n| !n.is_constant());
        if usable && !excluded.contains(node) && !found.iter().any(|i| &i.node == node) {
            found.push(Intermediate { node: node.clone(), rule });
        }
    };

    for e in entities {
        let Ok(path) = undirected_shortest_path(g, e.node.as_str(), unknown.as_str()) else {
            continue;
        };
        for n in path.interior() {
            let noun = g.alignment(n.as_str()).is_some_and(|t| t.iter().any(|&i| q.is_noun(i)));
            if noun {
                push(n, IntermediateRule::E);
            }
        }
    }
    let by_head = |head: &str, role: &str| -> Vec<NodeId> {
        g.edges()
            .iter()
            .filter(|e| e.role == role && g.concept(e.source.as_str()) == Some(head))
            .map(|e| e.target.clone())
            .collect()
    };
    for n in by_head("have-degree-91", "ARG2") {
        push(&n, IntermediateRule::F);
    }
    for n in by_head("have-quant-91", "ARG1") {
        push(&n, IntermediateRule::G);
    }
    for e in g.edges().iter().filter(|e| e.role == "time") {
        push(&e.target, IntermediateRule::H);
    }

    found.sort_by(|a, b| {
        let key = |i: &Intermediate| (g.first_token(i.node.as_str()).unwrap_or(usize::MAX), i.node.clone());
        key(a).cmp(&key(b))
    });
    found
}

pub fn annotate(g: &AmrGraph, q: &Question) -> Result<RoleAnnotation, RuleError> {
    let unknown = classify_unknown(g);
    let entities = classify_entities(g)?;
    if entities.iter().any(|e| e.node == unknown.node) {
        return Err(RuleError::RoleConflict(unknown.node.to_string()));
    }
    let intermediates = classify_intermediates(g, &unknown.node, &entities, q);
    Ok(RoleAnnotation { unknown: unknown.node, unknown_rule: unknown.rule, entities, intermediates })
}
