//! The transition system: a stack of AMR paths consumed by header, relation,
//! reduce and close actions, emitting one triple per relation action.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amr::{undirected_shortest_path, AmrGraph, AmrPath};
use crate::rules::RoleAnnotation;
use crate::sparql::{split_iri, HeaderKind, PrefixTable, QueryHeader, SparqlQuery, Term, TriplePattern};

/// Name of the projected variable.
pub const UNKNOWN_VAR: &str = "s";

/// Variable name of the `k`-th intermediate (0-based): `i`, `i2`, `i3`, ...
pub fn intermediate_var(k: usize) -> String {
    if k == 0 {
        "i".to_string()
    } else {
        format!("i{}", k + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Triple is `(termA, rel, termB)`.
    Forward,
    /// Triple is `(termB, rel, termA)`.
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

/// A KG relation choice for the top path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation {
    pub ns: String,
    pub local: String,
    pub dir: Direction,
}

impl Relation {
    pub fn new(ns: &str, local: &str, dir: Direction) -> Self {
        Relation { ns: ns.to_string(), local: local.to_string(), dir }
    }

    /// Splits a full predicate IRI; `None` if it has no usable local name.
    pub fn from_predicate(predicate: &str, dir: Direction) -> Option<Self> {
        split_iri(predicate).map(|(ns, local)| Relation::new(ns, local, dir))
    }

    pub fn predicate(&self) -> String {
        format!("{}{}", self.ns, self.local)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "ActionRepr", into = "ActionRepr")]
pub enum Action {
    Header(HeaderKind),
    Relation(Relation),
    Reduce,
    Close,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Header(k) => write!(f, "{k}"),
            Action::Relation(r) => write!(f, "{}({})", r.local, r.dir),
            Action::Reduce => f.write_str("REDUCE"),
            Action::Close => f.write_str("CLOSE"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ActionRepr {
    Keyword(String),
    Relation { rel: String, ns: String, dir: Direction },
}

impl From<Action> for ActionRepr {
    fn from(a: Action) -> Self {
        match a {
            Action::Header(k) => ActionRepr::Keyword(k.keyword().to_string()),
            Action::Relation(r) => ActionRepr::Relation { rel: r.local, ns: r.ns, dir: r.dir },
            Action::Reduce => ActionRepr::Keyword("REDUCE".into()),
            Action::Close => ActionRepr::Keyword("CLOSE".into()),
        }
    }
}

impl TryFrom<ActionRepr> for Action {
    type Error = String;

    fn try_from(r: ActionRepr) -> Result<Self, String> {
        match r {
            ActionRepr::Keyword(k) => match k.as_str() {
                "REDUCE" => Ok(Action::Reduce),
                "CLOSE" => Ok(Action::Close),
                other => HeaderKind::from_keyword(other)
                    .map(Action::Header)
                    .ok_or_else(|| format!("unknown action `{other}`")),
            },
            ActionRepr::Relation { rel, ns, dir } if !rel.is_empty() && !ns.is_empty() => {
                Ok(Action::Relation(Relation { ns, local: rel, dir }))
            }
            ActionRepr::Relation { .. } => Err("relation needs non-empty `rel` and `ns`".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum PathCategory {
    EntityUnknown,
    EntityIntermediate,
    IntermediateUnknown,
    IntermediateIntermediate,
    EntityEntity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StackedPath {
    pub path: AmrPath,
    pub term_a: Term,
    pub term_b: Term,
    pub category: PathCategory,
}

impl StackedPath {
    /// The triple a relation action would emit for this path.
    pub fn triple(&self, rel: &Relation) -> TriplePattern {
        let predicate = rel.predicate();
        match rel.dir {
            Direction::Forward => {
                TriplePattern { subject: self.term_a.clone(), predicate, object: self.term_b.clone() }
            }
            Direction::Backward => {
                TriplePattern { subject: self.term_b.clone(), predicate, object: self.term_a.clone() }
            }
        }
    }
}

/// One endpoint of a candidate path: its node, term, and ordering token.
struct Endpoint<'a> {
    node: &'a str,
    term: Term,
    token: usize,
}

/// All candidate paths, top of stack first.
pub fn init_stack(g: &AmrGraph, ann: &RoleAnnotation) -> Vec<StackedPath> {
    let entities: Vec<Endpoint> = ann
        .entities
        .iter()
        .map(|e| Endpoint {
            node: e.node.as_str(),
            term: Term::Iri(e.iri.clone()),
            token: e.name_tokens.first().copied().unwrap_or(usize::MAX),
        })
        .collect();
    let intermediates: Vec<Endpoint> = ann
        .intermediates
        .iter()
        .enumerate()
        .map(|(k, i)| Endpoint {
            node: i.node.as_str(),
            term: Term::Var(intermediate_var(k)),
            token: g.first_token(i.node.as_str()).unwrap_or(usize::MAX),
        })
        .collect();
    let unknown = ann.has_unknown().then(|| Endpoint {
        node: ann.unknown.as_str(),
        term: Term::var(UNKNOWN_VAR),
        token: g.first_token(ann.unknown.as_str()).unwrap_or(usize::MAX),
    });

    let mut pairs: Vec<(PathCategory, &Endpoint, &Endpoint)> = Vec::new();
    if let Some(u) = &unknown {
        pairs.extend(entities.iter().map(|e| (PathCategory::EntityUnknown, e, u)));
    }
    for e in &entities {
        pairs.extend(intermediates.iter().map(|i| (PathCategory::EntityIntermediate, e, i)));
    }
    if let Some(u) = &unknown {
        pairs.extend(intermediates.iter().map(|i| (PathCategory::IntermediateUnknown, i, u)));
    }
    for (j, a) in intermediates.iter().enumerate() {
        pairs.extend(intermediates[j + 1..].iter().map(|b| (PathCategory::IntermediateIntermediate, a, b)));
    }
    if unknown.is_none() {
        for (j, a) in entities.iter().enumerate() {
            pairs.extend(entities[j + 1..].iter().map(|b| (PathCategory::EntityEntity, a, b)));
        }
    }

    let mut stack: Vec<(usize, StackedPath)> = pairs
        .into_iter()
        .filter(|(_, a, b)| a.node != b.node)
        .filter_map(|(category, a, b)| {
            let path = undirected_shortest_path(g, a.node, b.node).ok()?;
            Some((a.token, StackedPath { path, term_a: a.term.clone(), term_b: b.term.clone(), category }))
        })
        .collect();
    stack.sort_by(|(ta, a), (tb, b)| {
        a.category
            .cmp(&b.category)
            .then(ta.cmp(tb))
            .then(a.path.len().cmp(&b.path.len()))
            .then_with(|| a.path.nodes().cmp(b.path.nodes()))
    });
    stack.into_iter().map(|(_, p)| p).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    AwaitHeader,
    Transpiling,
    Closed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("action {action} is illegal in phase {phase:?} with stack depth {depth}")]
    IllegalAction { action: String, phase: Phase, depth: usize },
    #[error("CLOSE with {0} paths left on the stack")]
    NonEmptyStackAtClose(usize),
    #[error("action sequence ended before CLOSE")]
    Unterminated,
}

/// Machine state as a value: `step` consumes it and returns the successor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MachineState {
    phase: Phase,
    /// Top first.
    stack: Vec<StackedPath>,
    emitted: Vec<TriplePattern>,
    header: Option<HeaderKind>,
    steps: usize,
    initial_depth: usize,
}

impl MachineState {
    pub fn new(stack: Vec<StackedPath>) -> Self {
        let initial_depth = stack.len();
        MachineState { phase: Phase::AwaitHeader, stack, emitted: Vec::new(), header: None, steps: 0, initial_depth }
    }

    pub fn start(g: &AmrGraph, ann: &RoleAnnotation) -> Self {
        MachineState::new(init_stack(g, ann))
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Remaining paths, top first.
    pub fn stack(&self) -> &[StackedPath] {
        &self.stack
    }

    pub fn top(&self) -> Option<&StackedPath> {
        self.stack.first()
    }

    pub fn emitted(&self) -> &[TriplePattern] {
        &self.emitted
    }

    pub fn header(&self) -> Option<HeaderKind> {
        self.header
    }

    /// Number of actions applied so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn initial_depth(&self) -> usize {
        self.initial_depth
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    fn illegal(&self, action: &Action) -> MachineError {
        MachineError::IllegalAction { action: action.to_string(), phase: self.phase, depth: self.stack.len() }
    }

    pub fn step(mut self, action: &Action) -> Result<MachineState, MachineError> {
        match (self.phase, action) {
            (Phase::AwaitHeader, Action::Header(kind)) => {
                self.header = Some(*kind);
                self.phase = Phase::Transpiling;
            }
            (Phase::Transpiling, Action::Relation(rel)) if !self.stack.is_empty() => {
                let top = self.stack.remove(0);
                self.emitted.push(top.triple(rel));
            }
            (Phase::Transpiling, Action::Reduce) if !self.stack.is_empty() => {
                self.stack.remove(0);
            }
            (Phase::Transpiling, Action::Close) if self.stack.is_empty() => {
                self.phase = Phase::Closed;
            }
            _ => return Err(self.illegal(action)),
        }
        self.steps += 1;
        Ok(self)
    }

    /// The query built so far, with prefixes drawn from `prefixes`.
    pub fn query(&self, prefixes: &PrefixTable) -> SparqlQuery {
        let header = match self.header {
            Some(HeaderKind::Ask) => QueryHeader::Ask,
            Some(HeaderKind::Count) => QueryHeader::Count { var: UNKNOWN_VAR.into() },
            _ => QueryHeader::Select { var: UNKNOWN_VAR.into(), distinct: true },
        };
        SparqlQuery::new(header, self.emitted.clone()).with_used_prefixes(prefixes)
    }
}

/// Folds `actions` over the initial stack, using the default prefix table.
pub fn run(actions: &[Action], g: &AmrGraph, ann: &RoleAnnotation) -> Result<SparqlQuery, MachineError> {
    run_with_prefixes(actions, g, ann, &PrefixTable::default())
}

pub fn run_with_prefixes(
    actions: &[Action],
    g: &AmrGraph,
    ann: &RoleAnnotation,
    prefixes: &PrefixTable,
) -> Result<SparqlQuery, MachineError> {
    let mut state = MachineState::start(g, ann);
    for action in actions {
        if state.is_closed() {
            return Err(state.illegal(action));
        }
        if *action == Action::Close && state.phase == Phase::Transpiling && !state.stack.is_empty() {
            return Err(MachineError::NonEmptyStackAtClose(state.stack.len()));
        }
        state = state.step(action)?;
    }
    if !state.is_closed() {
        return Err(MachineError::Unterminated);
    }
    Ok(state.query(prefixes))
}
