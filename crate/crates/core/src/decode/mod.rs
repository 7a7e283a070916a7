//! Constrained decoding: which actions the KG permits at each step, which
//! question tokens support the top path, and a greedy driver over a policy.

mod policy;

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::amr::{supporting_tokens, AmrGraph, Question};
use crate::kg::{solutions, TripleStore};
use crate::machine::{Action, Direction, MachineError, MachineState, Phase, Relation, StackedPath};
use crate::rules::RoleAnnotation;
use crate::sparql::{HeaderKind, PrefixTable, SparqlQuery, Term};

pub use policy::{trigram_dice, LexicalPolicy, ReplayPolicy, DEFAULT_TAU};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("the machine is closed")]
    MachineClosed,
    #[error("the path stack is empty")]
    EmptyStack,
    #[error("policy chose {action} at step {step}, outside the action mask")]
    MaskViolation { step: usize, action: String },
    #[error(transparent)]
    Machine(#[from] MachineError),
}

/// The actions allowed in one machine state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionMask {
    pub headers_allowed: BTreeSet<HeaderKind>,
    pub reduce_allowed: bool,
    pub close_allowed: bool,
    pub relation_candidates: BTreeSet<Relation>,
}

impl ActionMask {
    pub fn allows(&self, action: &Action) -> bool {
        match action {
            Action::Header(k) => self.headers_allowed.contains(k),
            Action::Relation(r) => self.relation_candidates.contains(r),
            Action::Reduce => self.reduce_allowed,
            Action::Close => self.close_allowed,
        }
    }

    /// Every allowed action: headers, relations, then reduce and close.
    pub fn allowed(&self) -> Vec<Action> {
        let mut out: Vec<Action> = self.headers_allowed.iter().copied().map(Action::Header).collect();
        out.extend(self.relation_candidates.iter().cloned().map(Action::Relation));
        if self.reduce_allowed {
            out.push(Action::Reduce);
        }
        if self.close_allowed {
            out.push(Action::Close);
        }
        out
    }
}

impl Serialize for ActionMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.allowed().serialize(s)
    }
}

/// Question tokens visible to the policy at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateMask {
    /// 1-based index of the action about to be chosen.
    pub step: usize,
    pub token_indices: Vec<usize>,
}

fn add_incident(out: &mut BTreeSet<Relation>, store: &TripleStore, term: &Term, is_a: bool) {
    let rels = store.relations_of_term(term);
    // An outgoing relation of endpoint A makes A the subject: forward.
    let (out_dir, in_dir) =
        if is_a { (Direction::Forward, Direction::Backward) } else { (Direction::Backward, Direction::Forward) };
    out.extend(rels.outgoing.iter().filter_map(|p| Relation::from_predicate(p, out_dir)));
    out.extend(rels.incoming.iter().filter_map(|p| Relation::from_predicate(p, in_dir)));
}

fn relation_candidates(
    top: &StackedPath,
    emitted: &[crate::sparql::TriplePattern],
    store: &TripleStore,
) -> BTreeSet<Relation> {
    let mut out = BTreeSet::new();
    match (&top.term_a, &top.term_b) {
        (Term::Iri(a), Term::Iri(b)) => {
            let (ta, tb) = (Term::Iri(a.clone()), Term::Iri(b.clone()));
            for p in store.relations_of(a).outgoing {
                if store.contains(a, &p, &tb) {
                    out.extend(Relation::from_predicate(&p, Direction::Forward));
                }
            }
            for p in store.relations_of(b).outgoing {
                if store.contains(b, &p, &ta) {
                    out.extend(Relation::from_predicate(&p, Direction::Backward));
                }
            }
        }
        (a @ Term::Iri(_), _) => add_incident(&mut out, store, a, true),
        (_, b @ Term::Iri(_)) => add_incident(&mut out, store, b, false),
        (a, b) => {
            let sols = if emitted.is_empty() { BTreeSet::new() } else { solutions(store, emitted) };
            let mut seen = HashSet::new();
            for sol in &sols {
                for (term, is_a) in [(a, true), (b, false)] {
                    if let Some(value) = term.as_var().and_then(|v| sol.get(v)) {
                        if seen.insert((value.clone(), is_a)) {
                            add_incident(&mut out, store, value, is_a);
                        }
                    }
                }
            }
            if seen.is_empty() {
                for p in store.predicates() {
                    for dir in [Direction::Forward, Direction::Backward] {
                        out.extend(Relation::from_predicate(p, dir));
                    }
                }
            }
        }
    }
    out
}

pub fn action_mask(state: &MachineState, store: &TripleStore) -> Result<ActionMask, DecodeError> {
    match state.phase() {
        Phase::Closed => Err(DecodeError::MachineClosed),
        Phase::AwaitHeader => Ok(ActionMask { headers_allowed: HeaderKind::ALL.into(), ..ActionMask::default() }),
        Phase::Transpiling => Ok(match state.top() {
            None => ActionMask { close_allowed: true, ..ActionMask::default() },
            Some(top) => ActionMask {
                reduce_allowed: true,
                relation_candidates: relation_candidates(top, state.emitted(), store),
                ..ActionMask::default()
            },
        }),
    }
}

pub fn state_mask(state: &MachineState, g: &AmrGraph, q: &Question) -> Result<StateMask, DecodeError> {
    let top = state.top().ok_or(DecodeError::EmptyStack)?;
    Ok(StateMask { step: state.steps() + 1, token_indices: supporting_tokens(g, &top.path, q) })
}

/// Chooses the next action. Implementations must return an action the mask
/// allows and keep no per-question state.
pub trait Policy: Send + Sync {
    fn choose(&self, state: &MachineState, mask: &ActionMask, state_mask: Option<&StateMask>, q: &Question) -> Action;
}

/// Everything the driver saw at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub action_mask: ActionMask,
    /// Absent for header and close steps, where the stack top is irrelevant.
    pub state_mask: Option<StateMask>,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transpilation {
    pub query: SparqlQuery,
    pub actions: Vec<Action>,
    pub initial_depth: usize,
    pub trace: Vec<StepRecord>,
}

impl Transpilation {
    /// Mask pairs for the steps that had a non-empty stack.
    pub fn per_step_masks(&self) -> Vec<(&ActionMask, &StateMask)> {
        self.trace.iter().filter_map(|s| s.state_mask.as_ref().map(|m| (&s.action_mask, m))).collect()
    }
}

pub fn transpile(
    q: &Question,
    g: &AmrGraph,
    ann: &RoleAnnotation,
    store: &TripleStore,
    policy: &dyn Policy,
) -> Result<Transpilation, DecodeError> {
    transpile_with_prefixes(q, g, ann, store, policy, &PrefixTable::default())
}

/// Greedy decoding: mask, choose, step until the machine closes.
pub fn transpile_with_prefixes(
    q: &Question,
    g: &AmrGraph,
    ann: &RoleAnnotation,
    store: &TripleStore,
    policy: &dyn Policy,
    prefixes: &PrefixTable,
) -> Result<Transpilation, DecodeError> {
    let mut state = MachineState::start(g, ann);
    let initial_depth = state.initial_depth();
    let mut trace = Vec::new();
    while !state.is_closed() {
        let mask = action_mask(&state, store)?;
        let smask = match state.phase() {
            Phase::Transpiling if state.top().is_some() => Some(state_mask(&state, g, q)?),
            _ => None,
        };
        let action = policy.choose(&state, &mask, smask.as_ref(), q);
        let step = state.steps() + 1;
        if !mask.allows(&action) {
            return Err(DecodeError::MaskViolation { step, action: action.to_string() });
        }
        state = state.step(&action)?;
        trace.push(StepRecord { step, action_mask: mask, state_mask: smask, action });
    }
    let actions = trace.iter().map(|s| s.action.clone()).collect();
    Ok(Transpilation { query: state.query(prefixes), actions, initial_depth, trace })
}
