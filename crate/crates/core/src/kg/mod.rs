//! In-memory triple store with subject, object and predicate indexes.

mod exec;
mod ntriples;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::sparql::Term;

pub use exec::{execute, solutions, AnswerSet, ExecError, Solution};
pub use ntriples::{load_ntriples, LoadError};

/// Predicates incident to one KG term.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Relations {
    /// Predicates `p` with `(term, p, _)` in the store.
    pub outgoing: BTreeSet<String>,
    /// Predicates `p` with `(_, p, term)` in the store.
    pub incoming: BTreeSet<String>,
}

/// Immutable after loading; every read is safe to share across threads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleStore {
    spo: BTreeMap<String, BTreeMap<String, BTreeSet<Term>>>,
    ops: BTreeMap<Term, BTreeMap<String, BTreeSet<String>>>,
    by_pred: BTreeMap<String, BTreeSet<(String, Term)>>,
    len: usize,
}

impl TripleStore {
    pub fn new() -> Self {
        TripleStore::default()
    }

    /// Adds `(subject, predicate, object)`; false if already present.
    pub fn insert(&mut self, subject: &str, predicate: &str, object: Term) -> bool {
        let fresh = self
            .spo
            .entry(subject.to_string())
            .or_default()
            .entry(predicate.to_string())
            .or_default()
            .insert(object.clone());
        if !fresh {
            return false;
        }
        self.ops
            .entry(object.clone())
            .or_default()
            .entry(predicate.to_string())
            .or_default()
            .insert(subject.to_string());
        self.by_pred.entry(predicate.to_string()).or_default().insert((subject.to_string(), object));
        self.len += 1;
        true
    }

    pub fn contains(&self, subject: &str, predicate: &str, object: &Term) -> bool {
        self.spo.get(subject).and_then(|m| m.get(predicate)).is_some_and(|o| o.contains(object))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Relations incident to an entity IRI; empty for unknown IRIs.
    pub fn relations_of(&self, entity: &str) -> Relations {
        self.relations_of_term(&Term::Iri(entity.to_string()))
    }

    /// As [`relations_of`](Self::relations_of), but literals may appear too
    /// (with incoming relations only).
    pub fn relations_of_term(&self, term: &Term) -> Relations {
        let outgoing = match term {
            Term::Iri(i) => self.spo.get(i).map(|m| m.keys().cloned().collect()).unwrap_or_default(),
            _ => BTreeSet::new(),
        };
        let incoming = self.ops.get(term).map(|m| m.keys().cloned().collect()).unwrap_or_default();
        Relations { outgoing, incoming }
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.by_pred.keys().map(String::as_str)
    }

    /// Every triple in `(subject, predicate, object)` order.
    pub fn triples(&self) -> impl Iterator<Item = (&str, &str, &Term)> {
        self.spo
            .iter()
            .flat_map(|(s, m)| m.iter().flat_map(move |(p, os)| os.iter().map(move |o| (s.as_str(), p.as_str(), o))))
    }

    /// Every term occurring as subject or object.
    pub fn terms(&self) -> BTreeSet<Term> {
        self.spo.keys().map(|s| Term::Iri(s.clone())).chain(self.ops.keys().cloned()).collect()
    }

    pub(crate) fn objects(&self, subject: &str, predicate: &str) -> impl Iterator<Item = &Term> {
        self.spo.get(subject).and_then(|m| m.get(predicate)).into_iter().flatten()
    }

    pub(crate) fn subjects(&self, predicate: &str, object: &Term) -> impl Iterator<Item = &str> {
        self.ops.get(object).and_then(|m| m.get(predicate)).into_iter().flatten().map(String::as_str)
    }

    pub(crate) fn pairs(&self, predicate: &str) -> impl Iterator<Item = &(String, Term)> {
        self.by_pred.get(predicate).into_iter().flatten()
    }
}

impl<S: AsRef<str>, P: AsRef<str>> FromIterator<(S, P, Term)> for TripleStore {
    fn from_iter<I: IntoIterator<Item = (S, P, Term)>>(iter: I) -> Self {
        let mut store = TripleStore::new();
        for (s, p, o) in iter {
            store.insert(s.as_ref(), p.as_ref(), o);
        }
        store
    }
}
