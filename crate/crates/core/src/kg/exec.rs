use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::TripleStore;
use crate::sparql::{QueryHeader, SparqlQuery, Term, TriplePattern};

/// Variable name to bound term.
pub type Solution = BTreeMap<String, Term>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerSet {
    Bindings(BTreeSet<Term>),
    Boolean(bool),
    Count(u64),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("projected variable ?{0} does not occur in the pattern")]
    UnboundProjection(String),
}

fn resolve<'a>(term: &'a Term, sol: &'a Solution) -> Option<&'a Term> {
    match term {
        Term::Var(v) => sol.get(v),
        ground => Some(ground),
    }
}

fn bound_positions(t: &TriplePattern, sol: &Solution) -> usize {
    [&t.subject, &t.object].into_iter().filter(|x| resolve(x, sol).is_some()).count()
}

/// Extends `sol` with `term := value`; false on conflict.
fn bind(sol: &mut Solution, term: &Term, value: &Term) -> bool {
    match term {
        Term::Var(v) => match sol.get(v) {
            Some(existing) => existing == value,
            None => {
                sol.insert(v.clone(), value.clone());
                true
            }
        },
        ground => ground == value,
    }
}

/// Solutions of one pattern extending `sol`.
fn matches(store: &TripleStore, t: &TriplePattern, sol: &Solution) -> Vec<Solution> {
    let s = resolve(&t.subject, sol).cloned();
    let o = resolve(&t.object, sol).cloned();
    let candidates: Vec<(Term, Term)> = match (&s, &o) {
        (Some(Term::Iri(s)), Some(o)) => {
            if store.contains(s, &t.predicate, o) {
                vec![(Term::Iri(s.clone()), o.clone())]
            } else {
                vec![]
            }
        }
        (Some(Term::Iri(s)), None) => {
            store.objects(s, &t.predicate).map(|o| (Term::Iri(s.clone()), o.clone())).collect()
        }
        (None, Some(o)) => store.subjects(&t.predicate, o).map(|s| (Term::Iri(s.to_string()), o.clone())).collect(),
        (None, None) => store.pairs(&t.predicate).map(|(s, o)| (Term::Iri(s.clone()), o.clone())).collect(),
        // Literal subjects never match.
        (Some(_), _) => vec![],
    };
    candidates
        .into_iter()
        .filter_map(|(sv, ov)| {
            let mut next = sol.clone();
            (bind(&mut next, &t.subject, &sv) && bind(&mut next, &t.object, &ov)).then_some(next)
        })
        .collect()
}

fn join(store: &TripleStore, pending: &mut Vec<&TriplePattern>, sol: Solution, out: &mut BTreeSet<Solution>) {
    if pending.is_empty() {
        out.insert(sol);
        return;
    }
    // Most bound pattern first; earliest on ties.
    let (pick, _) = pending
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| bound_positions(a, &sol).cmp(&bound_positions(b, &sol)).then(j.cmp(i)))
        .expect("non-empty");
    let t = pending.remove(pick);
    for next in matches(store, t, &sol) {
        join(store, pending, next, out);
    }
    pending.insert(pick, t);
}

/// Every distinct assignment of the pattern's variables that matches the store.
pub fn solutions(store: &TripleStore, pattern: &[TriplePattern]) -> BTreeSet<Solution> {
    let mut out = BTreeSet::new();
    let mut pending: Vec<&TriplePattern> = pattern.iter().collect();
    join(store, &mut pending, Solution::new(), &mut out);
    out
}

pub fn execute(store: &TripleStore, q: &SparqlQuery) -> Result<AnswerSet, ExecError> {
    if let Some(var) = q.header.projection() {
        if !q.triples.iter().any(|t| t.vars().any(|v| v == var)) {
            return Err(ExecError::UnboundProjection(var.to_string()));
        }
    }
    let sols = solutions(store, &q.triples);
    let project = |var: &str| -> BTreeSet<Term> { sols.iter().filter_map(|s| s.get(var).cloned()).collect() };
    Ok(match &q.header {
        QueryHeader::Select { var, .. } => AnswerSet::Bindings(project(var)),
        QueryHeader::Ask => AnswerSet::Boolean(!sols.is_empty()),
        QueryHeader::Count { var } => AnswerSet::Count(project(var).len() as u64),
    })
}
