use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use super::{HeaderKind, QueryHeader, SparqlQuery, Term, TriplePattern};

/// Brute-force canonicalization tries every variable permutation, so it is capped.
pub const MAX_CANONICAL_VARIABLES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CanonicalError {
    #[error("query has {0} variables, more than the canonicalization limit")]
    TooManyVariables(usize),
}

/// A query modulo variable renaming and triple order. Two queries have equal
/// canonical forms iff they are isomorphic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalQuery {
    pub header: HeaderKind,
    /// Index of the projected variable, if any.
    pub projection: Option<usize>,
    pub triples: Vec<TriplePattern>,
}

impl fmt::Display for CanonicalQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.header)?;
        if let Some(p) = self.projection {
            write!(f, " ?v{p}")?;
        }
        for t in &self.triples {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

fn rename(term: &Term, names: &BTreeMap<&str, usize>) -> Term {
    match term {
        Term::Var(v) => Term::Var(format!("v{}", names[v.as_str()])),
        other => other.clone(),
    }
}

pub fn canonicalize(q: &SparqlQuery) -> Result<CanonicalQuery, CanonicalError> {
    let vars = q.variables();
    if vars.len() > MAX_CANONICAL_VARIABLES {
        return Err(CanonicalError::TooManyVariables(vars.len()));
    }
    let header = q.header.kind();
    let mut best: Option<CanonicalQuery> = None;
    for perm in (0..vars.len()).permutations(vars.len()) {
        let names: BTreeMap<&str, usize> = vars.iter().copied().zip(perm).collect();
        let mut triples: Vec<TriplePattern> = q
            .triples
            .iter()
            .map(|t| TriplePattern {
                subject: rename(&t.subject, &names),
                predicate: t.predicate.clone(),
                object: rename(&t.object, &names),
            })
            .collect();
        triples.sort();
        triples.dedup();
        let projection = match &q.header {
            QueryHeader::Select { var, .. } | QueryHeader::Count { var } => Some(names[var.as_str()]),
            QueryHeader::Ask => None,
        };
        let candidate = CanonicalQuery { header, projection, triples };
        if best.as_ref().is_none_or(|b| candidate < *b) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one permutation"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: Term, p: &str, o: Term) -> TriplePattern {
        TriplePattern::new(s, p, o)
    }

    #[test]
    fn renaming_and_order_do_not_matter() {
        let a = SparqlQuery::new(
            QueryHeader::Select { var: "s".into(), distinct: true },
            vec![t(Term::var("i"), "p", Term::iri("E")), t(Term::var("i"), "q", Term::var("s"))],
        );
        let b = SparqlQuery::new(
            QueryHeader::Select { var: "uri".into(), distinct: true },
            vec![t(Term::var("x"), "q", Term::var("uri")), t(Term::var("x"), "p", Term::iri("E"))],
        );
        assert_eq!(canonicalize(&a), canonicalize(&b));
    }

    #[test]
    fn projection_matters() {
        let a = SparqlQuery::new(
            QueryHeader::Select { var: "s".into(), distinct: true },
            vec![t(Term::var("s"), "p", Term::var("o"))],
        );
        let b = SparqlQuery::new(
            QueryHeader::Select { var: "o".into(), distinct: true },
            vec![t(Term::var("s"), "p", Term::var("o"))],
        );
        assert_ne!(canonicalize(&a), canonicalize(&b));
    }

    #[test]
    fn variable_cap() {
        let triples = (0..9).map(|i| t(Term::var(&format!("x{i}")), "p", Term::iri("E"))).collect();
        let q = SparqlQuery::new(QueryHeader::Ask, triples);
        assert_eq!(canonicalize(&q), Err(CanonicalError::TooManyVariables(9)));
    }
}
