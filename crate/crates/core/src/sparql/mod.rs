//! The supported SPARQL subset: SELECT DISTINCT, ASK and COUNT over basic
//! graph patterns.

mod canonical;
mod parser;
mod prefix;
mod serialize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

pub use canonical::{canonicalize, CanonicalError, CanonicalQuery, MAX_CANONICAL_VARIABLES};
pub use parser::{parse_sparql, parse_sparql_with, SparqlError};
pub use prefix::{split_iri, PrefixTable};
pub use serialize::serialize;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Iri(String),
    Literal(String),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn iri(iri: &str) -> Term {
        Term::Iri(iri.to_string())
    }

    pub fn literal(text: &str) -> Term {
        Term::Literal(text.to_string())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        !self.is_var()
    }
}

pub(crate) fn escape_literal(text: &str, out: &mut impl fmt::Write) -> fmt::Result {
    out.write_char('"')?;
    for ch in text.chars() {
        match ch {
            '"' => out.write_str("\\\"")?,
            '\\' => out.write_str("\\\\")?,
            '\n' => out.write_str("\\n")?,
            '\r' => out.write_str("\\r")?,
            '\t' => out.write_str("\\t")?,
            c => out.write_char(c)?,
        }
    }
    out.write_char('"')
}

/// N-Triples style: `?v`, `<iri>`, `"literal"`.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Iri(i) => write!(f, "<{i}>"),
            Term::Literal(l) => escape_literal(l, f),
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn is_valid_var_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: String,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: &str, object: Term) -> Self {
        TriplePattern { subject, predicate: predicate.to_string(), object }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.object].into_iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <{}> {} .", self.subject, self.predicate, self.object)
    }
}

impl Serialize for TriplePattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HeaderKind {
    Select,
    Ask,
    Count,
}

impl HeaderKind {
    pub const ALL: [HeaderKind; 3] = [HeaderKind::Select, HeaderKind::Ask, HeaderKind::Count];

    pub fn keyword(self) -> &'static str {
        match self {
            HeaderKind::Select => "SELECT",
            HeaderKind::Ask => "ASK",
            HeaderKind::Count => "COUNT",
        }
    }

    pub fn from_keyword(s: &str) -> Option<HeaderKind> {
        HeaderKind::ALL.into_iter().find(|k| k.keyword() == s)
    }
}

impl fmt::Display for HeaderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryHeader {
    Select {
        var: String,
        distinct: bool,
    },
    Ask,
    /// Counts distinct bindings of `var`.
    Count {
        var: String,
    },
}

impl QueryHeader {
    pub fn kind(&self) -> HeaderKind {
        match self {
            QueryHeader::Select { .. } => HeaderKind::Select,
            QueryHeader::Ask => HeaderKind::Ask,
            QueryHeader::Count { .. } => HeaderKind::Count,
        }
    }

    pub fn projection(&self) -> Option<&str> {
        match self {
            QueryHeader::Select { var, .. } | QueryHeader::Count { var } => Some(var),
            QueryHeader::Ask => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparqlQuery {
    pub header: QueryHeader,
    pub triples: Vec<TriplePattern>,
    /// label -> namespace IRI
    pub prefixes: BTreeMap<String, String>,
}

impl SparqlQuery {
    pub fn new(header: QueryHeader, triples: Vec<TriplePattern>) -> Self {
        SparqlQuery { header, triples, prefixes: BTreeMap::new() }
    }

    /// Variables in order of first appearance, header first.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let all = self.header.projection().into_iter().chain(self.triples.iter().flat_map(|t| t.vars()));
        for v in all {
            if seen.insert(v) {
                out.push(v);
            }
        }
        out
    }

    /// Fills `prefixes` with a label for every namespace used in the pattern.
    pub fn with_used_prefixes(mut self, table: &PrefixTable) -> Self {
        let mut table = table.clone();
        let mut used = BTreeMap::new();
        for t in &self.triples {
            let iris = [&t.subject, &t.object]
                .into_iter()
                .filter_map(|term| match term {
                    Term::Iri(i) => Some(i.as_str()),
                    _ => None,
                })
                .chain([t.predicate.as_str()]);
            for iri in iris {
                if let Some((ns, _)) = split_iri(iri) {
                    let label = table.label_or_insert(ns);
                    used.insert(label, ns.to_string());
                }
            }
        }
        self.prefixes = used;
        self
    }
}

impl fmt::Display for SparqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

/// Serializes as query text.
impl Serialize for SparqlQuery {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
