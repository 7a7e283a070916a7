use std::fmt::Write;

use super::{escape_literal, split_iri, QueryHeader, SparqlQuery, Term};

fn is_pn_local(local: &str) -> bool {
    let mut chars = local.chars();
    let ok_first = chars.next().is_some_and(|c| c.is_alphanumeric() || c == '_');
    ok_first && local.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-')) && !local.ends_with('-')
}

fn write_iri(q: &SparqlQuery, iri: &str, out: &mut String) {
    if let Some((ns, local)) = split_iri(iri) {
        if is_pn_local(local) {
            if let Some((label, _)) = q.prefixes.iter().find(|(_, n)| n.as_str() == ns) {
                let _ = write!(out, "{label}:{local}");
                return;
            }
        }
    }
    let _ = write!(out, "<{iri}>");
}

fn write_term(q: &SparqlQuery, term: &Term, out: &mut String) {
    match term {
        Term::Var(v) => {
            let _ = write!(out, "?{v}");
        }
        Term::Iri(i) => write_iri(q, i, out),
        Term::Literal(l) => {
            let _ = escape_literal(l, out);
        }
    }
}

/// Deterministic SPARQL text: sorted PREFIX lines, header, one triple per line.
pub fn serialize(q: &SparqlQuery) -> String {
    let mut out = String::new();
    for (label, ns) in &q.prefixes {
        let _ = writeln!(out, "PREFIX {label}: <{ns}>");
    }
    match &q.header {
        QueryHeader::Select { var, distinct: true } => {
            let _ = write!(out, "SELECT DISTINCT ?{var} WHERE {{");
        }
        QueryHeader::Select { var, distinct: false } => {
            let _ = write!(out, "SELECT ?{var} WHERE {{");
        }
        QueryHeader::Ask => out.push_str("ASK WHERE {"),
        QueryHeader::Count { var } => {
            let _ = write!(out, "SELECT (COUNT(DISTINCT ?{var}) AS ?c) WHERE {{");
        }
    }
    if q.triples.is_empty() {
        out.push_str(" }");
        return out;
    }
    out.push('\n');
    for t in &q.triples {
        out.push_str("  ");
        write_term(q, &t.subject, &mut out);
        out.push(' ');
        write_iri(q, &t.predicate, &mut out);
        out.push(' ');
        write_term(q, &t.object, &mut out);
        out.push_str(" .\n");
    }
    out.push('}');
    out
}
