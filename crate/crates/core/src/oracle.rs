//! Rule-based oracle: the action sequence that rebuilds a gold query from the
//! path stack, plus coverage accounting when it cannot.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::amr::{supporting_tokens, AmrGraph, Question};
use crate::dataset::{Record, RecordError};
use crate::machine::{init_stack, Action, Direction, Relation, StackedPath, UNKNOWN_VAR};
use crate::rules::RoleAnnotation;
use crate::sparql::{parse_sparql_with, HeaderKind, PrefixTable, SparqlError, SparqlQuery, Term, TriplePattern};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    pub actions: Vec<Action>,
    /// Gold variable name to machine variable name.
    pub var_map: BTreeMap<String, String>,
    pub uncovered: Vec<TriplePattern>,
    pub covered: bool,
}

/// Tries to match `gold` against `machine` under `map`, extending a copy.
fn match_term(
    gold: &Term,
    machine: &Term,
    map: &BTreeMap<String, String>,
    intermediates: &[String],
) -> Option<BTreeMap<String, String>> {
    match (gold, machine) {
        (Term::Var(gv), Term::Var(mv)) => match map.get(gv) {
            Some(bound) => (bound == mv).then(|| map.clone()),
            None => {
                let free = intermediates.contains(mv) && !map.values().any(|v| v == mv);
                free.then(|| {
                    let mut next = map.clone();
                    next.insert(gv.clone(), mv.clone());
                    next
                })
            }
        },
        (Term::Var(_), _) | (_, Term::Var(_)) => None,
        (g, m) => (g == m).then(|| map.clone()),
    }
}

fn match_path(
    gold: &TriplePattern,
    path: &StackedPath,
    map: &BTreeMap<String, String>,
    intermediates: &[String],
) -> Option<(Direction, BTreeMap<String, String>)> {
    let orientations =
        [(Direction::Forward, &path.term_a, &path.term_b), (Direction::Backward, &path.term_b, &path.term_a)];
    orientations.into_iter().find_map(|(dir, subject, object)| {
        let m = match_term(&gold.subject, subject, map, intermediates)?;
        let m = match_term(&gold.object, object, &m, intermediates)?;
        Some((dir, m))
    })
}

/// Greedy top-down matching of gold triples to stacked paths.
pub fn oracle_actions(gold: &SparqlQuery, g: &AmrGraph, ann: &RoleAnnotation) -> OracleResult {
    let stack = init_stack(g, ann);
    let intermediates: Vec<String> = stack
        .iter()
        .flat_map(|p| [&p.term_a, &p.term_b])
        .filter_map(Term::as_var)
        .filter(|v| *v != UNKNOWN_VAR)
        .map(str::to_string)
        .collect();
    let mut map = BTreeMap::new();
    if let Some(var) = gold.header.projection() {
        map.insert(var.to_string(), UNKNOWN_VAR.to_string());
    }
    let mut consumed = vec![false; gold.triples.len()];
    let mut actions = vec![Action::Header(gold.header.kind())];
    for path in &stack {
        let hit = gold.triples.iter().enumerate().filter(|(i, _)| !consumed[*i]).find_map(|(i, t)| {
            let relation = Relation::from_predicate(&t.predicate, Direction::Forward)?;
            let (dir, next) = match_path(t, path, &map, &intermediates)?;
            Some((i, Relation { dir, ..relation }, next))
        });
        match hit {
            Some((i, relation, next)) => {
                consumed[i] = true;
                map = next;
                actions.push(Action::Relation(relation));
            }
            None => actions.push(Action::Reduce),
        }
    }
    actions.push(Action::Close);
    let uncovered: Vec<TriplePattern> =
        gold.triples.iter().zip(&consumed).filter(|(_, c)| !**c).map(|(t, _)| t.clone()).collect();
    OracleResult { actions, var_map: map, covered: uncovered.is_empty(), uncovered }
}

/// Supporting-text token indices per action: the popped path's tokens for
/// relation and reduce actions, nothing for header and close.
pub fn supporting_text(actions: &[Action], g: &AmrGraph, ann: &RoleAnnotation, q: &Question) -> Vec<Vec<usize>> {
    let mut stack = init_stack(g, ann).into_iter();
    actions
        .iter()
        .map(|a| match a {
            Action::Relation(_) | Action::Reduce => {
                stack.next().map(|p| supporting_tokens(g, &p.path, q)).unwrap_or_default()
            }
            _ => Vec::new(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageCause {
    UnsupportedConstruct,
    InvalidRecord,
    MissingEntity,
    MissingUnknown,
    UncoveredTriple,
}

/// One line of oracle output: a training sample plus coverage details.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRecord {
    pub id: String,
    pub actions: Vec<Action>,
    pub supporting_text: Vec<Vec<usize>>,
    pub covered: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<CoverageCause>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub uncovered: Vec<TriplePattern>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl OracleRecord {
    fn failed(id: &str, cause: CoverageCause, actions: Vec<Action>, error: String) -> Self {
        OracleRecord {
            id: id.to_string(),
            supporting_text: vec![Vec::new(); actions.len()],
            actions,
            covered: false,
            cause: Some(cause),
            uncovered: Vec::new(),
            error: Some(error),
        }
    }
}

/// Header kind of an unsupported gold query, if one can still be read off.
fn header_only(text: &str) -> Vec<Action> {
    let upper = text.to_ascii_uppercase();
    let kind = if upper.contains("COUNT(") || upper.contains("COUNT (") {
        HeaderKind::Count
    } else if upper.contains("ASK") && !upper.contains("SELECT") {
        HeaderKind::Ask
    } else {
        HeaderKind::Select
    };
    vec![Action::Header(kind)]
}

/// Oracle extraction for one dataset record. Never fails: problems become
/// an uncovered record with a cause.
pub fn oracle_record(record: &Record, prefixes: &PrefixTable) -> OracleRecord {
    let Some(text) = &record.gold_sparql else {
        return OracleRecord::failed(
            &record.id,
            CoverageCause::InvalidRecord,
            Vec::new(),
            RecordError::MissingGold.to_string(),
        );
    };
    let gold = match parse_sparql_with(text, prefixes) {
        Ok(q) => q,
        Err(e @ SparqlError::UnsupportedConstruct(_)) => {
            return OracleRecord::failed(
                &record.id,
                CoverageCause::UnsupportedConstruct,
                header_only(text),
                e.to_string(),
            );
        }
        Err(e) => return OracleRecord::failed(&record.id, CoverageCause::InvalidRecord, Vec::new(), e.to_string()),
    };
    let prepared = match record.prepare() {
        Ok(p) => p,
        Err(e) => {
            let header = vec![Action::Header(gold.header.kind())];
            return OracleRecord::failed(&record.id, CoverageCause::InvalidRecord, header, e.to_string());
        }
    };
    let (g, ann) = (&prepared.graph, &prepared.annotation);
    let result = oracle_actions(&gold, g, ann);
    let cause = if result.covered {
        None
    } else if ann.entities.is_empty() {
        Some(CoverageCause::MissingEntity)
    } else if gold.header.projection().is_some() && !ann.has_unknown() {
        Some(CoverageCause::MissingUnknown)
    } else {
        Some(CoverageCause::UncoveredTriple)
    };
    OracleRecord {
        id: record.id.clone(),
        supporting_text: supporting_text(&result.actions, g, ann, &prepared.question),
        actions: result.actions,
        covered: result.covered,
        cause,
        uncovered: result.uncovered,
        error: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub total: usize,
    pub covered: usize,
    pub covered_fraction: f64,
    pub failures: BTreeMap<CoverageCause, usize>,
}

impl CoverageReport {
    pub fn from_records(records: &[OracleRecord]) -> Self {
        let total = records.len();
        let covered = records.iter().filter(|r| r.covered).count();
        let mut failures = BTreeMap::new();
        for cause in records.iter().filter_map(|r| r.cause) {
            *failures.entry(cause).or_insert(0) += 1;
        }
        let covered_fraction = if total == 0 { 0.0 } else { covered as f64 / total as f64 };
        CoverageReport { total, covered, covered_fraction, failures }
    }
}

pub fn coverage_report(records: &[Record], prefixes: &PrefixTable) -> CoverageReport {
    let out: Vec<OracleRecord> = records.iter().map(|r| oracle_record(r, prefixes)).collect();
    CoverageReport::from_records(&out)
}
