#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use amrql::amr::{AmrGraph, NodeId, Question};
use amrql::dataset::{read_jsonl, Record};
use amrql::kg::{load_ntriples, AnswerSet, TripleStore};
use amrql::machine::{init_stack, Direction, Relation};
use amrql::rules::{Entity, Intermediate, IntermediateRule, RoleAnnotation, UnknownRule};
use amrql::sparql::{QueryHeader, SparqlQuery, Term, TriplePattern};
use rand::seq::SliceRandom;
use rand::Rng;

pub const DBR: &str = "http://dbpedia.org/resource/";
pub const DBO: &str = "http://dbpedia.org/ontology/";
pub const DBP: &str = "http://dbpedia.org/property/";

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn read_data(name: &str) -> String {
    std::fs::read_to_string(data_path(name)).unwrap()
}

pub fn corpus() -> Vec<Record> {
    read_jsonl(&read_data("corpus.jsonl")).unwrap()
}

pub fn kg() -> TripleStore {
    load_ntriples(&read_data("kg.nt")).unwrap()
}

pub fn maharashtra_min() -> TripleStore {
    load_ntriples(&read_data("maharashtra_min.nt")).unwrap()
}

pub fn record(id: &str) -> Record {
    corpus().into_iter().find(|r| r.id == id).unwrap()
}

pub const SPORTS_QUERY: &str = "PREFIX dbr: <http://dbpedia.org/resource/>
PREFIX dbo: <http://dbpedia.org/ontology/>
PREFIX dbp: <http://dbpedia.org/property/>
SELECT DISTINCT ?s WHERE {
  ?i dbp:state dbr:Maharashtra.
  ?i dbo:sport ?s.
}";

// ---------------------------------------------------------------------------
// Independent oracles

/// Every assignment of the pattern's variables to store terms that makes all
/// triples present, found by exhaustive enumeration.
pub fn brute_force_solutions(store: &TripleStore, pattern: &[TriplePattern]) -> BTreeSet<BTreeMap<String, Term>> {
    let vars: Vec<String> = pattern
        .iter()
        .flat_map(|t| t.vars().map(str::to_string).collect::<Vec<_>>())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let terms: Vec<Term> = store.terms().into_iter().collect();
    let mut out = BTreeSet::new();
    let mut assignment = vec![0usize; vars.len()];
    if !vars.is_empty() && terms.is_empty() {
        return out;
    }
    loop {
        let sol: BTreeMap<String, Term> =
            vars.iter().cloned().zip(assignment.iter().map(|&k| terms[k].clone())).collect();
        let ground = |t: &Term| match t {
            Term::Var(v) => sol[v].clone(),
            other => other.clone(),
        };
        let all = pattern.iter().all(|t| match ground(&t.subject) {
            Term::Iri(s) => store.contains(&s, &t.predicate, &ground(&t.object)),
            _ => false,
        });
        if all {
            out.insert(sol);
        }
        // Odometer increment over assignments.
        let mut k = 0;
        loop {
            if k == assignment.len() {
                return out;
            }
            assignment[k] += 1;
            if assignment[k] < terms.len() {
                break;
            }
            assignment[k] = 0;
            k += 1;
        }
    }
}

pub fn brute_force_execute(store: &TripleStore, q: &SparqlQuery) -> AnswerSet {
    let sols = brute_force_solutions(store, &q.triples);
    match &q.header {
        QueryHeader::Select { var, .. } => AnswerSet::Bindings(sols.iter().map(|s| s[var].clone()).collect()),
        QueryHeader::Ask => AnswerSet::Boolean(!sols.is_empty()),
        QueryHeader::Count { var } => {
            AnswerSet::Count(sols.iter().map(|s| s[var].clone()).collect::<BTreeSet<_>>().len() as u64)
        }
    }
}

/// Isomorphism by trying every bijection between the two variable sets.
pub fn isomorphic(a: &SparqlQuery, b: &SparqlQuery) -> bool {
    if a.header.kind() != b.header.kind() {
        return false;
    }
    let va: Vec<&str> = a.variables();
    let vb: Vec<&str> = b.variables();
    if va.len() != vb.len() {
        return false;
    }
    let tb: BTreeSet<&TriplePattern> = b.triples.iter().collect();
    let mut perm: Vec<usize> = (0..vb.len()).collect();
    loop {
        let map: BTreeMap<&str, &str> = va.iter().copied().zip(perm.iter().map(|&k| vb[k])).collect();
        let rename = |t: &Term| match t {
            Term::Var(v) => Term::Var(map[v.as_str()].to_string()),
            other => other.clone(),
        };
        let mapped: BTreeSet<TriplePattern> = a
            .triples
            .iter()
            .map(|t| TriplePattern {
                subject: rename(&t.subject),
                predicate: t.predicate.clone(),
                object: rename(&t.object),
            })
            .collect();
        let projection_ok = match (a.header.projection(), b.header.projection()) {
            (Some(x), Some(y)) => map[x] == y,
            (None, None) => true,
            _ => false,
        };
        if projection_ok && mapped.iter().collect::<BTreeSet<_>>() == tb {
            return true;
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

// ---------------------------------------------------------------------------
// Random generators

pub const SYN_RES: &str = "http://kg.test/resource/";
pub const SYN_ONT: &str = "http://kg.test/ontology/";

/// Random store over a small vocabulary so joins actually hit.
pub fn random_store(rng: &mut impl Rng, max_triples: usize) -> TripleStore {
    let n = rng.gen_range(0..=max_triples);
    let mut store = TripleStore::new();
    for _ in 0..n {
        let s = format!("{SYN_RES}e{}", rng.gen_range(0..6));
        let p = format!("{SYN_ONT}p{}", rng.gen_range(0..3));
        let o = if rng.gen_bool(0.15) {
            Term::Literal(format!("l{}", rng.gen_range(0..2)))
        } else {
            Term::Iri(format!("{SYN_RES}e{}", rng.gen_range(0..6)))
        };
        store.insert(&s, &p, o);
    }
    store
}

/// Random basic graph pattern with 1 to `max_triples` triples over at most three variables.
pub fn random_pattern(rng: &mut impl Rng, max_triples: usize) -> SparqlQuery {
    let vars = ["x", "y", "z"];
    let term = |rng: &mut _, object: bool| -> Term {
        let r: &mut dyn rand::RngCore = rng;
        match r.gen_range(0..10) {
            0..=5 => Term::var(vars[r.gen_range(0..3)]),
            6 if object => Term::Literal(format!("l{}", r.gen_range(0..2))),
            _ => Term::Iri(format!("{SYN_RES}e{}", r.gen_range(0..6))),
        }
    };
    let n = rng.gen_range(1..=max_triples);
    let triples: Vec<TriplePattern> = (0..n)
        .map(|_| {
            let s = term(rng, false);
            let p = format!("{SYN_ONT}p{}", rng.gen_range(0..3));
            let o = term(rng, true);
            TriplePattern { subject: s, predicate: p, object: o }
        })
        .collect();
    let used: Vec<String> = triples
        .iter()
        .flat_map(|t| t.vars().map(str::to_string).collect::<Vec<_>>())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let header = if used.is_empty() {
        QueryHeader::Ask
    } else {
        let var = used[rng.gen_range(0..used.len())].clone();
        match rng.gen_range(0..3) {
            0 => QueryHeader::Ask,
            1 => QueryHeader::Count { var },
            _ => QueryHeader::Select { var, distinct: true },
        }
    };
    SparqlQuery::new(header, triples)
}

/// A synthetic question: graph, role annotation, gold query sampled from the
/// path stack, and a store holding a witness for every gold triple.
pub struct Instance {
    pub graph: AmrGraph,
    pub question: Question,
    pub ann: RoleAnnotation,
    pub gold: SparqlQuery,
    pub store: TripleStore,
    /// True when a deliberately unmatchable triple was added to the gold query.
    pub poisoned: bool,
}

pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let n = rng.gen_range(3..=9);
    let roles = ["ARG0", "ARG1", "ARG2", "mod", "location", "poss", "topic"];
    let mut b = AmrGraph::builder();
    for k in 0..n {
        b = b.node(&format!("v{k}"), &format!("c{k}")).align(&format!("v{k}"), &[k]);
    }
    for k in 1..n {
        let parent = rng.gen_range(0..k);
        b = b.edge(&format!("v{parent}"), roles[rng.gen_range(0..roles.len())], &format!("v{k}"));
    }
    if n > 3 && rng.gen_bool(0.3) {
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if x != y {
            b = b.edge(&format!("v{x}"), "ARG2", &format!("v{y}"));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let has_unknown = rng.gen_bool(0.75);
    let n_entities = rng.gen_range(1..=3.min(n - 1));
    let n_inter = rng.gen_range(0..=2.min(n - 1 - n_entities));
    let unknown = order[0];
    let mut entities: Vec<usize> = order[1..=n_entities].to_vec();
    let mut inters: Vec<usize> = order[n_entities + 1..n_entities + 1 + n_inter].to_vec();
    entities.sort();
    inters.sort();
    for &e in &entities {
        b = b.wiki(&format!("v{e}"), &format!("{SYN_RES}E{e}"));
    }
    let graph = b.root("v0").token_count(n).build().unwrap();
    let tokens: Vec<String> = (0..n).map(|k| format!("w{k}")).collect();
    let question = Question::new("syn", tokens.join(" "), tokens, vec!["NOUN".into(); n]).unwrap();
    let ann = RoleAnnotation {
        unknown: NodeId::new(format!("v{unknown}")),
        unknown_rule: if has_unknown { UnknownRule::A } else { UnknownRule::Root },
        entities: entities
            .iter()
            .map(|&e| Entity {
                node: NodeId::new(format!("v{e}")),
                iri: format!("{SYN_RES}E{e}"),
                name_tokens: vec![e],
            })
            .collect(),
        intermediates: inters
            .iter()
            .map(|&i| Intermediate { node: NodeId::new(format!("v{i}")), rule: IntermediateRule::E })
            .collect(),
    };

    // Sample gold triples from the stack in machine variable names.
    let stack = init_stack(&graph, &ann);
    let mut triples = Vec::new();
    for path in &stack {
        if rng.gen_bool(0.5) {
            let dir = if rng.gen_bool(0.5) { Direction::Forward } else { Direction::Backward };
            let rel = Relation::new(SYN_ONT, &format!("p{}", rng.gen_range(0..4)), dir);
            triples.push(path.triple(&rel));
        }
    }
    let poisoned = rng.gen_bool(0.15);
    if poisoned {
        triples.push(TriplePattern::new(
            Term::iri(&format!("{SYN_RES}Nowhere")),
            &format!("{SYN_ONT}p9"),
            Term::var("w"),
        ));
    }
    let mentions_s = triples.iter().any(|t| t.vars().any(|v| v == "s"));
    let header = if has_unknown && mentions_s {
        if rng.gen_bool(0.5) {
            QueryHeader::Select { var: "s".into(), distinct: true }
        } else {
            QueryHeader::Count { var: "s".into() }
        }
    } else {
        QueryHeader::Ask
    };

    // Witness store: every variable becomes a fresh resource.
    let witness = |t: &Term| match t {
        Term::Var(v) => Term::Iri(format!("{SYN_RES}W_{v}")),
        other => other.clone(),
    };
    let mut store = TripleStore::new();
    for t in &triples {
        if let Term::Iri(s) = witness(&t.subject) {
            store.insert(&s, &t.predicate, witness(&t.object));
        }
    }
    for _ in 0..rng.gen_range(0..8) {
        let pick = |rng: &mut dyn rand::RngCore| match rng.gen_range(0..3) {
            0 => format!("{SYN_RES}E{}", rng.gen_range(0..n)),
            1 => format!("{SYN_RES}W_i"),
            _ => format!("{SYN_RES}D{}", rng.gen_range(0..3)),
        };
        let s = pick(rng);
        let o = pick(rng);
        store.insert(&s, &format!("{SYN_ONT}p{}", rng.gen_range(0..6)), Term::Iri(o));
    }

    // Rename variables and shuffle so the gold query does not leak machine names.
    let mut names = vec!["a", "b", "c", "uri", "x", "y", "z", "q"];
    names.shuffle(rng);
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    let mut fresh = names.into_iter();
    let mut go = |t: &Term| match t {
        Term::Var(v) => Term::Var(rename.entry(v.clone()).or_insert_with(|| fresh.next().unwrap().to_string()).clone()),
        other => other.clone(),
    };
    let header = match header {
        QueryHeader::Select { var, distinct } => {
            let Term::Var(v) = go(&Term::Var(var)) else { unreachable!() };
            QueryHeader::Select { var: v, distinct }
        }
        QueryHeader::Count { var } => {
            let Term::Var(v) = go(&Term::Var(var)) else { unreachable!() };
            QueryHeader::Count { var: v }
        }
        QueryHeader::Ask => QueryHeader::Ask,
    };
    let mut gold_triples: Vec<TriplePattern> = triples
        .iter()
        .map(|t| TriplePattern { subject: go(&t.subject), predicate: t.predicate.clone(), object: go(&t.object) })
        .collect();
    gold_triples.shuffle(rng);

    Instance { graph, question, ann, gold: SparqlQuery::new(header, gold_triples), store, poisoned }
}
