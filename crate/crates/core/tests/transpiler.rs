mod common;

use std::collections::BTreeSet;

use amrql::decode::{
    action_mask, state_mask, transpile, transpile_with_prefixes, DecodeError, LexicalPolicy, Policy, ReplayPolicy,
};
use amrql::eval::{answer_f1, run_eval};
use amrql::kg::{AnswerSet, TripleStore};
use amrql::machine::{init_stack, run, Action, Direction, MachineError, MachineState, PathCategory, Phase, Relation};
use amrql::oracle::{oracle_actions, oracle_record, supporting_text};
use amrql::pipeline::{Pipeline, PolicyChoice};
use amrql::sparql::{canonicalize, parse_sparql, HeaderKind, PrefixTable, QueryHeader, SparqlQuery, Term};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dbpedia() -> PrefixTable {
    PrefixTable::from_json(&read_data("prefixes.json")).unwrap()
}

fn rel(ns: &str, local: &str, dir: Direction) -> Action {
    Action::Relation(Relation::new(ns, local, dir))
}

fn sports_actions() -> Vec<Action> {
    vec![
        Action::Header(HeaderKind::Select),
        Action::Reduce,
        rel(DBP, "state", Direction::Backward),
        rel(DBO, "sport", Direction::Forward),
        Action::Close,
    ]
}

#[test]
fn worked_example_stack() {
    let p = record("r01").prepare().unwrap();
    let stack = init_stack(&p.graph, &p.annotation);
    let shown: Vec<_> =
        stack.iter().map(|s| (s.path.to_string(), s.term_a.clone(), s.term_b.clone(), s.category)).collect();
    let m = Term::iri(&format!("{DBR}Maharashtra"));
    assert_eq!(
        shown,
        [
            ("s1 i p s".to_string(), m.clone(), Term::var("s"), PathCategory::EntityUnknown),
            ("s1 i".to_string(), m, Term::var("i"), PathCategory::EntityIntermediate),
            ("i p s".to_string(), Term::var("i"), Term::var("s"), PathCategory::IntermediateUnknown),
        ]
    );
}

#[test]
fn worked_example_supporting_text() {
    let p = record("r01").prepare().unwrap();
    let text = supporting_text(&sports_actions(), &p.graph, &p.annotation, &p.question);
    assert_eq!(text, [vec![], vec![2, 3, 5, 7], vec![5, 7], vec![2, 3, 5], vec![]]);
    let o = oracle_record(&record("r01"), &dbpedia());
    assert!(o.covered);
    assert_eq!(o.supporting_text, text);
}

#[test]
fn worked_example_machine_trace() {
    let p = record("r01").prepare().unwrap();
    let mut state = MachineState::start(&p.graph, &p.annotation);
    let depths: Vec<usize> = sports_actions()
        .iter()
        .map(|a| {
            state = state.clone().step(a).unwrap();
            state.stack().len()
        })
        .collect();
    assert_eq!(depths, [3, 2, 1, 0, 0]);
    assert_eq!(state.emitted().len(), 2);
    let q = run(&sports_actions(), &p.graph, &p.annotation).unwrap();
    assert_eq!(canonicalize(&q), canonicalize(&parse_sparql(SPORTS_QUERY).unwrap()));
}

#[test]
fn lexical_policy_reproduces_worked_example_on_minimal_graph() {
    let p = record("r01").prepare().unwrap();
    let t = transpile_with_prefixes(
        &p.question,
        &p.graph,
        &p.annotation,
        &maharashtra_min(),
        &LexicalPolicy::default(),
        &dbpedia(),
    )
    .unwrap();
    assert_eq!(t.actions, sports_actions());
    assert_eq!(canonicalize(&t.query), canonicalize(&parse_sparql(SPORTS_QUERY).unwrap()));
    let tokens: Vec<_> = t.per_step_masks().iter().map(|(_, s)| s.token_indices.clone()).collect();
    assert_eq!(tokens, [vec![2, 3, 5, 7], vec![5, 7], vec![2, 3, 5]]);
}

#[test]
fn masks_at_the_intermediate_step() {
    let p = record("r01").prepare().unwrap();
    let state = MachineState::start(&p.graph, &p.annotation)
        .step(&Action::Header(HeaderKind::Select))
        .unwrap()
        .step(&Action::Reduce)
        .unwrap();
    // step 3: top is (Maharashtra, ?i)
    let mask = action_mask(&state, &kg()).unwrap();
    let backward: BTreeSet<&str> =
        mask.relation_candidates.iter().filter(|r| r.dir == Direction::Backward).map(|r| r.local.as_str()).collect();
    for local in ["state", "locationCity", "homeTown", "birthPlace"] {
        assert!(backward.contains(local), "{local} not in {backward:?}");
    }
    assert!(mask.relation_candidates.contains(&Relation::new(DBO, "populationTotal", Direction::Forward)));
    assert!(mask.reduce_allowed && !mask.close_allowed && mask.headers_allowed.is_empty());
    assert_eq!(state_mask(&state, &p.graph, &p.question).unwrap().step, 3);

    // step 4 on the minimal graph: ?i is bound to I1, whose outgoing relations are forward candidates
    let store = maharashtra_min();
    let state = state.step(&rel(DBP, "state", Direction::Backward)).unwrap();
    let mask = action_mask(&state, &store).unwrap();
    assert_eq!(
        mask.relation_candidates,
        BTreeSet::from([
            Relation::new(DBO, "sport", Direction::Forward),
            Relation::new(DBP, "state", Direction::Forward)
        ])
    );
    let state = state.step(&rel(DBO, "sport", Direction::Forward)).unwrap();
    let mask = action_mask(&state, &store).unwrap();
    assert_eq!(mask.allowed(), [Action::Close]);
    let closed = state.step(&Action::Close).unwrap();
    assert!(matches!(action_mask(&closed, &store), Err(DecodeError::MachineClosed)));
}

#[test]
fn illegal_actions_are_rejected() {
    let p = record("r01").prepare().unwrap();
    let start = MachineState::start(&p.graph, &p.annotation);
    assert!(matches!(
        start.clone().step(&Action::Reduce),
        Err(MachineError::IllegalAction { phase: Phase::AwaitHeader, .. })
    ));
    let open = start.step(&Action::Header(HeaderKind::Ask)).unwrap();
    assert!(matches!(open.clone().step(&Action::Close), Err(MachineError::IllegalAction { depth: 3, .. })));
    assert!(open.clone().step(&Action::Header(HeaderKind::Ask)).is_err());
    assert_eq!(run(&sports_actions()[..4], &p.graph, &p.annotation), Err(MachineError::Unterminated));
    let mut extra = sports_actions();
    extra.push(Action::Close);
    assert!(run(&extra, &p.graph, &p.annotation).is_err());
}

#[test]
fn reduce_everything_gives_an_empty_pattern() {
    let p = record("r01").prepare().unwrap();
    let actions = [Action::Header(HeaderKind::Ask), Action::Reduce, Action::Reduce, Action::Reduce, Action::Close];
    let q = run(&actions, &p.graph, &p.annotation).unwrap();
    assert_eq!(q, SparqlQuery::new(QueryHeader::Ask, vec![]));
}

#[test]
fn action_json_shape() {
    let json = serde_json::to_string(&sports_actions()).unwrap();
    assert_eq!(
        json,
        format!(
            r#"["SELECT","REDUCE",{{"rel":"state","ns":"{DBP}","dir":"backward"}},{{"rel":"sport","ns":"{DBO}","dir":"forward"}},"CLOSE"]"#
        )
    );
    let back: Vec<Action> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, sports_actions());
}

#[test]
fn oracle_policy_scores_perfectly() {
    let store = kg();
    let table = dbpedia();
    let report = run_eval(&corpus(), &Pipeline::new(&store, &table, PolicyChoice::Oracle));
    assert_eq!(report.per_question.len(), 20);
    assert!(report.per_question.iter().all(|r| r.f1 == 1.0 && r.failure.is_none()), "{}", report.table());
    assert_eq!(report.macro_f1, 1.0);
}

#[test]
fn lexical_baseline_score_is_pinned() {
    let store = kg();
    let table = dbpedia();
    let report = run_eval(&corpus(), &Pipeline::new(&store, &table, PolicyChoice::Lexical { tau: 0.34 }));
    // twelve exact answers and one at precision 1, recall 1/2
    assert!((report.macro_f1 - 19.0 / 30.0).abs() < 1e-9, "{}", report.table());
    let zero: Vec<&str> = report.per_question.iter().filter(|r| r.f1 == 0.0).map(|r| r.id.as_str()).collect();
    assert_eq!(zero, ["r01", "r03", "r06", "r12", "r13", "r16", "r20"]);
}

#[test]
fn answer_f1_edge_cases() {
    let set = |xs: &[&str]| AnswerSet::Bindings(xs.iter().map(|x| Term::iri(x)).collect());
    assert_eq!(answer_f1(&set(&["A", "B"]), &set(&["B", "C"])), 0.5);
    assert_eq!(answer_f1(&set(&["A"]), &set(&["A", "B"])), 2.0 / 3.0);
    assert_eq!(answer_f1(&set(&[]), &set(&["A"])), 0.0);
    assert_eq!(answer_f1(&AnswerSet::Boolean(true), &set(&["A"])), 0.0);
}

/// Walks the machine with uniformly random legal actions and records every state.
fn random_walk(rng: &mut impl Rng, start: MachineState, store: &TripleStore) -> Vec<MachineState> {
    let mut states = vec![start];
    loop {
        let state = states.last().unwrap();
        if state.is_closed() {
            return states;
        }
        let allowed = action_mask(state, store).unwrap().allowed();
        let a = &allowed[rng.gen_range(0..allowed.len())];
        let next = state.clone().step(a).unwrap();
        states.push(next);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn oracle_consumption_is_bounded(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let o = oracle_actions(&inst.gold, &inst.graph, &inst.ann);
        let depth = init_stack(&inst.graph, &inst.ann).len();
        let relations = o.actions.iter().filter(|a| matches!(a, Action::Relation(_))).count();
        let reduces = o.actions.iter().filter(|a| **a == Action::Reduce).count();
        prop_assert_eq!(o.actions.len(), depth + 2);
        prop_assert_eq!(relations + reduces, depth);
        prop_assert_eq!(relations + o.uncovered.len(), inst.gold.triples.len());
        prop_assert_eq!(o.covered, o.uncovered.is_empty());
        if inst.poisoned {
            prop_assert!(!o.covered);
        }
    }

    #[test]
    fn oracle_var_map_is_injective(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let o = oracle_actions(&inst.gold, &inst.graph, &inst.ann);
        let images: BTreeSet<&String> = o.var_map.values().collect();
        prop_assert_eq!(images.len(), o.var_map.len());
        if let Some(v) = inst.gold.header.projection() {
            prop_assert_eq!(o.var_map.get(v).map(String::as_str), Some("s"));
        }
    }

    #[test]
    fn paths_without_gold_support_reduce(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let empty = SparqlQuery::new(inst.gold.header.clone(), vec![]);
        let o = oracle_actions(&empty, &inst.graph, &inst.ann);
        prop_assert!(o.covered);
        prop_assert!(o.actions[1..o.actions.len() - 1].iter().all(|a| *a == Action::Reduce));
        // replacing every relation with REDUCE still runs, giving a sub-pattern
        let full = oracle_actions(&inst.gold, &inst.graph, &inst.ann);
        let q = run(&full.actions, &inst.graph, &inst.ann).unwrap();
        for k in 0..full.actions.len() {
            if matches!(full.actions[k], Action::Relation(_)) {
                let mut reduced = full.actions.clone();
                reduced[k] = Action::Reduce;
                let sub = run(&reduced, &inst.graph, &inst.ann).unwrap();
                prop_assert_eq!(sub.triples.len() + 1, q.triples.len());
                prop_assert!(sub.triples.iter().all(|t| q.triples.contains(t)));
            }
        }
    }

    #[test]
    fn policies_stay_inside_masks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let policy = LexicalPolicy::new(rng.gen_range(0.05..0.95));
        for state in random_walk(&mut rng, MachineState::start(&inst.graph, &inst.ann), &inst.store) {
            if state.is_closed() {
                continue;
            }
            let mask = action_mask(&state, &inst.store).unwrap();
            let smask = state.top().map(|_| state_mask(&state, &inst.graph, &inst.question).unwrap());
            let smask = smask.filter(|_| state.phase() == Phase::Transpiling);
            let a = policy.choose(&state, &mask, smask.as_ref(), &inst.question);
            prop_assert!(mask.allows(&a), "{} not allowed", a);
        }
    }

    #[test]
    fn decoding_terminates_in_depth_plus_two(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let depth = init_stack(&inst.graph, &inst.ann).len();
        let walk = random_walk(&mut rng, MachineState::start(&inst.graph, &inst.ann), &inst.store);
        prop_assert_eq!(walk.len(), depth + 3);
        let replay = ReplayPolicy { actions: (1..walk.len()).map(|_| Action::Reduce).collect() };
        // a policy that ignores the mask is caught, not looped on
        let caught = matches!(
            transpile(&inst.question, &inst.graph, &inst.ann, &inst.store, &replay),
            Err(DecodeError::MaskViolation { step: 1, .. })
        );
        prop_assert!(caught);
        let t = transpile(&inst.question, &inst.graph, &inst.ann, &inst.store, &LexicalPolicy::default()).unwrap();
        prop_assert_eq!(t.actions.len(), depth + 2);
        prop_assert_eq!(t.trace.len(), t.actions.len());
    }

    #[test]
    fn ground_endpoint_masks_grow_with_the_store(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let mut bigger = inst.store.clone();
        for (s, p, o) in random_store(&mut rng, 20).triples() {
            bigger.insert(s, p, o.clone());
        }
        for state in random_walk(&mut rng, MachineState::start(&inst.graph, &inst.ann), &inst.store) {
            let Some(top) = state.top() else { continue };
            if state.phase() != Phase::Transpiling || !(top.term_a.is_ground() || top.term_b.is_ground()) {
                continue;
            }
            let small = action_mask(&state, &inst.store).unwrap();
            let large = action_mask(&state, &bigger).unwrap();
            prop_assert!(small.relation_candidates.is_subset(&large.relation_candidates));
        }
    }

    #[test]
    fn answer_f1_is_symmetric_and_bounded(a in proptest::collection::btree_set(0u8..8, 0..6), b in proptest::collection::btree_set(0u8..8, 0..6)) {
        let set = |s: &BTreeSet<u8>| AnswerSet::Bindings(s.iter().map(|x| Term::iri(&format!("http://e/{x}"))).collect());
        let (pa, pb) = (set(&a), set(&b));
        let f = answer_f1(&pa, &pb);
        prop_assert_eq!(f, answer_f1(&pb, &pa));
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f == 1.0, a == b);
        // closed form 2|P∩G| / (|P| + |G|)
        if !(a.is_empty() && b.is_empty()) {
            let expected = 2.0 * a.intersection(&b).count() as f64 / (a.len() + b.len()) as f64;
            prop_assert!((f - expected).abs() < 1e-12);
        }
    }
}
