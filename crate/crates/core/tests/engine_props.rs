mod support;

use std::sync::Arc;

use bioquery_core::kb::FactStore;
use bioquery_core::program::parse_program;
use bioquery_core::{evaluate, RuleLayer};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use support::*;

#[test]
fn semi_naive_matches_naive_fixpoint() {
    let mut rng = StdRng::seed_from_u64(7);
    for i in 0..150 {
        if let Err(e) = check_engine(&mut rng) {
            panic!("instance {i}: {e}");
        }
    }
}

#[test]
fn transitive_closure_is_complete() {
    let layer = RuleLayer::parse("path(X,Y) :- edge(X,Y).\npath(X,Z) :- path(X,Y), edge(Y,Z).").unwrap();
    let mut store = FactStore::new();
    for i in 0..30 {
        store.insert("edge", &format!("n{i}"), &format!("n{}", i + 1), "S");
    }
    let ds = evaluate(&layer, None, &Arc::new(store)).unwrap();
    assert_eq!(ds.answers("path").len(), 31 * 30 / 2);
}

#[test]
fn monotone_in_facts() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..60 {
        let inst = random_instance(&mut rng, &ENGINE_SHAPE);
        let small = Arc::new(inst.store.clone());
        let mut bigger = inst.store.clone();
        for _ in 0..5 {
            let a = format!("c{}", rng.random_range(0..6));
            let b = format!("c{}", rng.random_range(0..6));
            bigger.insert("e0", &a, &b, "S3");
        }
        let before = evaluate(&inst.layer, None, &small).unwrap().fact_set();
        let after = evaluate(&inst.layer, None, &Arc::new(bigger)).unwrap().fact_set();
        assert!(before.is_subset(&after));
    }
}

#[test]
fn deterministic_and_insertion_order_independent() {
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..40 {
        let inst = random_instance(&mut rng, &ENGINE_SHAPE);
        let mut rows: Vec<_> = inst
            .store
            .facts()
            .map(|(p, a, b, s)| (p.to_string(), a.to_string(), b.to_string(), s.to_string()))
            .collect();
        rows.reverse();
        let mut reversed = FactStore::new();
        for (p, a, b, s) in &rows {
            reversed.insert(p, a, b, s);
        }
        let x = evaluate(&inst.layer, None, &Arc::new(inst.store.clone())).unwrap();
        let y = evaluate(&inst.layer, None, &Arc::new(reversed)).unwrap();
        assert_eq!(x.fact_set(), y.fact_set());
        for id in x.fact_ids() {
            let f = x.fact(id);
            let other = y.find(&f.predicate, &x.args(id)).unwrap();
            assert_eq!(f.derivations.len(), y.fact(other).derivations.len());
        }
    }
}

#[test]
fn records_every_derivation() {
    // each of the two rules derives p(a) from its own premise
    let layer = RuleLayer::parse("p(X) :- e(X,Y).\np(X) :- f(X,Y).").unwrap();
    let mut store = FactStore::new();
    store.insert("e", "a", "b", "S");
    store.insert("e", "a", "c", "S");
    store.insert("f", "a", "b", "T");
    let ds = evaluate(&layer, None, &Arc::new(store)).unwrap();
    let id = ds.find("p", &["a"]).unwrap();
    assert_eq!(ds.fact(id).derivations.len(), 3);
}

#[test]
fn query_rule_over_program_text() {
    let program = parse_program("q(X) :- e(X,\"b\").").unwrap();
    let mut store = FactStore::new();
    store.insert("e", "a", "b", "S");
    store.insert("e", "c", "d", "S");
    let ds = evaluate(&RuleLayer::default(), Some(&program.rules[0]), &Arc::new(store)).unwrap();
    assert_eq!(ds.answers("q"), vec![vec!["a".to_string()]]);
}
