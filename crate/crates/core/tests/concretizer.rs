mod common;

use std::collections::BTreeSet;

use sketchgen::aml::{canonicalize, print_program};
use sketchgen::concretize::{enumerate_programs, random_walk, WalkConfig};
use sketchgen::model::train::rng_for;
use sketchgen::toy;

use common::{oracle_candidates, oracle_concretizations, sketch_of};

fn enumerated(y: &sketchgen::sketch::Sketch) -> BTreeSet<String> {
    enumerate_programs(y, &toy::database(), 100_000)
        .unwrap()
        .into_iter()
        .map(|(p, _)| print_program(&canonicalize(&p)))
        .collect()
}

#[test]
fn enumeration_matches_oracle_on_toy_sketches() {
    let db = toy::database();
    let mut compared = 0;
    for (_, y) in toy::corpus() {
        if oracle_candidates(&y, &db) > 50_000 {
            continue;
        }
        assert_eq!(enumerated(&y), oracle_concretizations(&y, &db), "{y}");
        compared += 1;
    }
    assert!(compared >= 20, "only {compared} sketches small enough");
}

#[test]
fn uniform_walks_cover_a_larger_space() {
    let db = toy::database();
    let y = sketch_of("let list = ArrayList.new(); call list.add($String); let n = list.size(); call list.get(n)", &db);
    let expected = oracle_concretizations(&y, &db);
    assert_eq!(expected.len(), 108);
    let cfg = WalkConfig { policy: "uniform".into(), ..WalkConfig::default() };
    let found: BTreeSet<String> = (0..20_000)
        .map(|w| print_program(&canonicalize(&random_walk(&y, &db, &cfg, &mut rng_for(1, w)).unwrap().program)))
        .collect();
    assert_eq!(found, expected);
}

#[test]
fn unresolvable_call_has_empty_space() {
    let db = toy::database();
    let y = sketchgen::sketch::Sketch::new(vec![sketchgen::sketch::SketchStmt::Call(sketchgen::sketch::Cexp::new(
        "File",
        "read",
        &[],
    ))]);
    assert!(oracle_concretizations(&y, &db).is_empty());
    assert!(enumerated(&y).is_empty());
}
