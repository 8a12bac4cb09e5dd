mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sketchgen::aml::alpha::rename_binders;
use sketchgen::aml::{
    alpha_equal, canonicalize, parse_program, print_program, Call, Catch, Exp, Program, Receiver, Sexp, Stmt, TypeName,
};
use sketchgen::concretize::{random_walk, WalkConfig};
use sketchgen::labels::{kept_count, split_camel_case, subsample_label, EncodedLabel, Label};
use sketchgen::metrics::{call_sequences, jaccard_distance};
use sketchgen::model::tensor::softmax;
use sketchgen::model::train::rng_for;
use sketchgen::model::{posterior, GedParams, Shapes};
use sketchgen::sketch::tree::{from_tree, sketch_from_paths, to_tree};
use sketchgen::sketch::{production_paths, record_to_sketch, sketch_to_record, Cexp, Sketch, SketchStmt, Symbol};
use sketchgen::toy;

const KEYWORDS: [&str; 12] =
    ["skip", "call", "let", "if", "then", "else", "while", "do", "try", "catch", "true", "false"];

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-zA-Z0-9_]{0,5}".prop_filter("keyword", |s| !KEYWORDS.contains(&s.as_str()))
}

fn type_name() -> impl Strategy<Value = TypeName> {
    "[A-Z][a-zA-Z0-9]{0,5}".prop_map(TypeName::new)
}

fn sexp() -> impl Strategy<Value = Sexp> {
    prop_oneof![
        ident().prop_map(Sexp::Var),
        type_name().prop_map(|t| Sexp::var(t.input_var())),
        "[ -~]{0,6}".prop_map(Sexp::Str),
        any::<i64>().prop_map(Sexp::Int),
        any::<bool>().prop_map(Sexp::Bool),
    ]
}

fn call() -> impl Strategy<Value = Call> {
    let ctor =
        (type_name(), prop::collection::vec(sexp(), 0..3)).prop_map(|(t, a)| Call::new(Receiver::Type(t), "new", a));
    let method = (sexp(), ident().prop_filter("constructor", |m| m != "new"), prop::collection::vec(sexp(), 0..3))
        .prop_map(|(r, m, a)| Call::new(Receiver::Expr(r), m, a));
    prop_oneof![ctor, method]
}

fn exp() -> impl Strategy<Value = Exp> {
    let leaf = prop_oneof![sexp().prop_map(Exp::Sexp), call().prop_map(Exp::Call)];
    leaf.prop_recursive(3, 6, 1, |inner| (ident(), call(), inner).prop_map(|(x, c, e)| Exp::Let(x, c, Box::new(e))))
}

fn program() -> impl Strategy<Value = Program> {
    let leaf = prop_oneof![
        Just(Stmt::Skip),
        call().prop_map(Stmt::Call),
        (ident(), call()).prop_map(|(x, c)| Stmt::Let(x, c)),
    ];
    let stmt = leaf.prop_recursive(3, 24, 4, |inner| {
        let block = prop::collection::vec(inner, 1..4).prop_map(Program::new);
        prop_oneof![
            (exp(), block.clone(), block.clone()).prop_map(|(e, a, b)| Stmt::If(e, a, b)),
            (exp(), block.clone()).prop_map(|(e, b)| Stmt::While(e, b)),
            (block.clone(), prop::collection::vec((ident(), type_name(), block), 1..3)).prop_map(|(b, cs)| Stmt::Try(
                b,
                cs.into_iter().map(|(var, ty, body)| Catch { var, ty, body }).collect()
            )),
        ]
    });
    prop::collection::vec(stmt, 1..5).prop_map(Program::new)
}

fn cexp() -> impl Strategy<Value = Cexp> {
    (0usize..3, 0usize..3, 0usize..3).prop_map(|(r, m, n)| {
        let recv = ["A", "B", "C"][r];
        let params: Vec<&str> = ["A", "B"].iter().copied().take(n).collect();
        Cexp::new(recv, ["m", "get", "new"][m], &params)
    })
}

fn sketch() -> impl Strategy<Value = Sketch> {
    let leaf = prop_oneof![Just(SketchStmt::Skip), cexp().prop_map(SketchStmt::Call)];
    let stmt = leaf.prop_recursive(3, 24, 4, |inner| {
        let block = prop::collection::vec(inner, 1..4).prop_map(Sketch::new);
        let cond = || prop::collection::vec(cexp(), 0..3);
        let exc = prop_oneof![Just("E"), Just("F")].prop_map(TypeName::from);
        prop_oneof![
            (cond(), block.clone(), block.clone()).prop_map(|(c, a, b)| SketchStmt::If(c, a, b)),
            (cond(), block.clone()).prop_map(|(c, b)| SketchStmt::While(c, b)),
            (block.clone(), prop::collection::vec((exc, block), 1..3)).prop_map(|(b, cs)| SketchStmt::Try(b, cs)),
        ]
    });
    prop::collection::vec(stmt, 1..5).prop_map(Sketch::new)
}

fn label() -> impl Strategy<Value = Label> {
    let set = || prop::collection::btree_set("[a-z]{1,4}", 0..8);
    (set(), set(), set()).prop_map(|(calls, types, keys)| Label { calls, types, keys })
}

/// A random concretization of a random toy sketch.
fn toy_program() -> impl Strategy<Value = Program> {
    (0usize..toy::PROGRAMS.len(), any::<u64>()).prop_map(|(i, seed)| {
        let db = toy::database();
        let y = &toy::corpus()[i].1;
        random_walk(y, &db, &WalkConfig::default(), &mut rng_for(seed, 0)).expect("toy sketches concretize").program
    })
}

proptest! {
    #[test]
    fn print_parse_round_trip(p in program()) {
        let text = print_program(&p);
        prop_assert_eq!(parse_program(&text).unwrap(), p, "{}", text);
    }

    #[test]
    fn renaming_preserves_alpha_equivalence(p in program()) {
        let mut n = 0;
        let q = rename_binders(&p, &mut |_| { n += 1; format!("z{n}") });
        prop_assert!(alpha_equal(&p, &q));
        prop_assert_eq!(canonicalize(&q), canonicalize(&p));
        prop_assert_eq!(canonicalize(&canonicalize(&p)), canonicalize(&p));
    }

    #[test]
    fn tree_and_paths_reconstruct_the_sketch(y in sketch()) {
        prop_assert_eq!(from_tree(&to_tree(&y)).unwrap(), y.clone());
        prop_assert_eq!(sketch_from_paths(&production_paths(&y)).unwrap(), y);
    }

    #[test]
    fn sketch_record_round_trip(y in sketch()) {
        prop_assert_eq!(record_to_sketch(&sketch_to_record(&y)).unwrap(), y);
    }

    #[test]
    fn jaccard_is_a_metric(a in prop::collection::btree_set(0u8..12, 0..8),
                           b in prop::collection::btree_set(0u8..12, 0..8),
                           c in prop::collection::btree_set(0u8..12, 0..8)) {
        let d = jaccard_distance::<u8>;
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!((0.0..=1.0).contains(&d(&a, &b)));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        if a != b {
            prop_assert!(d(&a, &b) > 0.0);
        }
    }

    #[test]
    fn subsample_keeps_a_subset_of_the_right_size(x in label(), f in 0.0f64..=1.0, seed in any::<u64>()) {
        let s = subsample_label(&x, f, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(s.is_subset(&x));
        prop_assert_eq!(s.calls.len(), kept_count(x.calls.len(), f));
        prop_assert_eq!(s.types.len(), kept_count(x.types.len(), f));
        prop_assert_eq!(s.keys.len(), kept_count(x.keys.len(), f));
        prop_assert_eq!(subsample_label(&x, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)), x);
    }

    #[test]
    fn camel_case_fragments_concatenate_to_the_name(name in "[a-zA-Z][a-zA-Z0-9]{0,12}") {
        let parts = split_camel_case(&name);
        prop_assert!(parts.iter().all(|p| !p.is_empty()));
        prop_assert_eq!(parts.concat(), name.to_lowercase());
    }

    #[test]
    fn posterior_variance_shrinks_with_evidence(seed in any::<u64>(), k in 0usize..3, extra in 0usize..4) {
        let s = Shapes { vocab: [4, 4, 4], enc_units: [2, 2, 2], latent: 2, hidden: 2, symbols: 9, conditioned: false };
        let p = GedParams::init(&s, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut x = EncodedLabel::default();
        let mut last = posterior(&x, &p).var;
        prop_assert_eq!(last, 1.0);
        for i in 0..=extra {
            x.elements[(k + i) % 3].push(i);
            let v = posterior(&x, &p).var;
            prop_assert!(v < last);
            prop_assert!(v > 0.0);
            last = v;
        }
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..20)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn unroll_zero_sequences_are_unroll_one_sequences(p in toy_program()) {
        let db = toy::database();
        let zero = call_sequences(&p, &db, 0).unwrap();
        let one = call_sequences(&p, &db, 1).unwrap();
        prop_assert!(zero.is_subset(&one), "{}", print_program(&p));
    }

    #[test]
    fn concretizations_type_check_and_abstract_back(i in 0usize..toy::PROGRAMS.len(), seed in any::<u64>()) {
        let db = toy::database();
        let y = toy::corpus()[i].1.clone();
        let w = random_walk(&y, &db, &WalkConfig::default(), &mut rng_for(seed, 0)).unwrap();
        prop_assert!(sketchgen::aml::type_check(&w.program, &db).is_ok());
        prop_assert_eq!(sketchgen::sketch::abstract_program(&w.program, &db).unwrap(), y);
    }
}

#[test]
fn read_line_sketch_has_four_paths() {
    let db = toy::database();
    let y = common::sketch_of(toy::PROGRAMS[0], &db);
    let paths = production_paths(&y);
    assert_eq!(paths.len(), 4, "{paths:?}");
    for p in &paths {
        assert_eq!(p.0.first().map(|s| s.0.clone()), Some(Symbol::Root));
        assert_eq!(p.0.last().and_then(|s| s.1), None);
    }
    assert_eq!(sketch_from_paths(&paths).unwrap(), y);
}
