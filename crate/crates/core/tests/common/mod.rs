//! Helpers shared by the integration tests: independent oracles and toy
//! model training.

#![allow(dead_code)]

use std::collections::BTreeSet;

use sketchgen::aml::{
    canonicalize, parse_program, print_program, type_check, ApiDatabase, Call, Catch, Exp, Program, Receiver, Sexp,
    Stmt, TypeName,
};
use sketchgen::concretize::{step_distribution, Pcs, StepPolicy};
use sketchgen::labels::{EncodedLabel, EvidenceKind};
use sketchgen::model::{encode_element, GedParams, Model, TrainState};
use sketchgen::pipeline::{self, CorpusRecord, Entry, RunConfig};
use sketchgen::sketch::{abstract_program, Cexp, Sketch, SketchStmt};
use sketchgen::toy;

/// The sketch of a program text over `db`.
pub fn sketch_of(text: &str, db: &ApiDatabase) -> Sketch {
    let p = parse_program(text).unwrap_or_else(|e| panic!("{text}: {e}"));
    abstract_program(&p, db).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// Ingested toy corpus.
pub fn toy_entries() -> Vec<Entry> {
    let records: Vec<(usize, CorpusRecord)> =
        toy::corpus_records().into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect();
    pipeline::ingest(&records, &toy::database()).expect("toy corpus ingests").entries
}

/// Toy run configuration with the given top-level seed.
pub fn toy_config(seed: u64) -> RunConfig {
    toy::run_config().with_seed(seed)
}

/// A model trained on the toy corpus under `cfg`.
pub fn train_toy(cfg: &RunConfig, entries: &[Entry]) -> Model {
    let mut model = Model::new(cfg.model.clone(), pipeline::vocabularies(entries)).expect("valid model");
    let mut state = TrainState::new(&model.params);
    pipeline::train_model(&mut model, entries, &mut state, std::io::sink()).expect("training succeeds");
    model
}

// ---------------------------------------------------------------------------
// Brute-force concretization oracle.
//
// The concretization space of a sketch: programs that type-check and
// abstract back to it, where every receiver and argument of type `T` is
// either the input `$T` or a variable declared with exactly type `T`; a
// non-void statement call may or may not be let-bound; a condition is a
// let-chain binding every call, whose value is the last binder (or the
// last call itself when it is void); an empty condition is `true`.
//
// The oracle generates every assignment of receivers, arguments and
// binders from a candidate pool and keeps the ones that type-check and
// abstract back. Programs are compared up to renaming.

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Stmt,
    Cond { last: bool },
}

struct Slot {
    cexp: Cexp,
    kind: Kind,
}

fn collect_slots(y: &Sketch, slots: &mut Vec<Slot>, catches: &mut Vec<TypeName>) {
    for s in &y.stmts {
        match s {
            SketchStmt::Skip => {}
            SketchStmt::Call(c) => slots.push(Slot { cexp: c.clone(), kind: Kind::Stmt }),
            SketchStmt::If(cond, a, b) => {
                push_cond(cond, slots);
                collect_slots(a, slots, catches);
                collect_slots(b, slots, catches);
            }
            SketchStmt::While(cond, b) => {
                push_cond(cond, slots);
                collect_slots(b, slots, catches);
            }
            SketchStmt::Try(b, cs) => {
                collect_slots(b, slots, catches);
                for (t, h) in cs {
                    catches.push(t.clone());
                    collect_slots(h, slots, catches);
                }
            }
        }
    }
}

fn push_cond(cond: &[Cexp], slots: &mut Vec<Slot>) {
    for (i, c) in cond.iter().enumerate() {
        slots.push(Slot { cexp: c.clone(), kind: Kind::Cond { last: i + 1 == cond.len() } });
    }
}

type Pick = (Call, Option<String>);

fn slot_var(i: usize) -> String {
    format!("v{i}")
}

fn catch_var(i: usize) -> String {
    format!("e{i}")
}

/// Every (call, binder) option of every slot, or `None` when some slot has
/// none.
fn slot_options(slots: &[Slot], catches: &[TypeName], db: &ApiDatabase) -> Option<Vec<Vec<Pick>>> {
    let mut returns: Vec<Option<TypeName>> = Vec::new();
    for s in slots {
        let sig = db.resolve(&s.cexp.receiver, &s.cexp.method, &s.cexp.params).ok()?;
        returns.push(sig.returns.clone());
    }
    let pool = |t: &TypeName| -> Vec<Sexp> {
        let mut out = vec![Sexp::var(t.input_var())];
        out.extend(
            returns.iter().enumerate().filter(|(_, r)| r.as_ref() == Some(t)).map(|(i, _)| Sexp::var(slot_var(i))),
        );
        out.extend(catches.iter().enumerate().filter(|(_, c)| *c == t).map(|(i, _)| Sexp::var(catch_var(i))));
        out
    };
    let mut all = Vec::new();
    for (i, s) in slots.iter().enumerate() {
        let c = &s.cexp;
        let receivers: Vec<Receiver> = if c.method == "new" {
            vec![Receiver::Type(c.receiver.clone())]
        } else {
            pool(&c.receiver).into_iter().map(Receiver::Expr).collect()
        };
        let mut arg_lists: Vec<Vec<Sexp>> = vec![vec![]];
        for p in &c.params {
            let options = pool(p);
            arg_lists = arg_lists
                .iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut v = prefix.clone();
                        v.push(o.clone());
                        v
                    })
                })
                .collect();
        }
        let binders: Vec<Option<String>> = match (s.kind, returns[i].is_some()) {
            (Kind::Stmt, true) => vec![None, Some(slot_var(i))],
            (Kind::Stmt, false) => vec![None],
            (Kind::Cond { .. }, true) => vec![Some(slot_var(i))],
            (Kind::Cond { last: true }, false) => vec![None],
            (Kind::Cond { last: false }, false) => vec![],
        };
        let mut opts = Vec::new();
        for r in &receivers {
            for args in &arg_lists {
                for b in &binders {
                    opts.push((Call::new(r.clone(), c.method.clone(), args.clone()), b.clone()));
                }
            }
        }
        if opts.is_empty() {
            return None;
        }
        all.push(opts);
    }
    Some(all)
}

struct Builder<'a> {
    picks: &'a [&'a Pick],
    next: usize,
    catch: usize,
}

impl Builder<'_> {
    fn take(&mut self) -> &Pick {
        let o = self.picks[self.next];
        self.next += 1;
        o
    }

    fn block(&mut self, y: &Sketch) -> Program {
        let mut stmts = Vec::new();
        for s in &y.stmts {
            stmts.push(match s {
                SketchStmt::Skip => Stmt::Skip,
                SketchStmt::Call(_) => match self.take().clone() {
                    (c, Some(x)) => Stmt::Let(x, c),
                    (c, None) => Stmt::Call(c),
                },
                SketchStmt::If(cond, a, b) => {
                    let e = self.cond(cond.len());
                    let a = self.block(a);
                    Stmt::If(e, a, self.block(b))
                }
                SketchStmt::While(cond, b) => {
                    let e = self.cond(cond.len());
                    Stmt::While(e, self.block(b))
                }
                SketchStmt::Try(b, cs) => {
                    let body = self.block(b);
                    let mut catches = Vec::new();
                    for (t, h) in cs {
                        let var = catch_var(self.catch);
                        self.catch += 1;
                        catches.push(Catch { var, ty: t.clone(), body: self.block(h) });
                    }
                    Stmt::Try(body, catches)
                }
            });
        }
        Program::new(stmts)
    }

    fn cond(&mut self, n: usize) -> Exp {
        if n == 0 {
            return Exp::Sexp(Sexp::Bool(true));
        }
        let (c, b) = self.take().clone();
        if n == 1 {
            return match b {
                Some(x) => Exp::Let(x.clone(), c, Box::new(Exp::Sexp(Sexp::var(x)))),
                None => Exp::Call(c),
            };
        }
        let x = b.expect("inner condition calls are bound");
        Exp::Let(x, c, Box::new(self.cond(n - 1)))
    }
}

/// Size of the candidate product the oracle would search.
pub fn oracle_candidates(y: &Sketch, db: &ApiDatabase) -> usize {
    let (mut slots, mut catches) = (Vec::new(), Vec::new());
    collect_slots(y, &mut slots, &mut catches);
    slot_options(&slots, &catches, db).map_or(0, |o| o.iter().map(Vec::len).product())
}

/// Canonical text of every program in the concretization space of `y`.
pub fn oracle_concretizations(y: &Sketch, db: &ApiDatabase) -> BTreeSet<String> {
    let (mut slots, mut catches) = (Vec::new(), Vec::new());
    collect_slots(y, &mut slots, &mut catches);
    let Some(options) = slot_options(&slots, &catches, db) else { return BTreeSet::new() };
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; options.len()];
    loop {
        let picks: Vec<&Pick> = options.iter().zip(&idx).map(|(o, &i)| &o[i]).collect();
        let p = Builder { picks: &picks, next: 0, catch: 0 }.block(y);
        if type_check(&p, db).is_ok() && abstract_program(&p, db).ok().as_ref() == Some(y) {
            out.insert(print_program(&canonicalize(&p)));
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Grid posterior oracle: the unnormalised log density of z given the
// encoded label elements, read directly off the generative story
// z ~ N(0, I), f(x_kj) ~ N(z, σ_k² I).

fn log_normal_iso(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let d = x.len() as f64;
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * d * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * sq / var
}

pub fn grid_log_joint(z: &[f64], label: &EncodedLabel, params: &GedParams) -> f64 {
    let mut lp = log_normal_iso(z, &vec![0.0; z.len()], 1.0);
    for kind in EvidenceKind::ALL {
        let sigma = params.enc[kind.index()].log_sigma.data[0].exp();
        for &i in &label.elements[kind.index()] {
            let f = encode_element(params, kind, i).expect("index in vocabulary");
            lp += log_normal_iso(&f, z, sigma * sigma);
        }
    }
    lp
}

/// One walk driven directly by the concretizer's step relation, with no
/// check on the result: `None` on a dead end or when out of steps.
pub fn raw_walk<R: rand::Rng + ?Sized>(
    y: &Sketch,
    db: &ApiDatabase,
    policy: &dyn StepPolicy,
    max_steps: usize,
    rng: &mut R,
) -> Option<Program> {
    let mut h = Pcs::init(y);
    for _ in 0..max_steps {
        if h.is_concrete() {
            break;
        }
        let mut ns = h.neighbors(db);
        if ns.is_empty() {
            return None;
        }
        let costs: Vec<f64> = ns.iter().map(|n| n.1).collect();
        let probs = step_distribution(&costs, policy);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let pick = probs.iter().position(|p| {
            acc += p;
            u < acc
        });
        h = ns.swap_remove(pick.unwrap_or(probs.len() - 1)).0;
    }
    h.to_program()
}
