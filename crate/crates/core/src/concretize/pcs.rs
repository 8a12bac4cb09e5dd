//! Partially concretized sketches.
//!
//! Concretization proceeds left to right over the abstract calls of a
//! sketch (pre-order, conditions before bodies), so a state is the sketch
//! together with the concrete choices made for a prefix of its calls.
//!
//! Whether a statement call's result is bound is decided lazily: the result
//! stays open until a later call reads it (which binds it) or, once every
//! call is concrete, until a final step keeps or discards each remaining
//! open result.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::aml::{ApiDatabase, Call, Catch, Exp, Program, Receiver, Sexp, Stmt, TypeName};
use crate::sketch::{Cexp, Sketch, SketchStmt};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SlotKind {
    Stmt,
    /// Element of a condition chain; `last` marks the final element.
    Cond {
        last: bool,
    },
}

#[derive(Clone, Debug)]
struct CallSlot {
    cexp: Cexp,
    kind: SlotKind,
    /// Enclosing scopes, outermost first.
    scope: Vec<usize>,
}

#[derive(Clone, Debug)]
struct CatchVar {
    name: String,
    ty: TypeName,
    scope: usize,
}

/// The abstract calls of a sketch with their scoping, plus the names given
/// to its catch variables.
#[derive(Clone, Debug)]
pub struct SketchPlan {
    sketch: Sketch,
    slots: Vec<CallSlot>,
    catches: Vec<CatchVar>,
}

fn stem(ty: &TypeName) -> String {
    let s = ty.as_str();
    let lead: String = s.chars().take_while(|c| c.is_uppercase()).collect();
    let n = lead.chars().count();
    let head = match n {
        0 => String::new(),
        // keep the capital that starts the next word, as in "IOException"
        _ if n > 1 && s.chars().count() > n => lead.chars().take(n - 1).collect::<String>().to_lowercase(),
        _ => lead.to_lowercase(),
    };
    let rest: String = s.chars().skip(head.chars().count()).filter(|c| c.is_alphanumeric() || *c == '_').collect();
    let name = format!("{head}{rest}");
    match name.chars().next() {
        Some(c) if c.is_alphabetic() || c == '_' => name,
        _ => format!("v{name}"),
    }
}

struct PlanBuilder {
    slots: Vec<CallSlot>,
    catches: Vec<CatchVar>,
    next_scope: usize,
    counters: std::collections::BTreeMap<TypeName, usize>,
}

impl PlanBuilder {
    fn fresh_scope(&mut self, parent: &[usize]) -> Vec<usize> {
        self.next_scope += 1;
        let mut s = parent.to_vec();
        s.push(self.next_scope);
        s
    }

    fn cond(&mut self, c: &[Cexp], scope: &[usize]) {
        let inner = self.fresh_scope(scope);
        for (i, e) in c.iter().enumerate() {
            let kind = SlotKind::Cond { last: i + 1 == c.len() };
            self.slots.push(CallSlot { cexp: e.clone(), kind, scope: inner.clone() });
        }
    }

    fn block(&mut self, y: &Sketch, parent: &[usize]) {
        let scope = self.fresh_scope(parent);
        for s in &y.stmts {
            match s {
                SketchStmt::Skip => {}
                SketchStmt::Call(c) => {
                    self.slots.push(CallSlot { cexp: c.clone(), kind: SlotKind::Stmt, scope: scope.clone() })
                }
                SketchStmt::If(c, a, b) => {
                    self.cond(c, &scope);
                    self.block(a, &scope);
                    self.block(b, &scope);
                }
                SketchStmt::While(c, b) => {
                    self.cond(c, &scope);
                    self.block(b, &scope);
                }
                SketchStmt::Try(b, cs) => {
                    self.block(b, &scope);
                    for (ty, h) in cs {
                        let n = self.counters.entry(ty.clone()).or_default();
                        *n += 1;
                        let name = format!("{}{}", stem(ty), n);
                        let handler = self.next_scope + 1;
                        self.catches.push(CatchVar { name, ty: ty.clone(), scope: handler });
                        self.block(h, &scope);
                    }
                }
            }
        }
    }
}

impl SketchPlan {
    pub fn new(sketch: &Sketch) -> Self {
        let mut b = PlanBuilder { slots: Vec::new(), catches: Vec::new(), next_scope: 0, counters: Default::default() };
        b.block(sketch, &[]);
        SketchPlan { sketch: sketch.clone(), slots: b.slots, catches: b.catches }
    }

    pub fn sketch(&self) -> &Sketch {
        &self.sketch
    }

    /// Number of abstract calls still to concretize from the start.
    pub fn call_count(&self) -> usize {
        self.slots.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    /// `call c`
    Discard,
    /// `let x = c`
    Let(String),
    /// Result of a non-void statement call, not yet bound or discarded.
    Open,
}

/// The concrete form chosen for one abstract call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice {
    pub call: Call,
    /// Return type; `None` for void.
    pub ty: Option<TypeName>,
    pub binding: Binding,
}

impl Choice {
    pub fn bound_name(&self) -> Option<&str> {
        match &self.binding {
            Binding::Let(x) => Some(x),
            _ => None,
        }
    }
}

/// Placeholder variable for the open result of choice `j`.
fn open_var(j: usize) -> String {
    format!("#{j}")
}

fn open_index(s: &Sexp) -> Option<usize> {
    match s {
        Sexp::Var(v) => v.strip_prefix('#').and_then(|n| n.parse().ok()),
        _ => None,
    }
}

/// Variables visible at a program point. Open results appear under a
/// placeholder name `#j`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SynthesisEnv {
    pub vars: Vec<(String, TypeName)>,
    /// `$T` inputs already used by the concrete part.
    pub inputs: BTreeSet<TypeName>,
}

impl SynthesisEnv {
    /// In-scope variables of exactly type `t`, then the input `$t`.
    pub fn candidates(&self, t: &TypeName) -> Vec<Sexp> {
        let mut out: Vec<Sexp> =
            self.vars.iter().filter(|(_, ty)| ty == t).map(|(n, _)| Sexp::var(n.clone())).collect();
        out.push(Sexp::var(t.input_var()));
        out
    }
}

/// A partially concretized sketch.
#[derive(Clone, Debug)]
pub struct Pcs {
    plan: Arc<SketchPlan>,
    choices: Vec<Choice>,
    cost: f64,
}

impl PartialEq for Pcs {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.plan, &other.plan) && self.choices == other.choices
    }
}

impl Pcs {
    /// The fully abstract state of a sketch.
    pub fn init(y: &Sketch) -> Self {
        Pcs { plan: Arc::new(SketchPlan::new(y)), choices: Vec::new(), cost: 0.0 }
    }

    pub fn plan(&self) -> &SketchPlan {
        &self.plan
    }

    pub fn choices(&self) -> &[Choice] {
        &self.choices
    }

    pub fn is_concrete(&self) -> bool {
        self.choices.len() == self.plan.slots.len() && self.choices.iter().all(|c| c.binding != Binding::Open)
    }

    /// Summed step cost of the choices made so far.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// The leftmost abstract call, if any. `None` with a non-concrete state
    /// means only open results remain to be settled.
    pub fn next_abstract(&self) -> Option<&Cexp> {
        self.plan.slots.get(self.choices.len()).map(|s| &s.cexp)
    }

    /// Variables visible at the leftmost abstract call.
    pub fn env(&self) -> SynthesisEnv {
        let i = self.choices.len();
        let mut env = SynthesisEnv::default();
        for c in &self.choices {
            for s in std::iter::once(&c.call.receiver)
                .filter_map(|r| match r {
                    Receiver::Expr(e) => Some(e),
                    Receiver::Type(_) => None,
                })
                .chain(&c.call.args)
            {
                if let Some(t) = s.input_type() {
                    env.inputs.insert(t);
                }
            }
        }
        let Some(slot) = self.plan.slots.get(i) else { return env };
        for cv in &self.plan.catches {
            if slot.scope.contains(&cv.scope) {
                env.vars.push((cv.name.clone(), cv.ty.clone()));
            }
        }
        for (j, c) in self.choices.iter().enumerate() {
            if !slot.scope.starts_with(&self.plan.slots[j].scope) {
                continue;
            }
            match (&c.binding, &c.ty) {
                (Binding::Let(x), Some(ty)) => env.vars.push((x.clone(), ty.clone())),
                (Binding::Open, Some(ty)) => env.vars.push((open_var(j), ty.clone())),
                _ => {}
            }
        }
        env
    }

    fn fresh_name(&self, ty: &TypeName) -> String {
        let used = self.plan.catches.iter().filter(|c| c.ty == *ty).count()
            + self.choices.iter().filter(|c| c.bound_name().is_some() && c.ty.as_ref() == Some(ty)).count();
        format!("{}{}", stem(ty), used + 1)
    }

    /// Binds the open result of choice `j` under a fresh name.
    fn bind_open(&mut self, j: usize) -> String {
        let ty = self.choices[j].ty.clone().expect("open results are non-void");
        let x = self.fresh_name(&ty);
        self.choices[j].binding = Binding::Let(x.clone());
        x
    }

    /// Every state reached by one step, each with the cost of that step:
    /// the fresh variables it introduces (let binders and first uses of
    /// `$T` inputs) plus the AST nodes it adds.
    ///
    /// A step concretizes the leftmost abstract call in a type-consistent
    /// way; reading an open result binds it. Once no abstract call is left,
    /// a step settles the first open result as `call` or as `let`.
    pub fn neighbors(&self, db: &ApiDatabase) -> Vec<(Pcs, f64)> {
        let Some(slot) = self.plan.slots.get(self.choices.len()) else {
            let Some(j) = self.choices.iter().position(|c| c.binding == Binding::Open) else { return Vec::new() };
            let mut discard = self.clone();
            discard.choices[j].binding = Binding::Discard;
            let mut keep = self.clone();
            keep.bind_open(j);
            keep.cost += 1.0;
            return vec![(discard, 0.0), (keep, 1.0)];
        };
        let c = &slot.cexp;
        let Ok(sig) = db.resolve(&c.receiver, &c.method, &c.params) else { return Vec::new() };
        let ret = sig.returns.clone();
        let env = self.env();
        let bind = match (slot.kind, &ret) {
            (SlotKind::Stmt, Some(_)) => Binding::Open,
            (SlotKind::Stmt, None) => Binding::Discard,
            (SlotKind::Cond { .. }, Some(_)) => Binding::Let(String::new()),
            (SlotKind::Cond { last: true }, None) => Binding::Discard,
            (SlotKind::Cond { last: false }, None) => return Vec::new(),
        };
        let receivers: Vec<Receiver> = if c.method == "new" {
            vec![Receiver::Type(c.receiver.clone())]
        } else {
            env.candidates(&c.receiver).into_iter().map(Receiver::Expr).collect()
        };
        let mut arg_lists: Vec<Vec<Sexp>> = vec![Vec::new()];
        for p in &c.params {
            let options = env.candidates(p);
            arg_lists = arg_lists
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut v = prefix.clone();
                        v.push(o.clone());
                        v
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        for r in &receivers {
            for args in &arg_lists {
                let mut next = self.clone();
                let mut new_inputs = BTreeSet::new();
                let mut opened: Vec<(usize, String)> = Vec::new();
                let mut resolve = |s: &Sexp, next: &mut Pcs| -> Sexp {
                    if let Some(j) = open_index(s) {
                        let x = match opened.iter().find(|(k, _)| *k == j) {
                            Some((_, x)) => x.clone(),
                            None => {
                                let x = next.bind_open(j);
                                opened.push((j, x.clone()));
                                x
                            }
                        };
                        return Sexp::var(x);
                    }
                    if let Some(t) = s.input_type() {
                        if !env.inputs.contains(&t) {
                            new_inputs.insert(t);
                        }
                    }
                    s.clone()
                };
                let receiver = match r {
                    Receiver::Expr(e) => Receiver::Expr(resolve(e, &mut next)),
                    Receiver::Type(t) => Receiver::Type(t.clone()),
                };
                let args: Vec<Sexp> = args.iter().map(|a| resolve(a, &mut next)).collect();
                let nodes = 1 + usize::from(matches!(r, Receiver::Expr(_))) + args.len();
                let call = Call::new(receiver, c.method.clone(), args);
                let binding = match &bind {
                    Binding::Let(_) => Binding::Let(next.fresh_name(ret.as_ref().expect("bound calls are non-void"))),
                    b => b.clone(),
                };
                // a bound condition element adds its binder, and the final
                // one also the variable read that yields the condition's value
                let bound = usize::from(matches!(binding, Binding::Let(_)));
                let read = bound * usize::from(slot.kind == SlotKind::Cond { last: true });
                let step = (nodes + read + bound + opened.len() + new_inputs.len()) as f64;
                next.choices.push(Choice { call, ty: ret.clone(), binding });
                next.cost += step;
                out.push((next, step));
            }
        }
        out
    }

    /// The program of a fully concrete state.
    pub fn to_program(&self) -> Option<Program> {
        if !self.is_concrete() {
            return None;
        }
        let mut it = self.choices.iter();
        let mut catches = self.plan.catches.iter();
        Some(build_block(&self.plan.sketch, &mut it, &mut catches))
    }
}

fn build_block<'a>(
    y: &Sketch,
    it: &mut impl Iterator<Item = &'a Choice>,
    catches: &mut impl Iterator<Item = &'a CatchVar>,
) -> Program {
    let stmts = y
        .stmts
        .iter()
        .map(|s| match s {
            SketchStmt::Skip => Stmt::Skip,
            SketchStmt::Call(_) => {
                let ch = it.next().expect("one choice per call");
                match ch.bound_name() {
                    Some(x) => Stmt::Let(x.to_string(), ch.call.clone()),
                    None => Stmt::Call(ch.call.clone()),
                }
            }
            SketchStmt::If(c, a, b) => {
                let e = build_cond(c.len(), it);
                let a = build_block(a, it, catches);
                Stmt::If(e, a, build_block(b, it, catches))
            }
            SketchStmt::While(c, b) => {
                let e = build_cond(c.len(), it);
                Stmt::While(e, build_block(b, it, catches))
            }
            SketchStmt::Try(b, cs) => {
                let body = build_block(b, it, catches);
                let cs = cs
                    .iter()
                    .map(|(ty, h)| {
                        let cv = catches.next().expect("one name per catch");
                        Catch { var: cv.name.clone(), ty: ty.clone(), body: build_block(h, it, catches) }
                    })
                    .collect();
                Stmt::Try(body, cs)
            }
        })
        .collect();
    Program::new(stmts)
}

/// A condition of `n` calls: a chain of lets whose last binder is the
/// condition's value (a void final call stands for itself); `true` when
/// there are no calls.
fn build_cond<'a>(n: usize, it: &mut impl Iterator<Item = &'a Choice>) -> Exp {
    let chain: Vec<&Choice> = it.take(n).collect();
    let Some((last, init)) = chain.split_last() else { return Exp::Sexp(Sexp::Bool(true)) };
    let mut e = match last.bound_name() {
        Some(x) => Exp::Let(x.to_string(), last.call.clone(), Box::new(Exp::Sexp(Sexp::var(x)))),
        None => Exp::Call(last.call.clone()),
    };
    for ch in init.iter().rev() {
        let x = ch.bound_name().expect("inner condition calls are bound");
        e = Exp::Let(x.to_string(), ch.call.clone(), Box::new(e));
    }
    e
}

impl fmt::Display for Pcs {
    /// Concrete choices so far, then the remaining abstract calls.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .choices
            .iter()
            .enumerate()
            .map(|(j, c)| match &c.binding {
                Binding::Let(x) => format!("let {x} = {}", c.call),
                Binding::Discard => format!("call {}", c.call),
                Binding::Open => format!("{} = {}", open_var(j), c.call),
            })
            .collect();
        parts.extend(self.plan.slots[self.choices.len()..].iter().map(|s| format!("?{}", s.cexp)));
        write!(f, "[{}]", parts.join("; "))
    }
}
