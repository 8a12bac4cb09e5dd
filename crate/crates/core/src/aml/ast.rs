use std::fmt;

use serde::{Deserialize, Serialize};

/// Name of an API data type, e.g. `BufferedReader`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeName(String);

impl TypeName {
    pub fn new(name: impl Into<String>) -> Self {
        TypeName(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Name of the ambient environment input of this type, `$T`.
    pub fn input_var(&self) -> String {
        format!("${}", self.0)
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TypeName {
    fn from(s: &str) -> Self {
        TypeName(s.to_string())
    }
}

/// Simple expression: a constant or a variable.
///
/// Variables of the form `$T` are environment inputs of type `T`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sexp {
    Var(String),
    Str(String),
    Int(i64),
    Bool(bool),
}

impl Sexp {
    pub fn var(name: impl Into<String>) -> Self {
        Sexp::Var(name.into())
    }

    /// The type named by an environment input variable (`$T` gives `T`).
    pub fn input_type(&self) -> Option<TypeName> {
        match self {
            Sexp::Var(v) => v.strip_prefix('$').map(TypeName::from),
            _ => None,
        }
    }
}

/// The object a method is invoked on. Constructors (`new`) are invoked on a
/// type name, every other method on a simple expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Receiver {
    Type(TypeName),
    Expr(Sexp),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Call {
    pub receiver: Receiver,
    pub method: String,
    pub args: Vec<Sexp>,
}

impl Call {
    pub fn new(receiver: Receiver, method: impl Into<String>, args: Vec<Sexp>) -> Self {
        Call { receiver, method: method.into(), args }
    }

    pub fn is_constructor(&self) -> bool {
        self.method == "new"
    }
}

/// Condition expressions of `if` and `while`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exp {
    Sexp(Sexp),
    Call(Call),
    /// `let x = call: exp`; `x` is in scope only inside `exp`.
    Let(String, Call, Box<Exp>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Catch {
    pub var: String,
    pub ty: TypeName,
    pub body: Program,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stmt {
    Skip,
    Call(Call),
    Let(String, Call),
    If(Exp, Program, Program),
    While(Exp, Program),
    Try(Program, Vec<Catch>),
}

/// A sequence of statements. Sequential composition is flattened, so
/// `p1; (p2; p3)` and `(p1; p2); p3` are the same program. A program always
/// holds at least one statement; an empty block is `skip`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Program {
    pub stmts: Vec<Stmt>,
}

impl Program {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        if stmts.is_empty() {
            Program::skip()
        } else {
            Program { stmts }
        }
    }

    pub fn skip() -> Self {
        Program { stmts: vec![Stmt::Skip] }
    }

    pub fn single(stmt: Stmt) -> Self {
        Program { stmts: vec![stmt] }
    }

    /// Sequential composition.
    pub fn seq(mut self, other: Program) -> Self {
        self.stmts.extend(other.stmts);
        self
    }

    /// Number of statement leaves (`skip`, `call`, `let`).
    pub fn statement_count(&self) -> usize {
        self.stmts
            .iter()
            .map(|s| match s {
                Stmt::Skip | Stmt::Call(_) | Stmt::Let(..) => 1,
                Stmt::If(_, a, b) => a.statement_count() + b.statement_count(),
                Stmt::While(_, b) => b.statement_count(),
                Stmt::Try(b, cs) => b.statement_count() + cs.iter().map(|c| c.body.statement_count()).sum::<usize>(),
            })
            .sum()
    }

    /// Number of branches, loops and try-catch statements.
    pub fn control_count(&self) -> usize {
        self.stmts
            .iter()
            .map(|s| match s {
                Stmt::Skip | Stmt::Call(_) | Stmt::Let(..) => 0,
                Stmt::If(_, a, b) => 1 + a.control_count() + b.control_count(),
                Stmt::While(_, b) => 1 + b.control_count(),
                Stmt::Try(b, cs) => 1 + b.control_count() + cs.iter().map(|c| c.body.control_count()).sum::<usize>(),
            })
            .sum()
    }

    /// All calls in evaluation pre-order: conditions before bodies,
    /// statements left to right.
    pub fn calls(&self) -> Vec<&Call> {
        let mut out = Vec::new();
        visit_calls(self, &mut out);
        out
    }
}

fn visit_exp_calls<'a>(e: &'a Exp, out: &mut Vec<&'a Call>) {
    match e {
        Exp::Sexp(_) => {}
        Exp::Call(c) => out.push(c),
        Exp::Let(_, c, rest) => {
            out.push(c);
            visit_exp_calls(rest, out);
        }
    }
}

fn visit_calls<'a>(p: &'a Program, out: &mut Vec<&'a Call>) {
    for s in &p.stmts {
        match s {
            Stmt::Skip => {}
            Stmt::Call(c) | Stmt::Let(_, c) => out.push(c),
            Stmt::If(e, a, b) => {
                visit_exp_calls(e, out);
                visit_calls(a, out);
                visit_calls(b, out);
            }
            Stmt::While(e, b) => {
                visit_exp_calls(e, out);
                visit_calls(b, out);
            }
            Stmt::Try(b, cs) => {
                visit_calls(b, out);
                for c in cs {
                    visit_calls(&c.body, out);
                }
            }
        }
    }
}
