//! Renaming of bound variables.

use super::ast::*;

struct Renamer<'f> {
    scope: Vec<(String, String)>,
    fresh: &'f mut dyn FnMut(&str) -> String,
}

impl Renamer<'_> {
    fn sexp(&self, s: &Sexp) -> Sexp {
        match s {
            Sexp::Var(v) => match self.scope.iter().rev().find(|(old, _)| old == v) {
                Some((_, new)) => Sexp::Var(new.clone()),
                None => s.clone(),
            },
            other => other.clone(),
        }
    }

    fn call(&self, c: &Call) -> Call {
        Call {
            receiver: match &c.receiver {
                Receiver::Expr(e) => Receiver::Expr(self.sexp(e)),
                r => r.clone(),
            },
            method: c.method.clone(),
            args: c.args.iter().map(|a| self.sexp(a)).collect(),
        }
    }

    fn bind(&mut self, x: &str) -> String {
        let new = (self.fresh)(x);
        self.scope.push((x.to_string(), new.clone()));
        new
    }

    fn exp(&mut self, e: &Exp) -> Exp {
        let mark = self.scope.len();
        let out = self.exp_inner(e);
        self.scope.truncate(mark);
        out
    }

    fn exp_inner(&mut self, e: &Exp) -> Exp {
        match e {
            Exp::Sexp(s) => Exp::Sexp(self.sexp(s)),
            Exp::Call(c) => Exp::Call(self.call(c)),
            Exp::Let(x, c, rest) => {
                let c = self.call(c);
                let x = self.bind(x);
                Exp::Let(x, c, Box::new(self.exp_inner(rest)))
            }
        }
    }

    fn block(&mut self, p: &Program) -> Program {
        let mark = self.scope.len();
        let stmts = p.stmts.iter().map(|s| self.stmt(s)).collect();
        self.scope.truncate(mark);
        Program { stmts }
    }

    fn stmt(&mut self, s: &Stmt) -> Stmt {
        match s {
            Stmt::Skip => Stmt::Skip,
            Stmt::Call(c) => Stmt::Call(self.call(c)),
            Stmt::Let(x, c) => {
                let c = self.call(c);
                Stmt::Let(self.bind(x), c)
            }
            Stmt::If(e, a, b) => Stmt::If(self.exp(e), self.block(a), self.block(b)),
            Stmt::While(e, b) => Stmt::While(self.exp(e), self.block(b)),
            Stmt::Try(b, cs) => {
                let b = self.block(b);
                let cs = cs
                    .iter()
                    .map(|c| {
                        let mark = self.scope.len();
                        let var = self.bind(&c.var);
                        let body = self.block(&c.body);
                        self.scope.truncate(mark);
                        Catch { var, ty: c.ty.clone(), body }
                    })
                    .collect();
                Stmt::Try(b, cs)
            }
        }
    }
}

/// Renames every binder (and its uses) with `fresh`, which is called once
/// per binder in textual order with the old name.
pub fn rename_binders(p: &Program, fresh: &mut dyn FnMut(&str) -> String) -> Program {
    Renamer { scope: Vec::new(), fresh }.block(p)
}

/// Canonical representative of the alpha-equivalence class of `p`: binders
/// renamed `#0`, `#1`, … in textual order. Free variables are untouched.
pub fn canonicalize(p: &Program) -> Program {
    let mut n = 0;
    rename_binders(p, &mut |_| {
        let s = format!("#{n}");
        n += 1;
        s
    })
}

/// Equality up to consistent renaming of bound variables.
pub fn alpha_equal(a: &Program, b: &Program) -> bool {
    canonicalize(a) == canonicalize(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aml::parse_program;

    #[test]
    fn renaming_is_equivalent() {
        let a = parse_program("let x = $A.m(); call x.n()").unwrap();
        let b = parse_program("let y = $A.m(); call y.n()").unwrap();
        assert!(alpha_equal(&a, &b));
        assert!(alpha_equal(&a, &a));
    }

    #[test]
    fn different_call_is_not() {
        let a = parse_program("let x = $A.m(); call x.n()").unwrap();
        let b = parse_program("let y = $A.m(); call y.o()").unwrap();
        assert!(!alpha_equal(&a, &b));
    }

    #[test]
    fn free_variables_are_not_renamed() {
        let a = parse_program("call x.n()").unwrap();
        let b = parse_program("call y.n()").unwrap();
        assert!(!alpha_equal(&a, &b));
        let a = parse_program("let x = $A.m(); call $A.n(x)").unwrap();
        let b = parse_program("let x = $A.m(); call x.n($A)").unwrap();
        assert!(!alpha_equal(&a, &b));
    }

    #[test]
    fn binding_structure_matters() {
        let a = parse_program("let x = $A.m(); let y = $A.m(); call x.n()").unwrap();
        let b = parse_program("let x = $A.m(); let y = $A.m(); call y.n()").unwrap();
        assert!(!alpha_equal(&a, &b));
    }
}
