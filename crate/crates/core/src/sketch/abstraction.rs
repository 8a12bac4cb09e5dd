use thiserror::Error;

use super::{Cexp, Cseq, Sketch, SketchStmt};
use crate::aml::typeck::ResolvedCall;
use crate::aml::{type_check, ApiDatabase, Exp, Program, Stmt, TypeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("program is not typeable: {0}")]
pub struct AbstractionError(#[from] pub TypeError);

struct Abstractor<'a> {
    calls: std::slice::Iter<'a, ResolvedCall>,
}

impl Abstractor<'_> {
    fn next_call(&mut self) -> Cexp {
        let rc = self.calls.next().expect("one resolution per call site");
        Cexp { receiver: rc.receiver.clone(), method: rc.sig.name.clone(), params: rc.args.clone() }
    }

    fn exp(&mut self, e: &Exp) -> Cseq {
        match e {
            Exp::Sexp(_) => Vec::new(),
            Exp::Call(_) => vec![self.next_call()],
            Exp::Let(_, _, rest) => {
                let mut v = vec![self.next_call()];
                v.extend(self.exp(rest));
                v
            }
        }
    }

    fn block(&mut self, p: &Program) -> Sketch {
        Sketch { stmts: p.stmts.iter().map(|s| self.stmt(s)).collect() }
    }

    fn stmt(&mut self, s: &Stmt) -> SketchStmt {
        match s {
            Stmt::Skip => SketchStmt::Skip,
            Stmt::Call(_) | Stmt::Let(..) => SketchStmt::Call(self.next_call()),
            Stmt::If(e, a, b) => {
                let c = self.exp(e);
                let a = self.block(a);
                SketchStmt::If(c, a, self.block(b))
            }
            Stmt::While(e, b) => {
                let c = self.exp(e);
                SketchStmt::While(c, self.block(b))
            }
            Stmt::Try(b, cs) => {
                let b = self.block(b);
                let cs = cs.iter().map(|c| (c.ty.clone(), self.block(&c.body))).collect();
                SketchStmt::Try(b, cs)
            }
        }
    }
}

/// The abstraction function: calls and lets become abstract calls over the
/// static types of receiver and arguments (let binders are dropped),
/// conditions become the list of their calls, catch variables become their
/// types.
pub fn abstract_program(p: &Program, db: &ApiDatabase) -> Result<Sketch, AbstractionError> {
    let typing = type_check(p, db)?;
    Ok(Abstractor { calls: typing.calls.iter() }.block(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aml::parse_program;

    fn db() -> ApiDatabase {
        ApiDatabase::builder()
            .types(&["String", "BufferedReader", "A"])
            .method("BufferedReader", "readLine", &[], Some("String"))
            .method("A", "m", &[], Some("A"))
            .method("A", "n", &["A"], Some("String"))
            .build()
            .unwrap()
    }

    #[test]
    fn call_abstracts_to_types() {
        let p = parse_program("let fr = $BufferedReader.readLine(); call $BufferedReader.readLine()").unwrap();
        let y = abstract_program(&p, &db()).unwrap();
        let c = Cexp::new("BufferedReader", "readLine", &[]);
        assert_eq!(y.stmts, vec![SketchStmt::Call(c.clone()), SketchStmt::Call(c)]);
    }

    #[test]
    fn skip_is_skip() {
        assert_eq!(abstract_program(&Program::skip(), &db()).unwrap(), Sketch::skip());
    }

    #[test]
    fn let_chain_condition_appends() {
        let p = parse_program("while (let x = $A.m(): x) do { skip }").unwrap();
        let y = abstract_program(&p, &db()).unwrap();
        assert_eq!(y.stmts[0], SketchStmt::While(vec![Cexp::new("A", "m", &[])], Sketch::skip()));
        let p = parse_program("if (let x = $A.m(): x.n(x)) then { skip } else { skip }").unwrap();
        let y = abstract_program(&p, &db()).unwrap();
        let SketchStmt::If(c, ..) = &y.stmts[0] else { panic!() };
        assert_eq!(c, &vec![Cexp::new("A", "m", &[]), Cexp::new("A", "n", &["A"])]);
        let p = parse_program("while ($A) do { skip }").unwrap();
        assert_eq!(abstract_program(&p, &db()).unwrap().stmts[0], SketchStmt::While(vec![], Sketch::skip()));
    }

    #[test]
    fn untypeable_program_is_an_error() {
        let p = parse_program("call x.m()").unwrap();
        assert!(abstract_program(&p, &db()).is_err());
    }
}
