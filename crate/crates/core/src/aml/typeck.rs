use thiserror::Error;

use super::ast::*;
use super::db::{ApiDatabase, MethodSignature, ResolveError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeErrorKind {
    UndeclaredVariable(String),
    NoMatchingSignature,
    ArityMismatch,
    TypeMismatch,
    AmbiguousCall,
    UnknownType(String),
    /// A binder shadows a variable already in scope.
    Shadowing(String),
    /// `let` of a call that returns void.
    VoidBinding,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at `{node}`")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    /// The offending AST node, printed.
    pub node: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingKind {
    Input,
    Let,
    Catch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub name: String,
    pub ty: TypeName,
    pub kind: BindingKind,
}

/// Every variable a program uses, with its type: let and catch binders in
/// binding order, and the `$T` inputs it references.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeEnvironment {
    bindings: Vec<Binding>,
}

impl TypeEnvironment {
    pub fn get(&self, name: &str) -> Option<&TypeName> {
        self.bindings.iter().find(|b| b.name == name).map(|b| &b.ty)
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &TypeName> {
        self.bindings.iter().filter(|b| b.kind == BindingKind::Input).map(|b| &b.ty)
    }

    fn record(&mut self, name: &str, ty: &TypeName, kind: BindingKind) {
        let dup = self.bindings.iter().any(|b| b.name == name && &b.ty == ty);
        if !dup {
            self.bindings.push(Binding { name: name.to_string(), ty: ty.clone(), kind });
        }
    }
}

/// Types of a call site: the static receiver type, the static argument
/// types, and the signature they resolve to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResolvedCall {
    pub receiver: TypeName,
    pub args: Vec<TypeName>,
    pub sig: MethodSignature,
}

/// Result of type checking: the environment and one resolution per call
/// site, in the order of [`Program::calls`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Typing {
    pub env: TypeEnvironment,
    pub calls: Vec<ResolvedCall>,
}

struct Checker<'a> {
    db: &'a ApiDatabase,
    scope: Vec<(String, TypeName)>,
    out: Typing,
}

fn err<T>(kind: TypeErrorKind, node: impl ToString) -> Result<T, TypeError> {
    Err(TypeError { kind, node: node.to_string() })
}

/// Type of a literal constant.
pub fn literal_type(s: &Sexp) -> Option<TypeName> {
    match s {
        Sexp::Str(_) => Some(TypeName::from("String")),
        Sexp::Int(_) => Some(TypeName::from("int")),
        Sexp::Bool(_) => Some(TypeName::from("boolean")),
        Sexp::Var(_) => None,
    }
}

impl Checker<'_> {
    fn lookup(&mut self, s: &Sexp) -> Result<TypeName, TypeError> {
        if let Some(t) = literal_type(s) {
            return Ok(t);
        }
        let Sexp::Var(name) = s else { unreachable!() };
        if let Some((_, t)) = self.scope.iter().rev().find(|(n, _)| n == name) {
            return Ok(t.clone());
        }
        if let Some(t) = s.input_type() {
            if self.db.contains_type(&t) {
                self.out.env.record(name, &t, BindingKind::Input);
                return Ok(t);
            }
        }
        err(TypeErrorKind::UndeclaredVariable(name.clone()), name)
    }

    fn bind(&mut self, name: &str, ty: TypeName, kind: BindingKind, node: &dyn ToString) -> Result<(), TypeError> {
        if self.scope.iter().any(|(n, _)| n == name) {
            return err(TypeErrorKind::Shadowing(name.to_string()), node.to_string());
        }
        self.out.env.record(name, &ty, kind);
        self.scope.push((name.to_string(), ty));
        Ok(())
    }

    fn call(&mut self, c: &Call) -> Result<Option<TypeName>, TypeError> {
        let receiver = match &c.receiver {
            Receiver::Type(t) => {
                if !self.db.contains_type(t) {
                    return err(TypeErrorKind::UnknownType(t.to_string()), c);
                }
                t.clone()
            }
            Receiver::Expr(e) => self.lookup(e)?,
        };
        let args = c.args.iter().map(|a| self.lookup(a)).collect::<Result<Vec<_>, _>>()?;
        let sig = match self.db.resolve(&receiver, &c.method, &args) {
            Ok(sig) => sig.clone(),
            Err(ResolveError::NoMethod) => return err(TypeErrorKind::NoMatchingSignature, c),
            Err(ResolveError::Arity) => return err(TypeErrorKind::ArityMismatch, c),
            Err(ResolveError::Types) => return err(TypeErrorKind::TypeMismatch, c),
            Err(ResolveError::Ambiguous) => return err(TypeErrorKind::AmbiguousCall, c),
        };
        let ret = sig.returns.clone();
        self.out.calls.push(ResolvedCall { receiver, args, sig });
        Ok(ret)
    }

    fn exp(&mut self, e: &Exp) -> Result<(), TypeError> {
        let mark = self.scope.len();
        let mut cur = e;
        loop {
            match cur {
                Exp::Sexp(s) => {
                    self.lookup(s)?;
                    break;
                }
                Exp::Call(c) => {
                    self.call(c)?;
                    break;
                }
                Exp::Let(x, c, rest) => {
                    let Some(t) = self.call(c)? else {
                        return err(TypeErrorKind::VoidBinding, cur);
                    };
                    self.bind(x, t, BindingKind::Let, cur)?;
                    cur = rest;
                }
            }
        }
        self.scope.truncate(mark);
        Ok(())
    }

    fn block(&mut self, p: &Program) -> Result<(), TypeError> {
        let mark = self.scope.len();
        for s in &p.stmts {
            self.stmt(s)?;
        }
        self.scope.truncate(mark);
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), TypeError> {
        match s {
            Stmt::Skip => Ok(()),
            Stmt::Call(c) => self.call(c).map(|_| ()),
            Stmt::Let(x, c) => {
                let Some(t) = self.call(c)? else {
                    return err(TypeErrorKind::VoidBinding, s);
                };
                self.bind(x, t, BindingKind::Let, s)
            }
            Stmt::If(e, a, b) => {
                self.exp(e)?;
                self.block(a)?;
                self.block(b)
            }
            Stmt::While(e, b) => {
                self.exp(e)?;
                self.block(b)
            }
            Stmt::Try(b, catches) => {
                self.block(b)?;
                for c in catches {
                    if !self.db.contains_type(&c.ty) {
                        return err(
                            TypeErrorKind::UnknownType(c.ty.to_string()),
                            format!("catch ({}: {})", c.var, c.ty),
                        );
                    }
                    let mark = self.scope.len();
                    self.bind(&c.var, c.ty.clone(), BindingKind::Catch, &format!("catch ({}: {})", c.var, c.ty))?;
                    self.block(&c.body)?;
                    self.scope.truncate(mark);
                }
                Ok(())
            }
        }
    }
}

/// Checks `p` against `db`. Environment inputs `$T` are in scope for every
/// type `T` of the database; every other variable must be bound by an
/// enclosing `let` or `catch`.
pub fn type_check(p: &Program, db: &ApiDatabase) -> Result<Typing, TypeError> {
    let mut c = Checker { db, scope: Vec::new(), out: Typing::default() };
    c.block(p)?;
    Ok(c.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aml::syntax::parse_program;

    fn io_db() -> ApiDatabase {
        ApiDatabase::builder()
            .types(&["String", "FileReader", "BufferedReader", "FileNotFoundException", "IOException", "Throwable"])
            .subtype("FileNotFoundException", "IOException")
            .subtype("IOException", "Throwable")
            .method("FileReader", "new", &["String"], Some("FileReader"))
            .method("BufferedReader", "new", &["FileReader"], Some("BufferedReader"))
            .method("BufferedReader", "readLine", &[], Some("String"))
            .method("BufferedReader", "close", &[], None)
            .method("Throwable", "printStackTrace", &[], None)
            .build()
            .unwrap()
    }

    #[test]
    fn skip_has_empty_env() {
        let t = type_check(&Program::skip(), &io_db()).unwrap();
        assert!(t.env.is_empty());
        assert!(t.calls.is_empty());
    }

    #[test]
    fn reader_program_types() {
        let p = parse_program(
            "try { let fr = FileReader.new($String); let br = BufferedReader.new(fr);
               while (let s = br.readLine(): s) do { skip }; call br.close() }
             catch (e: FileNotFoundException) { call e.printStackTrace() }
             catch (e: IOException) { skip }",
        )
        .unwrap();
        let t = type_check(&p, &io_db()).unwrap();
        assert_eq!(t.env.get("fr"), Some(&"FileReader".into()));
        assert_eq!(t.env.get("br"), Some(&"BufferedReader".into()));
        assert_eq!(t.env.get("s"), Some(&"String".into()));
        assert_eq!(t.env.get("$String"), Some(&"String".into()));
        assert_eq!(t.calls.len(), p.calls().len());
        assert_eq!(t.calls[4].receiver, TypeName::from("FileNotFoundException"));
        assert_eq!(t.calls[4].sig.receiver, TypeName::from("Throwable"));
    }

    #[test]
    fn undeclared_variable() {
        let p = parse_program("call br.close()").unwrap();
        let e = type_check(&p, &io_db()).unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::UndeclaredVariable("br".into()));
        let p = parse_program("call $Socket.close()").unwrap();
        assert!(matches!(type_check(&p, &io_db()).unwrap_err().kind, TypeErrorKind::UndeclaredVariable(_)));
    }

    #[test]
    fn signature_errors() {
        let db = io_db();
        let kind = |s: &str| type_check(&parse_program(s).unwrap(), &db).unwrap_err().kind;
        assert_eq!(kind("call $BufferedReader.write()"), TypeErrorKind::NoMatchingSignature);
        assert_eq!(kind("call $BufferedReader.readLine($String)"), TypeErrorKind::ArityMismatch);
        assert_eq!(kind("let b = BufferedReader.new($String)"), TypeErrorKind::TypeMismatch);
        assert_eq!(kind("let x = $BufferedReader.close()"), TypeErrorKind::VoidBinding);
        assert_eq!(
            kind("let x = $BufferedReader.readLine(); let x = $BufferedReader.readLine()"),
            TypeErrorKind::Shadowing("x".into())
        );
        assert_eq!(kind("try { skip } catch (e: Oops) { skip }"), TypeErrorKind::UnknownType("Oops".into()));
    }

    #[test]
    fn scopes_end_with_their_block() {
        let db = io_db();
        let p = parse_program("while ($String) do { let s = $BufferedReader.readLine() }; call s.close()").unwrap();
        assert_eq!(type_check(&p, &db).unwrap_err().kind, TypeErrorKind::UndeclaredVariable("s".into()));
        let p = parse_program("if (let s = $BufferedReader.readLine(): s) then { skip }; call $BufferedReader.close()")
            .unwrap();
        assert!(type_check(&p, &db).is_ok());
        let p = parse_program("if (let s = $BufferedReader.readLine(): s) then { let t = s.close() }").unwrap();
        assert!(type_check(&p, &db).is_err());
    }
}
