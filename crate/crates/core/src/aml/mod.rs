//! The core language: AST, text syntax, API database and type checking.

pub mod alpha;
pub mod ast;
pub mod db;
pub mod syntax;
pub mod typeck;

pub use alpha::{alpha_equal, canonicalize};
pub use ast::{Call, Catch, Exp, Program, Receiver, Sexp, Stmt, TypeName};
pub use db::{ApiDatabase, DbError, MethodSignature};
pub use syntax::{parse_program, print_program, SyntaxError};
pub use typeck::{type_check, TypeEnvironment, TypeError, TypeErrorKind, Typing};
