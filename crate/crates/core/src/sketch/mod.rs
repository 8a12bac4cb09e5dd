//! Sketches: programs with variable names and constants abstracted away,
//! keeping control structure and typed abstract API calls.

mod abstraction;
pub mod record;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::aml::TypeName;

pub use abstraction::{abstract_program, AbstractionError};
pub use record::{record_to_sketch, sketch_to_record, RecordError};
pub use tree::{production_paths, Edge, ProductionPath, Symbol, TreeNode};

/// Abstract method call `τ0.a(τ1, …, τk)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cexp {
    pub receiver: TypeName,
    pub method: String,
    pub params: Vec<TypeName>,
}

impl Cexp {
    pub fn new(receiver: &str, method: &str, params: &[&str]) -> Self {
        Cexp {
            receiver: receiver.into(),
            method: method.to_string(),
            params: params.iter().map(|&p| p.into()).collect(),
        }
    }
}

impl fmt::Display for Cexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}(", self.receiver, self.method)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed abstract call {0:?}")]
pub struct CexpParseError(pub String);

impl FromStr for Cexp {
    type Err = CexpParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CexpParseError(s.to_string());
        let ident = |t: &str| {
            let t = t.trim();
            let ok = !t.is_empty() && t.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$');
            ok.then(|| t.to_string())
        };
        let (recv, rest) = s.split_once('.').ok_or_else(bad)?;
        let (method, args) = rest.split_once('(').ok_or_else(bad)?;
        let args = args.trim_end().strip_suffix(')').ok_or_else(bad)?;
        let params = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',').map(|p| ident(p).map(TypeName::new).ok_or_else(bad)).collect::<Result<_, _>>()?
        };
        Ok(Cexp {
            receiver: TypeName::new(ident(recv).ok_or_else(bad)?),
            method: ident(method).ok_or_else(bad)?,
            params,
        })
    }
}

impl Serialize for Cexp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cexp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Abstract condition: the calls of a let-chained expression, in order.
pub type Cseq = Vec<Cexp>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SketchStmt {
    Skip,
    Call(Cexp),
    If(Cseq, Sketch, Sketch),
    While(Cseq, Sketch),
    Try(Sketch, Vec<(TypeName, Sketch)>),
}

/// A non-empty sequence of sketch statements.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sketch {
    pub stmts: Vec<SketchStmt>,
}

impl Sketch {
    pub fn new(stmts: Vec<SketchStmt>) -> Self {
        if stmts.is_empty() {
            Sketch::skip()
        } else {
            Sketch { stmts }
        }
    }

    pub fn skip() -> Self {
        Sketch { stmts: vec![SketchStmt::Skip] }
    }

    /// Total number of sketch nodes, counting each abstract call once.
    pub fn node_count(&self) -> usize {
        self.stmts
            .iter()
            .map(|s| match s {
                SketchStmt::Skip | SketchStmt::Call(_) => 1,
                SketchStmt::If(c, a, b) => 1 + c.len() + a.node_count() + b.node_count(),
                SketchStmt::While(c, b) => 1 + c.len() + b.node_count(),
                SketchStmt::Try(b, cs) => {
                    1 + b.node_count() + cs.iter().map(|(_, s)| 1 + s.node_count()).sum::<usize>()
                }
            })
            .sum()
    }

    /// Every abstract call, conditions included, in pre-order.
    pub fn calls(&self) -> Vec<&Cexp> {
        fn go<'a>(s: &'a Sketch, out: &mut Vec<&'a Cexp>) {
            for st in &s.stmts {
                match st {
                    SketchStmt::Skip => {}
                    SketchStmt::Call(c) => out.push(c),
                    SketchStmt::If(c, a, b) => {
                        out.extend(c);
                        go(a, out);
                        go(b, out);
                    }
                    SketchStmt::While(c, b) => {
                        out.extend(c);
                        go(b, out);
                    }
                    SketchStmt::Try(b, cs) => {
                        go(b, out);
                        for (_, s) in cs {
                            go(s, out);
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }
}

impl fmt::Display for Sketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.stmts.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

fn fmt_cseq(f: &mut fmt::Formatter<'_>, c: &Cseq) -> fmt::Result {
    f.write_str("[")?;
    for (i, e) in c.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{e}")?;
    }
    f.write_str("]")
}

impl fmt::Display for SketchStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SketchStmt::Skip => f.write_str("skip"),
            SketchStmt::Call(c) => write!(f, "call {c}"),
            SketchStmt::If(c, a, b) => {
                f.write_str("if ")?;
                fmt_cseq(f, c)?;
                write!(f, " then {{ {a} }} else {{ {b} }}")
            }
            SketchStmt::While(c, b) => {
                f.write_str("while ")?;
                fmt_cseq(f, c)?;
                write!(f, " do {{ {b} }}")
            }
            SketchStmt::Try(b, cs) => {
                write!(f, "try {{ {b} }}")?;
                for (t, s) in cs {
                    write!(f, " catch ({t}) {{ {s} }}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cexp_text_round_trip() {
        let c = Cexp::new("BufferedReader", "new", &["FileReader"]);
        assert_eq!(c.to_string(), "BufferedReader.new(FileReader)");
        assert_eq!("BufferedReader.new(FileReader)".parse::<Cexp>().unwrap(), c);
        let c = Cexp::new("A", "m", &["B", "C"]);
        assert_eq!(" A.m( B , C )".parse::<Cexp>().unwrap(), c);
        assert_eq!("A.m()".parse::<Cexp>().unwrap().params.len(), 0);
        for bad in ["A", "A.m", "A.m(", ".m()", "A.(B)", "A.m(B,)"] {
            assert!(bad.parse::<Cexp>().is_err(), "{bad}");
        }
    }
}
