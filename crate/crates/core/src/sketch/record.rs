//! Structured-text (JSON) encoding of sketches.
//!
//! ```json
//! {"node":"try","body":{"node":"seq","items":[...]},
//!  "catches":[{"node":"catch","type":"IOException","body":{"node":"skip"}}]}
//! ```
//!
//! A statement list of length one is encoded as the statement itself,
//! longer lists as a `seq` node.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Cexp, Sketch, SketchStmt};
use crate::aml::TypeName;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase", deny_unknown_fields)]
pub enum SketchRecord {
    Skip,
    Call {
        call: Cexp,
    },
    Seq {
        items: Vec<SketchRecord>,
    },
    If {
        cond: Vec<Cexp>,
        then: Box<SketchRecord>,
        #[serde(rename = "else")]
        otherwise: Box<SketchRecord>,
    },
    While {
        cond: Vec<Cexp>,
        body: Box<SketchRecord>,
    },
    Try {
        body: Box<SketchRecord>,
        catches: Vec<SketchRecord>,
    },
    Catch {
        #[serde(rename = "type")]
        ty: TypeName,
        body: Box<SketchRecord>,
    },
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed sketch record: {0}")]
    Malformed(String),
    #[error("malformed sketch record: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<&Sketch> for SketchRecord {
    fn from(y: &Sketch) -> Self {
        if let [one] = y.stmts.as_slice() {
            SketchRecord::from(one)
        } else {
            SketchRecord::Seq { items: y.stmts.iter().map(SketchRecord::from).collect() }
        }
    }
}

impl From<&SketchStmt> for SketchRecord {
    fn from(s: &SketchStmt) -> Self {
        let b = |y: &Sketch| Box::new(SketchRecord::from(y));
        match s {
            SketchStmt::Skip => SketchRecord::Skip,
            SketchStmt::Call(c) => SketchRecord::Call { call: c.clone() },
            SketchStmt::If(c, a, e) => SketchRecord::If { cond: c.clone(), then: b(a), otherwise: b(e) },
            SketchStmt::While(c, body) => SketchRecord::While { cond: c.clone(), body: b(body) },
            SketchStmt::Try(body, cs) => SketchRecord::Try {
                body: b(body),
                catches: cs.iter().map(|(ty, y)| SketchRecord::Catch { ty: ty.clone(), body: b(y) }).collect(),
            },
        }
    }
}

impl TryFrom<&SketchRecord> for Sketch {
    type Error = RecordError;

    fn try_from(r: &SketchRecord) -> Result<Self, Self::Error> {
        let mut stmts = Vec::new();
        collect(r, &mut stmts)?;
        Ok(Sketch { stmts })
    }
}

fn collect(r: &SketchRecord, out: &mut Vec<SketchStmt>) -> Result<(), RecordError> {
    let sub = |r: &SketchRecord| Sketch::try_from(r);
    match r {
        SketchRecord::Skip => out.push(SketchStmt::Skip),
        SketchRecord::Call { call } => out.push(SketchStmt::Call(call.clone())),
        SketchRecord::Seq { items } => {
            if items.is_empty() {
                return Err(RecordError::Malformed("empty seq".into()));
            }
            for i in items {
                collect(i, out)?;
            }
        }
        SketchRecord::If { cond, then, otherwise } => {
            out.push(SketchStmt::If(cond.clone(), sub(then)?, sub(otherwise)?));
        }
        SketchRecord::While { cond, body } => out.push(SketchStmt::While(cond.clone(), sub(body)?)),
        SketchRecord::Try { body, catches } => {
            let cs = catches
                .iter()
                .map(|c| match c {
                    SketchRecord::Catch { ty, body } => Ok((ty.clone(), sub(body)?)),
                    _ => Err(RecordError::Malformed("try catches must be catch nodes".into())),
                })
                .collect::<Result<_, _>>()?;
            out.push(SketchStmt::Try(sub(body)?, cs));
        }
        SketchRecord::Catch { .. } => return Err(RecordError::Malformed("catch outside of try".into())),
    }
    Ok(())
}

pub fn sketch_to_record(y: &Sketch) -> serde_json::Value {
    serde_json::to_value(SketchRecord::from(y)).expect("records serialize")
}

pub fn record_to_sketch(v: &serde_json::Value) -> Result<Sketch, RecordError> {
    let r: SketchRecord = serde_json::from_value(v.clone())?;
    Sketch::try_from(&r)
}

impl Serialize for Sketch {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SketchRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sketch {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = SketchRecord::deserialize(d)?;
        Sketch::try_from(&r).map_err(serde::de::Error::custom)
    }
}
