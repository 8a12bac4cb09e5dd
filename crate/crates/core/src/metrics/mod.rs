//! Equivalence proxies between an expected program and ranked predictions.

pub mod report;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::aml::{alpha_equal, type_check, ApiDatabase, Exp, MethodSignature, Program, Stmt, TypeError};

pub use report::{evaluate, EvalItem, Report};

pub const DEFAULT_UNROLL: usize = 1;
pub const PATH_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("program does not type-check: {0}")]
    Untyped(#[from] TypeError),
    #[error("more than {0} control-flow paths")]
    TooManyPaths(usize),
}

pub type CallSeq = Vec<MethodSignature>;

/// `1 − |a ∩ b| / |a ∪ b|`, and 0 for two empty sets.
pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - a.intersection(b).count() as f64 / union as f64
}

struct Paths<'a> {
    sigs: std::slice::Iter<'a, crate::aml::typeck::ResolvedCall>,
    unroll: usize,
}

fn concat(a: &BTreeSet<CallSeq>, b: &BTreeSet<CallSeq>) -> Result<BTreeSet<CallSeq>, MetricsError> {
    if a.len().saturating_mul(b.len()) > PATH_CAP * 4 {
        return Err(MetricsError::TooManyPaths(PATH_CAP));
    }
    let out: BTreeSet<CallSeq> = a.iter().flat_map(|x| b.iter().map(move |y| [x.as_slice(), y].concat())).collect();
    cap(out)
}

fn cap(s: BTreeSet<CallSeq>) -> Result<BTreeSet<CallSeq>, MetricsError> {
    if s.len() > PATH_CAP {
        Err(MetricsError::TooManyPaths(PATH_CAP))
    } else {
        Ok(s)
    }
}

fn single(seq: CallSeq) -> BTreeSet<CallSeq> {
    BTreeSet::from([seq])
}

impl Paths<'_> {
    fn next(&mut self) -> MethodSignature {
        self.sigs.next().expect("one resolution per call").sig.clone()
    }

    fn exp(&mut self, e: &Exp) -> CallSeq {
        let mut v = Vec::new();
        let mut cur = e;
        loop {
            match cur {
                Exp::Sexp(_) => break,
                Exp::Call(_) => {
                    v.push(self.next());
                    break;
                }
                Exp::Let(_, _, rest) => {
                    v.push(self.next());
                    cur = rest;
                }
            }
        }
        v
    }

    fn block(&mut self, p: &Program) -> Result<BTreeSet<CallSeq>, MetricsError> {
        let mut acc = single(Vec::new());
        for s in &p.stmts {
            let next = self.stmt(s)?;
            acc = concat(&acc, &next)?;
        }
        Ok(acc)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<BTreeSet<CallSeq>, MetricsError> {
        match s {
            Stmt::Skip => Ok(single(Vec::new())),
            Stmt::Call(_) | Stmt::Let(..) => Ok(single(vec![self.next()])),
            Stmt::If(e, a, b) => {
                let cond = single(self.exp(e));
                let mut branches = self.block(a)?;
                branches.extend(self.block(b)?);
                concat(&cond, &branches)
            }
            Stmt::While(e, b) => {
                let cond = single(self.exp(e));
                let body = self.block(b)?;
                let iteration = concat(&cond, &body)?;
                // k iterations, then the failing test
                let mut out = BTreeSet::new();
                let mut prefix = single(Vec::new());
                for k in 0..=self.unroll {
                    out.extend(concat(&prefix, &cond)?);
                    if k < self.unroll {
                        prefix = concat(&prefix, &iteration)?;
                    }
                }
                cap(out)
            }
            Stmt::Try(b, cs) => {
                let body = self.block(b)?;
                let mut out = body.clone();
                // an exception may leave the body after any of its calls
                let prefixes: BTreeSet<CallSeq> =
                    body.iter().flat_map(|p| (1..=p.len()).map(move |n| p[..n].to_vec())).collect();
                for c in cs {
                    let handler = self.block(&c.body)?;
                    out.extend(concat(&prefixes, &handler)?);
                }
                cap(out)
            }
        }
    }
}

/// The API call sequences along the control-flow paths of `p`: loops run
/// 0 to `unroll` times, and a `try` either completes its body or leaves it
/// after some call for one of its handlers.
pub fn call_sequences(p: &Program, db: &ApiDatabase, unroll: usize) -> Result<BTreeSet<CallSeq>, MetricsError> {
    let typing = type_check(p, db)?;
    Paths { sigs: typing.calls.iter(), unroll }.block(p)
}

/// The set of resolved signatures called anywhere in `p`.
pub fn call_set(p: &Program, db: &ApiDatabase) -> Result<BTreeSet<MethodSignature>, MetricsError> {
    Ok(type_check(p, db)?.calls.into_iter().map(|c| c.sig).collect())
}

fn count_gap(expected: usize, predicted: usize) -> f64 {
    if expected == 0 {
        return if predicted == 0 { 0.0 } else { 1.0 };
    }
    (expected as f64 - predicted as f64).abs() / expected as f64
}

/// One equivalence proxy. Scores are "lower is closer" except for `m1`,
/// which is 1 on a hit. With no predictions, distances are 1.
pub trait Metric: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn score(&self, expected: &Program, predicted: &[Program], db: &ApiDatabase) -> Result<f64, MetricsError>;
}

fn min_over(
    predicted: &[Program],
    mut f: impl FnMut(&Program) -> Result<f64, MetricsError>,
) -> Result<f64, MetricsError> {
    let mut best: Option<f64> = None;
    for p in predicted {
        let v = f(p)?;
        best = Some(best.map_or(v, |b| b.min(v)));
    }
    Ok(best.unwrap_or(1.0))
}

#[derive(Debug)]
pub struct M1;
#[derive(Debug)]
pub struct M2 {
    pub unroll: usize,
}
#[derive(Debug)]
pub struct M3;
#[derive(Debug)]
pub struct M4;
#[derive(Debug)]
pub struct M5;

impl Metric for M1 {
    fn name(&self) -> &'static str {
        "M1"
    }
    fn description(&self) -> &'static str {
        "some prediction equals the expected program up to renaming"
    }
    fn score(&self, expected: &Program, predicted: &[Program], _: &ApiDatabase) -> Result<f64, MetricsError> {
        Ok(if predicted.iter().any(|p| alpha_equal(expected, p)) { 1.0 } else { 0.0 })
    }
}

impl Metric for M2 {
    fn name(&self) -> &'static str {
        "M2"
    }
    fn description(&self) -> &'static str {
        "min Jaccard distance between sets of API call sequences"
    }
    fn score(&self, expected: &Program, predicted: &[Program], db: &ApiDatabase) -> Result<f64, MetricsError> {
        let e = call_sequences(expected, db, self.unroll)?;
        min_over(predicted, |p| Ok(jaccard_distance(&e, &call_sequences(p, db, self.unroll)?)))
    }
}

impl Metric for M3 {
    fn name(&self) -> &'static str {
        "M3"
    }
    fn description(&self) -> &'static str {
        "min Jaccard distance between sets of API calls"
    }
    fn score(&self, expected: &Program, predicted: &[Program], db: &ApiDatabase) -> Result<f64, MetricsError> {
        let e = call_set(expected, db)?;
        min_over(predicted, |p| Ok(jaccard_distance(&e, &call_set(p, db)?)))
    }
}

impl Metric for M4 {
    fn name(&self) -> &'static str {
        "M4"
    }
    fn description(&self) -> &'static str {
        "min relative difference in statement count"
    }
    fn score(&self, expected: &Program, predicted: &[Program], _: &ApiDatabase) -> Result<f64, MetricsError> {
        min_over(predicted, |p| Ok(count_gap(expected.statement_count(), p.statement_count())))
    }
}

impl Metric for M5 {
    fn name(&self) -> &'static str {
        "M5"
    }
    fn description(&self) -> &'static str {
        "min relative difference in branch, loop and try-catch count"
    }
    fn score(&self, expected: &Program, predicted: &[Program], _: &ApiDatabase) -> Result<f64, MetricsError> {
        min_over(predicted, |p| Ok(count_gap(expected.control_count(), p.control_count())))
    }
}

pub const METRICS: [&str; 5] = ["M1", "M2", "M3", "M4", "M5"];

/// Looks up a metric by name (case-insensitive).
pub fn metric(name: &str) -> Option<Box<dyn Metric>> {
    match name.to_ascii_uppercase().as_str() {
        "M1" => Some(Box::new(M1)),
        "M2" => Some(Box::new(M2 { unroll: DEFAULT_UNROLL })),
        "M3" => Some(Box::new(M3)),
        "M4" => Some(Box::new(M4)),
        "M5" => Some(Box::new(M5)),
        _ => None,
    }
}

pub fn all_metrics() -> Vec<Box<dyn Metric>> {
    METRICS.iter().map(|n| metric(n).expect("registered")).collect()
}

/// Scores of one expected program against its predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub expected: Program,
    pub predicted: Vec<Program>,
    /// M1..M5 in order.
    pub scores: [f64; 5],
}

pub fn score_record(expected: &Program, predicted: &[Program], db: &ApiDatabase) -> Result<EvalRecord, MetricsError> {
    let mut scores = [0.0; 5];
    for (s, m) in scores.iter_mut().zip(all_metrics()) {
        *s = m.score(expected, predicted, db)?;
    }
    Ok(EvalRecord { expected: expected.clone(), predicted: predicted.to_vec(), scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aml::parse_program;

    fn db() -> ApiDatabase {
        ApiDatabase::builder()
            .types(&["String", "FileReader", "BufferedReader", "IOException", "FileNotFoundException"])
            .subtype("FileNotFoundException", "IOException")
            .method("FileReader", "new", &["String"], Some("FileReader"))
            .method("BufferedReader", "new", &["FileReader"], Some("BufferedReader"))
            .method("BufferedReader", "readLine", &[], Some("String"))
            .method("BufferedReader", "close", &[], None)
            .method("IOException", "printStackTrace", &[], None)
            .build()
            .unwrap()
    }

    fn sig(r: &str, m: &str, ps: &[&str], ret: Option<&str>) -> MethodSignature {
        MethodSignature {
            receiver: r.into(),
            name: m.into(),
            params: ps.iter().map(|&p| p.into()).collect(),
            returns: ret.map(Into::into),
        }
    }

    fn set<T: Ord + Clone>(v: &[T]) -> BTreeSet<T> {
        v.iter().cloned().collect()
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(jaccard_distance(&set(&["a"]), &set(&["a", "b"])), 0.5);
        assert_eq!(jaccard_distance(&set(&["a", "b"]), &set(&["a", "b"])), 0.0);
        assert_eq!(jaccard_distance(&set(&["a"]), &set(&["b"])), 1.0);
        assert_eq!(jaccard_distance::<&str>(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn straight_line_and_loop_sequences() {
        let p = parse_program("let br = BufferedReader.new($FileReader); call br.close()").unwrap();
        let seqs = call_sequences(&p, &db(), 1).unwrap();
        let new = sig("BufferedReader", "new", &["FileReader"], Some("BufferedReader"));
        let close = sig("BufferedReader", "close", &[], None);
        assert_eq!(seqs, set(&[vec![new, close.clone()]]));
        let p = parse_program("while (true) do { call $BufferedReader.close() }").unwrap();
        assert_eq!(call_sequences(&p, &db(), 1).unwrap(), set(&[vec![], vec![close]]));
    }

    #[test]
    fn reader_program_paths() {
        let p = parse_program(
            "try { let fr = FileReader.new($String); let br = BufferedReader.new(fr);
               while (let s = br.readLine(): s) do { skip }; call br.close() }
             catch (e: FileNotFoundException) { call e.printStackTrace() }
             catch (e: IOException) { call e.printStackTrace() }",
        )
        .unwrap();
        let seqs = call_sequences(&p, &db(), 1).unwrap();
        let fr = sig("FileReader", "new", &["String"], Some("FileReader"));
        let br = sig("BufferedReader", "new", &["FileReader"], Some("BufferedReader"));
        let rl = sig("BufferedReader", "readLine", &[], Some("String"));
        let close = sig("BufferedReader", "close", &[], None);
        let pst = sig("IOException", "printStackTrace", &[], None);
        assert!(seqs.contains(&vec![fr.clone(), br.clone(), rl.clone(), close.clone()]));
        assert!(seqs.contains(&vec![fr.clone(), br.clone(), rl.clone(), rl.clone(), close]));
        assert!(seqs.contains(&vec![fr.clone(), pst.clone()]));
        assert!(seqs.contains(&vec![fr, br, rl, pst]));
    }

    #[test]
    fn count_metrics() {
        let e = parse_program("call $BufferedReader.close(); call $BufferedReader.close(); skip; skip").unwrap();
        let p = parse_program("call $BufferedReader.close(); skip; skip").unwrap();
        assert_eq!(M4.score(&e, std::slice::from_ref(&p), &db()).unwrap(), 0.25);
        assert_eq!(M5.score(&e, &[p], &db()).unwrap(), 0.0);
        let w = parse_program("while (true) do { skip }").unwrap();
        assert_eq!(M5.score(&e, &[w], &db()).unwrap(), 1.0);
    }

    #[test]
    fn empty_predictions() {
        let e = Program::skip();
        assert_eq!(M1.score(&e, &[], &db()).unwrap(), 0.0);
        assert_eq!(M2 { unroll: 1 }.score(&e, &[], &db()).unwrap(), 1.0);
    }

    #[test]
    fn identical_prediction_scores_perfectly() {
        let e = parse_program(
            "let br = BufferedReader.new($FileReader); if (let s = br.readLine(): s) then { call br.close() }",
        )
        .unwrap();
        let r = score_record(&e, std::slice::from_ref(&e), &db()).unwrap();
        assert_eq!(r.scores, [1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
