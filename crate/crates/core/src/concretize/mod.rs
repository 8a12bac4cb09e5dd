//! Type-directed random walks from sketches to programs.

pub mod pcs;
pub mod policy;

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aml::{canonicalize, print_program, type_check, ApiDatabase, Program};
use crate::model::train::rng_for;
use crate::sketch::{abstract_program, Sketch};

pub use pcs::{Binding, Choice, Pcs, SketchPlan, SynthesisEnv};
pub use policy::{policy, step_distribution, ExpCost, StepPolicy, Uniform, POLICIES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConcretizeError {
    #[error("no type-safe program found after {restarts} restarts")]
    BudgetExhausted { restarts: usize },
    #[error("every sketch failed to concretize: {}", .0.iter().map(|(y, e)| format!("{y} ({e})")).collect::<Vec<_>>().join("; "))]
    AllFailed(Vec<(Sketch, String)>),
    #[error("more than {0} concretizations")]
    TooMany(usize),
    #[error("invalid walk configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    /// Steps per walk; `None` means ten times the sketch's node count.
    pub max_steps: Option<usize>,
    pub max_restarts: usize,
    pub simplicity_bias: f64,
    pub policy: String,
    pub seed: u64,
    /// Walks run for every sampled sketch by [`concretize_top_k`].
    pub walks: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            max_steps: None,
            max_restarts: 50,
            simplicity_bias: 0.5,
            policy: "exp-cost".into(),
            seed: 0,
            walks: 10,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), ConcretizeError> {
        if self.max_steps == Some(0) {
            return Err(ConcretizeError::InvalidConfig("max_steps must be positive".into()));
        }
        if self.walks == 0 {
            return Err(ConcretizeError::InvalidConfig("walks must be positive".into()));
        }
        policy(&self.policy, self.simplicity_bias).map(|_| ())
    }
}

/// A finished walk.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkResult {
    pub program: Program,
    pub cost: f64,
    pub restarts: usize,
}

/// Walks from the fully abstract state of `y`, picking among neighbors by
/// the configured policy, until a concrete program is reached. Dead ends
/// and overlong walks restart from `y`. Every returned program type-checks
/// and abstracts back to `y`.
pub fn random_walk<R: Rng + ?Sized>(
    y: &Sketch,
    db: &ApiDatabase,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<WalkResult, ConcretizeError> {
    let pol = policy(&cfg.policy, cfg.simplicity_bias)?;
    let start = Pcs::init(y);
    let max_steps = cfg.max_steps.unwrap_or(10 * y.node_count()).max(1);
    for restart in 0..=cfg.max_restarts {
        let mut h = start.clone();
        let mut steps = 0;
        while !h.is_concrete() && steps < max_steps {
            let mut ns = h.neighbors(db);
            if ns.is_empty() {
                break;
            }
            let costs: Vec<f64> = ns.iter().map(|n| n.1).collect();
            let probs = step_distribution(&costs, pol.as_ref());
            let mut u: f64 = rng.random();
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                if u < *p {
                    pick = i;
                    break;
                }
                u -= p;
            }
            h = ns.swap_remove(pick).0;
            steps += 1;
        }
        let Some(program) = h.to_program() else { continue };
        match verify(&program, y, db) {
            Ok(()) => return Ok(WalkResult { program, cost: h.cost(), restarts: restart }),
            Err(e) => log::error!("rejected concretization {}: {e}", print_program(&program)),
        }
    }
    Err(ConcretizeError::BudgetExhausted { restarts: cfg.max_restarts })
}

fn verify(p: &Program, y: &Sketch, db: &ApiDatabase) -> Result<(), String> {
    type_check(p, db).map_err(|e| e.to_string())?;
    let back = abstract_program(p, db).map_err(|e| e.to_string())?;
    if back != *y {
        return Err(format!("abstracts to {back}"));
    }
    Ok(())
}

/// Every concrete program reachable from `y` with its total cost,
/// depth-first; fails once more than `limit` are found.
pub fn enumerate_programs(y: &Sketch, db: &ApiDatabase, limit: usize) -> Result<Vec<(Program, f64)>, ConcretizeError> {
    let mut out = Vec::new();
    let mut stack = vec![Pcs::init(y)];
    while let Some(h) = stack.pop() {
        if let Some(p) = h.to_program() {
            if out.len() == limit {
                return Err(ConcretizeError::TooMany(limit));
            }
            out.push((p, h.cost()));
            continue;
        }
        stack.extend(h.neighbors(db).into_iter().rev().map(|n| n.0));
    }
    Ok(out)
}

/// A program in the ranked output of [`concretize_top_k`].
#[derive(Clone, Debug, PartialEq)]
pub struct RankedProgram {
    pub rank: usize,
    pub program: Program,
    pub sketch: Sketch,
    /// How many of the input sketches equal `sketch`.
    pub sketch_frequency: usize,
    /// Fraction of walks on `sketch` that succeeded.
    pub success_rate: f64,
    pub cost: f64,
    /// Distinct `$T` inputs the program reads.
    pub inputs: usize,
    /// Walks that produced this program, up to renaming.
    pub hits: usize,
}

struct Candidate {
    program: Program,
    key: String,
    sketch: usize,
    cost: f64,
    inputs: usize,
    hits: usize,
}

/// Concretizes sampled sketches and ranks the distinct programs (up to
/// renaming) by the frequency of their sketch among the samples, then the
/// sketch's walk success rate, then program cost, then fewer `$T` inputs,
/// then how many walks found the program. Each distinct sketch gets `walks × frequency` walks, each
/// with its own seeded stream, so the result is independent of scheduling.
pub fn concretize_top_k(
    sketches: &[Sketch],
    db: &ApiDatabase,
    cfg: &WalkConfig,
    k: usize,
) -> Result<Vec<RankedProgram>, ConcretizeError> {
    cfg.validate()?;
    if k == 0 {
        return Err(ConcretizeError::InvalidConfig("k must be at least 1".into()));
    }
    let mut distinct: Vec<(Sketch, usize)> = Vec::new();
    for y in sketches {
        match distinct.iter_mut().find(|(s, _)| s == y) {
            Some((_, n)) => *n += 1,
            None => distinct.push((y.clone(), 1)),
        }
    }
    let jobs: Vec<(usize, usize)> =
        distinct.iter().enumerate().flat_map(|(i, (_, f))| (0..f * cfg.walks).map(move |w| (i, w))).collect();
    let results: Vec<(usize, Result<WalkResult, ConcretizeError>)> = jobs
        .par_iter()
        .map(|&(i, w)| {
            let mut rng = rng_for(cfg.seed, ((i as u64) << 32) | w as u64);
            (i, random_walk(&distinct[i].0, db, cfg, &mut rng))
        })
        .collect();

    let mut successes = vec![0usize; distinct.len()];
    let mut last_error: Vec<Option<String>> = vec![None; distinct.len()];
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, r) in results {
        match r {
            Ok(w) => {
                successes[i] += 1;
                let key = print_program(&canonicalize(&w.program));
                match index.get(&key) {
                    Some(&c) => candidates[c].hits += 1,
                    None => {
                        index.insert(key.clone(), candidates.len());
                        let inputs = type_check(&w.program, db).map(|t| t.env.inputs().count()).unwrap_or(usize::MAX);
                        candidates.push(Candidate {
                            program: w.program,
                            key,
                            sketch: i,
                            cost: w.cost,
                            inputs,
                            hits: 1,
                        });
                    }
                }
            }
            Err(e) => last_error[i] = Some(e.to_string()),
        }
    }
    if candidates.is_empty() {
        let failed = distinct
            .iter()
            .zip(last_error)
            .map(|((y, _), e)| (y.clone(), e.unwrap_or_else(|| "no walk succeeded".into())))
            .collect();
        return Err(ConcretizeError::AllFailed(failed));
    }
    let rate = |i: usize| successes[i] as f64 / (distinct[i].1 * cfg.walks) as f64;
    candidates.sort_by(|a, b| {
        distinct[b.sketch]
            .1
            .cmp(&distinct[a.sketch].1)
            .then(rate(b.sketch).total_cmp(&rate(a.sketch)))
            .then(a.cost.total_cmp(&b.cost))
            .then(a.inputs.cmp(&b.inputs))
            .then(b.hits.cmp(&a.hits))
            .then(a.key.cmp(&b.key))
    });
    Ok(candidates
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, c)| RankedProgram {
            rank: r + 1,
            sketch_frequency: distinct[c.sketch].1,
            success_rate: rate(c.sketch),
            sketch: distinct[c.sketch].0.clone(),
            program: c.program,
            cost: c.cost,
            inputs: c.inputs,
            hits: c.hits,
        })
        .collect())
}
