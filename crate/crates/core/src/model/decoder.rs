//! Two-edge recurrent tree decoder.
//!
//! A tree is scored by a depth-first walk over the slots of its nodes
//! (see [`next_slot`]). Each slot is one recurrence step: the state enters
//! from the previously visited slot, the slot's owner symbol is the input,
//! and the output distribution predicts the symbol filling the slot, or
//! `<end>` when a sibling slot is empty. After a subtree is generated its
//! final state flows into the owner's next slot, so left-sibling context is
//! threaded into right subtrees.

use rand::Rng;

use super::params::GedParams;
use super::tensor::{log_softmax_at, softmax, tanh_in_place};
use super::ModelError;
use crate::labels::SymbolIndex;
use crate::sketch::tree::{next_slot, Allowed, Role, Slot};
use crate::sketch::{Edge, Symbol, TreeNode};

/// One recurrence step `h = tanh(h_prev·Wh + bh + Wv[v] + bv)`,
/// `y = softmax(h·Wy + by)`, with the weights of `edge`.
pub fn decoder_step(params: &GedParams, h_prev: &[f64], input: usize, edge: Edge) -> (Vec<f64>, Vec<f64>) {
    let h = step_state(params, h_prev, input, edge);
    let y = softmax(&step_logits(params, &h, edge));
    (h, y)
}

fn step_state(params: &GedParams, h_prev: &[f64], input: usize, edge: Edge) -> Vec<f64> {
    let e = &params.dec[edge.index()];
    let mut h = e.wh.affine(h_prev, &e.bh);
    for ((x, v), b) in h.iter_mut().zip(e.wv.row(input)).zip(&e.bv.data) {
        *x += v + b;
    }
    tanh_in_place(&mut h);
    h
}

fn step_logits(params: &GedParams, h: &[f64], edge: Edge) -> Vec<f64> {
    let e = &params.dec[edge.index()];
    e.wy.affine(h, &e.by)
}

/// A scored recurrence step of a fixed tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedStep {
    /// Step whose output state feeds this one; `None` for the initial state.
    pub prev: Option<usize>,
    pub input: usize,
    pub edge: Edge,
    pub target: usize,
}

/// Lays out the recurrence steps that score `tree`.
pub fn plan_tree(tree: &TreeNode, symbols: &SymbolIndex) -> Result<Vec<PlannedStep>, ModelError> {
    if tree.symbol != Symbol::Root {
        return Err(ModelError::MalformedTree("tree must start at the root symbol".into()));
    }
    let end = index_of(symbols, &Symbol::End)?;
    let mut plan = Vec::new();
    plan_node(tree, Role::Root, None, symbols, end, &mut plan)?;
    Ok(plan)
}

fn index_of(symbols: &SymbolIndex, s: &Symbol) -> Result<usize, ModelError> {
    symbols.get(s).ok_or_else(|| ModelError::SymbolOutOfVocabulary(s.to_string()))
}

fn plan_node(
    node: &TreeNode,
    role: Role,
    mut state: Option<usize>,
    symbols: &SymbolIndex,
    end: usize,
    plan: &mut Vec<PlannedStep>,
) -> Result<Option<usize>, ModelError> {
    let input = index_of(symbols, &node.symbol)?;
    let mut visited: Vec<(Slot, bool)> = Vec::new();
    while let Some(slot) = next_slot(&node.symbol, role, &visited) {
        let content = node.get(slot.edge);
        let target = match content {
            Some(c) if slot.allowed.admits(&c.symbol) => index_of(symbols, &c.symbol)?,
            None if slot.allowed.admits(&Symbol::End) => end,
            _ => {
                return Err(ModelError::MalformedTree(format!(
                    "{} cannot hold {} on its {:?} edge",
                    node.symbol,
                    content.map_or("nothing".to_string(), |c| c.symbol.to_string()),
                    slot.edge
                )))
            }
        };
        plan.push(PlannedStep { prev: state, input, edge: slot.edge, target });
        state = Some(plan.len() - 1);
        if let Some(c) = content {
            state = plan_node(c, slot.role, state, symbols, end, plan)?;
        }
        visited.push((slot, content.is_some()));
    }
    let used = |e: Edge| visited.iter().any(|(s, filled)| s.edge == e && *filled);
    for edge in [Edge::Child, Edge::Sibling] {
        if node.get(edge).is_some() && !used(edge) {
            return Err(ModelError::MalformedTree(format!("{} has an unexpected {:?} edge", node.symbol, edge)));
        }
    }
    Ok(state)
}

/// States and output distributions of a forward pass over a plan.
#[derive(Clone, Debug)]
pub struct DecoderTrace {
    pub states: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
}

/// Total log probability of the plan's targets, starting from `h0`.
pub fn plan_forward(params: &GedParams, h0: &[f64], plan: &[PlannedStep]) -> (f64, DecoderTrace) {
    let mut tr = DecoderTrace { states: Vec::with_capacity(plan.len()), probs: Vec::with_capacity(plan.len()) };
    let mut total = 0.0;
    for s in plan {
        let prev = s.prev.map_or(h0, |i| tr.states[i].as_slice());
        let h = step_state(params, prev, s.input, s.edge);
        let logits = step_logits(params, &h, s.edge);
        total += log_softmax_at(&logits, s.target);
        tr.states.push(h);
        tr.probs.push(softmax(&logits));
    }
    (total, tr)
}

/// Backpropagates `scale · (−log P)` through the plan. Returns the gradient
/// with respect to `h0`.
pub fn plan_backward(
    params: &GedParams,
    h0: &[f64],
    plan: &[PlannedStep],
    tr: &DecoderTrace,
    scale: f64,
    grad: &mut GedParams,
) -> Vec<f64> {
    let hdim = h0.len();
    let mut dh: Vec<Vec<f64>> = vec![vec![0.0; hdim]; plan.len()];
    let mut dh0 = vec![0.0; hdim];
    for (i, s) in plan.iter().enumerate().rev() {
        let e = s.edge.index();
        let (p, g) = (&params.dec[e], &mut grad.dec[e]);
        let h = &tr.states[i];
        let mut dlogits: Vec<f64> = tr.probs[i].iter().map(|y| scale * y).collect();
        dlogits[s.target] -= scale;
        g.wy.add_outer(h, &dlogits);
        g.by.add_slice(&dlogits);
        let mut dhi = std::mem::take(&mut dh[i]);
        p.wy.back_acc(&dlogits, &mut dhi);
        let dpre: Vec<f64> = dhi.iter().zip(h).map(|(d, h)| d * (1.0 - h * h)).collect();
        let prev = s.prev.map_or(h0, |j| tr.states[j].as_slice());
        g.wh.add_outer(prev, &dpre);
        g.bh.add_slice(&dpre);
        g.wv.add_to_row(s.input, &dpre);
        g.bv.add_slice(&dpre);
        let dprev = match s.prev {
            Some(j) => &mut dh[j],
            None => &mut dh0,
        };
        p.wh.back_acc(&dpre, dprev);
    }
    dh0
}

/// How the decoder picks each symbol when generating.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SampleMode {
    #[default]
    Sample,
    Greedy,
}

/// Grows a decoder tree from `h0`, depth-first, child before sibling.
/// Symbols the grammar forbids in a slot are masked out before choosing.
pub fn generate_tree<R: Rng + ?Sized>(
    params: &GedParams,
    h0: &[f64],
    symbols: &SymbolIndex,
    rng: &mut R,
    max_nodes: usize,
    mode: SampleMode,
) -> Result<TreeNode, ModelError> {
    let has_exceptions = symbols.items().iter().any(|s| matches!(s, Symbol::Exception(_)));
    let mut g = Generator { params, symbols, rng, max_nodes, mode, nodes: 0, has_exceptions };
    let (tree, _) = g.grow(Symbol::Root, Role::Root, h0.to_vec())?;
    Ok(tree)
}

struct Generator<'a, R: ?Sized> {
    params: &'a GedParams,
    symbols: &'a SymbolIndex,
    rng: &'a mut R,
    max_nodes: usize,
    mode: SampleMode,
    nodes: usize,
    has_exceptions: bool,
}

impl<R: Rng + ?Sized> Generator<'_, R> {
    fn feasible(&self, allowed: Allowed, s: &Symbol) -> bool {
        allowed.admits(s) && (*s != Symbol::Catch || self.has_exceptions)
    }

    fn choose(&mut self, y: &[f64], allowed: Allowed) -> Result<usize, ModelError> {
        let mask: Vec<bool> = self.symbols.items().iter().map(|s| self.feasible(allowed, s)).collect();
        let mass: f64 = y.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| p).sum();
        let candidates: Vec<usize> = (0..y.len()).filter(|&i| mask[i]).collect();
        if candidates.is_empty() {
            return Err(ModelError::NoFeasibleSymbol(format!("{allowed:?}")));
        }
        if self.mode == SampleMode::Greedy {
            let best = candidates.iter().copied().fold(candidates[0], |b, i| if y[i] > y[b] { i } else { b });
            return Ok(best);
        }
        if mass.is_nan() || mass <= 0.0 {
            return Ok(candidates[self.rng.random_range(0..candidates.len())]);
        }
        let mut u = self.rng.random::<f64>() * mass;
        for &i in &candidates {
            u -= y[i];
            if u <= 0.0 {
                return Ok(i);
            }
        }
        Ok(*candidates.last().unwrap())
    }

    fn grow(&mut self, symbol: Symbol, role: Role, mut h: Vec<f64>) -> Result<(TreeNode, Vec<f64>), ModelError> {
        let input = index_of(self.symbols, &symbol)?;
        let mut node = TreeNode::leaf(symbol);
        let mut visited: Vec<(Slot, bool)> = Vec::new();
        while let Some(slot) = next_slot(&node.symbol, role, &visited) {
            let (h1, y) = decoder_step(self.params, &h, input, slot.edge);
            h = h1;
            let pick = self.choose(&y, slot.allowed)?;
            let sym = self.symbols.symbol(pick).clone();
            if sym == Symbol::End {
                visited.push((slot, false));
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.max_nodes {
                return Err(ModelError::SizeBudgetExceeded(self.max_nodes));
            }
            let (child, h2) = self.grow(sym, slot.role, h)?;
            h = h2;
            match slot.edge {
                Edge::Child => node.child = Some(Box::new(child)),
                Edge::Sibling => node.sibling = Some(Box::new(child)),
            }
            visited.push((slot, true));
        }
        Ok((node, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Shapes;
    use crate::sketch::tree::to_tree;
    use crate::sketch::{Cexp, Sketch, SketchStmt};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab(extra: &[Symbol]) -> SymbolIndex {
        let mut v = Symbol::FIXED.to_vec();
        v.extend(extra.iter().cloned());
        SymbolIndex::from(v)
    }

    fn params(g: usize) -> GedParams {
        let s = Shapes { vocab: [1, 1, 1], enc_units: [1, 1, 1], latent: 2, hidden: 3, symbols: g, conditioned: false };
        GedParams::init(&s, &mut ChaCha8Rng::seed_from_u64(9))
    }

    #[test]
    fn zero_weights_are_uniform() {
        let mut p = params(9);
        p.for_each_mut(|_, t| t.fill(0.0));
        let (_, y) = decoder_step(&p, &[0.3, 0.1, -0.2], 2, Edge::Sibling);
        assert!(y.iter().all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn skip_plan_is_two_steps() {
        let v = vocab(&[]);
        let plan = plan_tree(&to_tree(&Sketch::skip()), &v).unwrap();
        let skip = v.get(&Symbol::Skip).unwrap();
        let end = v.get(&Symbol::End).unwrap();
        assert_eq!(
            plan,
            vec![
                PlannedStep { prev: None, input: 0, edge: Edge::Child, target: skip },
                PlannedStep { prev: Some(0), input: skip, edge: Edge::Sibling, target: end },
            ]
        );
    }

    #[test]
    fn out_of_vocabulary_symbol() {
        let y = Sketch::new(vec![SketchStmt::Call(Cexp::new("A", "m", &[]))]);
        assert!(matches!(plan_tree(&to_tree(&y), &vocab(&[])), Err(ModelError::SymbolOutOfVocabulary(_))));
    }

    #[test]
    fn threaded_plan_of_while() {
        let c = Cexp::new("A", "m", &[]);
        let y = Sketch::new(vec![SketchStmt::While(vec![c.clone()], Sketch::skip()), SketchStmt::Skip]);
        let v = vocab(&[Symbol::Call(c)]);
        let plan = plan_tree(&to_tree(&y), &v).unwrap();
        // root→while, while.child→call, call.sibling→end, call.child→skip,
        // skip.sibling→end, while.sibling→skip, skip.sibling→end
        assert_eq!(plan.len(), 7);
        let prevs: Vec<_> = plan.iter().map(|s| s.prev).collect();
        assert_eq!(prevs, vec![None, Some(0), Some(1), Some(2), Some(3), Some(4), Some(5)]);
    }

    #[test]
    fn greedy_generation_is_well_formed() {
        let c = Cexp::new("A", "m", &[]);
        let v = vocab(&[Symbol::Call(c)]);
        let p = params(v.len());
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match generate_tree(&p, &[0.1, -0.4, 0.2], &v, &mut rng, 30, SampleMode::Sample) {
                Ok(t) => {
                    crate::sketch::tree::from_tree(&t).unwrap();
                }
                Err(ModelError::SizeBudgetExceeded(30)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}
