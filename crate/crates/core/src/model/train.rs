//! Minibatch Adam training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::GedParams;
use super::{Example, Model, ModelError};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Independent deterministic stream `stream` of the generator seeded by
/// `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: GedParams,
    pub v: GedParams,
}

impl AdamState {
    pub fn new(params: &GedParams) -> Self {
        AdamState { step: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn update(&mut self, params: &mut GedParams, grad: &GedParams, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step as i32);
        let c2 = 1.0 - BETA2.powi(self.step as i32);
        let grads = grad.named();
        let layers = params.tensors_mut().into_iter().zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for (((w, m), v), (_, g)) in layers.zip(grads) {
            for j in 0..w.data.len() {
                let gj = g.data[j];
                m.data[j] = BETA1 * m.data[j] + (1.0 - BETA1) * gj;
                v.data[j] = BETA2 * v.data[j] + (1.0 - BETA2) * gj * gj;
                w.data[j] -= lr * (m.data[j] / c1) / ((v.data[j] / c2).sqrt() + EPSILON);
            }
        }
    }
}

/// Optimiser progress, stored with checkpoints so training can resume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub epochs_done: usize,
    pub losses: Vec<f64>,
    pub adam: AdamState,
}

impl TrainState {
    pub fn new(params: &GedParams) -> Self {
        TrainState { epochs_done: 0, losses: Vec::new(), adam: AdamState::new(params) }
    }
}

/// Runs epochs `state.epochs_done .. model.hyper.epochs`. Each epoch draws
/// its shuffle and noise from its own stream of the seed, so a resumed run
/// matches an uninterrupted one. `on_epoch` receives the epoch number
/// (from 1) and the example-weighted mean loss.
pub fn train(
    model: &mut Model,
    corpus: &[Example],
    state: &mut TrainState,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(), ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let batch = model.hyper.batch;
    while state.epochs_done < model.hyper.epochs {
        let epoch = state.epochs_done + 1;
        let mut rng = rng_for(model.hyper.seed, epoch as u64);
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(batch) {
            let exs: Vec<&Example> = chunk.iter().map(|&i| &corpus[i]).collect();
            let (loss, grad) = model.loss_and_grad(&exs, &mut rng)?;
            sum += loss * chunk.len() as f64;
            state.adam.update(&mut model.params, &grad, model.hyper.lr);
        }
        let mean = sum / corpus.len() as f64;
        log::info!("epoch {epoch}: loss {mean:.6}");
        state.losses.push(mean);
        state.epochs_done = epoch;
        on_epoch(epoch, mean);
    }
    Ok(())
}
