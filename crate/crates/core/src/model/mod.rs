//! The latent-variable encoder-decoder over sketches.
//!
//! A label is encoded element-wise, the encodings are pooled into a Normal
//! posterior over the latent `z`, and a two-edge recurrent decoder started
//! from `z` generates the sketch's decoder tree. Training maximises a
//! single-sample reparameterised lower bound with Adam; gradients are
//! written out by hand.

pub mod checkpoint;
pub mod decoder;
pub mod encoder;
pub mod latent;
pub mod params;
pub mod tensor;
pub mod train;
pub mod variant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{EncodedLabel, Label, Vocabularies};
use crate::sketch::tree::{from_tree, to_tree, tree_from_paths, TreeError};
use crate::sketch::{ProductionPath, Sketch};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use decoder::{decoder_step, PlannedStep, SampleMode};
pub use encoder::{encode_element, posterior, sample_z, Posterior};
pub use params::{GedParams, Shapes};
pub use tensor::Tensor;
pub use train::{train, AdamState, TrainState};
pub use variant::{variant, ModelVariant, VARIANTS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{kind} index {index} is outside a vocabulary of {size}")]
    IndexOutOfVocabulary { kind: &'static str, index: usize, size: usize },
    #[error("symbol {0} is not in the decoder vocabulary")]
    SymbolOutOfVocabulary(String),
    #[error("malformed decoder tree: {0}")]
    MalformedTree(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("sampled sketch exceeded {0} nodes")]
    SizeBudgetExceeded(usize),
    #[error("no symbol of the vocabulary fits a {0} slot")]
    NoFeasibleSymbol(String),
    #[error("unknown model variant {0:?} (known: ged, gsnn)")]
    UnknownVariant(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("empty batch")]
    EmptyBatch,
    #[error("parameter shapes do not match: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Latent dimension.
    pub d: usize,
    pub h_calls: usize,
    pub h_types: usize,
    pub h_keys: usize,
    pub h_dec: usize,
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub variant: String,
    /// KL weight, used by `gsnn` only.
    pub beta: f64,
    pub max_nodes: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            d: 16,
            h_calls: 32,
            h_types: 16,
            h_keys: 32,
            h_dec: 64,
            batch: 16,
            lr: 0.001,
            epochs: 50,
            seed: 0,
            variant: "ged".into(),
            beta: 0.001,
            max_nodes: 100,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let sizes = [
            ("d", self.d),
            ("h_calls", self.h_calls),
            ("h_types", self.h_types),
            ("h_keys", self.h_keys),
            ("h_dec", self.h_dec),
            ("batch", self.batch),
            ("max_nodes", self.max_nodes),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidHyperparams(format!("{name} must be positive")));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(ModelError::InvalidHyperparams("lr must be a finite non-negative number".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ModelError::InvalidHyperparams("beta must be a finite non-negative number".into()));
        }
        variant(&self.variant, self.beta).map(|_| ())
    }

    pub fn enc_units(&self) -> [usize; 3] {
        [self.h_calls, self.h_types, self.h_keys]
    }
}

/// A training pair lowered to vocabulary indices and a decoder plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub label: EncodedLabel,
    pub plan: Vec<PlannedStep>,
}

pub struct Model {
    pub hyper: Hyperparams,
    pub vocab: Vocabularies,
    pub params: GedParams,
    variant: Box<dyn ModelVariant>,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Model {
            hyper: self.hyper.clone(),
            vocab: self.vocab.clone(),
            params: self.params.clone(),
            variant: variant(&self.hyper.variant, self.hyper.beta).expect("validated at construction"),
        }
    }
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("variant", &self.variant.name())
            .field("shapes", &self.params.shapes())
            .finish_non_exhaustive()
    }
}

impl Model {
    /// Freshly initialised model; the weights depend only on `hyper.seed`
    /// and the vocabulary sizes.
    pub fn new(hyper: Hyperparams, vocab: Vocabularies) -> Result<Self, ModelError> {
        hyper.validate()?;
        let v = variant(&hyper.variant, hyper.beta)?;
        let shapes = Self::expected_shapes(&hyper, &vocab, v.as_ref());
        let mut rng = train::rng_for(hyper.seed, 0);
        let params = GedParams::init(&shapes, &mut rng);
        Ok(Model { hyper, vocab, params, variant: v })
    }

    /// Assembles a model from stored parts, checking every shape.
    pub fn from_parts(hyper: Hyperparams, vocab: Vocabularies, params: GedParams) -> Result<Self, ModelError> {
        hyper.validate()?;
        let v = variant(&hyper.variant, hyper.beta)?;
        let want = Self::expected_shapes(&hyper, &vocab, v.as_ref());
        let got = params.shapes();
        if want != got {
            return Err(ModelError::ShapeMismatch(format!("expected {want:?}, found {got:?}")));
        }
        for (name, t) in params.named() {
            if t.data.len() != t.rows * t.cols {
                return Err(ModelError::ShapeMismatch(format!("{name} holds {} values", t.data.len())));
            }
        }
        Ok(Model { hyper, vocab, params, variant: v })
    }

    fn expected_shapes(hyper: &Hyperparams, vocab: &Vocabularies, v: &dyn ModelVariant) -> Shapes {
        Shapes {
            vocab: [vocab.calls.len(), vocab.types.len(), vocab.keys.len()],
            enc_units: hyper.enc_units(),
            latent: hyper.d,
            hidden: hyper.h_dec,
            symbols: vocab.symbols.len(),
            conditioned: v.conditioned(),
        }
    }

    pub fn variant(&self) -> &dyn ModelVariant {
        self.variant.as_ref()
    }

    /// Label indices; out-of-vocabulary elements are dropped with a warning.
    pub fn encode_label(&self, x: &Label) -> EncodedLabel {
        self.vocab.encode_label(x).0
    }

    pub fn posterior(&self, x: &Label) -> Posterior {
        posterior(&self.encode_label(x), &self.params)
    }

    pub fn example(&self, x: &Label, y: &Sketch) -> Result<Example, ModelError> {
        Ok(Example { label: self.encode_label(x), plan: decoder::plan_tree(&to_tree(y), &self.vocab.symbols)? })
    }

    pub fn initial_state(&self, z: &[f64], post: &Posterior) -> Vec<f64> {
        self.variant.initial_state(&self.params, z, post)
    }

    /// `log P(Y | z)` of the sketch given by its production paths. `post` is
    /// only read by label-conditioned variants.
    pub fn path_log_prob(&self, paths: &[ProductionPath], z: &[f64], post: &Posterior) -> Result<f64, ModelError> {
        let plan = decoder::plan_tree(&tree_from_paths(paths)?, &self.vocab.symbols)?;
        let h0 = self.initial_state(z, post);
        Ok(decoder::plan_forward(&self.params, &h0, &plan).0)
    }

    /// Decodes one sketch from a given latent.
    pub fn sample_sketch_from<R: Rng + ?Sized>(
        &self,
        z: &[f64],
        post: &Posterior,
        rng: &mut R,
        mode: SampleMode,
    ) -> Result<Sketch, ModelError> {
        let h0 = self.initial_state(z, post);
        let tree = decoder::generate_tree(&self.params, &h0, &self.vocab.symbols, rng, self.hyper.max_nodes, mode)?;
        Ok(from_tree(&tree)?)
    }

    /// Draws `z` from the label's posterior and decodes a sketch from it.
    pub fn sample_sketch<R: Rng + ?Sized>(
        &self,
        x: &Label,
        rng: &mut R,
        mode: SampleMode,
    ) -> Result<Sketch, ModelError> {
        let post = self.posterior(x);
        let z = sample_z(&post, rng);
        self.sample_sketch_from(&z, &post, rng, mode)
    }

    /// Mean over the batch of `−log P(Y | z) + regulariser`, one
    /// reparameterised draw of `z` per example.
    pub fn loss<R: Rng + ?Sized>(&self, batch: &[&Example], rng: &mut R) -> Result<f64, ModelError> {
        self.objective(batch, rng, None)
    }

    pub fn loss_and_grad<R: Rng + ?Sized>(
        &self,
        batch: &[&Example],
        rng: &mut R,
    ) -> Result<(f64, GedParams), ModelError> {
        let mut grad = self.params.zeros_like();
        let loss = self.objective(batch, rng, Some(&mut grad))?;
        Ok((loss, grad))
    }

    fn objective<R: Rng + ?Sized>(
        &self,
        batch: &[&Example],
        rng: &mut R,
        mut grad: Option<&mut GedParams>,
    ) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let p = &self.params;
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for ex in batch {
            let (post, ptrace) = encoder::posterior_traced(&ex.label, p);
            let eps = encoder::standard_normal(p.wl.rows, rng);
            let z = encoder::sample_z_with(&post, &eps);
            let h0 = self.variant.initial_state(p, &z, &post);
            let (log_p, dtrace) = decoder::plan_forward(p, &h0, &ex.plan);
            let (reg, dmean_reg, dvar_reg) = self.variant.regularizer(&post);
            total += -log_p + reg;
            if let Some(g) = grad.as_deref_mut() {
                let dh0 = decoder::plan_backward(p, &h0, &ex.plan, &dtrace, scale, g);
                let (dz, mut dmean) = self.variant.initial_state_backward(p, &z, &post, &dh0, g);
                let sd = post.var.sqrt();
                let mut dvar = scale * dvar_reg;
                for i in 0..dz.len() {
                    dmean[i] += dz[i] + scale * dmean_reg[i];
                    dvar += dz[i] * eps[i] / (2.0 * sd);
                }
                encoder::posterior_backward(p, &ptrace, &dmean, dvar, g);
            }
        }
        Ok(total * scale)
    }
}
