//! Versioned JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::GedParams;
use super::tensor::Tensor;
use super::train::{AdamState, TrainState};
use super::{Hyperparams, Model, ModelError};
use crate::labels::Vocabularies;

pub const FORMAT: &str = "sketchgen-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint (format {0:?})")]
    Format(String),
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("tensor {name}: {problem}")]
    Tensor { name: String, problem: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTraining {
    pub epochs_done: usize,
    pub losses: Vec<f64>,
    pub adam_step: u64,
    pub adam_m: Vec<NamedTensor>,
    pub adam_v: Vec<NamedTensor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub hyper: Hyperparams,
    pub vocab: Vocabularies,
    pub params: Vec<NamedTensor>,
    pub training: Option<StoredTraining>,
}

fn export(p: &GedParams) -> Vec<NamedTensor> {
    p.named()
        .into_iter()
        .map(|(name, t)| NamedTensor { name, rows: t.rows, cols: t.cols, data: t.data.clone() })
        .collect()
}

/// Fills `template` from `stored`, requiring the same names and shapes in
/// the same order.
fn import(template: &GedParams, stored: &[NamedTensor]) -> Result<GedParams, CheckpointError> {
    let mut out = template.clone();
    let names: Vec<String> = template.named().into_iter().map(|(n, _)| n).collect();
    if names.len() != stored.len() {
        return Err(CheckpointError::Tensor {
            name: "*".into(),
            problem: format!("expected {} tensors, found {}", names.len(), stored.len()),
        });
    }
    for ((t, name), s) in out.tensors_mut().into_iter().zip(&names).zip(stored) {
        if *name != s.name {
            return Err(CheckpointError::Tensor { name: s.name.clone(), problem: format!("expected {name}") });
        }
        if (t.rows, t.cols) != (s.rows, s.cols) || s.data.len() != s.rows * s.cols {
            return Err(CheckpointError::Tensor {
                name: s.name.clone(),
                problem: format!(
                    "expected {}x{}, found {}x{} with {} values",
                    t.rows,
                    t.cols,
                    s.rows,
                    s.cols,
                    s.data.len()
                ),
            });
        }
        *t = Tensor { rows: s.rows, cols: s.cols, data: s.data.clone() };
    }
    Ok(out)
}

impl Checkpoint {
    pub fn new(model: &Model, training: Option<&TrainState>) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            hyper: model.hyper.clone(),
            vocab: model.vocab.clone(),
            params: export(&model.params),
            training: training.map(|t| StoredTraining {
                epochs_done: t.epochs_done,
                losses: t.losses.clone(),
                adam_step: t.adam.step,
                adam_m: export(&t.adam.m),
                adam_v: export(&t.adam.v),
            }),
        }
    }

    /// Rebuilds the model, validating every tensor against the shapes implied
    /// by the stored hyperparameters and vocabularies.
    pub fn restore(&self) -> Result<(Model, Option<TrainState>), CheckpointError> {
        if self.format != FORMAT {
            return Err(CheckpointError::Format(self.format.clone()));
        }
        if self.version != VERSION {
            return Err(CheckpointError::Version(self.version));
        }
        let mut model = Model::new(self.hyper.clone(), self.vocab.clone())?;
        let template = model.params.zeros_like();
        model.params = import(&template, &self.params)?;
        let training = match &self.training {
            None => None,
            Some(t) => Some(TrainState {
                epochs_done: t.epochs_done,
                losses: t.losses.clone(),
                adam: AdamState {
                    step: t.adam_step,
                    m: import(&template, &t.adam_m)?,
                    v: import(&template, &t.adam_v)?,
                },
            }),
        };
        Ok((model, training))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialisation cannot fail")
    }
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &Model,
    training: Option<&TrainState>,
) -> Result<(), CheckpointError> {
    fs::write(path, Checkpoint::new(model, training).to_json())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, Option<TrainState>), CheckpointError> {
    let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
    ck.restore()
}
