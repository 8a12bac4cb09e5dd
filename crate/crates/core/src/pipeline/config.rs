use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::concretize::WalkConfig;
use crate::model::Hyperparams;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "SKETCHGEN_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub api_db: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Sketches drawn per query before deduplication and ranking.
    pub samples: usize,
    pub top_k: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { samples: 100, top_k: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub fractions: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { fractions: vec![1.0, 0.75, 0.5, 0.25] }
    }
}

/// Everything a command needs besides its positional inputs. The top-level
/// seed overrides the seeds of the model and walk sections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub model: Hyperparams,
    pub walk: WalkConfig,
    pub sample: SampleConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let seed = cfg.seed;
        Ok(cfg.with_seed(seed))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Loads `explicit`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, PipelineError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(PathBuf::from(p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.model.seed = seed;
        self.walk.seed = seed;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.model.validate()?;
        self.walk.validate()?;
        if self.sample.samples == 0 {
            return Err(PipelineError::Config("sample.samples must be positive".into()));
        }
        if self.sample.top_k == 0 {
            return Err(PipelineError::Config("sample.top_k must be positive".into()));
        }
        if self.eval.fractions.is_empty() || self.eval.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(PipelineError::Config("eval.fractions must be nonempty and within [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_toml("seed = 7\n[model]\nepochs = 3\n[walk]\nsimplicity_bias = 0.0\n").unwrap();
        assert_eq!(cfg.model.epochs, 3);
        assert_eq!(cfg.model.seed, 7);
        assert_eq!(cfg.walk.seed, 7);
        assert_eq!(cfg.walk.simplicity_bias, 0.0);
        assert_eq!(cfg.sample.samples, 100);
        assert_eq!(cfg.eval.fractions, vec![1.0, 0.75, 0.5, 0.25]);
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::default().with_seed(3);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(RunConfig::from_toml("[model]\nlayers = 2\n"), Err(PipelineError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.eval.fractions = vec![1.5];
        assert!(cfg.validate().is_err());
    }
}
