//! Run configuration: one JSON document holding every block, overridden by
//! command-line flags.

use std::path::Path;

use narrative_core::icl::IclConfig;
use narrative_core::synth::SynthConfig;
use narrative_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Zero disables writing synthetic embeddings.
    pub dim: usize,
    pub noise: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FewShotConfig {
    /// Number of answered documents drawn as context; `None` uses every
    /// document of the Q&A file.
    pub context_size: Option<usize>,
    /// Number of low-confidence targets to select.
    pub select: usize,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        Self {
            context_size: None,
            select: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { bins: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the seed of every block when set.
    pub seed: Option<u64>,
    /// When false, manifests also record wall-clock timing.
    pub deterministic: bool,
    pub synth: SynthConfig,
    pub embedding: EmbeddingConfig,
    pub train: TrainConfig,
    pub icl: IclConfig,
    pub few_shot: FewShotConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            deterministic: true,
            synth: SynthConfig::default(),
            embedding: EmbeddingConfig::default(),
            train: TrainConfig::default(),
            icl: IclConfig::default(),
            few_shot: FewShotConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.train.seed = seed;
        self.icl.seed = seed;
    }

    /// Applies the global seed and checks every block.
    pub fn finalize(mut self) -> Result<Self> {
        if let Some(seed) = self.seed {
            self.set_seed(seed);
        }
        self.synth.validate().context("synth")?;
        self.train.validate().context("train")?;
        self.icl.validate().context("icl")?;
        if self.eval.bins == 0 {
            return Err(CliError::Config("eval.bins must be at least 1".into()));
        }
        if !(self.embedding.noise.is_finite() && self.embedding.noise >= 0.0) {
            return Err(CliError::Config(
                "embedding.noise must be finite and nonnegative".into(),
            ));
        }
        Ok(self)
    }
}
