//! Config-file schemas. Every schema rejects unknown keys, so a typo fails
//! the command with a config error before any compute starts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use featdistill::dataset::{ExpertKind, Split};
use featdistill::distortion::PipelineMode;
use featdistill::features::ExtractorRef;
use featdistill::trainer::TrainConfig;

use crate::CmdError;

/// Reads and schema-validates a TOML config; any failure is a config-phase
/// error (exit 2).
pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CmdError::config(format!("{}: {e}", path.display())))
}

/// Reads and schema-validates a JSON config (ensemble descriptions).
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CmdError::config(format!("{}: {e}", path.display())))
}

/// What `prepare` should materialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// Precomputed-embedding corpus: two separable feature blobs.
    Blobs,
    /// Rendered images whose classes differ in fine texture and a faint tint.
    Textured,
}

/// Corpus materialization request.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareConfig {
    pub kind: CorpusKind,
    #[serde(default)]
    pub seed: u64,
    pub items: usize,
    /// Embedding width (blobs only).
    #[serde(default)]
    pub dim: usize,
    /// Square image side in pixels (textured only).
    #[serde(default)]
    pub side: usize,
    /// Leading fraction of items assigned to the train split; the rest are
    /// held out (val for blobs, test for textured).
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.75
}

impl PrepareConfig {
    pub fn validate(&self) -> Result<(), CmdError> {
        if self.items == 0 {
            return Err(CmdError::config("items must be positive"));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(CmdError::config("train_fraction must lie in [0, 1]"));
        }
        match self.kind {
            CorpusKind::Blobs if self.dim == 0 => {
                Err(CmdError::config("a blobs corpus needs dim > 0"))
            }
            CorpusKind::Textured if self.side == 0 => {
                Err(CmdError::config("a textured corpus needs side > 0"))
            }
            _ => Ok(()),
        }
    }
}

/// How an expert turns pixels into features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKindName {
    Synthetic,
    EmbeddingFile,
}

/// Extractor description; which fields are required depends on `kind`, and
/// `to_ref` enforces that after deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorEntry {
    pub kind: ExtractorKindName,
    /// Projection-weight seed (synthetic only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Expected input side in pixels (synthetic only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<usize>,
    /// Feature width (synthetic only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Embeddings file, relative to the manifest directory (embedding_file
    /// only) so corpora stay relocatable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl ExtractorEntry {
    pub fn to_ref(&self, manifest_dir: &Path) -> Result<ExtractorRef, CmdError> {
        match self.kind {
            ExtractorKindName::Synthetic => {
                let (Some(seed), Some(side), Some(dim)) = (self.seed, self.side, self.dim) else {
                    return Err(CmdError::config(
                        "a synthetic extractor needs seed, side, and dim",
                    ));
                };
                if self.path.is_some() {
                    return Err(CmdError::config("a synthetic extractor takes no path"));
                }
                Ok(ExtractorRef::Synthetic { seed, side, dim })
            }
            ExtractorKindName::EmbeddingFile => {
                let Some(path) = &self.path else {
                    return Err(CmdError::config("an embedding_file extractor needs path"));
                };
                if self.seed.is_some() || self.side.is_some() || self.dim.is_some() {
                    return Err(CmdError::config(
                        "an embedding_file extractor takes only path",
                    ));
                }
                Ok(ExtractorRef::EmbeddingFile { path: manifest_dir.join(path) })
            }
        }
    }
}

/// One expert: preprocessing family, feature extractor, and — in ensemble
/// files written by `train` — the checkpoint holding its trained head.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertEntry {
    pub name: String,
    /// clip_l14 | siglip_400m | synthetic_a | synthetic_b
    pub family: String,
    /// Square input side; required by the synthetic families, fixed for the
    /// published ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_side: Option<usize>,
    pub extractor: ExtractorEntry,
    /// Checkpoint path relative to the ensemble file. `train` assigns it and
    /// rejects configs that set it by hand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl ExpertEntry {
    pub fn expert_kind(&self) -> Result<ExpertKind, CmdError> {
        let kind = match self.family.as_str() {
            "clip_l14" => ExpertKind::clip_l14(),
            "siglip_400m" => ExpertKind::siglip_400m(),
            "synthetic_a" => ExpertKind::synthetic_a(self.require_side()?),
            "synthetic_b" => ExpertKind::synthetic_b(self.require_side()?),
            other => {
                return Err(CmdError::config(format!(
                    "expert '{}': unknown family '{other}'",
                    self.name
                )))
            }
        };
        kind.validate()
            .map_err(|e| CmdError::config(format!("expert '{}': {e}", self.name)))?;
        Ok(kind)
    }

    fn require_side(&self) -> Result<usize, CmdError> {
        self.input_side.ok_or_else(|| {
            CmdError::config(format!(
                "expert '{}': synthetic families need input_side",
                self.name
            ))
        })
    }
}

/// Training run description.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    /// Root seed: expert k trains with a seed derived from (seed, k).
    pub seed: u64,
    /// Degradation pool applied while batching (`clean` disables it).
    pub mode: PipelineMode,
    pub batch_size: usize,
    /// Manifest split to train on.
    #[serde(default = "default_split")]
    pub split: Split,
    /// Feed flat placeholder images instead of reading pixels from disk
    /// (embedding-backed corpora, whose extractors ignore pixels anyway).
    #[serde(default)]
    pub synthetic_images: bool,
    /// Hyperparameters for both stages; its `seed` field is replaced by the
    /// per-expert derived seed. Omitted fields (or the whole table) fall
    /// back to the defaults.
    #[serde(default)]
    pub train: TrainConfig,
    pub experts: Vec<ExpertEntry>,
}

fn default_split() -> Split {
    Split::Train
}

impl TrainRunConfig {
    pub fn validate(&self) -> Result<(), CmdError> {
        if self.batch_size == 0 || self.batch_size % 2 != 0 {
            return Err(CmdError::config("batch_size must be positive and even"));
        }
        if self.experts.is_empty() {
            return Err(CmdError::config("at least one [[experts]] entry is required"));
        }
        let mut names: Vec<&str> = self.experts.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.experts.len() {
            return Err(CmdError::config("expert names must be unique"));
        }
        for e in &self.experts {
            if e.checkpoint.is_some() {
                return Err(CmdError::config(format!(
                    "expert '{}': checkpoint is assigned by train, not set in the config",
                    e.name
                )));
            }
            e.expert_kind()?;
        }
        self.train.validate().map_err(CmdError::config)?;
        Ok(())
    }
}

/// Ensemble description consumed by `infer`; written by `train` as JSON.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleFile {
    pub experts: Vec<ExpertEntry>,
}
