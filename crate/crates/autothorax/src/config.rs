//! Run configuration: a versioned JSON file whose values command-line flags
//! may override. The resolved value is embedded in command outputs.

use std::path::{Path, PathBuf};

use autothorax_core::data::{DatasetMode, FeatureConfig};
use autothorax_core::encoder::EncoderPipelineConfig;
use autothorax_core::eval::{ThresholdMode, DEFAULT_K_LIST};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "AUTOTHORAX_CACHE_DIR";
const DEFAULT_CACHE: &str = ".autothorax-cache";

/// Which population the manifest is narrowed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    /// Pneumothorax vs. no finding.
    Dataset1,
    /// Pneumothorax vs. everything else.
    Dataset2,
}

impl Dataset {
    pub fn mode(self) -> DatasetMode {
        match self {
            Dataset::Dataset1 => DatasetMode::SemiAutomated,
            Dataset::Dataset2 => DatasetMode::FullyAutomated,
        }
    }
}

/// Feature pipeline evaluated by `evaluate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    C1,
    C2,
    C3,
    /// C3 compressed to 256 values by the per-fold encoder.
    Autothorax,
    /// C3 projected on its leading principal components.
    Pca,
}

impl Method {
    /// Stored configuration the method reads.
    pub fn input_config(self) -> FeatureConfig {
        match self {
            Method::C1 => FeatureConfig::C1,
            Method::C2 => FeatureConfig::C2,
            Method::C3 | Method::Autothorax | Method::Pca => FeatureConfig::C3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    /// Built-in pooled-intensity extractor.
    Baseline,
    /// Precomputed C3 vectors read from a store.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorChoice {
    pub kind: ExtractorKind,
    /// Store of C3 vectors for the external extractor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// Encoder settings; the input width comes from the store being encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSettings {
    /// `None` selects the default taper for the input width.
    pub hidden_schedule: Option<Vec<usize>>,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub replication: bool,
    /// Standardize inputs per dimension while training.
    pub standardize_inputs: bool,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        let base = EncoderPipelineConfig::for_input(3072);
        Self {
            hidden_schedule: None,
            epochs: base.epochs,
            batch_size: base.batch_size,
            dropout: base.dropout,
            learning_rate: base.adam.lr,
            replication: true,
            standardize_inputs: base.standardize_inputs,
        }
    }
}

impl EncoderSettings {
    pub fn pipeline(&self, input_dim: usize) -> EncoderPipelineConfig {
        let mut cfg = EncoderPipelineConfig::for_input(input_dim);
        if let Some(s) = &self.hidden_schedule {
            cfg.hidden_schedule = s.clone();
        }
        cfg.epochs = self.epochs;
        cfg.batch_size = self.batch_size;
        cfg.dropout = self.dropout;
        cfg.adam.lr = self.learning_rate;
        cfg.replication = self.replication;
        cfg.standardize_inputs = self.standardize_inputs;
        cfg
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    pub images: Option<PathBuf>,
    /// Directory holding `C1.fvs`, `C2.fvs`, `C3.fvs`.
    pub stores: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub dataset: Dataset,
    pub method: Method,
    pub extractor: ExtractorChoice,
    pub encoder: EncoderSettings,
    pub pca_components: usize,
    pub k_list: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub threshold_mode: ThresholdMode,
    pub normalize: bool,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            dataset: Dataset::Dataset2,
            method: Method::Autothorax,
            extractor: ExtractorChoice {
                kind: ExtractorKind::Baseline,
                path: None,
            },
            encoder: EncoderSettings::default(),
            pca_components: 256,
            k_list: DEFAULT_K_LIST.to_vec(),
            folds: 10,
            seed: 0,
            threshold_mode: ThresholdMode::ValidationFold,
            normalize: false,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Usage(format!(
                "{}: config version {} is not supported (expected {CONFIG_VERSION})",
                path.display(),
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Check values that do not depend on input files. Returns warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::Usage(format!("k values must be positive, got {:?}", self.k_list)));
        }
        if !(2..=10).contains(&self.folds) {
            return Err(Error::Usage(format!("folds must be in 2..=10, got {}", self.folds)));
        }
        if self.pca_components == 0 {
            return Err(Error::Usage("pca_components must be positive".into()));
        }
        if self.extractor.kind == ExtractorKind::External && self.extractor.path.is_none() {
            return Err(Error::Usage("external extractor needs a vector store path".into()));
        }
        Ok(self
            .k_list
            .iter()
            .filter(|k| *k % 2 == 0)
            .map(|k| format!("k = {k} is even; votes can tie"))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// Default directory for intermediate artifacts.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map_or_else(|| PathBuf::from(DEFAULT_CACHE), PathBuf::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let partial: RunConfig = serde_json::from_str(r#"{"version":1,"method":"C2","k_list":[3,4]}"#).unwrap();
        assert_eq!(partial.method, Method::C2);
        assert_eq!(partial.folds, 10);
        assert_eq!(partial.validate().unwrap().len(), 1);
        assert!(serde_json::from_str::<RunConfig>(r#"{"nope":1}"#).is_err());
    }

    #[test]
    fn rejects() {
        let mut cfg = RunConfig::default();
        cfg.folds = 11;
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        cfg.folds = 10;
        cfg.k_list = vec![0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn settings_to_pipeline() {
        let mut s = EncoderSettings::default();
        assert_eq!(s.pipeline(3072).hidden_schedule, vec![1024, 512]);
        s.hidden_schedule = Some(vec![512]);
        s.epochs = 3;
        let p = s.pipeline(3072);
        assert_eq!((p.hidden_schedule, p.epochs), (vec![512], 3));
    }
}
