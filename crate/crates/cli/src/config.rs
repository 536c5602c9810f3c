//! Pipeline configuration and fusion plans, both TOML.
//!
//! ```toml
//! n_kf = 6
//!
//! [flow]
//! alpha = 1.0
//! iterations = 100
//! epsilon = 1e-4
//!
//! [histogram]
//! mag_bins = 16
//! ang_bins = 16
//! mag_cap = 20.0
//!
//! [fusion]
//! modalities = ["spatial", "temporal"]
//! frame_tiers = "cross_then_self"   # or "self_then_cross"
//! reconcile = "frames_first"        # or "video_first"
//!
//! [paths]
//! input = "frames/v1"
//! output = "out"
//! ```
//!
//! A standalone plan file (`fuse --plan`) holds the `[fusion]` keys at top
//! level. Every key is optional.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use keyfuse_core::{FlowParams, FrameTierOrder, FusionPlan, HistogramConfig, ReconcileOrder};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_N_KF: usize = 6;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionPlanConfig {
    /// Fold order of the modalities. Empty means order of first appearance.
    pub modalities: Vec<String>,
    pub frame_tiers: FrameTierOrder,
    pub reconcile: ReconcileOrder,
}

impl FusionPlanConfig {
    pub fn plan(&self) -> FusionPlan {
        FusionPlan {
            frame_tiers: self.frame_tiers,
            reconcile: self.reconcile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for m in &self.modalities {
            if m.is_empty() {
                return Err(CliError::Config(
                    "empty modality name in fusion plan".into(),
                ));
            }
            if !seen.insert(m) {
                return Err(CliError::Config(format!("modality {m:?} listed twice")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = load_toml(path)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub n_kf: usize,
    pub flow: FlowParams,
    pub histogram: HistogramConfig,
    pub fusion: FusionPlanConfig,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_kf: DEFAULT_N_KF,
            flow: FlowParams::default(),
            histogram: HistogramConfig::default(),
            fusion: FusionPlanConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_kf < 2 {
            return Err(CliError::Config(format!(
                "n_kf must be >= 2, got {}",
                self.n_kf
            )));
        }
        let bad = |e: keyfuse_core::Error| CliError::Config(e.to_string());
        self.flow.validate().map_err(bad)?;
        self.histogram.validate().map_err(bad)?;
        self.fusion.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = load_toml(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
