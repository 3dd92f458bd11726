use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::TileConfig;
use crate::smoothing::{smooth_params, BilateralParams, SMOOTH_PASSES};
use crate::tiler::{PipelineConfig, StageTiming, PRNG_NAME};

use super::BudgetReport;

pub const MANIFEST_SCHEMA: &str = "blockshuffle.run-manifest/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformInfo {
    pub name: String,
    /// Command-line form, enough to rebuild the transform.
    pub spec: String,
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: Option<String>,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingInfo {
    pub passes: usize,
    pub params: BilateralParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub budget: Option<BudgetReport>,
    /// Named scalar measurements such as RMSE or seam jumps.
    pub metrics: BTreeMap<String, f64>,
}

/// Everything needed to replay a run, plus what it measured.
///
/// Wall-clock timings are kept apart from the rest so that
/// [`RunManifest::replay_json`] is stable across identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub method: String,
    pub transform: TransformInfo,
    pub config: PipelineConfig,
    pub tile: Option<TileConfig>,
    /// Present when the block-shuffle output was smoothed.
    pub smoothing: Option<SmoothingInfo>,
    pub prng: String,
    pub input: InputInfo,
    pub output: Option<String>,
    /// True when the image fit the budget and was transformed whole.
    pub bypassed: bool,
    pub diagnostics: DiagnosticsSummary,
    #[serde(default)]
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    pub fn new(method: &str, transform: TransformInfo, config: PipelineConfig, input: InputInfo) -> Self {
        let smoothing = (method == "blockshuffle" && config.smoothing).then(|| SmoothingInfo {
            passes: SMOOTH_PASSES,
            params: smooth_params(),
        });
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            method: method.to_string(),
            transform,
            config,
            tile: None,
            smoothing,
            prng: PRNG_NAME.to_string(),
            input,
            output: None,
            bypassed: false,
            diagnostics: DiagnosticsSummary::default(),
            timings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// The manifest without timings; identical for identical runs.
    pub fn replay_json(&self) -> String {
        let mut copy = self.clone();
        copy.timings.clear();
        copy.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
