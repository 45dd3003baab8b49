//! Run configuration: JSON in, resolved echo out.

use mmfg::example6::ExampleParams;
use mmfg::model::LqgModel;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    /// Optional horizon override; the model's own horizon is used when
    /// absent.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

fn default_n_steps() -> usize {
    mmfg::numerics::DEFAULT_N_STEPS
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeviationToggles {
    #[serde(default = "default_true")]
    pub major: bool,
    #[serde(default = "default_true")]
    pub minor: bool,
}

impl Default for DeviationToggles {
    fn default() -> Self {
        Self {
            major: true,
            minor: true,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Player counts for the rate experiments and the deviation sweep.
    #[serde(rename = "N_list", default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    /// Single player count (simulate, nash at one size).
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ref_factor: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_wasserstein: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviations: Option<DeviationToggles>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<LqgModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example6: Option<ExampleParams>,
    pub grid: GridConfig,
    pub mc: McConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// The general-coefficient model this run operates on: either the
    /// explicit `model` block or the embedded scalar example, with the
    /// grid's horizon override applied.
    pub fn resolve_model(&self) -> Option<LqgModel> {
        let mut model = match (&self.model, &self.example6) {
            (Some(m), _) => m.clone(),
            (None, Some(p)) => p.embed_lqg(),
            (None, None) => return None,
        };
        if let Some(t) = self.grid.horizon {
            model.horizon = t;
        }
        Some(model)
    }

    pub fn resolve_example(&self) -> Option<ExampleParams> {
        let mut p = self.example6?;
        if let Some(t) = self.grid.horizon {
            p.horizon = t;
        }
        Some(p)
    }
}
