//! Run configuration shared by every subcommand.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::forward::render::DEFAULT_FLASH_LEVELS;
use crate::forward::{ModelKind, NoiseSpec, RenderConfig, Visibility};
use crate::inverse::cluster::DEFAULT_VIRTUALS;
use crate::inverse::{InverseConfig, LossWeights};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub render: u64,
    pub inverse: u64,
    /// Initial-normal perturbation of synthetic runs.
    pub perturbation: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub weights: LossWeights,
    pub iterations: usize,
    pub clusters: usize,
    pub virtuals: usize,
    pub noise: NoiseSpec,
    pub seeds: Seeds,
    pub flash_levels: Vec<f64>,
    pub model: ModelKind,
    pub visibility: Visibility,
    pub fix_sigma_ss: bool,
    /// Standard deviation, in degrees, of the Gaussian tilt applied to the
    /// initial normals.
    pub normal_perturbation_deg: f64,
    /// Largest fraction of vertices with hard failures for a successful run.
    pub max_failure_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            weights: LossWeights::default(),
            iterations: 10,
            clusters: 8,
            virtuals: DEFAULT_VIRTUALS,
            noise: NoiseSpec::None,
            seeds: Seeds::default(),
            flash_levels: DEFAULT_FLASH_LEVELS.to_vec(),
            model: ModelKind::Full,
            visibility: Visibility::BackFace,
            fix_sigma_ss: false,
            normal_perturbation_deg: 0.0,
            max_failure_fraction: 0.05,
        }
    }
}

impl RunConfig {
    pub fn render_config(&self) -> RenderConfig {
        RenderConfig {
            model: self.model,
            flash_levels: self.flash_levels.clone(),
            noise: self.noise,
            visibility: self.visibility,
            seed: self.seeds.render,
        }
    }

    pub fn inverse_config(&self) -> InverseConfig {
        InverseConfig {
            weights: self.weights,
            iterations: self.iterations,
            clusters: self.clusters,
            virtuals: self.virtuals,
            seed: self.seeds.inverse,
            fix_sigma_ss: self.fix_sigma_ss,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.render_config().validate()?;
        self.inverse_config().validate()?;
        if !(self.normal_perturbation_deg >= 0.0 && self.normal_perturbation_deg.is_finite()) {
            return Err(Error::InvalidParameter { name: "normal_perturbation_deg", value: self.normal_perturbation_deg });
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(Error::InvalidParameter { name: "max_failure_fraction", value: self.max_failure_fraction });
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse(&text).map_err(|e| match e {
        Error::Json(j) => Error::format("run config", format!("{}: {j}", path.display())),
        other => other,
    })
}
