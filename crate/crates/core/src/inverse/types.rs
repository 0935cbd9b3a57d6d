use serde::{Deserialize, Serialize};

use crate::pbrdf::params::{ETA_MAX, ETA_MIN, SIGMA_MIN};
use crate::pbrdf::PbrdfParams;
use crate::polar::Vec3;

/// Relative weights of the DoP, diffuse, specular and azimuth losses, plus
/// the weight of the virtual specular samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda_g: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda1: 1.0, lambda2: 100.0, lambda3: 1.0, lambda4: 100.0, lambda_g: 0.1 }
    }
}

/// Box constraints of the per-vertex problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub eta: (f64, f64),
    pub sigma: (f64, f64),
    /// Specular albedo range in normalized intensity units.
    pub rho_s: (f64, f64),
    /// Largest tangent-plane offset of the normal per solve.
    pub normal_step: f64,
    /// Largest per-cluster halfway-angle correction, radians.
    pub delta_theta_h: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            eta: (ETA_MIN, ETA_MAX),
            sigma: (SIGMA_MIN, 1.0),
            rho_s: (0.0, 100.0),
            normal_step: 0.5,
            delta_theta_h: 5f64.to_radians(),
        }
    }
}

/// Per-term values of the vertex objective (already multiplied by their λ).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub psi: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub azimuth: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.psi + self.diffuse + self.specular + self.azimuth
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexFlags {
    /// No visible observation at all.
    pub unobserved: bool,
    /// No reliable DoP sample; `eta` stays at its previous value.
    pub eta_unconstrained: bool,
    /// No specular information; specular parameters stay at initialization.
    pub specular_frozen: bool,
    /// The solver hit a non-finite loss it could not recover from.
    pub optimizer_failed: bool,
    /// The vertex's cluster had no specular-bright sample.
    pub cluster_underdetermined: bool,
}

impl VertexFlags {
    /// Failures that count against the run's exit status.
    pub fn hard_failure(&self) -> bool {
        self.unobserved || self.optimizer_failed
    }

    pub fn bits(&self) -> u32 {
        (self.unobserved as u32)
            | (self.eta_unconstrained as u32) << 1
            | (self.specular_frozen as u32) << 2
            | (self.optimizer_failed as u32) << 3
            | (self.cluster_underdetermined as u32) << 4
    }

    pub fn from_bits(b: u32) -> Self {
        VertexFlags {
            unobserved: b & 1 != 0,
            eta_unconstrained: b & 2 != 0,
            specular_frozen: b & 4 != 0,
            optimizer_failed: b & 8 != 0,
            cluster_underdetermined: b & 16 != 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexEstimate {
    pub params: PbrdfParams,
    pub normal: Vec3,
    pub residuals: LossBreakdown,
    pub flags: VertexFlags,
    pub iterations: usize,
}

impl VertexEstimate {
    pub fn new(params: PbrdfParams, normal: Vec3) -> Self {
        VertexEstimate {
            params,
            normal: normal.normalize(),
            residuals: LossBreakdown::default(),
            flags: VertexFlags::default(),
            iterations: 0,
        }
    }
}

/// Initial values of the nonlinear parameters.
pub const INIT_ETA: f64 = 1.5;
pub const INIT_SIGMA_S: f64 = 0.3;
pub const INIT_SIGMA_SS: f64 = 0.9;
pub const INIT_RHO_S: f64 = 0.1;
pub const INIT_RHO_SS_FRACTION: f64 = 0.05;

/// Initial material given the closed-form diffuse albedo.
pub fn initial_params(rho_d: [f64; 3]) -> PbrdfParams {
    PbrdfParams {
        eta: INIT_ETA,
        rho_d,
        rho_s: INIT_RHO_S,
        sigma_s: INIT_SIGMA_S,
        rho_ss: rho_d.map(|v| INIT_RHO_SS_FRACTION * v),
        sigma_ss: INIT_SIGMA_SS,
    }
}

/// Lower bound of the σ search in log space.
pub fn ln_sigma_bounds(b: &Bounds) -> (f64, f64) {
    (b.sigma.0.max(SIGMA_MIN).ln(), b.sigma.1.ln())
}
