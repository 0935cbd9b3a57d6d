use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on both roughness parameters.
pub const SIGMA_MIN: f64 = 0.01;
pub const ETA_MIN: f64 = 1.01;
pub const ETA_MAX: f64 = 3.0;

/// Per-vertex material record.
///
/// `rho_s` is a single channel: dielectric specular reflection keeps the
/// color of the illuminant. Diffuse and single-scattering albedos are RGB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PbrdfParams {
    pub eta: f64,
    pub rho_d: [f64; 3],
    pub rho_s: f64,
    pub sigma_s: f64,
    pub rho_ss: [f64; 3],
    pub sigma_ss: f64,
}

impl Default for PbrdfParams {
    fn default() -> Self {
        PbrdfParams {
            eta: 1.5,
            rho_d: [0.5; 3],
            rho_s: 0.1,
            sigma_s: 0.3,
            rho_ss: [0.025; 3],
            sigma_ss: 0.9,
        }
    }
}

impl PbrdfParams {
    /// Same material with every lobe except the diffuse one switched off.
    pub fn diffuse_only(eta: f64, rho_d: [f64; 3]) -> Self {
        PbrdfParams {
            eta,
            rho_d,
            rho_s: 0.0,
            rho_ss: [0.0; 3],
            ..Default::default()
        }
    }

    /// Checks finiteness and the model bounds.
    ///
    /// Albedos are only required to be non-negative here; the `[0, 1]` range
    /// of `rho_d` is an optimizer box constraint in normalized units.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64, ok: bool| {
            if !v.is_finite() {
                Err(Error::NonFinite(name))
            } else if !ok {
                Err(Error::InvalidParameter { name, value: v })
            } else {
                Ok(())
            }
        };
        check("eta", self.eta, (ETA_MIN..=ETA_MAX).contains(&self.eta))?;
        for v in self.rho_d {
            check("rho_d", v, v >= 0.0)?;
        }
        check("rho_s", self.rho_s, self.rho_s >= 0.0)?;
        check(
            "sigma_s",
            self.sigma_s,
            self.sigma_s >= SIGMA_MIN && self.sigma_s <= 1.0,
        )?;
        for v in self.rho_ss {
            check("rho_ss", v, v >= 0.0)?;
        }
        check(
            "sigma_ss",
            self.sigma_ss,
            self.sigma_ss >= SIGMA_MIN && self.sigma_ss <= 1.0,
        )?;
        Ok(())
    }

    /// Multiply every albedo by `k`.
    pub fn scale_albedos(&self, k: f64) -> Self {
        PbrdfParams {
            rho_d: self.rho_d.map(|v| v * k),
            rho_s: self.rho_s * k,
            rho_ss: self.rho_ss.map(|v| v * k),
            ..*self
        }
    }
}

/// Parameters of the reference (non-invertible) single-scattering model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSsParams {
    /// Index of the interior scattering interface.
    pub eta_p: f64,
    /// Henyey–Greenstein asymmetry.
    pub g: f64,
    pub rho_ss: [f64; 3],
}

impl PhysicalSsParams {
    pub fn validate(&self) -> Result<()> {
        if !self.eta_p.is_finite() || !self.g.is_finite() || self.rho_ss.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("physical single scattering"));
        }
        if self.eta_p <= 0.0 {
            return Err(Error::InvalidParameter { name: "eta_p", value: self.eta_p });
        }
        if !(self.g > -1.0 && self.g < 1.0) {
            return Err(Error::InvalidParameter { name: "g", value: self.g });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        PbrdfParams::default().validate().unwrap();
    }

    #[test]
    fn bounds_are_enforced() {
        let bad = [
            PbrdfParams { eta: 1.0, ..Default::default() },
            PbrdfParams { eta: f64::NAN, ..Default::default() },
            PbrdfParams { sigma_s: 0.0, ..Default::default() },
            PbrdfParams { sigma_ss: 1.5, ..Default::default() },
            PbrdfParams { rho_d: [0.1, -0.1, 0.1], ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        let p = PhysicalSsParams { eta_p: 1.3, g: 1.0, rho_ss: [1.0; 3] };
        assert!(p.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = PbrdfParams::default();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<PbrdfParams>(&s).unwrap(), p);
        assert!(serde_json::from_str::<PbrdfParams>(&s.replace("\"eta\"", "\"ior\"")).is_err());
    }
}
