//! Per-vertex objective as a residual vector, generic over the scalar type.
//!
//! Variables are `z = [η, ln σs, t, ρs, u, v]`, with `σss = σs + t·(σmax − σs)`
//! and the normal `normalize(n0 + u·t1 + v·t2)`. The albedos ρd and ρss are eliminated by
//! weighted least squares at every evaluation.

use serde::{Deserialize, Serialize};

use crate::inverse::data::{Sample, VertexData};
use crate::inverse::types::{LossBreakdown, LossWeights, VertexEstimate};
use crate::pbrdf::microfacet::microfacet_kernel;
use crate::polar::{fresnel_r_plus, fresnel_t_pm, Vec3};
use crate::real::{c, dot3, max_re, Real};

/// Synthetic retroreflective specular sample of a cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualObservation {
    pub theta_h: f64,
    pub target_i_s: [f64; 3],
    pub weight: f64,
}

pub const N_VARS: usize = 6;
pub const VAR_ETA: usize = 0;
pub const VAR_LN_SIGMA_S: usize = 1;
pub const VAR_SS_FRAC: usize = 2;
pub const VAR_RHO_S: usize = 3;
pub const VAR_U: usize = 4;
pub const VAR_V: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Albedo {
    /// Closed-form least squares at every evaluation.
    Solve,
    /// Use the albedos of the estimate.
    Given,
}

/// Orthonormal tangent basis of `n`.
pub fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let a = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = a.cross(n).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// `σss = σs + t·(σmax − σs)`: the single-scattering lobe is never the
/// narrower one, which removes the label swap between the two lobes.
pub fn sigma_ss_from<D: Real>(sigma_s: D, t: D, sigma_max: f64) -> D {
    sigma_s + t * (c::<D>(sigma_max) - sigma_s)
}

/// Inverse of [`sigma_ss_from`], clamped to `[0, 1]`.
pub fn sigma_ss_fraction(sigma_s: f64, sigma_ss: f64, sigma_max: f64) -> f64 {
    let span = sigma_max - sigma_s;
    if span <= 0.0 {
        0.0
    } else {
        ((sigma_ss - sigma_s) / span).clamp(0.0, 1.0)
    }
}

/// `cos 2φ` of the in-frame azimuth of `(px, py)`; zero when it vanishes.
pub fn cos2_azimuth<D: Real>(px: D, py: D) -> D {
    let p2 = px * px + py * py;
    if p2.re() > 1e-24 {
        (px * px - py * py) / p2
    } else {
        c(0.0)
    }
}

/// Predicted DoP of the full model, or the coaxial `|T⁻/T⁺|`.
pub fn predicted_dop<D: Real>(t_plus: D, t_minus: D, beta_o: D, exact: bool) -> D {
    if exact {
        -t_minus / (t_plus + t_minus * beta_o)
    } else {
        -t_minus / t_plus
    }
}

/// `R⁺(0)·κ` of a virtual sample with `θi = θo = θh`.
pub fn virtual_prediction<D: Real>(cos_h: D, eta: D, sigma: D) -> D {
    let r0 = fresnel_r_plus(c::<D>(1.0), eta);
    r0 * microfacet_kernel(cos_h, cos_h, cos_h, sigma)
}

#[derive(Clone, Debug)]
pub struct VertexModel<'a> {
    pub data: &'a VertexData,
    pub virtuals: &'a [VirtualObservation],
    pub weights: LossWeights,
    /// η used by the Fresnel transmissions of the diffuse lobe.
    pub eta_prev: f64,
    pub n0: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
    pub albedo: Albedo,
    pub given_rho_d: [f64; 3],
    pub given_rho_ss: [f64; 3],
    /// Predict the diffuse observables with the full model's `β`-dependent
    /// factors instead of the coaxial `T⁺T⁺` and `|T⁻/T⁺|`.
    pub full_diffuse: bool,
    pub sigma_max: f64,
    /// Constant `σss`, replacing the `t` variable.
    pub sigma_ss_fixed: Option<f64>,
}

/// Albedos and normal produced alongside the residuals.
#[derive(Clone, Copy, Debug)]
pub struct Solved<D> {
    pub normal: [D; 3],
    pub rho_d: [D; 3],
    pub rho_ss: [D; 3],
}

/// Sizes of the residual groups, in output order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Layout {
    pub psi: usize,
    pub diffuse: usize,
    pub specular: usize,
    pub azimuth: usize,
}

impl<'a> VertexModel<'a> {
    pub fn new(
        data: &'a VertexData,
        virtuals: &'a [VirtualObservation],
        est: &VertexEstimate,
        weights: LossWeights,
        eta_prev: f64,
        full_diffuse: bool,
    ) -> Self {
        let n0 = est.normal.normalize();
        let (t1, t2) = tangent_basis(&n0);
        VertexModel {
            data,
            virtuals,
            weights,
            eta_prev,
            n0,
            t1,
            t2,
            albedo: Albedo::Solve,
            given_rho_d: est.params.rho_d,
            given_rho_ss: est.params.rho_ss,
            full_diffuse,
            sigma_max: 1.0,
            sigma_ss_fixed: None,
        }
    }

    pub fn with_albedo(mut self, a: Albedo) -> Self {
        self.albedo = a;
        self
    }

    /// Variable vector of an estimate, with zero tangent offset.
    pub fn point(&self, est: &VertexEstimate) -> [f64; N_VARS] {
        let p = &est.params;
        let t = sigma_ss_fraction(p.sigma_s, p.sigma_ss, self.sigma_max);
        [p.eta, p.sigma_s.ln(), t, p.rho_s, 0.0, 0.0]
    }

    pub fn sigma_ss_at(&self, z: &[f64; N_VARS]) -> f64 {
        self.sigma_ss_fixed.unwrap_or_else(|| sigma_ss_from(z[VAR_LN_SIGMA_S].exp(), z[VAR_SS_FRAC], self.sigma_max))
    }

    pub fn layout(&self) -> Layout {
        let k = self.data.samples.len();
        Layout {
            psi: self.data.reliable_dop(),
            diffuse: 3 * k,
            specular: 3 * (k + self.virtuals.len()),
            azimuth: self.data.samples.iter().filter(|s| s.obs.azimuth_reliable).count(),
        }
    }

    pub fn normal_at(&self, u: f64, v: f64) -> Vec3 {
        (self.n0 + self.t1 * u + self.t2 * v).normalize()
    }

    fn normal<D: Real>(&self, u: D, v: D) -> [D; 3] {
        let m: [D; 3] = std::array::from_fn(|k| u * self.t1[k] + v * self.t2[k] + self.n0[k]);
        let len = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        m.map(|x| x / len)
    }

    /// Write all residuals into `out` (cleared first).
    pub fn residuals<D: Real>(&self, z: &[D; N_VARS], out: &mut Vec<D>) -> Solved<D> {
        out.clear();
        let w = &self.weights;
        let eta = z[VAR_ETA];
        let sigma_s = z[VAR_LN_SIGMA_S].exp();
        let sigma_ss = match self.sigma_ss_fixed {
            Some(v) => c(v),
            None => sigma_ss_from(sigma_s, z[VAR_SS_FRAC], self.sigma_max),
        };
        let rho_s = z[VAR_RHO_S];
        let n = self.normal(z[VAR_U], z[VAR_V]);
        let samples = &self.data.samples;

        struct Geo<D> {
            s: D,
            cos_i: D,
            cos_o: D,
            px: D,
            py: D,
            beta_o: D,
            /// Diffuse factors at `eta_prev`: `I^d = ρd·shade`, diffuse `I^s = ρd·pol`.
            shade: D,
            pol: D,
        }
        let eta_prev = c::<D>(self.eta_prev);
        let geo: Vec<Geo<D>> = samples
            .iter()
            .map(|sm: &Sample| {
                let cos_i = dot3(&n, &sm.omega_i);
                let s = max_re(cos_i, 0.0) * sm.inv_d2;
                let cos_i = max_re(cos_i, 1e-4);
                let cos_o = max_re(dot3(&n, &sm.omega_o), 1e-4);
                let (px, py) = (dot3(&n, &sm.x_o), dot3(&n, &sm.y_o));
                let beta_o = cos2_azimuth(px, py);
                let (ti_p, ti_m) = fresnel_t_pm(cos_i, eta_prev);
                let (to_p, to_m) = fresnel_t_pm(cos_o, eta_prev);
                let (shade, pol) = if self.full_diffuse {
                    let beta_i = cos2_azimuth(dot3(&n, &sm.x_i), dot3(&n, &sm.y_i));
                    let inc = ti_p - ti_m * beta_i;
                    (s * (to_p + to_m * beta_o) * inc, -(s * to_m * beta_o * inc))
                } else {
                    (s * ti_p * to_p, c(0.0))
                };
                Geo { s, cos_i, cos_o, px, py, beta_o, shade, pol }
            })
            .collect();

        // DoP.
        for (sm, g) in samples.iter().zip(&geo) {
            if !sm.obs.dop_reliable {
                continue;
            }
            let (tp, tm) = fresnel_t_pm(g.cos_o, eta);
            let psi = predicted_dop(tp, tm, g.beta_o, self.full_diffuse);
            out.push((psi - sm.obs.dop) * (w.lambda1 * sm.weight).sqrt());
        }

        // Diffuse.
        let rho_d: [D; 3] = match self.albedo {
            Albedo::Given => self.given_rho_d.map(c),
            Albedo::Solve => std::array::from_fn(|ch| {
                let (mut num, mut den) = (c::<D>(0.0), c::<D>(0.0));
                for (sm, g) in samples.iter().zip(&geo) {
                    num += g.shade * (sm.weight * sm.obs.i_d[ch]);
                    den += g.shade * g.shade * sm.weight;
                }
                if den.re() > 1e-300 {
                    max_re(num / den, 0.0)
                } else {
                    c(0.0)
                }
            }),
        };
        for (sm, g) in samples.iter().zip(&geo) {
            let sw = (w.lambda2 * sm.weight).sqrt();
            for ch in 0..3 {
                out.push((rho_d[ch] * g.shade - sm.obs.i_d[ch]) * sw);
            }
        }

        // Specular and single scattering: basis values per sample.
        // Targets have the predicted diffuse part removed.
        let mut basis: Vec<(D, D, f64, [D; 3])> = Vec::with_capacity(samples.len() + self.virtuals.len());
        for (sm, g) in samples.iter().zip(&geo) {
            let b = g.s * fresnel_r_plus(c::<D>(sm.cos_d), eta);
            let cos_h = dot3(&n, &sm.half);
            let ks = microfacet_kernel(cos_h, g.cos_i, g.cos_o, sigma_s);
            let kss = microfacet_kernel(cos_h, g.cos_i, g.cos_o, sigma_ss);
            let y = std::array::from_fn(|ch| -(rho_d[ch] * g.pol) + sm.obs.i_s[ch]);
            basis.push((b * ks, b * kss, w.lambda3 * sm.weight, y));
        }
        for vo in self.virtuals {
            let ch = c::<D>(vo.theta_h.cos());
            basis.push((
                virtual_prediction(ch, eta, sigma_s),
                virtual_prediction(ch, eta, sigma_ss),
                w.lambda3 * w.lambda_g * vo.weight,
                vo.target_i_s.map(c),
            ));
        }
        let rho_ss: [D; 3] = match self.albedo {
            Albedo::Given => self.given_rho_ss.map(c),
            Albedo::Solve => std::array::from_fn(|ch| {
                let (mut num, mut den) = (c::<D>(0.0), c::<D>(0.0));
                for (bs, bss, ww, y) in &basis {
                    num += *bss * (y[ch] - rho_s * *bs) * *ww;
                    den += *bss * *bss * *ww;
                }
                if den.re() > 1e-300 {
                    max_re(num / den, 0.0)
                } else {
                    c(0.0)
                }
            }),
        };
        for (bs, bss, ww, y) in &basis {
            let sw = ww.sqrt();
            for ch in 0..3 {
                out.push((rho_s * *bs + rho_ss[ch] * *bss - y[ch]) * sw);
            }
        }

        // Azimuth: sin(φ̂o − φI), weighted by diffuse polarization strength.
        let gsum: f64 = samples.iter().filter(|s| s.obs.azimuth_reliable).map(|s| s.weight * s.obs.gamma).sum();
        for (sm, g) in samples.iter().zip(&geo) {
            if !sm.obs.azimuth_reliable {
                continue;
            }
            let wp = sm.weight * sm.obs.gamma / gsum;
            let p2 = g.px * g.px + g.py * g.py;
            if p2.re() < 1e-24 {
                out.push(c(0.0));
                continue;
            }
            let (s, co) = sm.obs.phi_obs.sin_cos();
            let r = (g.py * co - g.px * s) / p2.sqrt();
            out.push(r * (w.lambda4 * wp).sqrt());
        }

        Solved { normal: n, rho_d, rho_ss }
    }

    /// Weighted loss terms at `z`.
    pub fn breakdown(&self, z: &[f64; N_VARS]) -> LossBreakdown {
        let mut r = Vec::new();
        self.residuals(z, &mut r);
        let l = self.layout();
        let sq = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>();
        let (psi, rest) = r.split_at(l.psi);
        let (d, rest) = rest.split_at(l.diffuse);
        let (s, phi) = rest.split_at(l.specular);
        LossBreakdown { psi: sq(psi), diffuse: sq(d), specular: sq(s), azimuth: sq(phi) }
    }
}

fn unit_weights(lambda1: f64, lambda2: f64, lambda3: f64, lambda4: f64, lambda_g: f64) -> LossWeights {
    LossWeights { lambda1, lambda2, lambda3, lambda4, lambda_g }
}

fn given_model<'a>(
    est: &VertexEstimate,
    data: &'a VertexData,
    virtuals: &'a [VirtualObservation],
    w: LossWeights,
    full_diffuse: bool,
) -> VertexModel<'a> {
    VertexModel::new(data, virtuals, est, w, est.params.eta, full_diffuse).with_albedo(Albedo::Given)
}

/// `Σ w_v (ψ̂ − ψ)²` over reliable samples.
pub fn loss_psi(est: &VertexEstimate, data: &VertexData, full_diffuse: bool) -> f64 {
    let m = given_model(est, data, &[], unit_weights(1.0, 0.0, 0.0, 0.0, 0.0), full_diffuse);
    m.breakdown(&m.point(est)).psi
}

/// `Σ w_v ‖Î^d − I^d‖²` with the estimate's albedo and transmissions at `eta_prev`.
pub fn loss_diffuse(est: &VertexEstimate, data: &VertexData, eta_prev: f64) -> f64 {
    let mut m = given_model(est, data, &[], unit_weights(0.0, 1.0, 0.0, 0.0, 0.0), true);
    m.eta_prev = eta_prev;
    m.breakdown(&m.point(est)).diffuse
}

/// Real plus `λg`-weighted virtual specular residuals at the estimate's albedos.
pub fn loss_specular(est: &VertexEstimate, data: &VertexData, virtuals: &[VirtualObservation], lambda_g: f64) -> f64 {
    let m = given_model(est, data, virtuals, unit_weights(0.0, 0.0, 1.0, 0.0, lambda_g), true);
    m.breakdown(&m.point(est)).specular
}

/// `Σ w_p sin²(φ̂o − φI)`.
pub fn loss_azimuth(est: &VertexEstimate, data: &VertexData) -> f64 {
    let m = given_model(est, data, &[], unit_weights(0.0, 0.0, 0.0, 1.0, 0.0), true);
    m.breakdown(&m.point(est)).azimuth
}

/// Closed-form diffuse albedo at fixed normal and `eta_prev`.
pub fn solve_rho_d(data: &VertexData, normal: &Vec3, eta_prev: f64) -> [f64; 3] {
    let mut est = VertexEstimate::new(Default::default(), *normal);
    est.params.eta = eta_prev;
    let m = VertexModel::new(data, &[], &est, LossWeights::default(), eta_prev, true);
    let mut r = Vec::new();
    m.residuals(&m.point(&est), &mut r).rho_d
}
