//! Material clusters, their pooled specular regression and the virtual
//! retroreflective samples generated from them.

use serde::{Deserialize, Serialize};

use crate::forward::VertexObservation;
use crate::inverse::data::VertexData;
use crate::inverse::kmeans::{kmeans, standardize};
use crate::inverse::lm::{minimize, LmConfig, ResidualModel};
use crate::inverse::losses::{cos2_azimuth, predicted_dop, sigma_ss_from, sigma_ss_fraction, virtual_prediction, VirtualObservation};
use crate::inverse::types::{
    ln_sigma_bounds, Bounds, LossWeights, VertexEstimate, INIT_RHO_S, INIT_SIGMA_S, INIT_SIGMA_SS,
};
use crate::observe::mean3;
use crate::pbrdf::microfacet::microfacet_kernel;
use crate::pbrdf::PbrdfParams;
use crate::polar::{fresnel_r_plus, fresnel_t_pm};
use crate::real::{c, max_re, Grad, Real};
use crate::Result;

/// Default number of virtual samples (θh from 0° to 89.5° in 0.5° steps).
pub const DEFAULT_VIRTUALS: usize = 180;
/// Pooled samples beyond this count are subsampled with a fixed stride.
pub const MAX_POOLED: usize = 4000;
/// A sample is specular-bright when `mean(I^s)` exceeds this fraction of `mean(I^d)`.
pub const BRIGHT_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Feature centroid `(η, ρd.r, ρd.g, ρd.b)` in input units.
    pub centroid: [f64; 4],
    pub members: Vec<u32>,
    /// Regressed `η`, `σs`, `σss`, `ρs`, `ρss`; `ρd` is the member mean.
    pub params: PbrdfParams,
    pub delta_theta_h: f64,
    pub underdetermined: bool,
}

/// Group vertices by `(η, ρd)` after standardizing each feature.
pub fn cluster_vertices(estimates: &[VertexEstimate], k: usize, seed: u64) -> Result<Vec<ClusterModel>> {
    let raw: Vec<[f64; 4]> = estimates
        .iter()
        .map(|e| [e.params.eta, e.params.rho_d[0], e.params.rho_d[1], e.params.rho_d[2]])
        .collect();
    let assign = kmeans(&standardize(&raw), k, seed)?;
    let n_clusters = assign.iter().max().map_or(0, |m| m + 1);
    Ok(summarize_clusters(estimates, &assign, n_clusters))
}

/// Fold every cluster with fewer than `min_size` members into the cluster
/// with the nearest centroid (in standardized feature space) among those
/// that are large enough. Parameters are the member means, as in
/// [`cluster_vertices`].
pub fn merge_small_clusters(clusters: Vec<ClusterModel>, estimates: &[VertexEstimate], min_size: usize) -> Vec<ClusterModel> {
    if clusters.iter().all(|c| c.members.len() >= min_size) {
        return clusters;
    }
    let max = clusters.iter().map(|c| c.members.len()).max().unwrap_or(0);
    let keep: Vec<usize> = (0..clusters.len()).filter(|&j| clusters[j].members.len() >= min_size.min(max)).collect();
    let raw: Vec<[f64; 4]> = clusters.iter().map(|c| c.centroid).collect();
    let z = standardize(&raw);
    let mut assign = vec![0usize; estimates.len()];
    for (j, cl) in clusters.iter().enumerate() {
        let target = if keep.contains(&j) {
            j
        } else {
            let d2 = |k: &usize| (0..4).map(|d| (z[j][d] - z[*k][d]).powi(2)).sum::<f64>();
            *keep.iter().min_by(|a, b| d2(a).total_cmp(&d2(b))).unwrap()
        };
        let slot = keep.iter().position(|&k| k == target).unwrap();
        for &m in &cl.members {
            assign[m as usize] = slot;
        }
    }
    summarize_clusters(estimates, &assign, keep.len())
}

fn summarize_clusters(estimates: &[VertexEstimate], assign: &[usize], n_clusters: usize) -> Vec<ClusterModel> {
    let raw: Vec<[f64; 4]> = estimates
        .iter()
        .map(|e| [e.params.eta, e.params.rho_d[0], e.params.rho_d[1], e.params.rho_d[2]])
        .collect();
    let mut out: Vec<ClusterModel> = (0..n_clusters)
        .map(|_| ClusterModel {
            centroid: [0.0; 4],
            members: Vec::new(),
            params: PbrdfParams::default(),
            delta_theta_h: 0.0,
            underdetermined: false,
        })
        .collect();
    for (i, &a) in assign.iter().enumerate() {
        out[a].members.push(i as u32);
        for d in 0..4 {
            out[a].centroid[d] += raw[i][d];
        }
    }
    for cl in &mut out {
        let m = cl.members.len() as f64;
        cl.centroid = cl.centroid.map(|v| v / m);
        let mean = |f: &dyn Fn(&PbrdfParams) -> f64| {
            cl.members.iter().map(|&i| f(&estimates[i as usize].params)).sum::<f64>() / m
        };
        cl.params = PbrdfParams {
            eta: mean(&|p| p.eta),
            rho_d: cl.centroid[1..].try_into().unwrap(),
            rho_s: mean(&|p| p.rho_s),
            sigma_s: mean(&|p| p.sigma_s),
            rho_ss: [0, 1, 2].map(|c| mean(&|p| p.rho_ss[c])),
            sigma_ss: mean(&|p| p.sigma_ss),
        };
    }
    out
}

/// Members fit for pooling: no hard failure and a total loss at most
/// `outlier_factor` times the cluster median. Falls back to every member
/// when the filter would leave none.
pub fn pool_members(members: &[u32], estimates: &[VertexEstimate], outlier_factor: f64) -> Vec<u32> {
    let ok: Vec<u32> = members.iter().copied().filter(|&m| !estimates[m as usize].flags.hard_failure()).collect();
    let mut losses: Vec<f64> = ok.iter().map(|&m| estimates[m as usize].residuals.total()).collect();
    if losses.is_empty() {
        return members.to_vec();
    }
    losses.sort_by(f64::total_cmp);
    let cut = outlier_factor * losses[losses.len() / 2];
    let kept: Vec<u32> = ok.into_iter().filter(|&m| estimates[m as usize].residuals.total() <= cut).collect();
    if kept.is_empty() {
        members.to_vec()
    } else {
        kept
    }
}

/// One member sample with its geometry frozen at the member's normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PooledSample {
    pub cos_i: f64,
    pub cos_o: f64,
    pub theta_h: f64,
    pub s: f64,
    pub cos_d: f64,
    pub beta_o: f64,
    pub dop: f64,
    pub dop_reliable: bool,
    pub i_s: [f64; 3],
    pub i_d: [f64; 3],
    pub weight: f64,
}

/// Pool the samples of `members` (vertex ids) into one sample list. With
/// `full_diffuse`, each member's predicted diffuse part of `I^s` is removed.
pub fn pool_samples(
    members: &[u32],
    data: &[VertexData],
    estimates: &[VertexEstimate],
    full_diffuse: bool,
) -> Vec<PooledSample> {
    let total: usize = members.iter().map(|&m| data[m as usize].samples.len()).sum();
    let stride = total.div_ceil(MAX_POOLED).max(1);
    let mut out = Vec::with_capacity(total / stride + 1);
    let mut idx = 0usize;
    for &m in members {
        let n = estimates[m as usize].normal;
        let p = &estimates[m as usize].params;
        for sm in &data[m as usize].samples {
            idx += 1;
            if !(idx - 1).is_multiple_of(stride) {
                continue;
            }
            let dot = |a: &[f64; 3]| n.x * a[0] + n.y * a[1] + n.z * a[2];
            let cos_i = dot(&sm.omega_i);
            let (px, py) = (dot(&sm.x_o), dot(&sm.y_o));
            let beta_o = cos2_azimuth(px, py);
            let s = cos_i.max(0.0) * sm.inv_d2;
            let mut i_s = sm.obs.i_s;
            if full_diffuse {
                let beta_i = cos2_azimuth(dot(&sm.x_i), dot(&sm.y_i));
                let (ti_p, ti_m) = fresnel_t_pm(cos_i.max(1e-4), p.eta);
                let to_m = fresnel_t_pm(dot(&sm.omega_o).max(1e-4), p.eta).1;
                let pol = -s * to_m * beta_o * (ti_p - ti_m * beta_i);
                for ch in 0..3 {
                    i_s[ch] -= p.rho_d[ch] * pol;
                }
            }
            out.push(PooledSample {
                cos_i: cos_i.max(1e-4),
                cos_o: dot(&sm.omega_o).max(1e-4),
                theta_h: dot(&sm.half).clamp(-1.0, 1.0).acos(),
                s,
                cos_d: sm.cos_d,
                beta_o,
                dop: sm.obs.dop,
                dop_reliable: sm.obs.dop_reliable,
                i_s,
                i_d: sm.obs.i_d,
                weight: 0.0,
            });
        }
    }
    let w = 1.0 / out.len().max(1) as f64;
    for s in &mut out {
        s.weight = w;
    }
    out
}

/// Variables `[η, ln σs, t, ρs, Δθh]` with `σss` as in the vertex problem;
/// `ρss` is solved per channel.
pub struct ClusterProblem<'a> {
    pub samples: &'a [PooledSample],
    pub weights: LossWeights,
    pub full_diffuse: bool,
    pub sigma_max: f64,
    pub sigma_ss_fixed: Option<f64>,
}

impl ClusterProblem<'_> {
    pub fn residuals<D: Real>(&self, z: &[D; 5], out: &mut Vec<D>) -> [D; 3] {
        out.clear();
        let (eta, sigma_s, rho_s, dth) = (z[0], z[1].exp(), z[3], z[4]);
        let sigma_ss = match self.sigma_ss_fixed {
            Some(v) => c(v),
            None => sigma_ss_from(sigma_s, z[2], self.sigma_max),
        };
        let w = &self.weights;
        for sm in self.samples.iter().filter(|s| s.dop_reliable) {
            let (tp, tm) = fresnel_t_pm(c::<D>(sm.cos_o), eta);
            let psi = predicted_dop(tp, tm, c(sm.beta_o), self.full_diffuse);
            out.push((psi - sm.dop) * (w.lambda1 * sm.weight).sqrt());
        }
        let (cd, sd) = (dth.cos(), dth.sin());
        let basis: Vec<(D, D)> = self
            .samples
            .iter()
            .map(|sm| {
                let cos_h = cd * sm.theta_h.cos() - sd * sm.theta_h.sin();
                let b = fresnel_r_plus(c::<D>(sm.cos_d), eta) * sm.s;
                let (ci, co) = (c::<D>(sm.cos_i), c::<D>(sm.cos_o));
                (b * microfacet_kernel(cos_h, ci, co, sigma_s), b * microfacet_kernel(cos_h, ci, co, sigma_ss))
            })
            .collect();
        let rho_ss: [D; 3] = std::array::from_fn(|ch| {
            let (mut num, mut den) = (c::<D>(0.0), c::<D>(0.0));
            for (sm, (bs, bss)) in self.samples.iter().zip(&basis) {
                num += *bss * (-(rho_s * *bs) + sm.i_s[ch]) * sm.weight;
                den += *bss * *bss * sm.weight;
            }
            if den.re() > 1e-300 {
                max_re(num / den, 0.0)
            } else {
                c(0.0)
            }
        });
        for (sm, (bs, bss)) in self.samples.iter().zip(&basis) {
            let sw = (w.lambda3 * sm.weight).sqrt();
            for ch in 0..3 {
                out.push((rho_s * *bs + rho_ss[ch] * *bss - sm.i_s[ch]) * sw);
            }
        }
        out.push(dth);
        rho_ss
    }
}

impl ResidualModel<5> for ClusterProblem<'_> {
    fn eval_f64(&self, x: &[f64; 5], out: &mut Vec<f64>) {
        self.residuals(x, out);
    }
    fn eval_grad(&self, x: &[Grad<5>; 5], out: &mut Vec<Grad<5>>) {
        self.residuals(x, out);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regression {
    pub params: PbrdfParams,
    pub delta_theta_h: f64,
    pub underdetermined: bool,
}

/// Fit the specular parameters of a pooled cluster, starting from `init`.
pub fn regress_cluster(
    samples: &[PooledSample],
    init: &PbrdfParams,
    weights: LossWeights,
    bounds: &Bounds,
    fix_sigma_ss: bool,
    full_diffuse: bool,
) -> Regression {
    let bright = samples.iter().filter(|s| mean3(&s.i_s) > BRIGHT_FRACTION * mean3(&s.i_d).max(0.0)).count();
    let underdetermined = bright == 0;
    let mut start = *init;
    let mut free = [true; 5];
    if underdetermined {
        start.sigma_s = INIT_SIGMA_S;
        start.sigma_ss = INIT_SIGMA_SS;
        free[1] = false;
        free[2] = false;
        free[4] = false;
    }
    free[2] &= !fix_sigma_ss;
    free[0] = samples.iter().any(|s| s.dop_reliable);
    let sigma_max = bounds.sigma.1;
    let prob = ClusterProblem {
        samples,
        weights,
        full_diffuse,
        sigma_max,
        sigma_ss_fixed: fix_sigma_ss.then_some(start.sigma_ss),
    };
    let (l0, l1) = ln_sigma_bounds(bounds);
    let d = bounds.delta_theta_h;
    let lo = [bounds.eta.0, l0, 0.0, bounds.rho_s.0, -d];
    let hi = [bounds.eta.1, l1, 1.0, bounds.rho_s.1, d];
    // Start from the member average and from the default initialization;
    // keep the better fit.
    let fallback = PbrdfParams { sigma_s: INIT_SIGMA_S, sigma_ss: INIT_SIGMA_SS, rho_s: INIT_RHO_S, ..start };
    let starts = if underdetermined { vec![start] } else { vec![start, fallback] };
    let mut best: Option<([f64; 5], f64)> = None;
    for s in starts {
        let t0 = sigma_ss_fraction(s.sigma_s, s.sigma_ss, sigma_max);
        let x0 = [s.eta, s.sigma_s.ln(), t0, s.rho_s, 0.0];
        let res = minimize(&prob, x0, lo, hi, free, &LmConfig::default());
        let cand = if res.failed { (x0, f64::INFINITY) } else { (res.x, res.loss) };
        if best.is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    let x = best.unwrap().0;
    let mut buf = Vec::new();
    let rho_ss = prob.residuals(&x, &mut buf);
    Regression {
        params: PbrdfParams {
            eta: x[0],
            rho_d: init.rho_d,
            rho_s: x[3],
            sigma_s: x[1].exp(),
            rho_ss,
            sigma_ss: prob.sigma_ss_fixed.unwrap_or_else(|| sigma_ss_from(x[1].exp(), x[2], sigma_max)),
        },
        delta_theta_h: x[4],
        underdetermined,
    }
}

/// Retroreflective samples of a regressed cluster at `θh = j·90°/m`.
pub fn generate_virtuals(p: &PbrdfParams, m: usize) -> Vec<VirtualObservation> {
    let step = std::f64::consts::FRAC_PI_2 / m.max(1) as f64;
    let wsum: f64 = (0..m).map(|j| (j as f64 * step).cos()).sum();
    (0..m)
        .map(|j| {
            let theta_h = j as f64 * step;
            let ch = theta_h.cos();
            let ks = virtual_prediction(ch, p.eta, p.sigma_s);
            let kss = virtual_prediction(ch, p.eta, p.sigma_ss);
            VirtualObservation {
                theta_h,
                target_i_s: std::array::from_fn(|c| p.rho_s * ks + p.rho_ss[c] * kss),
                weight: ch / wsum,
            }
        })
        .collect()
}

/// Predicted specular plus single-scattering `I^s` of one observation, in
/// the same intensity units as `est`'s albedos.
pub fn predict_specular(o: &VertexObservation, est: &VertexEstimate) -> [f64; 3] {
    let n = est.normal;
    let p = &est.params;
    let cos_i = n.dot(&o.omega_i);
    let cos_o = n.dot(&o.omega_o);
    if !(cos_i > 0.0 && cos_o > 0.0) {
        return [0.0; 3];
    }
    let h = (o.omega_i + o.omega_o).normalize();
    let s = cos_i / (o.distance * o.distance);
    let b = s * fresnel_r_plus(o.omega_i.dot(&h).clamp(0.0, 1.0), p.eta);
    let ks = microfacet_kernel(n.dot(&h), cos_i, cos_o, p.sigma_s);
    let kss = microfacet_kernel(n.dot(&h), cos_i, cos_o, p.sigma_ss);
    std::array::from_fn(|c| b * (p.rho_s * ks + p.rho_ss[c] * kss))
}
