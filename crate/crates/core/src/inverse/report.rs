//! Recovered-versus-truth comparison for synthetic runs.

use serde::{Deserialize, Serialize};

use crate::inverse::types::VertexEstimate;
use crate::pbrdf::PbrdfParams;
use crate::polar::Vec3;

/// Normal errors above this angle count as flipped.
pub const FLIP_THRESHOLD_DEG: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub vertex: u32,
    pub eta_true: f64,
    pub eta: f64,
    pub eta_rel_err: f64,
    pub rho_d_rel_err: [f64; 3],
    pub sigma_s_rel_err: f64,
    pub sigma_ss: f64,
    pub normal_err_deg: f64,
    pub flipped: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub vertices: usize,
    /// Relative error of the mean recovered `η` against the mean true `η`.
    pub mean_eta_rel_err: f64,
    /// Mean of per-vertex relative `η` errors.
    pub eta_rel_err_mean: f64,
    pub rho_d_rel_err_max_channel: f64,
    pub sigma_s_rel_err_median: f64,
    pub sigma_ss_median: f64,
    pub normal_err_median_deg: f64,
    pub flip_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthReport {
    pub rows: Vec<TruthRow>,
    pub summary: TruthSummary,
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Compare estimates to truth; vertices with hard failures are skipped.
pub fn truth_report(est: &[VertexEstimate], truth: &[PbrdfParams], normals: &[Vec3]) -> TruthReport {
    let rows: Vec<TruthRow> = est
        .iter()
        .zip(truth.iter().zip(normals))
        .enumerate()
        .filter(|(_, (e, _))| !e.flags.hard_failure())
        .map(|(i, (e, (t, n)))| {
            let err = e.normal.normalize().dot(&n.normalize()).clamp(-1.0, 1.0).acos().to_degrees();
            TruthRow {
                vertex: i as u32,
                eta_true: t.eta,
                eta: e.params.eta,
                eta_rel_err: rel(e.params.eta, t.eta),
                rho_d_rel_err: std::array::from_fn(|c| rel(e.params.rho_d[c], t.rho_d[c])),
                sigma_s_rel_err: rel(e.params.sigma_s, t.sigma_s),
                sigma_ss: e.params.sigma_ss,
                normal_err_deg: err,
                flipped: err > FLIP_THRESHOLD_DEG,
            }
        })
        .collect();
    let n = rows.len().max(1) as f64;
    let mean = |f: &dyn Fn(&TruthRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let col = |f: &dyn Fn(&TruthRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let mean_true = mean(&|r| r.eta_true);
    let summary = TruthSummary {
        vertices: rows.len(),
        mean_eta_rel_err: rel(mean(&|r| r.eta), mean_true),
        eta_rel_err_mean: mean(&|r| r.eta_rel_err),
        rho_d_rel_err_max_channel: (0..3)
            .map(|c| rel(mean(&|r| est[r.vertex as usize].params.rho_d[c]), mean(&|r| truth[r.vertex as usize].rho_d[c])))
            .fold(0.0, f64::max),
        sigma_s_rel_err_median: median(&mut col(&|r| r.sigma_s_rel_err)),
        sigma_ss_median: median(&mut col(&|r| r.sigma_ss)),
        normal_err_median_deg: median(&mut col(&|r| r.normal_err_deg)),
        flip_rate: mean(&|r| r.flipped as u8 as f64),
    };
    TruthReport { rows, summary }
}
