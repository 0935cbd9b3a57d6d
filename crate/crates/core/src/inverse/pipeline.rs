//! Alternating per-vertex fits and cluster regressions.

use serde::{Deserialize, Serialize};

use crate::exec::{map_indices, ExecMode};
use crate::forward::ObservationSet;
use crate::inverse::cluster::{
    cluster_vertices, generate_virtuals, merge_small_clusters, pool_members, pool_samples, predict_specular, regress_cluster, ClusterModel,
    DEFAULT_VIRTUALS,
};
use crate::inverse::data::{intensity_scale, Thresholds, VertexData};
use crate::inverse::losses::{solve_rho_d, VirtualObservation};
use crate::inverse::optimize::{optimize_vertex, VertexOptions};
use crate::inverse::types::{initial_params, Bounds, LossWeights, VertexEstimate, INIT_ETA};
use crate::observe::{decompose, mean3};
use crate::pbrdf::PbrdfParams;
use crate::polar::Vec3;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseConfig {
    pub weights: LossWeights,
    pub bounds: Bounds,
    pub iterations: usize,
    pub clusters: usize,
    pub virtuals: usize,
    pub seed: u64,
    /// Hold `σss` at its initial value everywhere.
    pub fix_sigma_ss: bool,
    pub optimize_normals: bool,
    /// Full-model diffuse predictions (see `VertexModel::full_diffuse`).
    pub full_diffuse: bool,
    /// Hold normals during the first iteration, while `I^β` still contains
    /// the unsubtracted specular term.
    pub freeze_first_normals: bool,
    /// Clusters smaller than this fraction of the vertices are merged into
    /// their nearest neighbour before regression.
    pub min_cluster_fraction: f64,
    /// Members whose loss exceeds this multiple of the cluster median are
    /// left out of the pooled regression.
    pub pool_outlier_factor: f64,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig {
            weights: LossWeights::default(),
            bounds: Bounds::default(),
            iterations: 10,
            clusters: 8,
            virtuals: DEFAULT_VIRTUALS,
            seed: 0,
            fix_sigma_ss: false,
            optimize_normals: true,
            full_diffuse: true,
            freeze_first_normals: true,
            min_cluster_fraction: 0.05,
            pool_outlier_factor: 10.0,
        }
    }
}

impl InverseConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        for (name, v) in [
            ("lambda1", w.lambda1),
            ("lambda2", w.lambda2),
            ("lambda3", w.lambda3),
            ("lambda4", w.lambda4),
            ("lambda_g", w.lambda_g),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        if !(0.0..=1.0).contains(&self.min_cluster_fraction) {
            return Err(Error::InvalidParameter { name: "min_cluster_fraction", value: self.min_cluster_fraction });
        }
        if !(self.pool_outlier_factor >= 1.0) {
            return Err(Error::InvalidParameter { name: "pool_outlier_factor", value: self.pool_outlier_factor });
        }
        if self.clusters == 0 {
            return Err(Error::Config("clusters must be at least 1".into()));
        }
        let b = &self.bounds;
        if !(b.eta.0 < b.eta.1 && b.sigma.0 > 0.0 && b.sigma.0 < b.sigma.1 && b.rho_s.0 <= b.rho_s.1) {
            return Err(Error::Config("empty parameter bounds".into()));
        }
        Ok(())
    }

    pub fn augmentation(&self) -> bool {
        self.weights.lambda_g > 0.0 && self.virtuals > 0
    }
}

/// Stage run after every iteration on the current normals.
pub trait GeometryHook {
    fn update(&mut self, normals: &mut [Vec3]);
}

/// Keeps positions fixed and renormalizes the normals.
pub struct FrozenPositions;

impl GeometryHook for FrozenPositions {
    fn update(&mut self, normals: &mut [Vec3]) {
        for n in normals {
            *n = n.normalize();
        }
    }
}

/// Mean per-vertex losses of one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// `true` for the closing pass with frozen normals.
    pub final_pass: bool,
    pub psi: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub azimuth: f64,
    pub total: f64,
    pub failed: usize,
    pub clusters: usize,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// Estimates with albedos in input intensity units.
    pub estimates: Vec<VertexEstimate>,
    pub clusters: Vec<ClusterModel>,
    pub log: Vec<IterationLog>,
    /// Power-of-two normalization applied to the input.
    pub scale: f64,
}

impl PipelineOutput {
    pub fn hard_failures(&self) -> usize {
        self.estimates.iter().filter(|e| e.flags.hard_failure()).count()
    }
}

struct State {
    est: Vec<VertexEstimate>,
    cluster_of: Vec<usize>,
    virtuals: Vec<Vec<VirtualObservation>>,
    clusters: Vec<ClusterModel>,
    predicted: Option<Vec<Vec<[f64; 3]>>>,
}

fn build_data(obs: &ObservationSet, scale: f64, th: Thresholds, st: &State, mode: ExecMode) -> Vec<VertexData> {
    map_indices(mode, obs.n_vertices, |v| {
        let pred = st.predicted.as_ref().map(|p| p[v].as_slice());
        VertexData::new(obs.for_vertex(v), scale, pred, th).unwrap_or_default()
    })
}

fn optimize_all(
    data: &[VertexData],
    st: &State,
    opts: &VertexOptions,
    mode: ExecMode,
) -> Vec<VertexEstimate> {
    map_indices(mode, data.len(), |v| {
        let virt: &[VirtualObservation] = st.virtuals.get(st.cluster_of[v]).map_or(&[], |x| x.as_slice());
        let prev = &st.est[v];
        let mut e = optimize_vertex(&data[v], virt, prev, prev.params.eta, opts);
        e.flags.cluster_underdetermined = prev.flags.cluster_underdetermined;
        e
    })
}

fn summarize(iteration: usize, final_pass: bool, est: &[VertexEstimate], clusters: usize) -> IterationLog {
    let ok: Vec<&VertexEstimate> = est.iter().filter(|e| !e.flags.hard_failure()).collect();
    let n = ok.len().max(1) as f64;
    let mean = |f: &dyn Fn(&VertexEstimate) -> f64| ok.iter().map(|e| f(e)).sum::<f64>() / n;
    IterationLog {
        iteration,
        final_pass,
        psi: mean(&|e| e.residuals.psi),
        diffuse: mean(&|e| e.residuals.diffuse),
        specular: mean(&|e| e.residuals.specular),
        azimuth: mean(&|e| e.residuals.azimuth),
        total: mean(&|e| e.residuals.total()),
        failed: est.len() - ok.len(),
        clusters,
    }
}

/// Run the inverse pipeline. `initial_normals` has one entry per vertex;
/// `initial_params` (input units) replaces the default initialization.
pub fn run_pipeline(
    obs: &ObservationSet,
    initial_normals: &[Vec3],
    initial_params: Option<&[PbrdfParams]>,
    cfg: &InverseConfig,
    mode: ExecMode,
    hook: &mut dyn GeometryHook,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let n = obs.n_vertices;
    if initial_normals.len() != n || initial_params.is_some_and(|p| p.len() != n) {
        return Err(Error::Config(format!("initialization must cover all {n} vertices")));
    }
    if n == 0 {
        return Err(Error::Config("no vertices".into()));
    }
    let scale = intensity_scale(obs);
    let max_id = obs.all().iter().map(|o| mean3(&decompose(&o.channels).i_d)).fold(0.0, f64::max) / scale;
    let th = Thresholds::relative_to(max_id);
    let mut st = State {
        est: Vec::new(),
        cluster_of: vec![usize::MAX; n],
        virtuals: Vec::new(),
        clusters: Vec::new(),
        predicted: None,
    };
    let mut data = build_data(obs, scale, th, &st, mode);
    st.est = (0..n)
        .map(|v| {
            let nrm = initial_normals[v].normalize();
            let params = match initial_params {
                Some(p) => p[v].scale_albedos(1.0 / scale),
                None => initial_params_for(&data[v], &nrm),
            };
            VertexEstimate::new(params, nrm)
        })
        .collect();
    let opts = VertexOptions {
        weights: cfg.weights,
        bounds: cfg.bounds,
        fix_sigma_ss: cfg.fix_sigma_ss,
        optimize_normal: cfg.optimize_normals,
        full_diffuse: cfg.full_diffuse,
        ..Default::default()
    };
    let k = cfg.clusters.min(n);
    let mut log = Vec::new();
    for it in 0..cfg.iterations {
        if it > 0 {
            data = build_data(obs, scale, th, &st, mode);
        }
        let it_opts = if it == 0 && cfg.freeze_first_normals {
            VertexOptions { optimize_normal: false, ..opts }
        } else {
            opts
        };
        st.est = optimize_all(&data, &st, &it_opts, mode);

        let clusters = cluster_vertices(&st.est, k, cfg.seed.wrapping_add(it as u64))?;
        let min_size = (cfg.min_cluster_fraction * n as f64).ceil() as usize;
        let clusters = merge_small_clusters(clusters, &st.est, min_size);
        let regressed: Vec<ClusterModel> = map_indices(mode, clusters.len(), |j| {
            let cl = &clusters[j];
            let members = pool_members(&cl.members, &st.est, cfg.pool_outlier_factor);
            let pooled = pool_samples(&members, &data, &st.est, cfg.full_diffuse);
            let r = regress_cluster(&pooled, &cl.params, cfg.weights, &cfg.bounds, cfg.fix_sigma_ss, cfg.full_diffuse);
            ClusterModel { params: r.params, delta_theta_h: r.delta_theta_h, underdetermined: r.underdetermined, ..cl.clone() }
        });
        for (j, cl) in regressed.iter().enumerate() {
            for &m in &cl.members {
                st.cluster_of[m as usize] = j;
                st.est[m as usize].flags.cluster_underdetermined = cl.underdetermined;
            }
        }
        st.virtuals = if cfg.augmentation() {
            regressed.iter().map(|cl| generate_virtuals(&cl.params, cfg.virtuals)).collect()
        } else {
            Vec::new()
        };
        st.clusters = regressed;

        let mut normals: Vec<Vec3> = st.est.iter().map(|e| e.normal).collect();
        hook.update(&mut normals);
        for (e, nrm) in st.est.iter_mut().zip(normals) {
            e.normal = nrm;
        }
        st.predicted = Some(map_indices(mode, n, |v| {
            obs.for_vertex(v).iter().map(|o| predict_specular(o, &st.est[v])).collect()
        }));
        log.push(summarize(it, false, &st.est, st.clusters.len()));
    }

    // Closing pass: material only.
    data = build_data(obs, scale, th, &st, mode);
    let final_opts = VertexOptions { optimize_normal: false, ..opts };
    st.est = optimize_all(&data, &st, &final_opts, mode);
    log.push(summarize(cfg.iterations, true, &st.est, st.clusters.len()));

    let estimates = st.est.iter().map(|e| VertexEstimate { params: e.params.scale_albedos(scale), ..*e }).collect();
    let clusters = st
        .clusters
        .into_iter()
        .map(|c| ClusterModel {
            params: c.params.scale_albedos(scale),
            centroid: [c.centroid[0], c.centroid[1] * scale, c.centroid[2] * scale, c.centroid[3] * scale],
            ..c
        })
        .collect();
    Ok(PipelineOutput { estimates, clusters, log, scale })
}

/// Default initialization: `η = 1.5` and the closed-form diffuse albedo.
pub fn initial_params_for(data: &VertexData, normal: &Vec3) -> PbrdfParams {
    initial_params(solve_rho_d(data, normal, INIT_ETA))
}
