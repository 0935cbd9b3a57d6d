#![allow(dead_code)]

use polarsvbrdf::exec::ExecMode;
use polarsvbrdf::forward::{make_synthetic_sphere, render_views, ObservationSet, RenderConfig, Scene};
use polarsvbrdf::inverse::{intensity_scale, Thresholds, VertexData, VertexEstimate};
use polarsvbrdf::observe::{decompose, mean3};
use polarsvbrdf::pbrdf::PbrdfParams;

/// Uniform test material.
pub fn material() -> PbrdfParams {
    PbrdfParams { eta: 1.5, rho_d: [0.6, 0.3, 0.2], sigma_s: 0.2, rho_s: 0.5, rho_ss: [0.1, 0.05, 0.05], sigma_ss: 0.95 }
}

pub struct Fixture {
    pub scene: Scene,
    pub obs: ObservationSet,
    pub scale: f64,
    pub th: Thresholds,
    pub data: Vec<VertexData>,
    /// Truth in normalized intensity units.
    pub truth: Vec<VertexEstimate>,
}

pub fn thresholds(obs: &ObservationSet, scale: f64) -> Thresholds {
    let max_id = obs.all().iter().map(|o| mean3(&decompose(&o.channels).i_d)).fold(0.0, f64::max) / scale;
    Thresholds::relative_to(max_id)
}

pub fn fixture_with(p: PbrdfParams, n_vertices: usize, n_views: usize, cfg: &RenderConfig) -> Fixture {
    let scene = make_synthetic_sphere(0.1, n_vertices, &|_| p, n_views, 0.9, 1).unwrap();
    let obs = render_views(&scene, cfg, ExecMode::Parallel).unwrap();
    let scale = intensity_scale(&obs);
    let th = thresholds(&obs, scale);
    let data = (0..obs.n_vertices).map(|v| VertexData::new(obs.for_vertex(v), scale, None, th).unwrap()).collect();
    let truth = scene
        .vertices
        .iter()
        .map(|v| VertexEstimate::new(v.params.scale_albedos(1.0 / scale), v.normal))
        .collect();
    Fixture { scene, obs, scale, th, data, truth }
}

pub fn fixture(n_vertices: usize, n_views: usize) -> Fixture {
    fixture_with(material(), n_vertices, n_views, &RenderConfig::default())
}

impl Fixture {
    /// Vertex with the most observations.
    pub fn best_vertex(&self) -> usize {
        (0..self.data.len()).max_by_key(|&v| self.data[v].samples.len()).unwrap()
    }

    /// Data with `I^β` computed against the true specular prediction.
    pub fn data_with_truth_beta(&self, v: usize) -> VertexData {
        let truth = VertexEstimate::new(self.scene.vertices[v].params, self.scene.vertices[v].normal);
        let pred: Vec<[f64; 3]> = self
            .obs
            .for_vertex(v)
            .iter()
            .map(|o| polarsvbrdf::inverse::cluster::predict_specular(o, &truth).map(|x| x / self.scale))
            .collect();
        VertexData::new(self.obs.for_vertex(v), self.scale, Some(&pred), self.th).unwrap()
    }

    pub fn normals(&self) -> Vec<polarsvbrdf::Vec3> {
        self.scene.vertices.iter().map(|v| v.normal).collect()
    }

    pub fn params(&self) -> Vec<PbrdfParams> {
        self.scene.vertices.iter().map(|v| v.params).collect()
    }
}
