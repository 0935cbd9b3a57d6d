use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, ExecMode};
use crate::forward::raster::depth_buffer;
use crate::forward::scene::{Scene, Vertex, ViewPose};
use crate::pbrdf::{coaxial_pbrdf, pbrdf_eval, RgbMueller};
use crate::polar::{StokesVector, SurfaceGeometry, Vec3};

/// Observations beyond this zenith (light or view) are treated as invisible.
pub const MAX_ZENITH_DEG: f64 = 89.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Sum of the three lobes with exact incident/exitant geometry.
    #[default]
    Full,
    /// Sparse near-coaxial approximation.
    Coaxial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    /// Front-facing test only; exact for convex objects.
    #[default]
    BackFace,
    /// Front-facing test plus a splatted depth buffer per view.
    DepthBuffer,
}

/// Sensor model applied per raw exposure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    /// Gaussian noise with `σ = k·sqrt(raw)` on each raw exposure, where raw
    /// values are `gain · level · radiance` in units of sensor full scale.
    Shot {
        k: f64,
        gain: f64,
        /// Quantization depth; `None` keeps continuous values.
        bits: Option<u32>,
        /// Raw values at or above this fraction of full scale are treated as
        /// clipped and excluded from the merge.
        saturation: f64,
    },
}

impl NoiseSpec {
    pub fn realistic() -> Self {
        NoiseSpec::Shot { k: 0.01, gain: 3.0, bits: Some(12), saturation: 0.98 }
    }

    pub fn validate(&self) -> Result<()> {
        if let NoiseSpec::Shot { k, gain, bits, saturation } = *self {
            let ok = k >= 0.0
                && k.is_finite()
                && gain > 0.0
                && gain.is_finite()
                && saturation > 0.0
                && saturation <= 1.0
                && bits.is_none_or(|b| (1..=24).contains(&b));
            if !ok {
                return Err(Error::Config(format!("invalid noise spec {self:?}")));
            }
        }
        Ok(())
    }
}

pub const DEFAULT_FLASH_LEVELS: [f64; 3] = [0.25, 0.125, 0.0625];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub model: ModelKind,
    pub flash_levels: Vec<f64>,
    pub noise: NoiseSpec,
    pub visibility: Visibility,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            model: ModelKind::Full,
            flash_levels: DEFAULT_FLASH_LEVELS.to_vec(),
            noise: NoiseSpec::None,
            visibility: Visibility::BackFace,
            seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.flash_levels.is_empty() {
            return Err(Error::Config("flash_levels must not be empty".into()));
        }
        if self.flash_levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config(format!("flash levels must be positive: {:?}", self.flash_levels)));
        }
        self.noise.validate()
    }
}

/// Linear-analyzer intensities, one RGB triple per filter orientation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FilterChannels {
    pub i0: [f64; 3],
    pub i45: [f64; 3],
    pub i90: [f64; 3],
    pub i135: [f64; 3],
}

impl FilterChannels {
    pub fn from_stokes(s: &[StokesVector; 3]) -> Self {
        let mut out = FilterChannels::default();
        for (ch, sv) in s.iter().enumerate() {
            let (a, b, c, d) = stokes_to_filter_channels(sv);
            out.i0[ch] = a;
            out.i90[ch] = b;
            out.i45[ch] = c;
            out.i135[ch] = d;
        }
        out
    }

    pub fn to_stokes(&self) -> [StokesVector; 3] {
        std::array::from_fn(|ch| {
            StokesVector::new(
                self.i0[ch] + self.i90[ch],
                self.i0[ch] - self.i90[ch],
                self.i45[ch] - self.i135[ch],
                0.0,
            )
        })
    }

    pub fn scale(&self, k: f64) -> Self {
        let f = |a: [f64; 3]| a.map(|v| v * k);
        FilterChannels { i0: f(self.i0), i45: f(self.i45), i90: f(self.i90), i135: f(self.i135) }
    }

    fn as_array(&self) -> [[f64; 3]; 4] {
        [self.i0, self.i45, self.i90, self.i135]
    }

    fn from_array(a: [[f64; 3]; 4]) -> Self {
        FilterChannels { i0: a[0], i45: a[1], i90: a[2], i135: a[3] }
    }
}

/// Ideal linear analyzers at 0°, 90°, 45° and 135°, returned in that order.
pub fn stokes_to_filter_channels(s: &StokesVector) -> (f64, f64, f64, f64) {
    (
        0.5 * (s.s0() + s.s1()),
        0.5 * (s.s0() - s.s1()),
        0.5 * (s.s0() + s.s2()),
        0.5 * (s.s0() - s.s2()),
    )
}

/// One vertex seen in one view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexObservation {
    pub vertex_id: u32,
    pub view_id: u32,
    pub channels: FilterChannels,
    /// Unit direction from the vertex to the flash.
    pub omega_i: Vec3,
    /// Unit direction from the vertex to the camera.
    pub omega_o: Vec3,
    /// Vertex-to-flash distance in meters.
    pub distance: f64,
    pub cam_up: Vec3,
    pub light_up: Vec3,
    pub visible: bool,
}

impl VertexObservation {
    /// `S = (n·ωi)/d²` for a candidate normal.
    pub fn shading(&self, n: &Vec3) -> f64 {
        n.dot(&self.omega_i) / (self.distance * self.distance)
    }

    pub fn geometry(&self, n: Vec3) -> Result<SurfaceGeometry> {
        SurfaceGeometry::new(n, self.omega_i, self.omega_o, &self.cam_up, &self.light_up)
    }
}

/// Observations grouped by vertex, each group sorted by view.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub n_vertices: usize,
    pub n_views: usize,
    obs: Vec<VertexObservation>,
    offsets: Vec<usize>,
}

impl ObservationSet {
    /// Build from an arbitrary list; observations are regrouped by vertex and
    /// sorted by view so the order of `obs` does not matter.
    pub fn new(n_vertices: usize, n_views: usize, mut obs: Vec<VertexObservation>) -> Result<Self> {
        if let Some(o) = obs
            .iter()
            .find(|o| o.vertex_id as usize >= n_vertices || o.view_id as usize >= n_views)
        {
            return Err(Error::Config(format!(
                "observation references vertex {} / view {} outside {n_vertices} x {n_views}",
                o.vertex_id, o.view_id
            )));
        }
        obs.sort_by_key(|o| (o.vertex_id, o.view_id));
        let mut offsets = vec![0; n_vertices + 1];
        for o in &obs {
            offsets[o.vertex_id as usize + 1] += 1;
        }
        for v in 0..n_vertices {
            offsets[v + 1] += offsets[v];
        }
        Ok(ObservationSet { n_vertices, n_views, obs, offsets })
    }

    pub fn for_vertex(&self, v: usize) -> &[VertexObservation] {
        &self.obs[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn all(&self) -> &[VertexObservation] {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn for_view(&self, view: usize) -> impl Iterator<Item = &VertexObservation> {
        self.obs.iter().filter(move |o| o.view_id as usize == view)
    }

    pub fn map_channels(&self, f: impl Fn(&FilterChannels) -> FilterChannels) -> Self {
        let obs = self.obs.iter().map(|o| VertexObservation { channels: f(&o.channels), ..*o }).collect();
        ObservationSet { obs, ..self.clone() }
    }

    /// Vertices without a single visible observation.
    pub fn unconstrained(&self) -> Vec<u32> {
        (0..self.n_vertices).filter(|&v| self.offsets[v] == self.offsets[v + 1]).map(|v| v as u32).collect()
    }
}

/// Geometry and radiance of one shaded vertex.
#[derive(Clone, Copy, Debug)]
pub struct ShadeSample {
    pub stokes: [StokesVector; 3],
    /// pBRDF Mueller matrices before the `S` factor.
    pub mueller: RgbMueller,
    pub geometry: SurfaceGeometry,
    pub distance: f64,
    pub shading: f64,
}

/// `S·P·[1, 1, 0, 0]ᵀ` per color channel.
pub fn apply_flash(p: &RgbMueller, shading: f64) -> [StokesVector; 3] {
    std::array::from_fn(|ch| p[ch].apply(&StokesVector::horizontal()).scale(shading))
}

/// Reflected Stokes vectors of `vertex` seen from `view`, or `None` when the
/// vertex faces away from the camera or the flash.
pub fn shade_vertex(vertex: &Vertex, view: &ViewPose, scene: &Scene, model: ModelKind) -> Result<Option<ShadeSample>> {
    let cam = view.center();
    let light = scene.light_position(view);
    let to_cam = cam - vertex.position;
    let to_light = light - vertex.position;
    let distance = to_light.norm();
    let (omega_o, omega_i) = (to_cam.normalize(), to_light / distance);
    let cos_max = MAX_ZENITH_DEG.to_radians().cos();
    let n = vertex.normal;
    if !(n.dot(&omega_o) > cos_max && n.dot(&omega_i) > cos_max) {
        return Ok(None);
    }
    let geometry = SurfaceGeometry::new(n, omega_i, omega_o, &view.up(), &scene.light_up(view))?;
    let angles = geometry.angles()?;
    let p = match model {
        ModelKind::Full => pbrdf_eval(&angles, &vertex.params)?,
        ModelKind::Coaxial => coaxial_pbrdf(&angles, &vertex.params)?,
    };
    let shading = n.dot(&omega_i) / (distance * distance);
    Ok(Some(ShadeSample { stokes: apply_flash(&p, shading), mueller: p, geometry, distance, shading }))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the noise stream for one (vertex, view) pair.
pub fn pair_seed(seed: u64, vertex: u32, view: u32) -> u64 {
    splitmix(splitmix(seed) ^ ((vertex as u64) << 32 | view as u64))
}

/// Least-squares projection onto `i0 + i90 = i45 + i135` followed by a
/// clamp of the linear polarization to `DoP ≤ 1`, which keeps every channel
/// non-negative.
pub fn project_consistent(c: &FilterChannels) -> FilterChannels {
    let mut out = FilterChannels::default();
    for ch in 0..3 {
        let s0 = (0.5 * (c.i0[ch] + c.i90[ch] + c.i45[ch] + c.i135[ch])).max(0.0);
        let (mut s1, mut s2) = (c.i0[ch] - c.i90[ch], c.i45[ch] - c.i135[ch]);
        let mag = s1.hypot(s2);
        if mag > s0 {
            let k = if mag > 0.0 { s0 / mag } else { 0.0 };
            s1 *= k;
            s2 *= k;
        }
        out.i0[ch] = 0.5 * (s0 + s1);
        out.i90[ch] = 0.5 * (s0 - s1);
        out.i45[ch] = 0.5 * (s0 + s2);
        out.i135[ch] = 0.5 * (s0 - s2);
    }
    out
}

/// Simulate the bracketed flash exposures of one observation and merge them
/// back into linear radiance.
pub fn capture(clean: &FilterChannels, levels: &[f64], noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> FilterChannels {
    let NoiseSpec::Shot { k, gain, bits, saturation } = *noise else {
        return *clean;
    };
    let q = bits.map(|b| ((1u64 << b) - 1) as f64);
    let clean = clean.as_array();
    let mut merged = [[0.0; 3]; 4];
    for (f, row) in clean.iter().enumerate() {
        for (ch, &radiance) in row.iter().enumerate() {
            let (mut acc, mut wsum) = (0.0, 0.0);
            let mut fallback = (f64::INFINITY, 0.0);
            for &level in levels {
                let scale = gain * level;
                let ideal = (scale * radiance).max(0.0);
                let z: f64 = StandardNormal.sample(rng);
                let mut raw = ideal + k * ideal.sqrt() * z;
                if let Some(q) = q {
                    raw = (raw * q).round() / q;
                }
                raw = raw.clamp(0.0, 1.0);
                if level < fallback.0 {
                    fallback = (level, raw / scale);
                }
                if raw < saturation {
                    acc += level * raw / scale;
                    wsum += level;
                }
            }
            merged[f][ch] = if wsum > 0.0 { acc / wsum } else { fallback.1 };
        }
    }
    project_consistent(&FilterChannels::from_array(merged))
}

/// Render every (vertex, view) pair of the scene.
pub fn render_views(scene: &Scene, cfg: &RenderConfig, mode: ExecMode) -> Result<ObservationSet> {
    scene.validate()?;
    cfg.validate()?;
    let depth = match cfg.visibility {
        Visibility::BackFace => None,
        Visibility::DepthBuffer => Some(map_indices(mode, scene.views.len(), |v| depth_buffer(scene, v))),
    };
    let tol = 1e-3 * scene.extent().max(1e-9);
    let positions: Vec<Vec3> = scene.vertices.iter().map(|v| v.position).collect();
    let per_vertex = map_indices(mode, scene.vertices.len(), |vi| -> Result<Vec<VertexObservation>> {
        let vertex = &scene.vertices[vi];
        let mut out = Vec::new();
        for (view_id, view) in scene.views.iter().enumerate() {
            let Some(sample) = shade_vertex(vertex, view, scene, cfg.model)? else {
                continue;
            };
            if let Some(d) = &depth {
                if !d[view_id].visible(view, &vertex.position, tol, &positions) {
                    continue;
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(cfg.seed, vi as u32, view_id as u32));
            let clean = FilterChannels::from_stokes(&sample.stokes);
            out.push(VertexObservation {
                vertex_id: vi as u32,
                view_id: view_id as u32,
                channels: capture(&clean, &cfg.flash_levels, &cfg.noise, &mut rng),
                omega_i: sample.geometry.omega_i,
                omega_o: sample.geometry.omega_o,
                distance: sample.distance,
                cam_up: view.up(),
                light_up: scene.light_up(view),
                visible: true,
            });
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for v in per_vertex {
        all.extend(v?);
    }
    ObservationSet::new(scene.vertices.len(), scene.views.len(), all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::scene::{make_synthetic_sphere, make_synthetic_sphere_with, Intrinsics, ViewLayout};
    use crate::pbrdf::PbrdfParams;
    use crate::polar::{fresnel_coefficients, stokes_to_dop_aolp, MuellerMatrix};
    use approx::assert_relative_eq;

    fn single_vertex_scene(params: PbrdfParams, d: f64) -> Scene {
        let view = ViewPose::look_at(Vec3::new(0.0, 0.0, d), Vec3::zeros(), Vec3::y(), Intrinsics::default()).unwrap();
        Scene {
            vertices: vec![Vertex { position: Vec3::zeros(), normal: Vec3::z(), params }],
            views: vec![view],
            light_offset: Vec3::zeros(),
            light_pol_angle: 0.0,
        }
    }

    #[test]
    fn identity_pass_through() {
        let s = apply_flash(&[MuellerMatrix::identity(); 3], 1.0);
        assert_eq!(s[0], StokesVector::new(1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn filter_channel_examples() {
        assert_eq!(stokes_to_filter_channels(&StokesVector::horizontal()), (1.0, 0.0, 0.5, 0.5));
        assert_eq!(stokes_to_filter_channels(&StokesVector::unpolarized(1.0)), (0.5, 0.5, 0.5, 0.5));
        let s = StokesVector::new(0.7, 0.2, -0.3, 0.0);
        let c = FilterChannels::from_stokes(&[s; 3]);
        let back = c.to_stokes()[1];
        assert!((back.0 - s.0).amax() < 1e-15);
    }

    #[test]
    fn lambertian_vertex_at_normal() {
        let p = PbrdfParams::diffuse_only(1.5, [0.6, 0.3, 0.2]);
        let scene = single_vertex_scene(p, 1.0);
        let s = shade_vertex(&scene.vertices[0], &scene.views[0], &scene, ModelKind::Full).unwrap().unwrap();
        let c = FilterChannels::from_stokes(&s.stokes);
        assert_relative_eq!(c.i90[0], 0.6 * 0.96 * 0.96 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.i0[2], c.i90[2], max_relative = 1e-14);
    }

    #[test]
    fn inverse_square() {
        let p = PbrdfParams::default();
        let a = single_vertex_scene(p, 1.0);
        let b = single_vertex_scene(p, 2.0);
        let sa = shade_vertex(&a.vertices[0], &a.views[0], &a, ModelKind::Full).unwrap().unwrap();
        let sb = shade_vertex(&b.vertices[0], &b.views[0], &b, ModelKind::Full).unwrap().unwrap();
        assert!((sb.stokes[0].0 * 4.0 - sa.stokes[0].0).amax() < 1e-15);
    }

    #[test]
    fn back_facing_is_invisible() {
        let mut scene = single_vertex_scene(PbrdfParams::default(), 1.0);
        scene.vertices[0].normal = -Vec3::z();
        assert!(shade_vertex(&scene.vertices[0], &scene.views[0], &scene, ModelKind::Full).unwrap().is_none());
    }

    #[test]
    fn full_and_coaxial_agree_at_exact_coaxiality() {
        let p = PbrdfParams { sigma_s: 0.3, ..PbrdfParams::default() };
        let mut scene = make_synthetic_sphere(0.1, 200, &|_| p, 5, 0.9, 3).unwrap();
        scene.light_offset = Vec3::zeros();
        for v in &scene.vertices {
            let view = &scene.views[0];
            let (Some(a), Some(b)) = (
                shade_vertex(v, view, &scene, ModelKind::Full).unwrap(),
                shade_vertex(v, view, &scene, ModelKind::Coaxial).unwrap(),
            ) else {
                continue;
            };
            if a.geometry.angles().unwrap().theta_o > 60f64.to_radians() {
                continue;
            }
            let rel = (a.stokes[0].0 - b.stokes[0].0).amax() / a.stokes[0].s0();
            assert!(rel < 0.02, "{rel}");
        }
    }

    #[test]
    fn renders_are_deterministic_and_consistent() {
        let p = PbrdfParams::default();
        let scene = make_synthetic_sphere(0.1, 300, &|_| p, 8, 0.9, 5).unwrap();
        let cfg = RenderConfig { noise: NoiseSpec::realistic(), seed: 9, ..Default::default() };
        let a = render_views(&scene, &cfg, ExecMode::Parallel).unwrap();
        let b = render_views(&scene, &cfg, ExecMode::Sequential).unwrap();
        assert_eq!(a, b);
        for o in a.all() {
            let c = &o.channels;
            for ch in 0..3 {
                let lhs = c.i0[ch] + c.i90[ch];
                let rhs = c.i45[ch] + c.i135[ch];
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
                assert!(c.i0[ch] >= 0.0 && c.i45[ch] >= 0.0 && c.i90[ch] >= 0.0 && c.i135[ch] >= 0.0);
            }
        }
    }

    #[test]
    fn identical_views_identical_observations() {
        let p = PbrdfParams::default();
        let mut scene = make_synthetic_sphere(0.1, 100, &|_| p, 3, 0.9, 5).unwrap();
        scene.views[1] = scene.views[0];
        let obs = render_views(&scene, &RenderConfig::default(), ExecMode::Sequential).unwrap();
        for v in 0..scene.vertices.len() {
            let o = obs.for_vertex(v);
            let a = o.iter().find(|o| o.view_id == 0);
            let b = o.iter().find(|o| o.view_id == 1);
            assert_eq!(a.map(|o| o.channels), b.map(|o| o.channels));
        }
    }

    #[test]
    fn hemisphere_coverage() {
        let p = PbrdfParams::default();
        let scene = make_synthetic_sphere_with(0.1, 500, &|_| p, 100, 0.9, ViewLayout::Hemisphere, 2).unwrap();
        let obs = render_views(&scene, &RenderConfig::default(), ExecMode::Parallel).unwrap();
        for (i, v) in scene.vertices.iter().enumerate() {
            if v.normal.z > 0.0 {
                assert!(!obs.for_vertex(i).is_empty(), "vertex {i}");
            }
        }
    }

    #[test]
    fn diffuse_sphere_dop_law() {
        let p = PbrdfParams::diffuse_only(1.5, [0.5; 3]);
        let scene = make_synthetic_sphere(0.1, 400, &|_| p, 6, 0.9, 1).unwrap();
        let obs = render_views(&scene, &RenderConfig::default(), ExecMode::Parallel).unwrap();
        for o in obs.all() {
            let n = scene.vertices[o.vertex_id as usize].normal;
            let theta = n.dot(&o.omega_o).acos();
            let s = o.channels.to_stokes()[0];
            let (dop, _) = stokes_to_dop_aolp(&s).unwrap();
            let f = fresnel_coefficients(theta, 1.5).unwrap();
            assert!((dop - (f.t_minus() / f.t_plus()).abs()).abs() < 1e-6);
        }
    }

    #[test]
    fn unpolarized_diffuse_channel() {
        // The 90° channel of a specular-free coaxial render carries only the
        // unpolarized diffuse term: 2·I90 = S·ρ·T⁺T⁺.
        let p = PbrdfParams::diffuse_only(1.5, [0.5; 3]);
        let mut scene = make_synthetic_sphere(0.1, 200, &|_| p, 4, 0.9, 1).unwrap();
        scene.light_offset = Vec3::zeros();
        let cfg = RenderConfig { model: ModelKind::Coaxial, ..Default::default() };
        let obs = render_views(&scene, &cfg, ExecMode::Sequential).unwrap();
        for o in obs.all() {
            let n = scene.vertices[o.vertex_id as usize].normal;
            let f = fresnel_coefficients(n.dot(&o.omega_o).acos(), 1.5).unwrap();
            let expect = o.shading(&n) * 0.5 * f.t_plus() * f.t_plus();
            assert!((2.0 * o.channels.i90[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_distances_scales_intensity() {
        let p = PbrdfParams::default();
        let a = make_synthetic_sphere(0.1, 100, &|_| p, 4, 0.9, 1).unwrap();
        let mut b = a.clone();
        for v in &mut b.vertices {
            v.position *= 2.0;
        }
        for v in &mut b.views {
            v.translation *= 2.0;
        }
        b.light_offset *= 2.0;
        let cfg = RenderConfig::default();
        let oa = render_views(&a, &cfg, ExecMode::Sequential).unwrap();
        let ob = render_views(&b, &cfg, ExecMode::Sequential).unwrap();
        for (x, y) in oa.all().iter().zip(ob.all()) {
            assert!((x.channels.i0[0] - 4.0 * y.channels.i0[0]).abs() < 1e-12 * x.channels.i0[0].max(1.0));
        }
    }

    #[test]
    fn noise_merge_is_unbiased_enough() {
        let clean = FilterChannels { i0: [0.2; 3], i45: [0.15; 3], i90: [0.1; 3], i135: [0.15; 3] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 2000;
        let mean = (0..n)
            .map(|_| capture(&clean, &DEFAULT_FLASH_LEVELS, &NoiseSpec::realistic(), &mut rng).i0[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.2).abs() < 2e-3, "{mean}");
    }

    #[test]
    fn saturated_exposures_are_excluded() {
        let clean = FilterChannels { i0: [1.0; 3], i45: [0.5; 3], i90: [0.0; 3], i135: [0.5; 3] };
        let spec = NoiseSpec::Shot { k: 0.0, gain: 3.0, bits: None, saturation: 0.98 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // The full-power exposure clips at 3.0 and is dropped; the 1/4 one reads 0.75.
        let out = capture(&clean, &[1.0, 0.25], &spec, &mut rng);
        assert!((out.i0[0] - 1.0).abs() < 1e-12);
    }
}
