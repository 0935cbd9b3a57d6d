//! Polarimetric observables derived from the four analyzer channels.
//!
//! With the flash polarized horizontally and the analyzers at 0/45/90/135°:
//!
//! * `I^d = 2·I90` is the diffuse shading,
//! * `I^α = I135 − I45` carries the diffuse polarization along `sin 2φ`,
//! * `I^s = I0 − I90` is dominated by specular and single scattering,
//! * `I^β = I^s − (predicted specular + single scattering)` leaves the
//!   diffuse polarization along `cos 2φ`.
//!
//! Under the near-coaxial model `I^α = +S ρd T⁻T⁺ sin 2φo` and
//! `I^β = −S ρd T⁻T⁺ cos 2φo`. `T⁻ ≤ 0` for dielectrics, so the azimuth is
//! recovered as `½·atan2(−I^α, I^β)`.

use std::f64::consts::FRAC_PI_2;

use crate::forward::FilterChannels;

/// Mean `I^d` below this fraction of the scene maximum makes DoP unreliable.
/// Under shot noise the magnitude `Γ` is biased upward by roughly `σ²/Γ`,
/// which dominates the DoP of dim grazing samples.
pub const DARK_THRESHOLD_REL: f64 = 0.03;
/// `Γ` below this fraction of the scene's maximum `I^d` gets no azimuth weight.
pub const GAMMA_FLOOR_REL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Decomposed {
    pub i_d: [f64; 3],
    pub i_alpha: [f64; 3],
    pub i_s: [f64; 3],
}

pub fn decompose(c: &FilterChannels) -> Decomposed {
    Decomposed {
        i_d: c.i90.map(|v| 2.0 * v),
        i_alpha: std::array::from_fn(|k| c.i135[k] - c.i45[k]),
        i_s: std::array::from_fn(|k| c.i0[k] - c.i90[k]),
    }
}

pub fn mean3(v: &[f64; 3]) -> f64 {
    (v[0] + v[1] + v[2]) / 3.0
}

pub fn beta_observation(i_s: &[f64; 3], predicted_specular: &[f64; 3], predicted_ss: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| i_s[k] - predicted_specular[k] - predicted_ss[k])
}

/// Diffuse polarization magnitude from channel means.
pub fn gamma(i_alpha: &[f64; 3], i_beta: &[f64; 3]) -> f64 {
    mean3(i_alpha).hypot(mean3(i_beta))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DopEstimate {
    pub dop: f64,
    /// `false` when the diffuse shading is below the darkness threshold.
    pub reliable: bool,
}

/// `Γ / mean(I^d)`. `dark_threshold` is an absolute level on `mean(I^d)`.
pub fn estimate_dop(i_d: &[f64; 3], i_alpha: &[f64; 3], i_beta: &[f64; 3], dark_threshold: f64) -> DopEstimate {
    let d = mean3(i_d);
    if !(d > dark_threshold) || d <= 0.0 {
        return DopEstimate { dop: 0.0, reliable: false };
    }
    DopEstimate { dop: gamma(i_alpha, i_beta) / d, reliable: true }
}

/// Observed polarimetric azimuth in `[−π/2, π/2)`, defined modulo π.
///
/// The axis case `I^α = 0, I^β < 0` maps to `−π/2`.
pub fn observed_azimuth(i_alpha: &[f64; 3], i_beta: &[f64; 3]) -> f64 {
    let a = -mean3(i_alpha);
    let b = mean3(i_beta);
    // Fold −0.0 to +0.0 so the branch does not depend on the sign of zero.
    let phi = 0.5 * (a + 0.0).atan2(b);
    if phi >= FRAC_PI_2 {
        phi - std::f64::consts::PI
    } else {
        phi
    }
}

/// Everything the per-vertex losses need from one observation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PolarObservables {
    pub i_d: [f64; 3],
    pub i_alpha: [f64; 3],
    pub i_s: [f64; 3],
    pub i_beta: [f64; 3],
    pub gamma: f64,
    pub dop: f64,
    pub dop_reliable: bool,
    pub phi_obs: f64,
    /// `Γ` above the noise floor; otherwise the azimuth carries no weight.
    pub azimuth_reliable: bool,
}

impl PolarObservables {
    /// Observables with `I^β ≈ I^s`, as used before any specular prediction
    /// exists.
    pub fn new(d: &Decomposed, dark_threshold: f64, gamma_floor: f64) -> Self {
        Self::with_beta(d, d.i_s, dark_threshold, gamma_floor)
    }

    pub fn with_beta(d: &Decomposed, i_beta: [f64; 3], dark_threshold: f64, gamma_floor: f64) -> Self {
        let dop = estimate_dop(&d.i_d, &d.i_alpha, &i_beta, dark_threshold);
        let g = gamma(&d.i_alpha, &i_beta);
        PolarObservables {
            i_d: d.i_d,
            i_alpha: d.i_alpha,
            i_s: d.i_s,
            i_beta,
            gamma: g,
            dop: dop.dop,
            dop_reliable: dop.reliable,
            phi_obs: observed_azimuth(&d.i_alpha, &i_beta),
            azimuth_reliable: g > gamma_floor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExecMode;
    use crate::forward::render::{render_views, shade_vertex, ModelKind, RenderConfig};
    use crate::forward::scene::{make_synthetic_sphere, Intrinsics, Scene, Vertex, ViewPose};
    use crate::pbrdf::lobes::kappa_unit;
    use crate::pbrdf::PbrdfParams;
    use crate::polar::{fresnel_coefficients, Vec3};
    use proptest::prelude::*;

    fn wrap_pi(x: f64) -> f64 {
        let y = x.rem_euclid(std::f64::consts::PI);
        y.min(std::f64::consts::PI - y)
    }

    #[test]
    fn unpolarized_input() {
        let c = 0.3;
        let d = decompose(&FilterChannels { i0: [c; 3], i45: [c; 3], i90: [c; 3], i135: [c; 3] });
        assert_eq!(d, Decomposed { i_d: [2.0 * c; 3], i_alpha: [0.0; 3], i_s: [0.0; 3] });
    }

    #[test]
    fn beta_examples() {
        let s = [0.5, 0.25, 0.125];
        assert_eq!(beta_observation(&s, &[0.0; 3], &[0.0; 3]), s);
        let half = s.map(|v| v / 2.0);
        assert_eq!(beta_observation(&s, &half, &half), [0.0; 3]);
    }

    #[test]
    fn dop_examples() {
        let e = estimate_dop(&[1.0; 3], &[0.0; 3], &[0.0; 3], 1e-3);
        assert_eq!((e.dop, e.reliable), (0.0, true));
        assert!(!estimate_dop(&[1e-4; 3], &[0.0; 3], &[0.0; 3], 1e-3).reliable);
    }

    #[test]
    fn azimuth_axis_case() {
        assert_eq!(observed_azimuth(&[0.0; 3], &[-1.0; 3]), -FRAC_PI_2);
        assert_eq!(observed_azimuth(&[-0.0; 3], &[-1.0; 3]), -FRAC_PI_2);
        assert_eq!(observed_azimuth(&[0.0; 3], &[1.0; 3]), 0.0);
    }

    fn coaxial_vertex(theta: f64, params: PbrdfParams) -> (Scene, Vec3) {
        let n = Vec3::new(theta.sin() * 0.6, theta.sin() * 0.8, theta.cos());
        let view = ViewPose::look_at(Vec3::new(0.0, 0.0, 1.0), Vec3::zeros(), Vec3::y(), Intrinsics::default()).unwrap();
        let scene = Scene {
            vertices: vec![Vertex { position: Vec3::zeros(), normal: n, params }],
            views: vec![view],
            light_offset: Vec3::zeros(),
            light_pol_angle: 0.0,
        };
        (scene, n)
    }

    fn observe_one(scene: &Scene, model: ModelKind) -> Decomposed {
        let s = shade_vertex(&scene.vertices[0], &scene.views[0], scene, model).unwrap().unwrap();
        decompose(&FilterChannels::from_stokes(&s.stokes))
    }

    #[test]
    fn diffuse_vertex_at_normal_has_no_polarization() {
        let (scene, _) = coaxial_vertex(0.0, PbrdfParams::diffuse_only(1.5, [0.5; 3]));
        let d = observe_one(&scene, ModelKind::Full);
        assert!(d.i_alpha.iter().chain(&d.i_s).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn specular_spike_lands_in_i_s() {
        let p = PbrdfParams { rho_d: [0.0; 3], rho_ss: [0.0; 3], ..PbrdfParams::default() };
        let (scene, _) = coaxial_vertex(0.2, p);
        let s = shade_vertex(&scene.vertices[0], &scene.views[0], &scene, ModelKind::Coaxial).unwrap().unwrap();
        let d = observe_one(&scene, ModelKind::Coaxial);
        let a = s.geometry.angles().unwrap();
        let expect = s.shading * p.rho_s * kappa_unit(&a, p.sigma_s) * fresnel_coefficients(a.theta_d, p.eta).unwrap().r_plus();
        assert!((d.i_s[0] - expect).abs() < 1e-14 * expect);
        assert!(d.i_d[0].abs() < 1e-15);
    }

    #[test]
    fn beta_from_perfect_predictions() {
        let p = PbrdfParams::default();
        let (scene, n) = coaxial_vertex(0.7, p);
        let s = shade_vertex(&scene.vertices[0], &scene.views[0], &scene, ModelKind::Coaxial).unwrap().unwrap();
        let d = observe_one(&scene, ModelKind::Coaxial);
        let a = s.geometry.angles().unwrap();
        let r = fresnel_coefficients(a.theta_d, p.eta).unwrap().r_plus();
        let ps = [s.shading * p.rho_s * kappa_unit(&a, p.sigma_s) * r; 3];
        let pss = p.rho_ss.map(|x| s.shading * x * kappa_unit(&a, p.sigma_ss) * r);
        let b = beta_observation(&d.i_s, &ps, &pss);
        let f = fresnel_coefficients(a.theta_o, p.eta).unwrap();
        for ch in 0..3 {
            let expect = -p.rho_d[ch] * s.shading * f.t_minus() * f.t_plus() * a.beta_o();
            assert!((b[ch] - expect).abs() < 1e-15, "{} {}", b[ch], expect);
        }
        let _ = n;
    }

    #[test]
    fn dop_and_azimuth_on_diffuse_sphere() {
        let p = PbrdfParams::diffuse_only(1.5, [0.6, 0.3, 0.2]);
        let scene = make_synthetic_sphere(0.1, 600, &|_| p, 6, 0.9, 4).unwrap();
        let mut coax = scene.clone();
        coax.light_offset = Vec3::zeros();
        for (sc, model) in [(&coax, ModelKind::Coaxial), (&coax, ModelKind::Full)] {
            let obs = render_views(sc, &RenderConfig { model, ..Default::default() }, ExecMode::Sequential).unwrap();
            for o in obs.all() {
                let n = sc.vertices[o.vertex_id as usize].normal;
                let g = o.geometry(n).unwrap();
                let a = g.angles().unwrap();
                let d = decompose(&o.channels);
                let po = PolarObservables::new(&d, 0.0, 0.0);
                if (5.0..=85.0).contains(&a.theta_o.to_degrees()) && model == ModelKind::Coaxial {
                    let f = fresnel_coefficients(a.theta_o, 1.5).unwrap();
                    assert!((po.dop - (f.t_minus() / f.t_plus()).abs()).abs() < 1e-6);
                }
                if (20.0..=70.0).contains(&a.theta_o.to_degrees()) {
                    assert!(wrap_pi(po.phi_obs - a.phi_o) < 1e-3, "{} {}", po.phi_obs, a.phi_o);
                }
            }
        }
    }

    #[test]
    fn camera_roll_shifts_azimuth() {
        let p = PbrdfParams::diffuse_only(1.5, [0.5; 3]);
        let (mut scene, _) = coaxial_vertex(0.8, p);
        let base = PolarObservables::new(&observe_one(&scene, ModelKind::Full), 0.0, 0.0).phi_obs;
        for roll in [0.1, 0.5, 1.0, 2.0] {
            scene.views[0] = scene.views[0].rolled(roll);
            let phi = PolarObservables::new(&observe_one(&scene, ModelKind::Full), 0.0, 0.0).phi_obs;
            // Rolling the camera counter-clockwise rotates the frame, so the
            // azimuth measured in it decreases.
            assert!(wrap_pi(phi - (base - roll)) < 1e-9, "{roll}");
            scene.views[0] = scene.views[0].rolled(-roll);
        }
    }

    fn arb_channels() -> impl Strategy<Value = FilterChannels> {
        prop::array::uniform12(0.0f64..1.0).prop_map(|a| FilterChannels {
            i0: [a[0], a[1], a[2]],
            i45: [a[3], a[4], a[5]],
            i90: [a[6], a[7], a[8]],
            i135: [a[9], a[10], a[11]],
        })
    }

    proptest! {
        #[test]
        fn decompose_is_linear(a in arb_channels(), b in arb_channels(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let mix = FilterChannels {
                i0: std::array::from_fn(|k| x * a.i0[k] + y * b.i0[k]),
                i45: std::array::from_fn(|k| x * a.i45[k] + y * b.i45[k]),
                i90: std::array::from_fn(|k| x * a.i90[k] + y * b.i90[k]),
                i135: std::array::from_fn(|k| x * a.i135[k] + y * b.i135[k]),
            };
            let (da, db, dm) = (decompose(&a), decompose(&b), decompose(&mix));
            for k in 0..3 {
                prop_assert!((dm.i_d[k] - (x * da.i_d[k] + y * db.i_d[k])).abs() < 1e-12);
                prop_assert!((dm.i_alpha[k] - (x * da.i_alpha[k] + y * db.i_alpha[k])).abs() < 1e-12);
                prop_assert!((dm.i_s[k] - (x * da.i_s[k] + y * db.i_s[k])).abs() < 1e-12);
            }
        }

        #[test]
        fn azimuth_in_range(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let phi = observed_azimuth(&[a; 3], &[b; 3]);
            prop_assert!((-FRAC_PI_2..FRAC_PI_2).contains(&phi));
        }
    }
}
