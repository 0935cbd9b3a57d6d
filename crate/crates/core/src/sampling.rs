//! Random geometry and material generators shared by tests, validation and
//! benches. All take an explicit RNG so callers control seeding.

use std::f64::consts::PI;

use rand::Rng;

use crate::pbrdf::PbrdfParams;
use crate::polar::{InteractionAngles, SurfaceGeometry, Vec3};

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Rotate `w` away from itself by `angle`, towards the direction picked by `az`.
pub fn tilt(w: &Vec3, angle: f64, az: f64) -> Vec3 {
    let helper = if w.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = w.cross(&helper).normalize();
    let v = w.cross(&u);
    (w * angle.cos() + (u * az.cos() + v * az.sin()) * angle.sin()).normalize()
}

/// Tilt each normal by independent Gaussian tangent offsets of standard
/// deviation `sigma` (radians) per axis.
pub fn perturb_normals(normals: &[Vec3], sigma: f64, rng: &mut impl Rng) -> Vec<Vec3> {
    normals
        .iter()
        .map(|n| {
            let a: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma;
            let b: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma;
            tilt(n, a.hypot(b), b.atan2(a))
        })
        .collect()
}

/// Normal, light and view directions with zeniths up to `max_zenith`.
pub fn random_configuration(rng: &mut impl Rng, max_zenith: f64) -> SurfaceGeometry {
    loop {
        let n = random_unit(rng);
        let wi = tilt(&n, rng.random_range(0.0..max_zenith), rng.random_range(0.0..2.0 * PI));
        let wo = tilt(&n, rng.random_range(0.0..max_zenith), rng.random_range(0.0..2.0 * PI));
        let up = random_unit(rng);
        if n.dot(&wi) > 1e-3 && n.dot(&wo) > 1e-3 {
            if let Ok(g) = SurfaceGeometry::new(n, wi, wo, &up, &up) {
                return g;
            }
        }
    }
}

/// Random front-facing angles together with a random dielectric index.
pub fn random_geometry(rng: &mut impl Rng) -> (InteractionAngles, f64) {
    let g = random_configuration(rng, 85f64.to_radians());
    (g.angles().expect("front-facing by construction"), rng.random_range(1.1..2.5))
}

pub fn random_params(rng: &mut impl Rng) -> PbrdfParams {
    let mut rgb = |lo: f64, hi: f64| [0; 3].map(|_| rng.random_range(lo..hi));
    let rho_d = rgb(0.05, 0.9);
    let rho_ss = rgb(0.0, 0.2);
    PbrdfParams {
        eta: rng.random_range(1.3..1.8),
        rho_d,
        rho_s: rng.random_range(0.0..1.0),
        sigma_s: rng.random_range(0.1..0.6),
        rho_ss,
        sigma_ss: rng.random_range(0.5..1.0),
    }
}
