//! Reference single-scattering model: refraction into the medium, one
//! scattering event at an interior microfacet `h'`, refraction back out.
//!
//! The interior geometry cannot be observed from outside, so this model is
//! evaluated forward only and never optimized against.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pbrdf::lobes::RgbMueller;
use crate::pbrdf::params::PhysicalSsParams;
use crate::polar::{
    fresnel_coefficients, fresnel_matrix, reflection_cos_delta, rotation_mueller, FresnelKind,
    LocalFrame, MuellerMatrix, SurfaceGeometry, Vec3, DEGENERATE_PROJECTION,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalSsOutput {
    pub mueller: RgbMueller,
    /// Light could not cross the boundary; `mueller` is zero.
    pub total_internal_reflection: bool,
}

pub fn henyey_greenstein(cos_theta: f64, g: f64) -> f64 {
    let denom = 1.0 + g * g - 2.0 * g * cos_theta;
    (1.0 - g * g) / (4.0 * PI * denom * denom.sqrt())
}

/// Refract a propagation direction `d` entering a medium of relative index
/// `eta` through a surface with outward normal `n`. `None` on total internal
/// reflection.
pub fn refract(d: &Vec3, n: &Vec3, eta: f64) -> Option<Vec3> {
    let cos_i = -n.dot(d);
    let sin2_t = (1.0 - cos_i * cos_i).max(0.0) / (eta * eta);
    if sin2_t >= 1.0 {
        return None;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    Some((d / eta + n * (cos_i / eta - cos_t)).normalize())
}

/// Frame propagating along `d` whose y-axis is the projection of the
/// interface normal `m`. When `m` is parallel to `d` the plane of incidence
/// is undefined and the x-axis of `prev` is carried over instead.
fn plane_frame(d: &Vec3, m: &Vec3, prev: &LocalFrame) -> LocalFrame {
    LocalFrame::aligned(d, m).unwrap_or_else(|_| {
        let z = d.normalize();
        let x = (prev.x - z * prev.x.dot(&z)).normalize();
        LocalFrame { x, y: z.cross(&x), z }
    })
}

fn rot(from: &LocalFrame, to: &LocalFrame) -> MuellerMatrix {
    rotation_mueller(from.rotation_to(to))
}

/// Evaluate the five-factor chain. `h_prime` defaults to the interior
/// halfway vector of the two refracted directions.
pub fn single_scattering_physical(
    geom: &SurfaceGeometry,
    phys: &PhysicalSsParams,
    eta: f64,
    h_prime: Option<Vec3>,
) -> Result<PhysicalSsOutput> {
    phys.validate()?;
    let angles = geom.angles()?;
    let n = geom.n;
    let zero = PhysicalSsOutput {
        mueller: [MuellerMatrix::zeros(); 3],
        total_internal_reflection: true,
    };
    let (Some(t_i), Some(t_o)) = (refract(&-geom.omega_i, &n, eta), refract(&-geom.omega_o, &n, eta))
    else {
        return Ok(zero);
    };
    // Interior directions pointing back towards the boundary.
    let (u_i, u_o) = (-t_i, -t_o);
    let h = match h_prime {
        Some(h) => h.normalize(),
        None => {
            let s = u_i + u_o;
            if s.norm() < DEGENERATE_PROJECTION {
                return Err(Error::DegenerateFrame);
            }
            s.normalize()
        }
    };
    let denom = h.dot(&u_i) + h.dot(&u_o);
    if !(denom > 0.0) {
        return Err(Error::BackFacing { cos_i: h.dot(&u_i), cos_o: h.dot(&u_o) });
    }
    let theta_d = h.dot(&u_i).clamp(-1.0, 1.0).acos();
    let (incident, exitant) = &geom.frames;

    let p1 = plane_frame(&-geom.omega_i, &n, incident);
    let p1t = plane_frame(&t_i, &n, &p1);
    let p2 = plane_frame(&t_i, &h, &p1t);
    let p2r = plane_frame(&u_o, &h, &p2);
    let p3 = plane_frame(&u_o, &n, &p2r);
    let p3t = plane_frame(&geom.omega_o, &n, &p3);

    let ft_i = fresnel_matrix(&fresnel_coefficients(angles.theta_i, eta)?, FresnelKind::Transmission, 1.0)?;
    let ft_o = fresnel_matrix(&fresnel_coefficients(angles.theta_o, eta)?, FresnelKind::Transmission, 1.0)?;
    let fr = fresnel_matrix(
        &fresnel_coefficients(theta_d, phys.eta_p)?,
        FresnelKind::Reflection,
        reflection_cos_delta(theta_d, phys.eta_p),
    )?;

    let chain = rot(&p3t, exitant) * ft_o * rot(&p2r, &p3) * fr * rot(&p1t, &p2) * ft_i * rot(incident, &p1);
    let r = henyey_greenstein(t_i.dot(&u_o), phys.g) / denom;
    Ok(PhysicalSsOutput {
        mueller: phys.rho_ss.map(|a| chain.scale(a * r)),
        total_internal_reflection: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::random_configuration;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn phys(g: f64, rho: f64) -> PhysicalSsParams {
        PhysicalSsParams { eta_p: 1.3, g, rho_ss: [rho; 3] }
    }

    #[test]
    fn isotropic_phase_is_constant() {
        for c in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert!((henyey_greenstein(c, 0.0) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_normalizes_over_sphere() {
        for g in [-0.5, 0.0, 0.3, 0.8] {
            let n = 100_000;
            let h = 2.0 / n as f64;
            let total: f64 = (0..n)
                .map(|k| 2.0 * PI * henyey_greenstein(-1.0 + (k as f64 + 0.5) * h, g) * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-4, "g {g}: {total}");
        }
    }

    #[test]
    fn refraction_obeys_snell() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let g = random_configuration(&mut rng, 1.5);
            let eta = rng.random_range(1.1..2.0);
            let t = refract(&-g.omega_i, &g.n, eta).unwrap();
            let sin_i = g.n.cross(&g.omega_i).norm();
            let sin_t = g.n.cross(&t).norm();
            assert!((sin_i - eta * sin_t).abs() < 1e-12);
            assert!(t.dot(&g.n) < 0.0);
        }
        assert!(refract(&Vec3::new(-0.9, 0.0, -0.1).normalize(), &Vec3::z(), 0.7).is_none());
    }

    #[test]
    fn linear_in_albedo() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let g = random_configuration(&mut rng, 1.4);
            let a = single_scattering_physical(&g, &phys(0.0, 0.2), 1.5, None).unwrap();
            let b = single_scattering_physical(&g, &phys(0.0, 0.6), 1.5, None).unwrap();
            assert!(b.mueller[0].max_abs_diff(&a.mueller[0].scale(3.0)) < 1e-12);
        }
    }

    #[test]
    fn index_matched_boundary_reduces_to_interior_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let g = random_configuration(&mut rng, 1.4);
            let out = single_scattering_physical(&g, &phys(0.0, 1.0), 1.0, None).unwrap();
            let h = (g.omega_i + g.omega_o).normalize();
            let (inc, exi) = &g.frames;
            let p = plane_frame(&-g.omega_i, &h, inc);
            let q = plane_frame(&g.omega_o, &h, &p);
            let theta_d = h.dot(&g.omega_i).acos();
            let f = fresnel_coefficients(theta_d, 1.3).unwrap();
            let fr = fresnel_matrix(&f, FresnelKind::Reflection, reflection_cos_delta(theta_d, 1.3)).unwrap();
            let r = henyey_greenstein(-g.omega_i.dot(&g.omega_o), 0.0) / (2.0 * h.dot(&g.omega_i));
            let expect = (rot(&q, exi) * fr * rot(inc, &p)).scale(r);
            assert!(out.mueller[0].max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn intensity_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let g = random_configuration(&mut rng, 1.5);
            let p = PhysicalSsParams {
                eta_p: rng.random_range(1.05..2.0),
                g: rng.random_range(-0.9..0.9),
                rho_ss: [rng.random_range(0.0..1.0); 3],
            };
            let out = single_scattering_physical(&g, &p, rng.random_range(1.1..2.0), None).unwrap();
            assert!(out.mueller[0].get(0, 0) >= 0.0);
        }
    }

    #[test]
    fn total_internal_reflection_is_flagged() {
        let n = Vec3::z();
        let w = Vec3::new(0.9, 0.0, 0.2).normalize();
        let g = SurfaceGeometry::new(n, w, w, &Vec3::y(), &Vec3::y()).unwrap();
        let out = single_scattering_physical(&g, &phys(0.0, 1.0), 0.8, None).unwrap();
        assert!(out.total_internal_reflection);
        assert_eq!(out.mueller[0], MuellerMatrix::zeros());
    }
}
