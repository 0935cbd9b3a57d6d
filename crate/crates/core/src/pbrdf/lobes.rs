//! Mueller-matrix lobes. Each lobe exists both as the explicit product of
//! rotation and Fresnel matrices and as an expanded closed form; the two are
//! kept separate on purpose so they can check each other.

use crate::error::Result;
use crate::pbrdf::microfacet::microfacet_kernel;
use crate::pbrdf::params::PbrdfParams;
use crate::polar::{
    fresnel_coefficients, fresnel_matrix, reflection_cos_delta, rotation_mueller,
    FresnelCoefficients, FresnelKind, InteractionAngles, MuellerMatrix,
};

/// One Mueller matrix per color channel (R, G, B).
pub type RgbMueller = [MuellerMatrix; 3];

fn per_channel(m: MuellerMatrix, albedo: [f64; 3]) -> RgbMueller {
    albedo.map(|a| m.scale(a))
}

/// Diffuse lobe for a unit albedo, as a rotation/Fresnel product.
pub fn diffuse_chain(a: &InteractionAngles, eta: f64) -> Result<MuellerMatrix> {
    let ti = fresnel_matrix(&fresnel_coefficients(a.theta_i, eta)?, FresnelKind::Transmission, 1.0)?;
    let to = fresnel_matrix(&fresnel_coefficients(a.theta_o, eta)?, FresnelKind::Transmission, 1.0)?;
    let depol = MuellerMatrix::diag([1.0, 0.0, 0.0, 0.0]);
    Ok(rotation_mueller(-a.rot_phi_o) * to * depol * ti * rotation_mueller(a.rot_phi_i))
}

/// Diffuse lobe for a unit albedo in expanded form.
pub fn diffuse_closed_form(a: &InteractionAngles, eta: f64) -> Result<MuellerMatrix> {
    diffuse_closed_form_signed(a, eta, 1.0)
}

/// Expanded diffuse lobe with the sign of every `T⁻` factor multiplied by
/// `minus_sign`. Only `minus_sign = 1` is physical; the other value exists so
/// validation can demonstrate that the chain comparison catches sign errors.
#[doc(hidden)]
pub fn diffuse_closed_form_signed(
    a: &InteractionAngles,
    eta: f64,
    minus_sign: f64,
) -> Result<MuellerMatrix> {
    let fi = fresnel_coefficients(a.theta_i, eta)?;
    let fo = fresnel_coefficients(a.theta_o, eta)?;
    let (tip, tim) = (fi.t_plus(), fi.t_minus() * minus_sign);
    let (top, tom) = (fo.t_plus(), fo.t_minus() * minus_sign);
    let row = [tip, -tim * a.beta_i(), -tim * a.alpha_i(), 0.0];
    let col = [top, -tom * a.beta_o(), -tom * a.alpha_o(), 0.0];
    Ok(MuellerMatrix::from_rows(std::array::from_fn(|r| {
        std::array::from_fn(|c| col[r] * row[c])
    })))
}

fn reflection_matrix(a: &InteractionAngles, eta: f64) -> Result<(FresnelCoefficients, f64)> {
    let f = fresnel_coefficients(a.theta_d, eta)?;
    Ok((f, reflection_cos_delta(a.theta_d, eta)))
}

/// Microfacet reflection Mueller matrix without the `κ` factor, as a product.
pub fn reflection_chain(a: &InteractionAngles, eta: f64) -> Result<MuellerMatrix> {
    let (f, cos_delta) = reflection_matrix(a, eta)?;
    let fr = fresnel_matrix(&f, FresnelKind::Reflection, cos_delta)?;
    Ok(rotation_mueller(-a.rot_varphi_o) * fr * rotation_mueller(a.rot_varphi_i))
}

/// Microfacet reflection Mueller matrix without the `κ` factor, expanded.
pub fn reflection_closed_form(a: &InteractionAngles, eta: f64) -> Result<MuellerMatrix> {
    let (f, cos_delta) = reflection_matrix(a, eta)?;
    let (rp, rm, d) = (f.r_plus(), f.r_minus(), f.r_cross() * cos_delta);
    let (gi, go, xi, xo) = (a.gamma_i(), a.gamma_o(), a.chi_i(), a.chi_o());
    Ok(MuellerMatrix::from_rows([
        [rp, -rm * gi, -rm * xi, 0.0],
        [-rm * go, rp * gi * go + d * xi * xo, rp * xi * go - d * gi * xo, 0.0],
        [-rm * xo, rp * gi * xo - d * xi * go, rp * xi * xo + d * gi * go, 0.0],
        [0.0, 0.0, 0.0, d],
    ]))
}

/// `D·G/(4 cos θi cos θo)` for the given roughness.
pub fn kappa_unit(a: &InteractionAngles, sigma: f64) -> f64 {
    microfacet_kernel(a.theta_h.cos(), a.cos_theta_i(), a.cos_theta_o(), sigma)
}

pub fn diffuse_lobe(a: &InteractionAngles, p: &PbrdfParams) -> Result<RgbMueller> {
    Ok(per_channel(diffuse_closed_form(a, p.eta)?, p.rho_d))
}

pub fn specular_lobe(a: &InteractionAngles, p: &PbrdfParams) -> Result<MuellerMatrix> {
    let k = p.rho_s * kappa_unit(a, p.sigma_s);
    Ok(reflection_closed_form(a, p.eta)?.scale(k))
}

pub fn single_scattering_practical(a: &InteractionAngles, p: &PbrdfParams) -> Result<RgbMueller> {
    let m = reflection_closed_form(a, p.eta)?.scale(kappa_unit(a, p.sigma_ss));
    Ok(per_channel(m, p.rho_ss))
}

/// Full practical model: diffuse + specular + single scattering.
pub fn pbrdf_eval(a: &InteractionAngles, p: &PbrdfParams) -> Result<RgbMueller> {
    let d = diffuse_lobe(a, p)?;
    let s = specular_lobe(a, p)?;
    let ss = single_scattering_practical(a, p)?;
    Ok(std::array::from_fn(|ch| d[ch] + s + ss[ch]))
}

/// Sparse near-coaxial form.
///
/// Incident and exitant quantities are kept distinct where the product
/// structure allows it (`T⁺ᵢT⁺ₒ`, `T⁻ₒT⁺ᵢ`, ...), which coincides with the
/// shared-angle form when the light and camera are collinear. Dropped terms:
/// `R⁻`, the `T⁻T⁻` block and the `R× ≠ R⁺` difference.
pub fn coaxial_pbrdf(a: &InteractionAngles, p: &PbrdfParams) -> Result<RgbMueller> {
    let fi = fresnel_coefficients(a.theta_i, p.eta)?;
    let fo = fresnel_coefficients(a.theta_o, p.eta)?;
    let r_plus = fresnel_coefficients(a.theta_d, p.eta)?.r_plus();
    let (alpha, beta) = (a.alpha_o(), a.beta_o());
    let ks = p.rho_s * kappa_unit(a, p.sigma_s);
    let kss = kappa_unit(a, p.sigma_ss);
    Ok(std::array::from_fn(|ch| {
        let rd = p.rho_d[ch];
        let spec = (ks + p.rho_ss[ch] * kss) * r_plus;
        let row = rd * fo.t_plus() * fi.t_minus();
        let col = rd * fo.t_minus() * fi.t_plus();
        MuellerMatrix::from_rows([
            [rd * fi.t_plus() * fo.t_plus() + spec, -row * beta, row * alpha, 0.0],
            [-col * beta, spec, 0.0, 0.0],
            [-col * alpha, 0.0, -spec, 0.0],
            [0.0, 0.0, 0.0, -spec],
        ])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{brewster_angle, build_frames, interaction_angles, Vec3};
    use crate::sampling::{random_geometry, random_params};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_angles() -> InteractionAngles {
        let n = Vec3::z();
        let f = build_frames(&n, &n, &Vec3::y(), &Vec3::y()).unwrap();
        interaction_angles(&n, &n, &n, &f).unwrap()
    }

    #[test]
    fn chains_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (a, eta) = random_geometry(&mut rng);
            let d = diffuse_chain(&a, eta).unwrap().max_abs_diff(&diffuse_closed_form(&a, eta).unwrap());
            let s = reflection_chain(&a, eta).unwrap().max_abs_diff(&reflection_closed_form(&a, eta).unwrap());
            assert!(d < 1e-10 && s < 1e-10, "{d} {s}");
        }
    }

    #[test]
    fn sign_mutation_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let worst = (0..100)
            .map(|_| {
                let (a, eta) = random_geometry(&mut rng);
                diffuse_chain(&a, eta)
                    .unwrap()
                    .max_abs_diff(&diffuse_closed_form_signed(&a, eta, -1.0).unwrap())
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-3);
    }

    #[test]
    fn diffuse_at_normal_incidence() {
        let a = normal_angles();
        let p = PbrdfParams::diffuse_only(1.5, [0.5, 0.5, 0.5]);
        let m = diffuse_lobe(&a, &p).unwrap()[0];
        assert_abs_diff_eq!(m.get(0, 0), 0.5 * 0.96 * 0.96, epsilon = 1e-15);
        for r in 0..4 {
            for c in 0..4 {
                if (r, c) != (0, 0) {
                    assert_eq!(m.get(r, c).abs(), 0.0);
                }
            }
        }
    }

    #[test]
    fn diffuse_last_row_and_column_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let (a, eta) = random_geometry(&mut rng);
            let m = diffuse_chain(&a, eta).unwrap();
            for k in 0..4 {
                assert_eq!(m.get(3, k), 0.0);
                assert_eq!(m.get(k, 3), 0.0);
            }
        }
    }

    #[test]
    fn cos_delta_flips_across_brewster() {
        let eta = 1.5;
        let b = brewster_angle(eta);
        let mut a = normal_angles();
        a.theta_d = b - 1e-3;
        let below = reflection_closed_form(&a, eta).unwrap().get(3, 3);
        a.theta_d = b + 1e-3;
        let above = reflection_closed_form(&a, eta).unwrap().get(3, 3);
        assert!(below < 0.0 && above > 0.0);
        a.theta_d = 0.0;
        let m = reflection_closed_form(&a, eta).unwrap();
        assert_eq!((m.get(0, 1), m.get(1, 0)), (0.0, 0.0));
    }

    #[test]
    fn single_scattering_matches_specular_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let (a, _) = random_geometry(&mut rng);
            let mut p = random_params(&mut rng);
            p.rho_ss = [1.0; 3];
            p.rho_s = 1.0;
            p.sigma_ss = p.sigma_s;
            let ss = single_scattering_practical(&a, &p).unwrap();
            let s = specular_lobe(&a, &p).unwrap();
            assert!(ss[1].max_abs_diff(&s) == 0.0);
            p.rho_ss = [1.0, 0.0, 0.0];
            let ss = single_scattering_practical(&a, &p).unwrap();
            assert!(ss[1].0.amax() == 0.0 && ss[2].0.amax() == 0.0);
        }
    }

    #[test]
    fn lobe_switches() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let (a, _) = random_geometry(&mut rng);
            let p = random_params(&mut rng);
            let full = pbrdf_eval(&a, &p).unwrap();
            assert!(full.iter().all(|m| m.get(0, 0) >= 0.0));
            let d = PbrdfParams { rho_s: 0.0, rho_ss: [0.0; 3], ..p };
            let only = pbrdf_eval(&a, &d).unwrap();
            let diff = diffuse_lobe(&a, &d).unwrap();
            for ch in 0..3 {
                assert_eq!(only[ch], diff[ch]);
            }
            let z = PbrdfParams { rho_d: [0.0; 3], ..d };
            assert!(pbrdf_eval(&a, &z).unwrap().iter().all(|m| m.0.amax() == 0.0));
        }
    }

    #[test]
    fn specular_intensity_is_reciprocal() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..100 {
            let (a, eta) = random_geometry(&mut rng);
            let mut b = a;
            std::mem::swap(&mut b.theta_i, &mut b.theta_o);
            let p = PbrdfParams { eta, ..random_params(&mut rng) };
            let sa = specular_lobe(&a, &p).unwrap().get(0, 0);
            let sb = specular_lobe(&b, &p).unwrap().get(0, 0);
            assert!((sa - sb).abs() <= 1e-12 * sa.abs().max(1.0));
        }
    }

    #[test]
    fn coaxial_zero_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (a, _) = random_geometry(&mut rng);
        let m = coaxial_pbrdf(&a, &random_params(&mut rng)).unwrap();
        for ch in m {
            assert_eq!((ch.get(1, 2), ch.get(2, 1)), (0.0, 0.0));
        }
        let m = coaxial_pbrdf(&normal_angles(), &PbrdfParams::default()).unwrap();
        assert_eq!((m[0].get(0, 1), m[0].get(1, 0), m[0].get(0, 2)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn diffuse_dop_equals_transmission_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..200 {
            let (a, eta) = random_geometry(&mut rng);
            let m = diffuse_chain(&a, eta).unwrap();
            let s = m.apply(&crate::polar::StokesVector::unpolarized(1.0));
            let (dop, _) = crate::polar::stokes_to_dop_aolp(&s).unwrap();
            let f = fresnel_coefficients(a.theta_o, eta).unwrap();
            assert!((dop - (f.t_minus() / f.t_plus()).abs()).abs() < 1e-8);
        }
    }
}
