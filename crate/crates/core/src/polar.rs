//! Stokes/Mueller algebra, dielectric Fresnel terms and local polarization
//! frames.
//!
//! Conventions used throughout the crate:
//!
//! * A Stokes vector is `[s0, s1, s2, s3]` with `s1 > 0` meaning polarization
//!   along the frame's x-axis.
//! * A [`LocalFrame`] is right-handed with `x = y × z` and `z` along the
//!   propagation direction. The incident frame points from the light towards
//!   the surface (`z = -ωi`), the exitant frame from the surface towards the
//!   camera (`z = ωo`).
//! * Azimuths are `atan2(v·y, v·x)`, counter-clockwise from +x.
//! * Dielectrics only: the Fresnel retardance is `δ ∈ {0, π}`, so `sin δ = 0`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul};

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::real::{c, max_re, Real};

pub type Vec3 = Vector3<f64>;

/// Below this norm an in-plane projection is treated as undefined.
pub const DEGENERATE_PROJECTION: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesVector(pub Vector4<f64>);

impl StokesVector {
    pub fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        StokesVector(Vector4::new(s0, s1, s2, s3))
    }

    pub fn unpolarized(s0: f64) -> Self {
        Self::new(s0, 0.0, 0.0, 0.0)
    }

    /// Unit-radiance light through a horizontal linear polarizer.
    pub fn horizontal() -> Self {
        Self::new(1.0, 1.0, 0.0, 0.0)
    }

    pub fn s0(&self) -> f64 {
        self.0[0]
    }
    pub fn s1(&self) -> f64 {
        self.0[1]
    }
    pub fn s2(&self) -> f64 {
        self.0[2]
    }
    pub fn s3(&self) -> f64 {
        self.0[3]
    }

    pub fn scale(&self, k: f64) -> Self {
        StokesVector(self.0 * k)
    }

    pub fn polarized_magnitude(&self) -> f64 {
        (self.s1().powi(2) + self.s2().powi(2) + self.s3().powi(2)).sqrt()
    }

    /// `s0 ≥ 0` and the polarized part does not exceed the total radiance.
    pub fn is_physical(&self, rel_eps: f64) -> bool {
        self.s0() >= 0.0 && self.polarized_magnitude() <= self.s0() * (1.0 + rel_eps) + 1e-300
    }
}

impl Add for StokesVector {
    type Output = StokesVector;
    fn add(self, rhs: Self) -> Self {
        StokesVector(self.0 + rhs.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuellerMatrix(pub Matrix4<f64>);

impl MuellerMatrix {
    pub fn identity() -> Self {
        MuellerMatrix(Matrix4::identity())
    }

    pub fn zeros() -> Self {
        MuellerMatrix(Matrix4::zeros())
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Self {
        MuellerMatrix(Matrix4::from_fn(|r, c| rows[r][c]))
    }

    pub fn diag(d: [f64; 4]) -> Self {
        MuellerMatrix(Matrix4::from_diagonal(&Vector4::from(d)))
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[(r, c)]
    }

    pub fn scale(&self, k: f64) -> Self {
        MuellerMatrix(self.0 * k)
    }

    pub fn apply(&self, s: &StokesVector) -> StokesVector {
        StokesVector(self.0 * s.0)
    }

    pub fn max_abs_diff(&self, other: &MuellerMatrix) -> f64 {
        (self.0 - other.0).amax()
    }
}

impl Mul for MuellerMatrix {
    type Output = MuellerMatrix;
    fn mul(self, rhs: Self) -> Self {
        MuellerMatrix(self.0 * rhs.0)
    }
}

impl Mul<StokesVector> for MuellerMatrix {
    type Output = StokesVector;
    fn mul(self, rhs: StokesVector) -> StokesVector {
        self.apply(&rhs)
    }
}

impl Add for MuellerMatrix {
    type Output = MuellerMatrix;
    fn add(self, rhs: Self) -> Self {
        MuellerMatrix(self.0 + rhs.0)
    }
}

/// Counter-clockwise frame rotation by `vartheta`.
///
/// `rotation_mueller(t)` re-expresses a Stokes vector given in frame A in the
/// frame obtained by rotating A by `t` about the propagation axis.
pub fn rotation_mueller(vartheta: f64) -> MuellerMatrix {
    let (s, c) = (2.0 * vartheta).sin_cos();
    MuellerMatrix::from_rows([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c, s, 0.0],
        [0.0, -s, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
}

/// Perpendicular/parallel Fresnel reflectances at an air/dielectric boundary.
///
/// Generic so the optimizer can differentiate through it. `eta` is the
/// relative index (transmitted over incident side).
pub fn fresnel_reflectance<D: Real>(cos_theta: D, eta: D) -> (D, D) {
    let sin2 = max_re(c::<D>(1.0) - cos_theta * cos_theta, 0.0);
    if eta.re() == 1.0 {
        // Index-matched: no boundary. Avoids rounding noise of order 1e-17.
        return (c(0.0), c(0.0));
    }
    let sin2_t = sin2 / (eta * eta);
    if sin2_t.re() >= 1.0 {
        return (c(1.0), c(1.0));
    }
    let cos_t = (c::<D>(1.0) - sin2_t).sqrt();
    let rs = (cos_theta - eta * cos_t) / (cos_theta + eta * cos_t);
    let rp = (eta * cos_theta - cos_t) / (eta * cos_theta + cos_t);
    (rs * rs, rp * rp)
}

/// `R+ = (R⊥ + R∥) / 2`.
pub fn fresnel_r_plus<D: Real>(cos_theta: D, eta: D) -> D {
    let (rs, rp) = fresnel_reflectance(cos_theta, eta);
    (rs + rp) * 0.5
}

/// `(T+, T-)` with `T = 1 - R` per component.
pub fn fresnel_t_pm<D: Real>(cos_theta: D, eta: D) -> (D, D) {
    let (rs, rp) = fresnel_reflectance(cos_theta, eta);
    let ts = c::<D>(1.0) - rs;
    let tp = c::<D>(1.0) - rp;
    ((ts + tp) * 0.5, (ts - tp) * 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FresnelCoefficients {
    pub r_perp: f64,
    pub r_par: f64,
    pub t_perp: f64,
    pub t_par: f64,
}

impl FresnelCoefficients {
    pub fn r_plus(&self) -> f64 {
        0.5 * (self.r_perp + self.r_par)
    }
    pub fn r_minus(&self) -> f64 {
        0.5 * (self.r_perp - self.r_par)
    }
    pub fn r_cross(&self) -> f64 {
        (self.r_perp * self.r_par).sqrt()
    }
    pub fn t_plus(&self) -> f64 {
        0.5 * (self.t_perp + self.t_par)
    }
    pub fn t_minus(&self) -> f64 {
        0.5 * (self.t_perp - self.t_par)
    }
    pub fn t_cross(&self) -> f64 {
        (self.t_perp * self.t_par).sqrt()
    }
}

/// Fresnel coefficients for incidence angle `theta` on a medium of relative
/// index `eta`. Beyond the critical angle (`eta < 1`) both reflectances are 1.
pub fn fresnel_coefficients(theta: f64, eta: f64) -> Result<FresnelCoefficients> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("theta"));
    }
    if !eta.is_finite() {
        return Err(Error::NonFinite("eta"));
    }
    if eta <= 0.0 {
        return Err(Error::InvalidParameter { name: "eta", value: eta });
    }
    let (r_perp, r_par) = fresnel_reflectance(theta.cos().max(0.0), eta);
    Ok(FresnelCoefficients {
        r_perp,
        r_par,
        t_perp: 1.0 - r_perp,
        t_par: 1.0 - r_par,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FresnelKind {
    Reflection,
    Transmission,
}

/// Fresnel Mueller matrix with `sin δ = 0`; the lower-right block is
/// `cos δ · F×` on the diagonal.
pub fn fresnel_matrix(
    coeffs: &FresnelCoefficients,
    kind: FresnelKind,
    cos_delta: f64,
) -> Result<MuellerMatrix> {
    if cos_delta != 1.0 && cos_delta != -1.0 {
        return Err(Error::InvalidPhase(cos_delta));
    }
    let (plus, minus, cross) = match kind {
        FresnelKind::Reflection => (coeffs.r_plus(), coeffs.r_minus(), coeffs.r_cross()),
        FresnelKind::Transmission => (coeffs.t_plus(), coeffs.t_minus(), coeffs.t_cross()),
    };
    let d = cross * cos_delta;
    Ok(MuellerMatrix::from_rows([
        [plus, minus, 0.0, 0.0],
        [minus, plus, 0.0, 0.0],
        [0.0, 0.0, d, 0.0],
        [0.0, 0.0, 0.0, d],
    ]))
}

pub fn brewster_angle(eta: f64) -> f64 {
    eta.atan()
}

/// Retardance sign of a dielectric reflection: `-1` below Brewster, `+1` at
/// or above.
pub fn reflection_cos_delta(theta: f64, eta: f64) -> f64 {
    if theta < brewster_angle(eta) {
        -1.0
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl LocalFrame {
    /// Frame with `z` along `propagation` and `y` along the part of `align`
    /// orthogonal to it.
    pub fn aligned(propagation: &Vec3, align: &Vec3) -> Result<Self> {
        let z = propagation.normalize();
        let y = align - z * align.dot(&z);
        let norm = y.norm();
        if !(norm > DEGENERATE_PROJECTION) {
            return Err(Error::DegenerateFrame);
        }
        let y = y / norm;
        let x = y.cross(&z);
        Ok(LocalFrame { x, y, z })
    }

    /// Azimuth of `v` projected onto the frame's xy-plane, or `None` when the
    /// projection vanishes.
    pub fn azimuth(&self, v: &Vec3) -> Option<f64> {
        let (px, py) = (v.dot(&self.x), v.dot(&self.y));
        if px.hypot(py) < 1e-12 {
            None
        } else {
            Some(py.atan2(px))
        }
    }

    /// Angle `t` such that `rotation_mueller(t)` maps Stokes vectors from
    /// `self` to `other`. Both frames must share the propagation axis.
    pub fn rotation_to(&self, other: &LocalFrame) -> f64 {
        other.x.dot(&self.y).atan2(other.x.dot(&self.x))
    }

    pub fn orthonormality_error(&self) -> f64 {
        let dots = [self.x.dot(&self.y), self.y.dot(&self.z), self.z.dot(&self.x)];
        let norms = [self.x.norm(), self.y.norm(), self.z.norm()];
        dots.iter()
            .map(|d| d.abs())
            .chain(norms.iter().map(|n| (n - 1.0).abs()))
            .fold(0.0, f64::max)
    }
}

/// Incident and exitant polarization frames.
///
/// `light_up` is the direction orthogonal to the flash polarizer's
/// transmission axis; for a horizontal polarizer mounted with the camera it
/// equals the camera up vector.
pub fn build_frames(
    omega_i: &Vec3,
    omega_o: &Vec3,
    cam_up: &Vec3,
    light_up: &Vec3,
) -> Result<(LocalFrame, LocalFrame)> {
    let incident = LocalFrame::aligned(&-omega_i, light_up)?;
    let exitant = LocalFrame::aligned(omega_o, cam_up)?;
    Ok((incident, exitant))
}

/// Angles of a single light/surface/camera configuration.
///
/// `phi_*` are azimuths of the normal, `varphi_*` of the halfway vector, in
/// the incident/exitant frames; `rot_*` are the corresponding frame rotations
/// onto the plane of incidence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionAngles {
    pub theta_i: f64,
    pub theta_o: f64,
    pub theta_h: f64,
    pub theta_d: f64,
    pub phi_i: f64,
    pub phi_o: f64,
    pub varphi_i: f64,
    pub varphi_o: f64,
    pub rot_phi_i: f64,
    pub rot_phi_o: f64,
    pub rot_varphi_i: f64,
    pub rot_varphi_o: f64,
    /// The normal projects to a point in one of the frames; its azimuth was set to 0.
    pub degenerate_phi: bool,
    /// Same for the halfway vector.
    pub degenerate_varphi: bool,
}

impl InteractionAngles {
    /// Build from explicit zenith and azimuth angles.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        theta_i: f64,
        theta_o: f64,
        theta_h: f64,
        theta_d: f64,
        phi_i: f64,
        phi_o: f64,
        varphi_i: f64,
        varphi_o: f64,
    ) -> Self {
        InteractionAngles {
            theta_i,
            theta_o,
            theta_h,
            theta_d,
            phi_i,
            phi_o,
            varphi_i,
            varphi_o,
            rot_phi_i: phi_i - FRAC_PI_2,
            rot_phi_o: phi_o - FRAC_PI_2,
            rot_varphi_i: varphi_i - FRAC_PI_2,
            rot_varphi_o: varphi_o - FRAC_PI_2,
            degenerate_phi: false,
            degenerate_varphi: false,
        }
    }

    pub fn alpha_i(&self) -> f64 {
        (2.0 * self.phi_i).sin()
    }
    pub fn alpha_o(&self) -> f64 {
        (2.0 * self.phi_o).sin()
    }
    pub fn beta_i(&self) -> f64 {
        (2.0 * self.phi_i).cos()
    }
    pub fn beta_o(&self) -> f64 {
        (2.0 * self.phi_o).cos()
    }
    pub fn chi_i(&self) -> f64 {
        (2.0 * self.varphi_i).sin()
    }
    pub fn chi_o(&self) -> f64 {
        (2.0 * self.varphi_o).sin()
    }
    pub fn gamma_i(&self) -> f64 {
        (2.0 * self.varphi_i).cos()
    }
    pub fn gamma_o(&self) -> f64 {
        (2.0 * self.varphi_o).cos()
    }
    pub fn cos_theta_i(&self) -> f64 {
        self.theta_i.cos()
    }
    pub fn cos_theta_o(&self) -> f64 {
        self.theta_o.cos()
    }
}

pub fn interaction_angles(
    n: &Vec3,
    omega_i: &Vec3,
    omega_o: &Vec3,
    frames: &(LocalFrame, LocalFrame),
) -> Result<InteractionAngles> {
    let cos_i = n.dot(omega_i);
    let cos_o = n.dot(omega_o);
    if !(cos_i > 0.0 && cos_o > 0.0) {
        return Err(Error::BackFacing { cos_i, cos_o });
    }
    let h = (omega_i + omega_o).normalize();
    let (incident, exitant) = frames;
    let az = |f: &LocalFrame, v: &Vec3| f.azimuth(v);
    let (phi_i, phi_o) = (az(incident, n), az(exitant, n));
    let (varphi_i, varphi_o) = (az(incident, &h), az(exitant, &h));
    let mut a = InteractionAngles::from_parts(
        cos_i.min(1.0).acos(),
        cos_o.min(1.0).acos(),
        n.dot(&h).clamp(-1.0, 1.0).acos(),
        omega_i.dot(&h).clamp(-1.0, 1.0).acos(),
        phi_i.unwrap_or(0.0),
        phi_o.unwrap_or(0.0),
        varphi_i.unwrap_or(0.0),
        varphi_o.unwrap_or(0.0),
    );
    a.degenerate_phi = phi_i.is_none() || phi_o.is_none();
    a.degenerate_varphi = varphi_i.is_none() || varphi_o.is_none();
    Ok(a)
}

/// Directions of one light/surface/camera configuration with their
/// polarization frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceGeometry {
    pub n: Vec3,
    pub omega_i: Vec3,
    pub omega_o: Vec3,
    pub frames: (LocalFrame, LocalFrame),
}

impl SurfaceGeometry {
    pub fn new(n: Vec3, omega_i: Vec3, omega_o: Vec3, cam_up: &Vec3, light_up: &Vec3) -> Result<Self> {
        let frames = build_frames(&omega_i, &omega_o, cam_up, light_up)?;
        Ok(SurfaceGeometry { n, omega_i, omega_o, frames })
    }

    pub fn angles(&self) -> Result<InteractionAngles> {
        interaction_angles(&self.n, &self.omega_i, &self.omega_o, &self.frames)
    }
}

/// Degree and angle of polarization; the angle lies in `[0, π)` and is 0 for
/// unpolarized light.
pub fn stokes_to_dop_aolp(s: &StokesVector) -> Result<(f64, f64)> {
    if !(s.s0() > 0.0) {
        return Err(Error::Unlit(s.s0()));
    }
    let dop = s.polarized_magnitude() / s.s0();
    let mut aolp = 0.5 * s.s2().atan2(s.s1());
    if aolp < 0.0 {
        aolp += PI;
    }
    if aolp >= PI {
        aolp -= PI;
    }
    Ok((dop, aolp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotation_identity_and_half_turn() {
        assert_abs_diff_eq!(rotation_mueller(0.0).0, Matrix4::identity(), epsilon = 0.0);
        let q = rotation_mueller(FRAC_PI_2);
        let expect = MuellerMatrix::diag([1.0, -1.0, -1.0, 1.0]);
        assert!(q.max_abs_diff(&expect) < 1e-15);
        assert!(rotation_mueller(PI).max_abs_diff(&MuellerMatrix::identity()) < 1e-15);
    }

    #[test]
    fn rotation_composes_additively() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (a, b) = (rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0));
            let lhs = rotation_mueller(a) * rotation_mueller(b);
            assert!(lhs.max_abs_diff(&rotation_mueller(a + b)) < 1e-12);
            let inv = rotation_mueller(a) * rotation_mueller(-a);
            assert!(inv.max_abs_diff(&MuellerMatrix::identity()) < 1e-12);
        }
    }

    #[test]
    fn fresnel_normal_incidence() {
        let f = fresnel_coefficients(0.0, 1.5).unwrap();
        assert_abs_diff_eq!(f.r_perp, 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(f.r_par, 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(f.t_plus(), 0.96, epsilon = 1e-15);
    }

    #[test]
    fn fresnel_brewster_and_grazing() {
        let f = fresnel_coefficients(brewster_angle(1.5), 1.5).unwrap();
        assert!(f.r_par < 1e-12);
        // The parallel component approaches 1 only linearly in the grazing
        // cosine: 1 - R∥ ≈ 1.4e-3 at 89.99° and 1.4e-4 at 89.999°.
        let g = fresnel_coefficients(89.999f64.to_radians(), 1.5).unwrap();
        assert!(1.0 - g.r_perp < 1e-3 && 1.0 - g.r_par < 1e-3);
        let g = fresnel_coefficients(89.99f64.to_radians(), 1.5).unwrap();
        assert!(1.0 - g.r_perp < 1e-3 && 1.0 - g.r_par < 2e-3);
    }

    #[test]
    fn fresnel_total_internal_reflection() {
        let f = fresnel_coefficients(60f64.to_radians(), 1.0 / 1.5).unwrap();
        assert_eq!((f.r_perp, f.r_par), (1.0, 1.0));
        assert_eq!((f.t_perp, f.t_par), (0.0, 0.0));
    }

    #[test]
    fn fresnel_rejects_bad_input() {
        assert!(fresnel_coefficients(f64::NAN, 1.5).is_err());
        assert!(fresnel_coefficients(0.1, f64::INFINITY).is_err());
        assert!(fresnel_coefficients(0.1, 0.0).is_err());
    }

    #[test]
    fn fresnel_perp_is_monotone() {
        for eta in [1.0, 1.2, 1.5, 2.0, 3.0] {
            let mut prev = -1.0;
            for deg in 0..90 {
                let r = fresnel_coefficients((deg as f64).to_radians(), eta).unwrap().r_perp;
                assert!(r >= prev, "eta {eta} deg {deg}");
                prev = r;
            }
        }
    }

    #[test]
    fn brewster_values() {
        assert_abs_diff_eq!(brewster_angle(1.0), std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(brewster_angle(1.5), 0.982_793_723_247_329, epsilon = 1e-12);
        assert_abs_diff_eq!(brewster_angle(1.463), 0.971_212, epsilon = 1e-5);
    }

    #[test]
    fn fresnel_matrix_shapes() {
        let f = fresnel_coefficients(0.0, 1.5).unwrap();
        let r = fresnel_matrix(&f, FresnelKind::Reflection, -1.0).unwrap();
        assert_abs_diff_eq!(r.get(0, 0), 0.04, epsilon = 1e-15);
        assert_eq!(r.get(0, 1), 0.0);
        assert_abs_diff_eq!(r.get(2, 2), -0.04, epsilon = 1e-15);
        let t = fresnel_matrix(&f, FresnelKind::Transmission, 1.0).unwrap();
        assert_abs_diff_eq!(t.get(0, 0), 0.96, epsilon = 1e-15);
        for (r, c) in [(0, 1), (1, 0), (0, 2), (2, 3), (3, 2)] {
            assert_eq!(t.get(r, c), 0.0);
        }
        assert!(matches!(
            fresnel_matrix(&f, FresnelKind::Reflection, 0.5),
            Err(Error::InvalidPhase(_))
        ));
    }

    #[test]
    fn frames_axis_aligned() {
        let z = Vec3::z();
        let up = Vec3::y();
        let (_, e) = build_frames(&z, &z, &up, &up).unwrap();
        assert_abs_diff_eq!(e.y, Vec3::y(), epsilon = 1e-15);
        assert_abs_diff_eq!(e.x, Vec3::x(), epsilon = 1e-15);
        assert_abs_diff_eq!(e.z, Vec3::z(), epsilon = 1e-15);
    }

    #[test]
    fn frames_gram_schmidt() {
        let t = 10f64.to_radians();
        let wo = Vec3::new(0.0, t.sin(), t.cos());
        let (_, e) = build_frames(&wo, &wo, &Vec3::y(), &Vec3::y()).unwrap();
        let expect = (Vec3::y() - wo * t.sin()).normalize();
        assert_abs_diff_eq!(e.y, expect, epsilon = 1e-15);
        assert_eq!(e.y.x, 0.0);
        assert!(e.orthonormality_error() < 1e-12);
    }

    #[test]
    fn frames_degenerate() {
        let z = Vec3::z();
        assert!(matches!(
            build_frames(&z, &z, &z, &Vec3::y()),
            Err(Error::DegenerateFrame)
        ));
    }

    #[test]
    fn angles_at_normal_retroreflection() {
        let n = Vec3::z();
        let f = build_frames(&n, &n, &Vec3::y(), &Vec3::y()).unwrap();
        let a = interaction_angles(&n, &n, &n, &f).unwrap();
        assert_eq!((a.theta_i, a.theta_o, a.theta_h, a.theta_d), (0.0, 0.0, 0.0, 0.0));
        assert!(a.degenerate_phi && a.degenerate_varphi);
    }

    #[test]
    fn coaxial_azimuth_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let w = random_unit(&mut rng);
            let n = tilt(&w, rng.random_range(0.05..1.3), rng.random_range(0.0..2.0 * PI));
            let f = build_frames(&w, &w, &Vec3::z(), &Vec3::z()).unwrap();
            let a = interaction_angles(&n, &w, &w, &f).unwrap();
            let wrap = |x: f64| x.rem_euclid(2.0 * PI);
            let d1 = wrap(a.phi_i - (PI - a.phi_o));
            assert!(d1.min(2.0 * PI - d1) < 1e-9);
            let d2 = wrap(a.varphi_i - (2.0 * PI - a.varphi_o));
            assert!(d2.min(2.0 * PI - d2) < 1e-9);
            assert_abs_diff_eq!(a.alpha_i(), -a.alpha_o(), epsilon = 1e-9);
            assert_abs_diff_eq!(a.beta_i(), a.beta_o(), epsilon = 1e-9);
        }
    }

    #[test]
    fn back_facing_is_rejected() {
        let n = Vec3::z();
        let w = -Vec3::z();
        let f = build_frames(&w, &w, &Vec3::y(), &Vec3::y()).unwrap();
        assert!(matches!(
            interaction_angles(&n, &w, &w, &f),
            Err(Error::BackFacing { .. })
        ));
    }

    #[test]
    fn dop_aolp_examples() {
        let (d, a) = stokes_to_dop_aolp(&StokesVector::new(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!((d, a), (1.0, 0.0));
        let (d, a) = stokes_to_dop_aolp(&StokesVector::unpolarized(1.0)).unwrap();
        assert_eq!((d, a), (0.0, 0.0));
        let (d, a) = stokes_to_dop_aolp(&StokesVector::new(2.0, 0.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        assert!(matches!(
            stokes_to_dop_aolp(&StokesVector::unpolarized(0.0)),
            Err(Error::Unlit(_))
        ));
    }

    pub(crate) fn random_unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    /// Rotate `w` away from itself by `angle` in the direction given by `az`.
    pub(crate) fn tilt(w: &Vec3, angle: f64, az: f64) -> Vec3 {
        let helper = if w.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = w.cross(&helper).normalize();
        let v = w.cross(&u);
        (w * angle.cos() + (u * az.cos() + v * az.sin()) * angle.sin()).normalize()
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-zero", |(x, y, z)| (x * x + y * y + z * z) > 0.01)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
    }

    proptest! {
        #[test]
        fn fresnel_energy_and_bounds(theta in 0.0f64..1.57, eta in 1.0f64..3.0) {
            let f = fresnel_coefficients(theta, eta).unwrap();
            prop_assert_eq!(f.r_perp + f.t_perp, 1.0);
            prop_assert_eq!(f.r_par + f.t_par, 1.0);
            prop_assert!((0.0..=1.0).contains(&f.r_perp) && (0.0..=1.0).contains(&f.r_par));
            prop_assert!(f.r_minus().abs() <= f.r_plus());
            prop_assert!(f.t_minus().abs() <= f.t_plus());
        }

        #[test]
        fn frames_are_orthonormal(wi in arb_unit(), wo in arb_unit(), up in arb_unit()) {
            if let Ok((a, b)) = build_frames(&wi, &wo, &up, &up) {
                prop_assert!(a.orthonormality_error() < 1e-10);
                prop_assert!(b.orthonormality_error() < 1e-10);
                prop_assert!((a.x - a.y.cross(&a.z)).norm() < 1e-12);
            }
        }

        #[test]
        fn trig_shorthands_on_unit_circle(n in arb_unit(), wi in arb_unit(), wo in arb_unit()) {
            let frames = build_frames(&wi, &wo, &Vec3::z(), &Vec3::z());
            if let Ok(f) = frames {
                if let Ok(a) = interaction_angles(&n, &wi, &wo, &f) {
                    prop_assert!((a.alpha_i().powi(2) + a.beta_i().powi(2) - 1.0).abs() < 1e-12);
                    prop_assert_eq!(a.rot_phi_o, a.phi_o - FRAC_PI_2);
                    prop_assert!(a.theta_i <= FRAC_PI_2 && a.theta_o <= FRAC_PI_2);
                }
            }
        }
    }
}
