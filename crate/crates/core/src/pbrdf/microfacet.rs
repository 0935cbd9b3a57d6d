//! GGX normal distribution and separable Smith shadowing, with `α = σ`.

use std::f64::consts::PI;

use crate::real::{c, max_re, Real};

/// Floor applied to `n·ω` in the microfacet denominator.
pub const COS_FLOOR: f64 = 1e-4;

/// GGX density as a function of `cos θh`.
pub fn ggx_d<D: Real>(cos_h: D, sigma: D) -> D {
    let a2 = sigma * sigma;
    let c2 = cos_h * cos_h;
    let t = c2 * (a2 - 1.0) + 1.0;
    a2 / (t * t * PI)
}

/// Smith masking for one direction.
pub fn smith_g1<D: Real>(cos_t: D, sigma: D) -> D {
    let a2 = sigma * sigma;
    let c2 = cos_t * cos_t;
    let root = (a2 + (c::<D>(1.0) - a2) * c2).sqrt();
    cos_t * 2.0 / (cos_t + root)
}

/// `D·G / (4 cos θi cos θo)` without the albedo.
pub fn microfacet_kernel<D: Real>(cos_h: D, cos_i: D, cos_o: D, sigma: D) -> D {
    let g = smith_g1(cos_i, sigma) * smith_g1(cos_o, sigma);
    ggx_d(cos_h, sigma) * g / (max_re(cos_i, COS_FLOOR) * max_re(cos_o, COS_FLOOR) * 4.0)
}

pub fn ggx_ndf(theta_h: f64, sigma: f64) -> f64 {
    ggx_d(theta_h.cos(), sigma)
}

pub fn smith_g(theta_i: f64, theta_o: f64, sigma: f64) -> f64 {
    smith_g1(theta_i.cos(), sigma) * smith_g1(theta_o.cos(), sigma)
}
