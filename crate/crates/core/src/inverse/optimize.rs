//! Per-vertex joint fit of the material and the shading normal.

use crate::inverse::data::VertexData;
use crate::inverse::lm::{minimize, LmConfig, ResidualModel};
use crate::inverse::losses::*;
use crate::inverse::types::{ln_sigma_bounds, Bounds, LossWeights, VertexEstimate};
use crate::observe::mean3;
use crate::real::Grad;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexOptions {
    pub weights: LossWeights,
    pub bounds: Bounds,
    /// Keep `σss` at its current value.
    pub fix_sigma_ss: bool,
    pub optimize_normal: bool,
    /// Predict DoP with the `β`-dependent denominator of the full model.
    pub full_diffuse: bool,
    pub lm: LmConfig,
}

impl Default for VertexOptions {
    fn default() -> Self {
        VertexOptions {
            weights: LossWeights::default(),
            bounds: Bounds::default(),
            fix_sigma_ss: false,
            optimize_normal: true,
            full_diffuse: true,
            lm: LmConfig::default(),
        }
    }
}

impl ResidualModel<N_VARS> for VertexModel<'_> {
    fn eval_f64(&self, x: &[f64; N_VARS], out: &mut Vec<f64>) {
        self.residuals(x, out);
    }
    fn eval_grad(&self, x: &[Grad<N_VARS>; N_VARS], out: &mut Vec<Grad<N_VARS>>) {
        self.residuals(x, out);
    }
}

/// Box bounds in the solver's variables.
pub fn variable_bounds(b: &Bounds) -> ([f64; N_VARS], [f64; N_VARS]) {
    let (ls0, ls1) = ln_sigma_bounds(b);
    let s = b.normal_step;
    ([b.eta.0, ls0, 0.0, b.rho_s.0, -s, -s], [b.eta.1, ls1, 1.0, b.rho_s.1, s, s])
}

/// The residual model `optimize_vertex` minimizes.
pub fn vertex_model<'a>(
    data: &'a VertexData,
    virtuals: &'a [VirtualObservation],
    init: &VertexEstimate,
    eta_prev: f64,
    opts: &VertexOptions,
) -> VertexModel<'a> {
    let mut m = VertexModel::new(data, virtuals, init, opts.weights, eta_prev, opts.full_diffuse);
    m.sigma_max = opts.bounds.sigma.1;
    if opts.fix_sigma_ss {
        m.sigma_ss_fixed = Some(init.params.sigma_ss);
    }
    m
}

/// Fit one vertex. Diffuse transmissions use `eta_prev`.
pub fn optimize_vertex(
    data: &VertexData,
    virtuals: &[VirtualObservation],
    init: &VertexEstimate,
    eta_prev: f64,
    opts: &VertexOptions,
) -> VertexEstimate {
    let mut est = *init;
    est.flags.optimizer_failed = false;
    if data.is_empty() {
        est.flags.unobserved = true;
        return est;
    }
    est.flags.unobserved = false;
    let model = vertex_model(data, virtuals, init, eta_prev, opts);
    let mut free = [true; N_VARS];
    est.flags.eta_unconstrained = data.reliable_dop() == 0;
    free[VAR_ETA] = !est.flags.eta_unconstrained;
    est.flags.specular_frozen = virtuals.is_empty() && data.samples.iter().all(|s| mean3(&s.obs.i_s) <= 0.0);
    if est.flags.specular_frozen {
        free[VAR_LN_SIGMA_S] = false;
        free[VAR_SS_FRAC] = false;
        free[VAR_RHO_S] = false;
    }
    free[VAR_SS_FRAC] &= !opts.fix_sigma_ss;
    free[VAR_U] = opts.optimize_normal;
    free[VAR_V] = opts.optimize_normal;

    let (lo, hi) = variable_bounds(&opts.bounds);
    let res = minimize(&model, model.point(init), lo, hi, free, &opts.lm);
    if res.failed {
        est.flags.optimizer_failed = true;
        return est;
    }
    let x = res.x;
    let mut r = Vec::new();
    let solved = model.residuals(&x, &mut r);
    est.params.eta = x[VAR_ETA];
    est.params.sigma_s = x[VAR_LN_SIGMA_S].exp().clamp(opts.bounds.sigma.0, opts.bounds.sigma.1);
    est.params.sigma_ss = model.sigma_ss_at(&x).clamp(opts.bounds.sigma.0, opts.bounds.sigma.1);
    est.params.rho_s = x[VAR_RHO_S];
    est.params.rho_d = solved.rho_d;
    est.params.rho_ss = solved.rho_ss;
    est.normal = model.normal_at(x[VAR_U], x[VAR_V]);
    est.residuals = model.breakdown(&x);
    est.iterations = res.iterations;
    est
}

/// Total loss history of one solve, for monotonicity checks.
pub fn loss_history(
    data: &VertexData,
    virtuals: &[VirtualObservation],
    init: &VertexEstimate,
    eta_prev: f64,
    opts: &VertexOptions,
) -> Vec<f64> {
    let model = vertex_model(data, virtuals, init, eta_prev, opts);
    let (lo, hi) = variable_bounds(&opts.bounds);
    let mut free = [true; N_VARS];
    free[VAR_SS_FRAC] = !opts.fix_sigma_ss;
    free[VAR_U] = opts.optimize_normal;
    free[VAR_V] = opts.optimize_normal;
    minimize(&model, model.point(init), lo, hi, free, &opts.lm).history
}
