//! Box-constrained Levenberg–Marquardt with forward-mode Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::real::{seed, split, Grad};

/// A least-squares problem `min ‖r(x)‖²`.
pub trait ResidualModel<const N: usize> {
    fn eval_f64(&self, x: &[f64; N], out: &mut Vec<f64>);
    fn eval_grad(&self, x: &[Grad<N>; N], out: &mut Vec<Grad<N>>);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Stop when the relative loss decrease of an accepted step falls below this.
    pub rel_tol: f64,
    pub mu0: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { max_iter: 200, rel_tol: 1e-8, mu0: 1e-3 }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult<const N: usize> {
    pub x: [f64; N],
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The starting loss was not finite; `x` is the starting point.
    pub failed: bool,
    /// Loss after each accepted step, starting with the initial loss.
    pub history: Vec<f64>,
}

fn sumsq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<const N: usize, M: ResidualModel<N>>(m: &M, x: &[f64; N], buf: &mut Vec<Grad<N>>) -> (Vec<f64>, Vec<[f64; N]>) {
    m.eval_grad(&seed(x), buf);
    buf.iter().map(split).unzip()
}

/// Minimize from `x0` within `[lo, hi]`; variables with `free[i] == false`
/// are held fixed.
pub fn minimize<const N: usize, M: ResidualModel<N>>(
    m: &M,
    x0: [f64; N],
    lo: [f64; N],
    hi: [f64; N],
    free: [bool; N],
    cfg: &LmConfig,
) -> LmResult<N> {
    let mut x: [f64; N] = std::array::from_fn(|i| x0[i].clamp(lo[i], hi[i]));
    let mut gbuf = Vec::new();
    let mut fbuf = Vec::new();
    let (mut r, mut jac) = jacobian(m, &x, &mut gbuf);
    let mut loss = sumsq(&r);
    let mut out = LmResult { x, loss, iterations: 0, converged: false, failed: false, history: vec![loss] };
    if !loss.is_finite() || jac.iter().flatten().any(|v| !v.is_finite()) {
        out.failed = true;
        return out;
    }
    let mut mu = cfg.mu0;
    for it in 0..cfg.max_iter {
        out.iterations = it + 1;
        let mut g = [0.0; N];
        let mut h = [[0.0; N]; N];
        for (ri, ji) in r.iter().zip(&jac) {
            for a in 0..N {
                g[a] += ji[a] * ri;
                for b in a..N {
                    h[a][b] += ji[a] * ji[b];
                }
            }
        }
        // Active set: free variables not pinned against a bound.
        let active: Vec<usize> = (0..N)
            .filter(|&i| free[i])
            .filter(|&i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        if active.is_empty() || active.iter().all(|&i| g[i] == 0.0) {
            out.converged = true;
            break;
        }
        let mut accepted = None;
        while mu < 1e12 {
            let k = active.len();
            let a = DMatrix::from_fn(k, k, |p, q| {
                let (i, j) = (active[p].min(active[q]), active[p].max(active[q]));
                let v = h[i][j];
                if p == q {
                    v + mu * v.max(1e-12)
                } else {
                    v
                }
            });
            let rhs = DVector::from_iterator(k, active.iter().map(|&i| -g[i]));
            let step = a.cholesky().map(|c| c.solve(&rhs));
            if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                let mut xn = x;
                for (p, &i) in active.iter().enumerate() {
                    xn[i] = (x[i] + step[p]).clamp(lo[i], hi[i]);
                }
                m.eval_f64(&xn, &mut fbuf);
                let ln = sumsq(&fbuf);
                if ln.is_finite() && ln < loss {
                    accepted = Some((xn, ln));
                    mu = (mu / 3.0).max(1e-15);
                    break;
                }
                if xn == x {
                    break;
                }
            }
            mu *= 4.0;
        }
        let Some((xn, ln)) = accepted else {
            out.converged = true;
            break;
        };
        debug_assert!(ln < loss);
        let rel = (loss - ln) / loss.max(f64::MIN_POSITIVE);
        x = xn;
        loss = ln;
        out.history.push(loss);
        (r, jac) = jacobian(m, &x, &mut gbuf);
        if rel < cfg.rel_tol || loss == 0.0 {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    out.loss = loss;
    out
}
