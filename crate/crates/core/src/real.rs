//! Scalar abstraction shared by plain `f64` evaluation and forward-mode
//! automatic differentiation.
//!
//! Model functions that the optimizer differentiates are written once against
//! [`Real`] and instantiated either with `f64` or with a dual number carrying
//! the gradient with respect to the optimization variables.

use nalgebra::{Const, U1};
use num_dual::{Derivative, DualNum, DualSVec64};

pub trait Real: DualNum<Primitive = f64> + Copy {}

impl<T: DualNum<Primitive = f64> + Copy> Real for T {}

pub type Grad<const N: usize> = DualSVec64<N>;

/// Lift a point into dual numbers seeded with the unit directions.
pub fn seed<const N: usize>(x: &[f64; N]) -> [Grad<N>; N] {
    std::array::from_fn(|i| {
        let mut e = nalgebra::SVector::<f64, N>::zeros();
        e[i] = 1.0;
        Grad::new(x[i], Derivative::some(e))
    })
}

/// Split a dual number into value and gradient.
pub fn split<const N: usize>(v: &Grad<N>) -> (f64, [f64; N]) {
    let g = v.eps.unwrap_generic(Const::<N>, U1);
    let mut out = [0.0; N];
    out.copy_from_slice(g.as_slice());
    (v.re, out)
}

#[inline]
pub fn c<D: Real>(v: f64) -> D {
    D::from(v)
}

#[inline]
pub fn dot3<D: Real>(a: &[D; 3], b: &[f64; 3]) -> D {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn max_re<D: Real>(a: D, floor: f64) -> D {
    if a.re() < floor {
        D::from(floor)
    } else {
        a
    }
}

#[inline]
pub fn clamp_re<D: Real>(a: D, lo: f64, hi: f64) -> D {
    if a.re() < lo {
        D::from(lo)
    } else if a.re() > hi {
        D::from(hi)
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_gradient_of_product() {
        let [x, y] = seed(&[3.0, 4.0]);
        let (v, g) = split(&(x * y + x.powi(2)));
        assert_eq!(v, 21.0);
        assert_eq!(g, [10.0, 3.0]);
    }
}
