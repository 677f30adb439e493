//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the solvers are generic over: `f32` or `f64`.
///
/// Error bounds and the Cholesky solves in the Bayesian back-ends are badly
/// conditioned in single precision, so the crate-root aliases fix `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Significant decimal digits needed for a lossless textual round trip.
    const ROUND_TRIP_DIGITS: usize;

    /// Converts an `f64` literal. Panics only if the target cannot represent finite values.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const ROUND_TRIP_DIGITS: usize = 9;
}

impl Real for f64 {
    const ROUND_TRIP_DIGITS: usize = 17;
}

/// `n` equally spaced points from `a` to `b`, both included.
pub fn linspace<S: Real>(a: S, b: S, n: usize) -> Vec<S> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / S::from_usize_lossy(n - 1);
            (0..n)
                .map(|i| if i + 1 == n { b } else { a + step * S::from_usize_lossy(i) })
                .collect()
        }
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<S: Real>(x: S) -> S {
    if x > S::lit(30.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid<S: Real>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_endpoints_exactly() {
        let g = linspace(0.0_f64, 4.0, 401);
        assert_eq!(g.len(), 401);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[400], 4.0);
        assert!((g[100] - 1.0).abs() < 1e-15);
        assert_eq!(linspace(1.0_f64, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn softplus_known_values() {
        assert!((softplus(0.0_f64) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(100.0_f64), 100.0);
        assert!(softplus(-40.0_f64) > 0.0);
        assert!((softplus(-5.0_f64) - 0.006715348489118068).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for &x in &[-3.0_f64, -0.5, 0.0, 0.7, 12.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }
}
