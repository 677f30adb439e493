//! Second-order forward-mode jets over at most two input coordinates.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};

/// Packed index of the symmetric pair `(i, j)` in `d2`: xx, xy, yy.
#[inline]
pub const fn pair_index(i: usize, j: usize) -> usize {
    // (0,0) -> 0, (0,1) and (1,0) -> 1, (1,1) -> 2
    i + j
}

/// Pairs `(i, j)` with `i <= j` in packed order for `dim` tracked coordinates.
pub fn pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        0 => &[],
        1 => &[(0, 0)],
        _ => &[(0, 0), (0, 1), (1, 1)],
    }
}

/// Number of jet channels (value, first and packed second derivatives).
#[inline]
pub const fn channel_count(dim: usize) -> usize {
    1 + dim + dim * (dim + 1) / 2
}

/// A value carried with its first and second partial derivatives with respect
/// to `dim` tracked coordinates (`dim` is 0, 1 or 2).
///
/// Second derivatives are stored packed as `[xx, xy, yy]`; `d2(i, j)` reads
/// them symmetrically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<S> {
    pub value: S,
    d1: [S; 2],
    d2: [S; 3],
    dim: usize,
}

impl<S: Real> Jet2<S> {
    pub fn constant(value: S, dim: usize) -> Self {
        debug_assert!(dim <= 2);
        Self { value, d1: [S::zero(); 2], d2: [S::zero(); 3], dim }
    }

    /// The coordinate `index` itself, seeded with unit first derivative.
    pub fn variable(value: S, index: usize, dim: usize) -> Self {
        let mut j = Self::constant(value, dim);
        j.d1[index] = S::one();
        j
    }

    /// Builds a jet from explicit derivatives. `d2` is given packed.
    pub fn from_parts(value: S, d1: &[S], d2_packed: &[S]) -> Result<Self> {
        let dim = d1.len();
        if dim > 2 {
            return Err(Error::UnsupportedOrder(dim));
        }
        if d2_packed.len() != pairs(dim).len() {
            return Err(Error::Shape { expected: pairs(dim).len(), got: d2_packed.len() });
        }
        let mut j = Self::constant(value, dim);
        j.d1[..dim].copy_from_slice(d1);
        if dim == 1 {
            j.d2[0] = d2_packed[0];
        } else if dim == 2 {
            j.d2.copy_from_slice(d2_packed);
        }
        Ok(j)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn d1(&self, i: usize) -> S {
        self.d1[i]
    }

    #[inline]
    pub fn d2(&self, i: usize, j: usize) -> S {
        self.d2[pair_index(i, j)]
    }

    pub fn gradient(&self) -> &[S] {
        &self.d1[..self.dim]
    }

    pub fn set_d1(&mut self, i: usize, v: S) {
        self.d1[i] = v;
    }

    pub fn set_d2(&mut self, i: usize, j: usize, v: S) {
        self.d2[pair_index(i, j)] = v;
    }

    /// Channel view in the order value, d1[..], packed d2[..].
    pub fn channels(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(channel_count(self.dim));
        out.push(self.value);
        out.extend_from_slice(&self.d1[..self.dim]);
        for &(i, j) in pairs(self.dim) {
            out.push(self.d2(i, j));
        }
        out
    }

    pub fn from_channels(ch: &[S], dim: usize) -> Self {
        debug_assert_eq!(ch.len(), channel_count(dim));
        let mut j = Self::constant(ch[0], dim);
        j.d1[..dim].copy_from_slice(&ch[1..1 + dim]);
        for (k, &(a, b)) in pairs(dim).iter().enumerate() {
            j.d2[pair_index(a, b)] = ch[1 + dim + k];
        }
        j
    }

    /// Composes with a scalar function given its value and first two derivatives
    /// at `self.value`.
    pub fn compose(self, f: S, df: S, d2f: S) -> Self {
        let mut out = Self::constant(f, self.dim);
        for i in 0..self.dim {
            out.d1[i] = df * self.d1[i];
        }
        for &(i, j) in pairs(self.dim) {
            let p = pair_index(i, j);
            out.d2[p] = d2f * self.d1[i] * self.d1[j] + df * self.d2[p];
        }
        out
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn ln(self) -> Self {
        let r = self.value.recip();
        self.compose(self.value.ln(), r, -r * r)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        let dt = S::one() - t * t;
        self.compose(t, dt, -(t + t) * dt)
    }

    pub fn sigmoid(self) -> Self {
        let s = sigmoid(self.value);
        let ds = s * (S::one() - s);
        self.compose(s, ds, ds * (S::one() - s - s))
    }

    pub fn powi(self, n: i32) -> Self {
        let nn = S::from_i32(n).expect("exponent");
        let f1 = if n == 0 { S::zero() } else { nn * self.value.powi(n - 1) };
        let f2 = if n <= 1 { S::zero() } else { nn * (nn - S::one()) * self.value.powi(n - 2) };
        self.compose(self.value.powi(n), f1, f2)
    }

    pub fn recip(self) -> Self {
        let r = self.value.recip();
        self.compose(r, -r * r, (r + r) * r * r)
    }

    pub fn scale(self, k: S) -> Self {
        let mut out = self;
        out.value *= k;
        out.d1.iter_mut().for_each(|d| *d *= k);
        out.d2.iter_mut().for_each(|d| *d *= k);
        out
    }

    /// Pulls a cotangent on `lhs * rhs` back to a cotangent on `rhs` (with `lhs` fixed).
    pub fn mul_adjoint_rhs(lhs: &Self, cot: &Self) -> Self {
        let dim = lhs.dim;
        let mut out = Self::constant(S::zero(), dim);
        let mut v = lhs.value * cot.value;
        for i in 0..dim {
            v += lhs.d1[i] * cot.d1[i];
        }
        for &(i, j) in pairs(dim) {
            let p = pair_index(i, j);
            v += lhs.d2[p] * cot.d2[p];
        }
        out.value = v;
        for i in 0..dim {
            let mut g = lhs.value * cot.d1[i];
            for &(a, b) in pairs(dim) {
                let p = pair_index(a, b);
                if a == i {
                    g += lhs.d1[b] * cot.d2[p];
                }
                if b == i {
                    g += lhs.d1[a] * cot.d2[p];
                }
            }
            out.d1[i] = g;
        }
        for &(i, j) in pairs(dim) {
            let p = pair_index(i, j);
            out.d2[p] = lhs.value * cot.d2[p];
        }
        out
    }
}

impl<S: Real> Add for Jet2<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        out.value = self.value + rhs.value;
        for i in 0..2 {
            out.d1[i] = self.d1[i] + rhs.d1[i];
        }
        for p in 0..3 {
            out.d2[p] = self.d2[p] + rhs.d2[p];
        }
        out
    }
}

impl<S: Real> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<S: Real> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-S::one())
    }
}

impl<S: Real> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let (a, b) = (self, rhs);
        let mut out = Self::constant(a.value * b.value, a.dim);
        for i in 0..a.dim {
            out.d1[i] = a.d1[i] * b.value + a.value * b.d1[i];
        }
        for &(i, j) in pairs(a.dim) {
            let p = pair_index(i, j);
            out.d2[p] = a.d2[p] * b.value + a.d1[i] * b.d1[j] + a.d1[j] * b.d1[i] + a.value * b.d2[p];
        }
        out
    }
}

impl<S: Real> Add<S> for Jet2<S> {
    type Output = Self;
    fn add(mut self, rhs: S) -> Self {
        self.value += rhs;
        self
    }
}

impl<S: Real> Sub<S> for Jet2<S> {
    type Output = Self;
    fn sub(mut self, rhs: S) -> Self {
        self.value -= rhs;
        self
    }
}

impl<S: Real> Mul<S> for Jet2<S> {
    type Output = Self;
    fn mul(self, rhs: S) -> Self {
        self.scale(rhs)
    }
}
