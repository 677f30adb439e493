//! Viscous Burgers' equation on `[-1, 1] x [0, T]` with hard initial and
//! boundary conditions.

use super::PinnProblem;
use crate::error::{Error, Result};
use crate::nn::Jet2;
use crate::scalar::Real;

/// `u_t + u u_x = ν u_xx`, `u(x, 0) = -sin(πx)`, `u(±1, t) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BurgersProblem<S> {
    pub nu: S,
    pub space_domain: (S, S),
    pub train_time: (S, S),
    pub test_time: (S, S),
}

impl<S: Real> BurgersProblem<S> {
    pub fn new(nu: S) -> Result<Self> {
        if !(nu > S::zero()) {
            return Err(Error::config("Burgers viscosity must be positive"));
        }
        Ok(Self {
            nu,
            space_domain: (-S::one(), S::one()),
            train_time: (S::zero(), S::one()),
            test_time: (S::zero(), S::lit(2.0)),
        })
    }

    /// ν = 0.01/π.
    pub fn standard() -> Self {
        Self::new(S::lit(0.01) / S::PI()).expect("positive viscosity")
    }
}

/// `(sin πx, cos πx)` with exact zeros of the sine at integers.
pub fn sin_cos_pi<S: Real>(x: S) -> (S, S) {
    let n = x.round();
    let r = x - n;
    let (s, c) = (S::PI() * r).sin_cos();
    let odd = (n / S::lit(2.0)).fract() != S::zero();
    if odd {
        (-s, -c)
    } else {
        (s, c)
    }
}

impl<S: Real> PinnProblem<S> for BurgersProblem<S> {
    fn input_dim(&self) -> usize {
        2
    }

    fn tracked(&self) -> &'static [usize] {
        &[0, 1]
    }

    fn constraint(&self, x: &[S]) -> (Jet2<S>, Jet2<S>) {
        let (xs, t) = (x[0], x[1]);
        let pi = S::PI();
        let (s, c) = sin_cos_pi(xs);
        // -sin(πx) as a jet in x
        let mut neg_sin = Jet2::constant(-s, 2);
        neg_sin.set_d1(0, -pi * c);
        neg_sin.set_d2(0, 0, pi * pi * s);
        let decay = (-Jet2::variable(t, 1, 2)).exp();
        let xv = Jet2::variable(xs, 0, 2);
        let bump = -(xv * xv) + S::one();
        let ramp = -decay + S::one();
        (neg_sin * decay, bump * ramp)
    }

    fn residual_of(&self, _x: &[S], u: &Jet2<S>) -> S {
        u.d1(1) + u.value * u.d1(0) - self.nu * u.d2(0, 0)
    }

    fn residual_sensitivity(&self, _x: &[S], u: &Jet2<S>) -> Jet2<S> {
        Jet2::from_parts(u.d1(0), &[u.value, S::one()], &[-self.nu, S::zero(), S::zero()]).expect("2-d jet")
    }
}
