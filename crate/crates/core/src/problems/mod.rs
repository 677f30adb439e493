//! Differential-equation problems: hard-constraint reparameterization,
//! residuals, and closed-form solution oracles.

mod burgers;
mod ode;
pub mod special;

pub use burgers::{sin_cos_pi, BurgersProblem};
pub use ode::{OdeProblem, Operator, Roots, Source};

use crate::error::{Error, Result};
use crate::nn::{Jet2, NetworkParameters};
use crate::scalar::Real;

/// A problem whose surrogate is `ũ(x) = offset(x) + mask(x) · net(x)`, with
/// the offset and mask chosen so the initial/boundary conditions hold for
/// every network.
pub trait PinnProblem<S: Real>: Send + Sync {
    fn input_dim(&self) -> usize;

    /// Input coordinates the residual differentiates with respect to.
    fn tracked(&self) -> &'static [usize];

    /// `(offset, mask)` jets at `x` over the tracked coordinates.
    fn constraint(&self, x: &[S]) -> (Jet2<S>, Jet2<S>);

    /// Residual `F[ũ](x) - f(x)` given the surrogate jet at `x`.
    fn residual_of(&self, x: &[S], u: &Jet2<S>) -> S;

    /// Partial derivatives of the residual with respect to each channel of `u`.
    fn residual_sensitivity(&self, x: &[S], u: &Jet2<S>) -> Jet2<S>;

    /// Applies the hard-constraint transform to a raw network jet.
    fn reparameterize(&self, raw: &Jet2<S>, x: &[S]) -> Jet2<S> {
        let (offset, mask) = self.constraint(x);
        offset + mask * *raw
    }

    /// Residual of the transformed surrogate together with its cotangent on the
    /// raw network jet.
    fn residual_and_cotangent(&self, raw: &Jet2<S>, x: &[S]) -> (S, Jet2<S>) {
        let (offset, mask) = self.constraint(x);
        let u = offset + mask * *raw;
        let r = self.residual_of(x, &u);
        let sens = self.residual_sensitivity(x, &u);
        (r, Jet2::mul_adjoint_rhs(&mask, &sens))
    }

    /// Transformed surrogate value from a raw network value.
    fn surrogate_from_raw(&self, raw: S, x: &[S]) -> S {
        let (offset, mask) = self.constraint(x);
        offset.value + mask.value * raw
    }

    /// `ũ` at `x` for the given network.
    fn surrogate(&self, params: &NetworkParameters<S>, x: &[S]) -> Result<S> {
        Ok(self.surrogate_from_raw(params.forward(x)?, x))
    }

    /// Jet of `ũ` over the tracked coordinates.
    fn surrogate_jet(&self, params: &NetworkParameters<S>, x: &[S]) -> Result<Jet2<S>> {
        let raw = params.forward_jet(x, self.tracked())?;
        Ok(self.reparameterize(&raw, x))
    }

    /// Residual of the network's transformed surrogate at `x`.
    fn residual_at(&self, params: &NetworkParameters<S>, x: &[S]) -> Result<S> {
        let u = self.surrogate_jet(params, x)?;
        Ok(self.residual_of(x, &u))
    }
}

/// Any registered problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem<S> {
    Ode(OdeProblem<S>),
    Burgers(BurgersProblem<S>),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Problem::Ode($p) => $e,
            Problem::Burgers($p) => $e,
        }
    };
}

impl<S: Real> PinnProblem<S> for Problem<S> {
    fn input_dim(&self) -> usize {
        dispatch!(self, p => p.input_dim())
    }
    fn tracked(&self) -> &'static [usize] {
        dispatch!(self, p => p.tracked())
    }
    fn constraint(&self, x: &[S]) -> (Jet2<S>, Jet2<S>) {
        dispatch!(self, p => p.constraint(x))
    }
    fn residual_of(&self, x: &[S], u: &Jet2<S>) -> S {
        dispatch!(self, p => p.residual_of(x, u))
    }
    fn residual_sensitivity(&self, x: &[S], u: &Jet2<S>) -> Jet2<S> {
        dispatch!(self, p => p.residual_sensitivity(x, u))
    }
}

impl<S: Real> Problem<S> {
    pub fn id(&self) -> &'static str {
        match self {
            Problem::Ode(p) => p.id,
            Problem::Burgers(_) => BURGERS_ID,
        }
    }

    pub fn as_ode(&self) -> Option<&OdeProblem<S>> {
        match self {
            Problem::Ode(p) => Some(p),
            Problem::Burgers(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Problem::Ode(p) => {
                let lhs = match p.operator {
                    Operator::FirstOrder { lambda } => format!("u' + {lambda}u"),
                    Operator::SecondOrder { damping, stiffness } if damping == S::zero() => {
                        format!("u'' + {stiffness}u")
                    }
                    Operator::SecondOrder { damping, stiffness } => format!("u'' + {damping}u' + {stiffness}u"),
                };
                let ic = if p.order() == 1 {
                    format!("u(0)={}", p.u0)
                } else {
                    format!("u(0)={}, u'(0)={}", p.u0, p.u0_prime)
                };
                format!("{lhs} = {}, {ic}", p.source.describe())
            }
            Problem::Burgers(b) => format!("u_t + u u_x = {:.6} u_xx, u(x,0)=-sin(pi x), u(+-1,t)=0", b.nu),
        }
    }

    /// Per-axis bounds of the region collocation points may be drawn from.
    pub fn train_region(&self) -> Vec<(S, S)> {
        match self {
            Problem::Ode(p) => vec![p.train_domain],
            Problem::Burgers(b) => vec![b.space_domain, b.train_time],
        }
    }

    /// Per-axis bounds of the evaluation region.
    pub fn test_region(&self) -> Vec<(S, S)> {
        match self {
            Problem::Ode(p) => vec![p.test_domain],
            Problem::Burgers(b) => vec![b.space_domain, b.test_time],
        }
    }

    /// Looks up a registered problem by its stable id.
    pub fn by_id(id: &str) -> Result<Self> {
        registry()
            .into_iter()
            .find(|p| p.id() == id)
            .ok_or_else(|| Error::config(format!("unknown problem id '{id}'")))
    }
}

pub const BURGERS_ID: &str = "burgers";

/// Ids of every registered problem, in registry order.
pub fn problem_ids() -> Vec<&'static str> {
    registry::<f64>().iter().map(|p| p.id()).collect()
}

/// The twelve linear ODE benchmarks plus Burgers' equation.
///
/// First-order problems train on `[0, 2]` and are tested on `[0, 4]`.
pub fn registry<S: Real>() -> Vec<Problem<S>> {
    let c = S::lit;
    let train = (c(0.0), c(2.0));
    let test = (c(0.0), c(4.0));
    let first = Operator::FirstOrder { lambda: c(3.0) };
    let harmonic = Operator::SecondOrder { damping: c(0.0), stiffness: c(1.0) };
    let damped = Operator::SecondOrder { damping: c(3.0), stiffness: c(4.0) };
    let table: [(&'static str, Operator<S>, Source, f64, f64); 12] = [
        ("ode1.poly", first, Source::Poly, 2.0, 0.0),
        ("ode1.cos", first, Source::Cos3, 2.0, 0.0),
        ("ode1.exp", first, Source::Exp4, 2.0, 0.0),
        ("ode1.log", first, Source::LogSingular, 2.0, 0.0),
        ("ode2.harmonic.exp", harmonic, Source::Exp2, 2.0, 2.0),
        ("ode2.harmonic.poly", harmonic, Source::PolyHarmonic, 2.0, 2.0),
        ("ode2.harmonic.log", harmonic, Source::LogHarmonic, 1.0, 2.0),
        ("ode2.harmonic.chirp", harmonic, Source::ChirpHarmonic, 1.0, 1.0),
        ("ode2.damped.exp", damped, Source::Exp8, 3.0, -3.0),
        ("ode2.damped.poly", damped, Source::PolyDamped, 3.0, -3.0),
        ("ode2.damped.log", damped, Source::LogDamped, 2.0, -3.0),
        ("ode2.damped.trig", damped, Source::TrigDamped, 3.0, -3.0),
    ];
    let mut out: Vec<Problem<S>> = table
        .into_iter()
        .map(|(id, op, src, u0, u0p)| {
            Problem::Ode(OdeProblem::new(id, op, src, c(u0), c(u0p), train, test).expect("valid registry entry"))
        })
        .collect();
    out.push(Problem::Burgers(BurgersProblem::standard()));
    out
}

/// Exact solution of a registered ODE problem at `x`.
pub fn analytic_solution<S: Real>(problem_id: &str, x: S) -> Result<S> {
    match Problem::<S>::by_id(problem_id)? {
        Problem::Ode(p) => p.analytic_solution(x),
        Problem::Burgers(_) => Err(Error::config("no closed-form solution registered for Burgers' equation")),
    }
}

/// Ids of first-order problems whose solution exists on the whole test domain.
pub const REGULAR_FIRST_ORDER: [&str; 3] = ["ode1.poly", "ode1.cos", "ode1.exp"];
