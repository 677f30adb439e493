//! Linear constant-coefficient ODE benchmarks of first and second order.

use std::sync::OnceLock;

use super::special::{e1, ei, gauss_legendre, integrate_panels};
use super::PinnProblem;
use crate::error::{Error, Result};
use crate::nn::Jet2;
use crate::scalar::Real;

/// Differential operator `F_λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Operator<S> {
    /// `u' + λ u`
    FirstOrder { lambda: S },
    /// `u'' + damping u' + stiffness u`
    SecondOrder { damping: S, stiffness: S },
}

/// Roots of the operator written as `(D + λ₁ + iω₁)(D + λ₂ + iω₂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Roots<S> {
    pub lambda1: S,
    pub omega1: S,
    pub lambda2: S,
    pub omega2: S,
}

impl<S: Real> Operator<S> {
    /// Recovers the root pair of a second-order operator from its real
    /// coefficients. For a complex pair the real parts coincide.
    pub fn roots(&self) -> Option<Roots<S>> {
        match *self {
            Operator::FirstOrder { .. } => None,
            Operator::SecondOrder { damping, stiffness } => {
                let two = S::lit(2.0);
                let disc = damping * damping - S::lit(4.0) * stiffness;
                if disc >= S::zero() {
                    let sq = disc.sqrt();
                    Some(Roots {
                        lambda1: (damping - sq) / two,
                        omega1: S::zero(),
                        lambda2: (damping + sq) / two,
                        omega2: S::zero(),
                    })
                } else {
                    let w = (-disc).sqrt() / two;
                    Some(Roots { lambda1: damping / two, omega1: w, lambda2: damping / two, omega2: -w })
                }
            }
        }
    }
}

/// Built-in source terms `f(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// 3t² + 5t + 4
    Poly,
    /// 6 cos 3t
    Cos3,
    /// 4 eᵗ
    Exp4,
    /// −9 ln(t+1) − (1−t)⁻², singular at t = 1
    LogSingular,
    /// 2 eᵗ
    Exp2,
    /// t² + t + 3
    PolyHarmonic,
    /// ln(t+1) − (t+1)⁻²
    LogHarmonic,
    /// 2 cos t² + (1 − 4t²) sin t²
    ChirpHarmonic,
    /// 8 eᵗ
    Exp8,
    /// 3t² + 11t + 9
    PolyDamped,
    /// 3 ln(t+1) + 4 (t+1)⁻¹ − (t+1)⁻²
    LogDamped,
    /// 6 cos t − 2 sin t
    TrigDamped,
}

impl Source {
    pub fn jet<S: Real>(self, t: Jet2<S>) -> Jet2<S> {
        let c = S::lit;
        let tp1 = t + S::one();
        match self {
            Source::Poly => t * t * c(3.0) + t * c(5.0) + c(4.0),
            Source::Cos3 => (t * c(3.0)).cos() * c(6.0),
            Source::Exp4 => t.exp() * c(4.0),
            Source::LogSingular => tp1.ln() * c(-9.0) - ((-t) + S::one()).powi(-2),
            Source::Exp2 => t.exp() * c(2.0),
            Source::PolyHarmonic => t * t + t + c(3.0),
            Source::LogHarmonic => tp1.ln() - tp1.powi(-2),
            Source::ChirpHarmonic => {
                let t2 = t * t;
                t2.cos() * c(2.0) + (-(t2 * c(4.0)) + S::one()) * t2.sin()
            }
            Source::Exp8 => t.exp() * c(8.0),
            Source::PolyDamped => t * t * c(3.0) + t * c(11.0) + c(9.0),
            Source::LogDamped => tp1.ln() * c(3.0) + tp1.recip() * c(4.0) - tp1.powi(-2),
            Source::TrigDamped => t.cos() * c(6.0) - t.sin() * c(2.0),
        }
    }

    pub fn eval<S: Real>(self, t: S) -> S {
        self.jet(Jet2::constant(t, 0)).value
    }

    pub fn describe(self) -> &'static str {
        match self {
            Source::Poly => "3t^2+5t+4",
            Source::Cos3 => "6cos(3t)",
            Source::Exp4 => "4e^t",
            Source::LogSingular => "-9ln(t+1)-(1-t)^-2",
            Source::Exp2 => "2e^t",
            Source::PolyHarmonic => "t^2+t+3",
            Source::LogHarmonic => "ln(t+1)-(t+1)^-2",
            Source::ChirpHarmonic => "2cos(t^2)+(1-4t^2)sin(t^2)",
            Source::Exp8 => "8e^t",
            Source::PolyDamped => "3t^2+11t+9",
            Source::LogDamped => "3ln(t+1)+4(t+1)^-1-(t+1)^-2",
            Source::TrigDamped => "6cos(t)-2sin(t)",
        }
    }
}

/// A linear ODE initial-value problem with hard-enforced initial conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeProblem<S> {
    pub id: &'static str,
    pub operator: Operator<S>,
    pub source: Source,
    pub u0: S,
    /// Initial slope; ignored for first-order problems.
    pub u0_prime: S,
    pub x0: S,
    pub train_domain: (S, S),
    pub test_domain: (S, S),
}

impl<S: Real> OdeProblem<S> {
    pub fn new(
        id: &'static str,
        operator: Operator<S>,
        source: Source,
        u0: S,
        u0_prime: S,
        train_domain: (S, S),
        test_domain: (S, S),
    ) -> Result<Self> {
        if let Operator::FirstOrder { lambda } = operator {
            if !(lambda > S::zero()) || u0 == S::zero() {
                return Err(Error::config(format!("{id}: first-order problems need lambda > 0 and u0 != 0")));
            }
        }
        if !(train_domain.0 < train_domain.1)
            || train_domain.0 != test_domain.0
            || test_domain.1 < train_domain.1
        {
            return Err(Error::config(format!("{id}: training domain must be a prefix of the test domain")));
        }
        Ok(Self { id, operator, source, u0, u0_prime, x0: train_domain.0, train_domain, test_domain })
    }

    pub fn order(&self) -> usize {
        match self.operator {
            Operator::FirstOrder { .. } => 1,
            Operator::SecondOrder { .. } => 2,
        }
    }

    /// Closed-form solution as a jet in the coordinate carried by `t`.
    pub fn exact_jet(&self, t: Jet2<S>) -> Result<Jet2<S>> {
        exact_solution(self, t)
    }

    /// Exact solution value, for evaluation only.
    pub fn analytic_solution(&self, t: S) -> Result<S> {
        Ok(self.exact_jet(Jet2::constant(t, 0))?.value)
    }
}

impl<S: Real> PinnProblem<S> for OdeProblem<S> {
    fn input_dim(&self) -> usize {
        1
    }

    fn tracked(&self) -> &'static [usize] {
        &[0]
    }

    fn constraint(&self, x: &[S]) -> (Jet2<S>, Jet2<S>) {
        let s = Jet2::variable(x[0] - self.x0, 0, 1);
        // mask m = 1 - e^{-s}; m(x0) = 0 and m'(x0) = 1 exactly
        let m = -((-s).exp()) + S::one();
        match self.operator {
            Operator::FirstOrder { .. } => (Jet2::constant(self.u0, 1), m),
            Operator::SecondOrder { .. } => (m * self.u0_prime + self.u0, m * m),
        }
    }

    fn residual_of(&self, x: &[S], u: &Jet2<S>) -> S {
        let f = self.source.eval(x[0]);
        match self.operator {
            Operator::FirstOrder { lambda } => u.d1(0) + lambda * u.value - f,
            Operator::SecondOrder { damping, stiffness } => {
                u.d2(0, 0) + damping * u.d1(0) + stiffness * u.value - f
            }
        }
    }

    fn residual_sensitivity(&self, _x: &[S], _u: &Jet2<S>) -> Jet2<S> {
        let one = S::one();
        match self.operator {
            Operator::FirstOrder { lambda } => {
                Jet2::from_parts(lambda, &[one], &[S::zero()]).expect("1-d jet")
            }
            Operator::SecondOrder { damping, stiffness } => {
                Jet2::from_parts(stiffness, &[damping], &[one]).expect("1-d jet")
            }
        }
    }
}

fn gl10() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

/// `e^{-λt}(A cos ωt + B sin ωt)` matching value `a` and slope `b` at 0.
fn damped_homogeneous<S: Real>(t: Jet2<S>, lambda: S, omega: S, a: S, b: S) -> Jet2<S> {
    let big_b = (b + lambda * a) / omega;
    let wt = t * omega;
    (t * (-lambda)).exp() * (wt.cos() * a + wt.sin() * big_b)
}

fn exact_solution<S: Real>(p: &OdeProblem<S>, t: Jet2<S>) -> Result<Jet2<S>> {
    let c = S::lit;
    let with_particular = |particular: &dyn Fn(Jet2<S>) -> Jet2<S>| -> Result<Jet2<S>> {
        let roots = p.operator.roots().expect("second order");
        let p0 = particular(Jet2::variable(S::zero(), 0, 1));
        let (a, b) = (p.u0 - p0.value, p.u0_prime - p0.d1(0));
        let h = if roots.omega1 == S::zero() {
            // distinct real roots
            let (l1, l2) = (roots.lambda1, roots.lambda2);
            let k2 = (b + l1 * a) / (l1 - l2);
            let k1 = a - k2;
            (t * (-l1)).exp() * k1 + (t * (-l2)).exp() * k2
        } else {
            damped_homogeneous(t, roots.lambda1, roots.omega1, a, b)
        };
        Ok(particular(t) + h)
    };
    match p.source {
        Source::Poly => Ok((t * c(-3.0)).exp() + t * t + t + c(1.0)),
        Source::Cos3 => {
            let t3 = t * c(3.0);
            Ok((t * c(-3.0)).exp() + t3.cos() + t3.sin())
        }
        Source::Exp4 => Ok((t * c(-3.0)).exp() + t.exp()),
        Source::LogSingular => log_singular_solution(p, t),
        Source::Exp2 => with_particular(&|s| s.exp()),
        Source::PolyHarmonic => with_particular(&|s| s * s + s + c(1.0)),
        Source::LogHarmonic => with_particular(&|s| (s + S::one()).ln()),
        Source::ChirpHarmonic => with_particular(&|s| (s * s).sin()),
        Source::Exp8 => with_particular(&|s| s.exp()),
        Source::PolyDamped => with_particular(&|s| s * s * c(0.75) + s * c(1.625) + c(0.65625)),
        Source::TrigDamped => with_particular(&|s| s.cos() * c(4.0 / 3.0) + s.sin() * c(2.0 / 3.0)),
        Source::LogDamped => duhamel_second_order(p, t),
    }
}

/// `u' + 3u = -9 ln(t+1) - (1-t)^{-2}`, `u(0) = u0`, via exponential integrals.
/// The source is not integrable across t = 1, so the solution ends there.
fn log_singular_solution<S: Real>(p: &OdeProblem<S>, t: Jet2<S>) -> Result<Jet2<S>> {
    let x = t.value;
    if x >= S::one() {
        return Err(Error::Singular { x: x.as_f64(), reason: "source (1-t)^-2 blows up at t = 1".into() });
    }
    let c = S::lit;
    let three = c(3.0);
    let e3x = (three * x).exp();
    // ∫_0^x e^{3s} ln(s+1) ds
    let i_log = e3x * (x + S::one()).ln() / three - (-three).exp() / three * (ei(three * (x + S::one())) - ei(three));
    // ∫_0^x e^{3s} (1-s)^{-2} ds
    let i_pole = if x == S::zero() {
        S::zero()
    } else {
        e3x / (S::one() - x) - S::one() - three * three.exp() * (e1(three * (S::one() - x)) - e1(three))
    };
    let u = (-three * x).exp() * (p.u0 - c(9.0) * i_log - i_pole);
    let f = p.source.jet(Jet2::variable(x, 0, 1));
    let du = f.value - three * u;
    let d2u = f.d1(0) - three * du;
    Ok(t.compose(u, du, d2u))
}

/// Variation of parameters for `u'' + a u' + b u = f` with complex roots,
/// integrated with composite 10-point Gauss–Legendre panels.
fn duhamel_second_order<S: Real>(p: &OdeProblem<S>, t: Jet2<S>) -> Result<Jet2<S>> {
    let roots = p.operator.roots().expect("second order");
    let (lam, om) = (roots.lambda1, roots.omega1);
    if om == S::zero() {
        return Err(Error::Internal("quadrature solution implemented for complex roots only".into()));
    }
    let x = t.value;
    let h = damped_homogeneous(Jet2::variable(x, 0, 1), lam, om, p.u0, p.u0_prime);
    // G(τ) = e^{-λτ} sin(ωτ)/ω and its first two derivatives
    let green = |tau: S| -> [S; 3] {
        let e = (-lam * tau).exp();
        let (s, c) = (om * tau).sin_cos();
        let g = e * s / om;
        let g1 = e * (c - lam * s / om);
        let g2 = e * ((lam * lam - om * om) * s / om - S::lit(2.0) * lam * c);
        [g, g1, g2]
    };
    let panels = 16usize;
    let [i0, i1, i2] = integrate_panels(S::zero(), x, panels, gl10(), |s| {
        let f = p.source.eval(s);
        let [g, g1, g2] = green(x - s);
        [g * f, g1 * f, g2 * f]
    });
    let u = h.value + i0;
    let du = h.d1(0) + i1;
    let d2u = h.d2(0, 0) + p.source.eval(x) + i2;
    Ok(t.compose(u, du, d2u))
}
