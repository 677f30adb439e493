//! Pseudo-aleatoric standard deviations from residual error bounds.
//!
//! For a linear ODE with hard initial conditions the error `e = u - ũ`
//! solves the same operator with forcing `-r` and zero initial data, so
//! `|e(x)| <= ∫ G(x - ξ) |r(ξ)| dξ` for a nonnegative majorant `G` of the
//! Green's function. Replacing `|r|` by a piecewise-constant envelope makes
//! the integral closed-form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::NetworkParameters;
use crate::problems::{Operator, OdeProblem, PinnProblem, Problem};
use crate::scalar::{linspace, Real};
use crate::train::TrainedPINN;

/// Below this root separation the second-order kernel switches to its
/// equal-root limit.
pub const EQUAL_ROOT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_KNOTS: usize = 40;
pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_SAFETY: f64 = 1.1;
/// Time samples used by the Burgers accumulated-residual operator.
pub const DEFAULT_TIME_SAMPLES: usize = 100;

/// Piecewise-constant majorant of `|r|`: `epsilons[k]` bounds the residual on
/// `[knots[k], knots[k + 1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEnvelope<S> {
    pub knots: Vec<S>,
    pub epsilons: Vec<S>,
    pub oversample: usize,
    pub safety_factor: S,
}

impl<S: Real> ResidualEnvelope<S> {
    /// Envelope with given levels. `oversample` is recorded as 0 and the
    /// safety factor as 1.
    pub fn new(knots: Vec<S>, epsilons: Vec<S>) -> Result<Self> {
        let env = Self { knots, epsilons, oversample: 0, safety_factor: S::one() };
        env.validate()?;
        Ok(env)
    }

    /// Samples `residual` at `oversample` equally spaced points (ends
    /// included) of every subinterval and scales the maxima by `safety_factor`.
    pub fn from_samples<F>(knots: Vec<S>, oversample: usize, safety_factor: S, mut residual: F) -> Result<Self>
    where
        F: FnMut(S) -> Result<S>,
    {
        if oversample < 1 {
            return Err(Error::config("oversample must be at least 1"));
        }
        if !(safety_factor >= S::one()) {
            return Err(Error::config("safety factor must be at least 1"));
        }
        check_knots(&knots)?;
        let mut epsilons = Vec::with_capacity(knots.len() - 1);
        for w in knots.windows(2) {
            let pts = if oversample == 1 { vec![(w[0] + w[1]) * S::lit(0.5)] } else { linspace(w[0], w[1], oversample) };
            let mut peak = S::zero();
            for xi in pts {
                let r = residual(xi)?.abs();
                // NaN is treated as unbounded
                peak = if r.is_nan() { S::infinity() } else { peak.max(r) };
            }
            epsilons.push(safety_factor * peak);
        }
        Ok(Self { knots, epsilons, oversample, safety_factor })
    }

    pub fn uniform_knots(a: S, b: S, intervals: usize) -> Vec<S> {
        linspace(a, b, intervals + 1)
    }

    pub fn num_intervals(&self) -> usize {
        self.epsilons.len()
    }

    pub fn start(&self) -> S {
        self.knots[0]
    }

    pub fn end(&self) -> S {
        self.knots[self.knots.len() - 1]
    }

    pub fn scaled(&self, factor: S) -> Self {
        let mut out = self.clone();
        out.epsilons.iter_mut().for_each(|e| *e *= factor);
        out.safety_factor *= factor;
        out
    }

    /// The envelope value at `x` (right-continuous, closed at the end).
    pub fn level_at(&self, x: S) -> Result<S> {
        self.check_inside(x)?;
        let k = self.knots.partition_point(|&n| n <= x).clamp(1, self.num_intervals());
        Ok(self.epsilons[k - 1])
    }

    fn validate(&self) -> Result<()> {
        check_knots(&self.knots)?;
        if self.epsilons.len() + 1 != self.knots.len() {
            return Err(Error::Shape { expected: self.knots.len() - 1, got: self.epsilons.len() });
        }
        if self.epsilons.iter().any(|e| e.is_nan() || *e < S::zero()) {
            return Err(Error::config("envelope levels must be nonnegative"));
        }
        Ok(())
    }

    fn check_inside(&self, x: S) -> Result<()> {
        if !(x >= self.start() && x <= self.end()) {
            return Err(Error::Domain { x: x.as_f64(), lo: self.start().as_f64(), hi: self.end().as_f64() });
        }
        Ok(())
    }

    /// `Σ_k ε_k ∫_{n_{k-1}}^{min(n_k, x)} K(x - ξ) dξ`, where `piece(s1, s2)`
    /// returns `∫_{s1}^{s2} K(s) ds` for `0 <= s1 < s2`.
    fn integrate<F: Fn(S, S) -> S>(&self, x: S, piece: F) -> Result<S> {
        self.check_inside(x)?;
        let mut total = S::zero();
        for (w, &eps) in self.knots.windows(2).zip(&self.epsilons) {
            let (a, b) = (w[0], w[1].min(x));
            if b <= a {
                break;
            }
            if eps == S::zero() {
                continue;
            }
            total += eps * piece(x - b, x - a);
        }
        Ok(total)
    }
}

fn check_knots<S: Real>(knots: &[S]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::config("an envelope needs at least two knots"));
    }
    if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config("envelope knots must be finite and strictly increasing"));
    }
    Ok(())
}

/// Envelope of a trained ODE model's residual. The knots must start at `x0`
/// and reach the end of the test domain.
pub fn estimate_envelope<S: Real>(
    problem: &Problem<S>,
    trained: &TrainedPINN<S>,
    knots: Vec<S>,
    oversample: usize,
    safety_factor: S,
) -> Result<ResidualEnvelope<S>> {
    let ode = problem
        .as_ode()
        .ok_or_else(|| Error::config("residual envelopes are defined for ODE problems only"))?;
    check_knots(&knots)?;
    if knots[0] != ode.x0 || knots[knots.len() - 1] < ode.test_domain.1 {
        return Err(Error::config(format!(
            "knots [{}, {}] do not cover [{}, {}]",
            knots[0],
            knots[knots.len() - 1],
            ode.x0,
            ode.test_domain.1
        )));
    }
    ResidualEnvelope::from_samples(knots, oversample, safety_factor, |x| problem.residual_at(&trained.params, &[x]))
}

/// `∫_{s1}^{s2} e^{-λ s} ds`, written to avoid overflow and cancellation.
fn decay_piece<S: Real>(lambda: S, s1: S, s2: S) -> S {
    if lambda == S::zero() {
        return s2 - s1;
    }
    (-lambda * s1).exp() * -(-lambda * (s2 - s1)).exp_m1() / lambda
}

/// `∫_{s1}^{s2} s e^{-λ s} ds`.
fn ramp_decay_piece<S: Real>(lambda: S, s1: S, s2: S) -> S {
    let g = |s: S| (-lambda * s).exp() * (S::one() + lambda * s);
    (g(s1) - g(s2)) / (lambda * lambda)
}

fn require_positive<S: Real>(name: &str, v: S) -> Result<()> {
    if v > S::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

/// Bound for `u' + λu = f`: `∫ e^{-λ(x-ξ)} env(ξ) dξ` over `[n_0, x]`.
pub fn bound_first_order<S: Real>(env: &ResidualEnvelope<S>, lambda: S, x: S) -> Result<S> {
    require_positive("lambda", lambda)?;
    env.integrate(x, |s1, s2| decay_piece(lambda, s1, s2))
}

/// Bound for real decay rates `λ1 != λ2`, kernel
/// `(e^{-λ1 s} - e^{-λ2 s}) / (λ2 - λ1)`.
pub fn bound_second_order_distinct<S: Real>(env: &ResidualEnvelope<S>, lambda1: S, lambda2: S, x: S) -> Result<S> {
    if !(lambda1 >= S::zero() && lambda2 >= S::zero()) {
        return Err(Error::config("decay rates must be nonnegative"));
    }
    let gap = lambda2 - lambda1;
    if gap.abs() < S::lit(EQUAL_ROOT_TOLERANCE) {
        return Err(Error::config("decay rates coincide; use the equal-root kernel"));
    }
    env.integrate(x, |s1, s2| (decay_piece(lambda1, s1, s2) - decay_piece(lambda2, s1, s2)) / gap)
}

/// Equal-rate limit of [`bound_second_order_distinct`]: kernel `s e^{-λ s}`.
pub fn bound_second_order_equal_limit<S: Real>(env: &ResidualEnvelope<S>, lambda: S, x: S) -> Result<S> {
    require_positive("lambda", lambda)?;
    env.integrate(x, |s1, s2| ramp_decay_piece(lambda, s1, s2))
}

/// Undamped case `λ1 = λ2 = 0`: kernel `s`.
pub fn bound_second_order_zero<S: Real>(env: &ResidualEnvelope<S>, x: S) -> Result<S> {
    env.integrate(x, |s1, s2| (s2 - s1) * (s2 + s1) * S::lit(0.5))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    FirstOrder,
    SecondOrderDistinct,
    SecondOrderEqualLimit,
    SecondOrderZero,
    BurgersHeuristic,
}

/// Bound kernel chosen for an ODE operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundKernel<S> {
    FirstOrder { lambda: S },
    Distinct { lambda1: S, lambda2: S },
    EqualLimit { lambda: S },
    Zero,
}

impl<S: Real> BoundKernel<S> {
    /// Uses the real parts of the characteristic roots; oscillatory factors
    /// are bounded by `|sin(ωs)/ω| <= s`.
    pub fn for_problem(problem: &OdeProblem<S>) -> Result<Self> {
        match problem.operator {
            Operator::FirstOrder { lambda } => Ok(Self::FirstOrder { lambda }),
            Operator::SecondOrder { .. } => {
                let roots = problem
                    .operator
                    .roots()
                    .ok_or_else(|| Error::Internal("second-order operator without roots".into()))?;
                let (l1, l2) = (roots.lambda1, roots.lambda2);
                if l1 < S::zero() || l2 < S::zero() {
                    return Err(Error::config("growing modes have no bound kernel"));
                }
                if (l2 - l1).abs() >= S::lit(EQUAL_ROOT_TOLERANCE) {
                    Ok(Self::Distinct { lambda1: l1, lambda2: l2 })
                } else if l1 == S::zero() {
                    Ok(Self::Zero)
                } else {
                    Ok(Self::EqualLimit { lambda: (l1 + l2) * S::lit(0.5) })
                }
            }
        }
    }

    pub fn kind(&self) -> ProfileKind {
        match self {
            Self::FirstOrder { .. } => ProfileKind::FirstOrder,
            Self::Distinct { .. } => ProfileKind::SecondOrderDistinct,
            Self::EqualLimit { .. } => ProfileKind::SecondOrderEqualLimit,
            Self::Zero => ProfileKind::SecondOrderZero,
        }
    }

    pub fn evaluate(&self, env: &ResidualEnvelope<S>, x: S) -> Result<S> {
        match *self {
            Self::FirstOrder { lambda } => bound_first_order(env, lambda, x),
            Self::Distinct { lambda1, lambda2 } => bound_second_order_distinct(env, lambda1, lambda2, x),
            Self::EqualLimit { lambda } => bound_second_order_equal_limit(env, lambda, x),
            Self::Zero => bound_second_order_zero(env, x),
        }
    }
}

/// `∫_0^t |r(τ)| dτ` by the midpoint rule on `n` equal cells.
pub fn accumulated_residual<S: Real, F>(t: S, n: usize, mut residual: F) -> Result<S>
where
    F: FnMut(S) -> Result<S>,
{
    if n == 0 {
        return Err(Error::config("at least one time sample is required"));
    }
    if t < S::zero() {
        return Err(Error::Domain { x: t.as_f64(), lo: 0.0, hi: f64::INFINITY });
    }
    if t == S::zero() {
        return Ok(S::zero());
    }
    let nn = S::from_usize_lossy(n);
    let mut acc = S::zero();
    for i in 0..n {
        let tau = t * (S::from_usize_lossy(i) + S::lit(0.5)) / nn;
        acc += residual(tau)?.abs();
    }
    Ok(t * acc / nn)
}

/// Heuristic Burgers σ_P: the time-accumulated absolute residual at `(x, t)`.
pub fn burgers_pseudo_sigma<S: Real, P: PinnProblem<S> + ?Sized>(
    problem: &P,
    params: &NetworkParameters<S>,
    x: S,
    t: S,
    n_time_samples: usize,
) -> Result<S> {
    accumulated_residual(t, n_time_samples, |tau| problem.residual_at(params, &[x, tau]))
}

/// σ_P on an evaluation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoAleatoricProfile<S> {
    /// One point per entry: `[x]` for ODEs, `[x, t]` for Burgers.
    pub grid: Vec<Vec<S>>,
    pub sigma_p: Vec<S>,
    pub kind: ProfileKind,
}

impl<S: Real> PseudoAleatoricProfile<S> {
    pub fn len(&self) -> usize {
        self.sigma_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_p.is_empty()
    }

    pub fn variances(&self) -> Vec<S> {
        self.sigma_p.iter().map(|s| *s * *s).collect()
    }

    /// CSV with columns `x,sigma_P` (or `x,t,sigma_P` for space-time grids).
    pub fn to_csv(&self) -> String {
        let dim = self.grid.first().map_or(1, Vec::len);
        let mut out = String::from(if dim == 2 { "x,t,sigma_P\n" } else { "x,sigma_P\n" });
        for (p, s) in self.grid.iter().zip(&self.sigma_p) {
            for c in p {
                let _ = write!(out, "{c:e},");
            }
            let _ = writeln!(out, "{s:e}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(Error::at_path(path))
    }
}

/// Evaluates σ_P on `grid` with the kernel matching `problem`. ODE problems
/// need an envelope; Burgers uses the accumulated-residual operator with
/// [`DEFAULT_TIME_SAMPLES`] and ignores it.
pub fn pseudo_profile<S: Real>(
    problem: &Problem<S>,
    params: &NetworkParameters<S>,
    envelope: Option<&ResidualEnvelope<S>>,
    grid: &[Vec<S>],
) -> Result<PseudoAleatoricProfile<S>> {
    match problem {
        Problem::Ode(ode) => {
            let env = envelope.ok_or_else(|| Error::config("ODE profiles need a residual envelope"))?;
            let kernel = BoundKernel::for_problem(ode)?;
            let sigma_p = grid
                .iter()
                .map(|p| match p.as_slice() {
                    [x] => kernel.evaluate(env, *x),
                    _ => Err(Error::Shape { expected: 1, got: p.len() }),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PseudoAleatoricProfile { grid: grid.to_vec(), sigma_p, kind: kernel.kind() })
        }
        Problem::Burgers(b) => {
            let sigma_p = grid
                .iter()
                .map(|p| match p.as_slice() {
                    [x, t] => {
                        burgers_pseudo_sigma(b, params, *x, *t - b.test_time.0, DEFAULT_TIME_SAMPLES)
                    }
                    _ => Err(Error::Shape { expected: 2, got: p.len() }),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PseudoAleatoricProfile { grid: grid.to_vec(), sigma_p, kind: ProfileKind::BurgersHeuristic })
        }
    }
}
