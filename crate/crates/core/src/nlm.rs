//! Neural linear model: Bayesian linear regression on the last hidden layer
//! of a trained network, with the pseudo-aleatoric variance as a
//! heteroscedastic likelihood.
//!
//! The hard-constraint transform `ũ = offset + mask · (φ·w)` is linear in the
//! head weights `w`, so regressing `u_MSE - offset` on `mask · φ` is the same
//! as regressing the untransformed targets with variance `σ_P² / mask²`, and
//! every posterior draw keeps the initial conditions exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::NetworkParameters;
use crate::problems::PinnProblem;
use crate::scalar::{linspace, Real};

/// Floor applied to σ_P² in the likelihood.
pub const VARIANCE_FLOOR: f64 = 1e-10;
pub const DEFAULT_PRIOR_CANDIDATES: usize = 100;

/// Feature vector at one point, with the constraint transform at that point.
#[derive(Clone, Debug, PartialEq)]
pub struct Features<S> {
    /// Last hidden layer activations followed by a constant 1.
    pub phi: Vec<S>,
    pub offset: S,
    pub mask: S,
}

impl<S: Real> Features<S> {
    /// Features with the identity transform.
    pub fn plain(phi: Vec<S>) -> Self {
        Self { phi, offset: S::zero(), mask: S::one() }
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }
}

pub fn extract_features<S: Real, P: PinnProblem<S> + ?Sized>(
    problem: &P,
    params: &NetworkParameters<S>,
    x: &[S],
) -> Result<Features<S>> {
    let mut phi = params.hidden_features(x)?;
    phi.push(S::one());
    let (offset, mask) = problem.constraint(x);
    Ok(Features { phi, offset: offset.value, mask: mask.value })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<S> {
    pub rows: Vec<Features<S>>,
}

impl<S: Real> FeatureMatrix<S> {
    pub fn new(rows: Vec<Features<S>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::config("feature matrix needs at least one row"));
        };
        let d = first.dim();
        if let Some(bad) = rows.iter().find(|r| r.dim() != d) {
            return Err(Error::Shape { expected: d, got: bad.dim() });
        }
        if rows.iter().any(|r| r.phi.iter().any(|v| !v.is_finite()) || !r.mask.is_finite() || !r.offset.is_finite()) {
            return Err(Error::config("feature matrix has non-finite entries"));
        }
        Ok(Self { rows })
    }

    pub fn from_problem<P: PinnProblem<S> + ?Sized>(problem: &P, params: &NetworkParameters<S>, points: &[Vec<S>]) -> Result<Self> {
        Self::new(points.iter().map(|x| extract_features(problem, params, x)).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }
}

/// Simulated observations `(x_j, u_MSE(x_j))` with variances `σ_P²(x_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset<S> {
    pub points: Vec<Vec<S>>,
    pub targets: Vec<S>,
    pub variances: Vec<S>,
}

impl<S: Real> SimulatedDataset<S> {
    /// Floors variances at [`VARIANCE_FLOOR`]. Points whose σ_P is not finite
    /// carry no information and are dropped.
    pub fn new(points: Vec<Vec<S>>, targets: Vec<S>, sigma_p: &[S]) -> Result<Self> {
        if targets.len() != points.len() {
            return Err(Error::Shape { expected: points.len(), got: targets.len() });
        }
        if sigma_p.len() != points.len() {
            return Err(Error::Shape { expected: points.len(), got: sigma_p.len() });
        }
        let floor = S::lit(VARIANCE_FLOOR);
        let mut out = Self { points: Vec::new(), targets: Vec::new(), variances: Vec::new() };
        for ((p, t), s) in points.into_iter().zip(targets).zip(sigma_p) {
            if !s.is_finite() {
                continue;
            }
            if !t.is_finite() {
                return Err(Error::config("simulated targets must be finite"));
            }
            out.points.push(p);
            out.targets.push(t);
            out.variances.push((*s * *s).max(floor));
        }
        Ok(out)
    }

    /// Targets are the trained surrogate's values at `points`.
    pub fn from_problem<P: PinnProblem<S> + ?Sized>(
        problem: &P,
        params: &NetworkParameters<S>,
        points: &[Vec<S>],
        sigma_p: &[S],
    ) -> Result<Self> {
        let targets = points.iter().map(|x| problem.surrogate(params, x)).collect::<Result<Vec<_>>>()?;
        Self::new(points.to_vec(), targets, sigma_p)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky<S> {
    n: usize,
    l: Vec<S>,
}

impl<S: Real> Cholesky<S> {
    pub fn factor(a: &[S], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Shape { expected: n * n, got: a.len() });
        }
        let mut l = vec![S::zero(); n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > S::zero()) || !d.is_finite() {
                return Err(Error::Conditioning { pivot: j, value: d.as_f64(), size: n });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `L y = b` in place.
    pub fn forward_substitute(&self, b: &mut [S]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn back_substitute(&self, y: &mut [S]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [S]) {
        self.forward_substitute(b);
        self.back_substitute(b);
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Error-free product: `a * b = p + e` exactly.
fn two_prod<S: Real>(a: S, b: S) -> (S, S) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Error-free sum: `a + b = s + e` exactly.
fn two_sum<S: Real>(a: S, b: S) -> (S, S) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Dot product evaluated as if in twice the working precision.
fn dot2<S: Real>(terms: impl Iterator<Item = (S, S)>) -> S {
    let (mut s, mut c) = (S::zero(), S::zero());
    for (a, b) in terms {
        let (p, pe) = two_prod(a, b);
        let (t, se) = two_sum(s, p);
        s = t;
        c += pe + se;
    }
    s + c
}

/// Gaussian posterior over the linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct NLMPosterior<S> {
    pub mean: Vec<S>,
    /// Row-major `d x d`.
    pub covariance: Vec<S>,
    pub prior_sigma: S,
    precision: Cholesky<S>,
}

/// Effective design rows, targets and weights of the regression.
struct Design<S> {
    rows: Vec<Vec<S>>,
    targets: Vec<S>,
    weights: Vec<S>,
}

fn design<S: Real>(features: &FeatureMatrix<S>, data: &SimulatedDataset<S>) -> Result<Design<S>> {
    if features.len() != data.len() {
        return Err(Error::Shape { expected: features.len(), got: data.len() });
    }
    let floor = S::lit(VARIANCE_FLOOR);
    let mut out = Design { rows: Vec::new(), targets: Vec::new(), weights: Vec::new() };
    for ((f, &y), &v) in features.rows.iter().zip(&data.targets).zip(&data.variances) {
        if v.is_nan() || v < S::zero() {
            return Err(Error::config("likelihood variances must be nonnegative"));
        }
        out.rows.push(f.phi.iter().map(|&p| f.mask * p).collect());
        out.targets.push(y - f.offset);
        out.weights.push(v.max(floor).recip());
    }
    Ok(out)
}

impl<S: Real> Design<S> {
    /// `Φᵀ W y - (Φᵀ W Φ + τ I) μ`, accumulated in compensated arithmetic.
    fn normal_residual(&self, mu: &[S], tau: S) -> Vec<S> {
        let d = mu.len();
        let misfit: Vec<S> = self
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(row, &y)| dot2(std::iter::once((y, S::one())).chain(row.iter().zip(mu).map(|(&a, &m)| (a, -m)))))
            .collect();
        (0..d)
            .map(|i| {
                let data_part = self
                    .rows
                    .iter()
                    .zip(&self.weights)
                    .zip(&misfit)
                    .map(|((row, &w), &m)| (row[i] * w, m));
                dot2(data_part.chain(std::iter::once((-tau, mu[i]))))
            })
            .collect()
    }
}

/// Posterior `Σ = (Φᵀ Σ_P⁻¹ Φ + σ⁻² I)⁻¹`, `μ = Σ Φᵀ Σ_P⁻¹ y`, via a
/// Cholesky factorization of the precision and two steps of iterative
/// refinement with compensated residuals.
pub fn nlm_fit<S: Real>(features: &FeatureMatrix<S>, data: &SimulatedDataset<S>, prior_sigma: S) -> Result<NLMPosterior<S>> {
    if !(prior_sigma > S::zero()) || !prior_sigma.is_finite() {
        return Err(Error::config(format!("prior sigma must be positive, got {prior_sigma}")));
    }
    let des = design(features, data)?;
    let d = features.dim();
    let tau = (prior_sigma * prior_sigma).recip();
    let mut a = vec![S::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let v = dot2(des.rows.iter().zip(&des.weights).map(|(r, &w)| (r[i] * w, r[j])));
            a[i * d + j] = v;
            a[j * d + i] = v;
        }
        a[i * d + i] += tau;
    }
    let chol = Cholesky::factor(&a, d)?;
    let mut mu = vec![S::zero(); d];
    for _ in 0..3 {
        let mut r = des.normal_residual(&mu, tau);
        chol.solve_in_place(&mut r);
        mu.iter_mut().zip(&r).for_each(|(m, dm)| *m += *dm);
    }
    let mut covariance = vec![S::zero(); d * d];
    for j in 0..d {
        let mut e = vec![S::zero(); d];
        e[j] = S::one();
        chol.solve_in_place(&mut e);
        for i in 0..d {
            covariance[i * d + j] = e[i];
        }
    }
    // symmetrize the round-off
    for i in 0..d {
        for j in 0..i {
            let v = (covariance[i * d + j] + covariance[j * d + i]) * S::lit(0.5);
            covariance[i * d + j] = v;
            covariance[j * d + i] = v;
        }
    }
    Ok(NLMPosterior { mean: mu, covariance, prior_sigma, precision: chol })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlmPrediction<S> {
    pub mean: S,
    pub epistemic_var: S,
    pub sigma_p2: S,
    pub total_var: S,
}

impl<S: Real> NLMPosterior<S> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `φ Σ φᵀ`, computed as `‖L⁻¹ φ‖²` with `L Lᵀ` the precision.
    pub fn quadratic_form(&self, phi: &[S]) -> S {
        let mut y = phi.to_vec();
        self.precision.forward_substitute(&mut y);
        y.iter().map(|v| *v * *v).sum()
    }

    pub fn covariance_upper(&self) -> Vec<S> {
        let d = self.dim();
        (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).map(|(i, j)| self.covariance[i * d + j]).collect()
    }
}

/// Predictive mean and variance at one point; the epistemic part is scaled by
/// the squared mask, σ_P² is added as is.
pub fn nlm_predict<S: Real>(posterior: &NLMPosterior<S>, features: &Features<S>, sigma_p: S) -> Result<NlmPrediction<S>> {
    if features.dim() != posterior.dim() {
        return Err(Error::Shape { expected: posterior.dim(), got: features.dim() });
    }
    let head = dot2(features.phi.iter().copied().zip(posterior.mean.iter().copied()));
    let mean = features.offset + features.mask * head;
    let epistemic_var = features.mask * features.mask * posterior.quadratic_form(&features.phi);
    let sigma_p2 = sigma_p * sigma_p;
    Ok(NlmPrediction { mean, epistemic_var, sigma_p2, total_var: sigma_p2 + epistemic_var })
}

/// `n` equally spaced prior standard deviations on `[0.1, 1]`.
pub fn default_prior_candidates<S: Real>() -> Vec<S> {
    linspace(S::lit(0.1), S::one(), DEFAULT_PRIOR_CANDIDATES)
}

/// Points where the prior is judged: features, the deterministic surrogate
/// and σ_P.
#[derive(Clone, Debug)]
pub struct EvalGrid<S> {
    pub features: Vec<Features<S>>,
    pub u_mse: Vec<S>,
    pub sigma_p: Vec<S>,
}

impl<S: Real> EvalGrid<S> {
    pub fn from_problem<P: PinnProblem<S> + ?Sized>(
        problem: &P,
        params: &NetworkParameters<S>,
        points: &[Vec<S>],
        sigma_p: &[S],
    ) -> Result<Self> {
        if sigma_p.len() != points.len() {
            return Err(Error::Shape { expected: points.len(), got: sigma_p.len() });
        }
        let features = points.iter().map(|x| extract_features(problem, params, x)).collect::<Result<Vec<_>>>()?;
        let u_mse = points.iter().map(|x| problem.surrogate(params, x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { features, u_mse, sigma_p: sigma_p.to_vec() })
    }
}

/// Outcome of the prior search.
#[derive(Clone, Debug)]
pub struct PriorSearch<S> {
    pub posterior: NLMPosterior<S>,
    pub prior_sigma: S,
    /// Whether the chosen prior meets the coverage constraint everywhere.
    pub feasible: bool,
    /// Grid points violating the constraint under the chosen prior.
    pub violations: usize,
    pub objective: S,
    pub candidates_scanned: usize,
}

/// Constraint violations and objective of one fitted posterior. Points with
/// non-finite σ_P are skipped.
pub fn score_prior<S: Real>(posterior: &NLMPosterior<S>, grid: &EvalGrid<S>) -> Result<(usize, S)> {
    let mut violations = 0;
    let (mut mean_sq, mut sd_sq) = (S::zero(), S::zero());
    for ((f, &u), &sp) in grid.features.iter().zip(&grid.u_mse).zip(&grid.sigma_p) {
        if !sp.is_finite() {
            continue;
        }
        let pred = nlm_predict(posterior, f, sp)?;
        let sd = pred.total_var.sqrt();
        let gap = (pred.mean - u).abs();
        if gap > S::lit(3.0) * sd - sp {
            violations += 1;
        }
        mean_sq += gap * gap;
        sd_sq += (sd - sp) * (sd - sp);
    }
    Ok((violations, mean_sq.sqrt() + sd_sq.sqrt()))
}

/// Fits every candidate prior, keeps those meeting the coverage constraint
/// `|μ - u_MSE| <= 3σ - σ_P` on the whole grid, and returns the one with the
/// smallest `‖μ - u_MSE‖ + ‖σ - σ_P‖`. If none is feasible the candidate with
/// the fewest violations wins and `feasible` is false.
pub fn optimize_prior<S: Real>(
    features: &FeatureMatrix<S>,
    data: &SimulatedDataset<S>,
    grid: &EvalGrid<S>,
    candidates: &[S],
) -> Result<PriorSearch<S>> {
    if candidates.is_empty() {
        return Err(Error::config("no prior candidates"));
    }
    let mut best: Option<PriorSearch<S>> = None;
    for &sigma in candidates {
        let posterior = nlm_fit(features, data, sigma)?;
        let (violations, objective) = score_prior(&posterior, grid)?;
        let better = match &best {
            None => true,
            Some(b) => (violations, objective) < (b.violations, b.objective) && !objective.is_nan(),
        };
        if better {
            best = Some(PriorSearch {
                posterior,
                prior_sigma: sigma,
                feasible: violations == 0,
                violations,
                objective,
                candidates_scanned: 0,
            });
        }
    }
    let mut out = best.expect("candidates is nonempty");
    out.candidates_scanned = candidates.len();
    Ok(out)
}

/// JSON export of a fitted posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub prior_sigma: f64,
    pub mean: Vec<f64>,
    /// Upper triangle of Σ_p, row by row.
    pub covariance_upper: Vec<f64>,
    pub feasible: bool,
    pub violations: usize,
    pub candidates_scanned: usize,
}

impl<S: Real> PriorSearch<S> {
    pub fn record(&self) -> PosteriorRecord {
        PosteriorRecord {
            prior_sigma: self.prior_sigma.as_f64(),
            mean: self.posterior.mean.iter().map(|v| v.as_f64()).collect(),
            covariance_upper: self.posterior.covariance_upper().iter().map(|v| v.as_f64()).collect(),
            feasible: self.feasible,
            violations: self.violations,
            candidates_scanned: self.candidates_scanned,
        }
    }
}
