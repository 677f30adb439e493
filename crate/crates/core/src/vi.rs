//! Mean-field Gaussian variational inference over all network weights
//! (Bayes by Backprop) and Monte Carlo predictive moments.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nlm::SimulatedDataset;
use crate::nn::{AdamConfig, AdamState, Jet2, NetworkParameters, Tape};
use crate::problems::PinnProblem;
use crate::scalar::{sigmoid, softplus, Real};

pub const RHO_INIT_RANGE: (f64, f64) = (-5.0, -4.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// `N(0; r_θ(x_j), σ_D²)` on the collocation points.
    BaselineResidual,
    /// `N(u_MSE(x_j); ũ_θ(x_j), σ_P²(x_j))` on simulated data.
    ErrorAwareSimulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VIConfig {
    /// Standard deviation of the zero-mean Gaussian prior on every weight.
    pub prior_sigma: f64,
    pub epochs: usize,
    pub mc_samples_per_step: usize,
    pub likelihood: Likelihood,
    pub sigma_d: f64,
    pub n_posterior_samples: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl VIConfig {
    /// One reparameterized draw per step, 1000 posterior samples, σ_D = 1.
    pub fn new(prior_sigma: f64, epochs: usize, likelihood: Likelihood, learning_rate: f64, seed: u64) -> Self {
        Self {
            prior_sigma,
            epochs,
            mc_samples_per_step: 1,
            likelihood,
            sigma_d: 1.0,
            n_posterior_samples: 1000,
            learning_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("prior_sigma", self.prior_sigma)?;
        positive("sigma_d", self.sigma_d)?;
        positive("learning_rate", self.learning_rate)?;
        if self.mc_samples_per_step == 0 || self.n_posterior_samples == 0 {
            return Err(Error::config("sample counts must be positive"));
        }
        Ok(())
    }
}

/// Independent Gaussians `N(μ_i, softplus(ρ_i)²)` over the flat parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldGaussian<S> {
    pub mu: Vec<S>,
    pub rho: Vec<S>,
    pub means_frozen: bool,
    template: NetworkParameters<S>,
}

impl<S: Real> MeanFieldGaussian<S> {
    pub fn sigma(&self) -> Vec<S> {
        self.rho.iter().map(|&r| softplus(r)).collect()
    }

    pub fn num_params(&self) -> usize {
        self.mu.len()
    }

    /// The network at the variational means.
    pub fn mean_network(&self) -> NetworkParameters<S> {
        self.template.with_params(self.mu.clone()).expect("same architecture")
    }

    pub fn with_constant_rho(mut self, rho: S) -> Self {
        self.rho.iter_mut().for_each(|r| *r = rho);
        self
    }

    pub fn kl_to_prior(&self, prior_sigma: S) -> S {
        kl_diag_gaussian(&self.mu, &self.sigma(), prior_sigma)
    }
}

/// `KL(N(μ, diag σ²) || N(0, s² I))`.
pub fn kl_diag_gaussian<S: Real>(mu: &[S], sigma: &[S], prior_sigma: S) -> S {
    let half = S::lit(0.5);
    let s2 = prior_sigma * prior_sigma;
    mu.iter()
        .zip(sigma)
        .map(|(&m, &s)| (prior_sigma / s).ln() + (s * s + m * m) / (s2 + s2) - half)
        .sum()
}

/// Means copied from `trained` and frozen, `ρ ~ U[-5, -4]`.
pub fn vi_init<S: Real>(trained: &NetworkParameters<S>, seed: u64) -> MeanFieldGaussian<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = RHO_INIT_RANGE;
    let rho = (0..trained.num_params()).map(|_| S::lit(rng.random_range(lo..=hi))).collect();
    MeanFieldGaussian { mu: trained.as_slice().to_vec(), rho, means_frozen: true, template: trained.clone() }
}

/// Data term of the ELBO.
#[derive(Clone, Debug)]
pub enum Objective<S> {
    Baseline { points: Vec<Vec<S>>, sigma_d: S },
    ErrorAware { data: SimulatedDataset<S> },
}

impl<S: Real> Objective<S> {
    pub fn likelihood(&self) -> Likelihood {
        match self {
            Self::Baseline { .. } => Likelihood::BaselineResidual,
            Self::ErrorAware { .. } => Likelihood::ErrorAwareSimulated,
        }
    }

    /// Log-likelihood at `params`; its parameter gradient is written to `grad`.
    fn log_likelihood<P: PinnProblem<S> + ?Sized>(
        &self,
        problem: &P,
        params: &NetworkParameters<S>,
        tapes: &mut Tapes<S>,
        grad: &mut [S],
    ) -> Result<S> {
        grad.iter_mut().for_each(|g| *g = S::zero());
        let half_ln_2pi = S::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        let mut ll = S::zero();
        match self {
            Self::Baseline { points, sigma_d } => {
                let var = *sigma_d * *sigma_d;
                let norm = half_ln_2pi + sigma_d.ln();
                for x in points {
                    let raw = params.forward_recorded(x, &mut tapes.jet)?;
                    let (r, cot) = problem.residual_and_cotangent(&raw, x);
                    ll -= r * r / (var + var) + norm;
                    params.backward_into(&mut tapes.jet, &cot.scale(-r / var), grad)?;
                }
            }
            Self::ErrorAware { data } => {
                for ((x, &y), &var) in data.points.iter().zip(&data.targets).zip(&data.variances) {
                    let raw = params.forward_recorded(x, &mut tapes.value)?.value;
                    let (offset, mask) = problem.constraint(x);
                    let u = offset.value + mask.value * raw;
                    let d = u - y;
                    ll -= d * d / (var + var) + half_ln_2pi + S::lit(0.5) * var.ln();
                    let up = Jet2::constant(-d / var * mask.value, 0);
                    params.backward_into(&mut tapes.value, &up, grad)?;
                }
            }
        }
        Ok(ll)
    }
}

struct Tapes<S> {
    jet: Tape<S>,
    value: Tape<S>,
}

/// Stochastic ELBO maximization with Adam on `ρ` (and `μ` unless frozen).
pub struct VariationalTrainer<'a, S, P: ?Sized> {
    pub q: MeanFieldGaussian<S>,
    problem: &'a P,
    objective: Objective<S>,
    prior_sigma: S,
    adam: AdamState<S>,
    rng: ChaCha8Rng,
    tapes: Tapes<S>,
    theta: NetworkParameters<S>,
    zeta: Vec<S>,
    grad_theta: Vec<S>,
    grad_q: Vec<S>,
    samples_per_step: usize,
    step: usize,
}

impl<'a, S: Real, P: PinnProblem<S> + ?Sized> VariationalTrainer<'a, S, P> {
    pub fn new(q: MeanFieldGaussian<S>, problem: &'a P, objective: Objective<S>, config: &VIConfig) -> Result<Self> {
        config.validate()?;
        if config.likelihood != objective.likelihood() {
            return Err(Error::config("likelihood in the config does not match the objective"));
        }
        let theta = q.mean_network();
        let tapes = Tapes { jet: Tape::new(&theta, problem.tracked())?, value: Tape::new(&theta, &[])? };
        let n = q.num_params();
        let n_opt = if q.means_frozen { n } else { 2 * n };
        Ok(Self {
            problem,
            objective,
            prior_sigma: S::lit(config.prior_sigma),
            adam: AdamState::new(n_opt, AdamConfig::with_learning_rate(config.learning_rate)),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0xe1b0_5eed),
            tapes,
            theta,
            zeta: vec![S::zero(); n],
            grad_theta: vec![S::zero(); n],
            grad_q: vec![S::zero(); n_opt],
            samples_per_step: config.mc_samples_per_step,
            step: 0,
            q,
        })
    }

    /// One reparameterized gradient step. Returns the ELBO estimate at the
    /// parameters before the update.
    pub fn step(&mut self) -> Result<S> {
        let n = self.q.num_params();
        let sigma = self.q.sigma();
        let s2 = self.prior_sigma * self.prior_sigma;
        let frozen = self.q.means_frozen;
        // KL part, exact
        let kl = kl_diag_gaussian(&self.q.mu, &sigma, self.prior_sigma);
        let rho_off = if frozen { 0 } else { n };
        for i in 0..n {
            let dsig = -sigma[i].recip() + sigma[i] / s2;
            self.grad_q[rho_off + i] = dsig * sigmoid(self.q.rho[i]);
            if !frozen {
                self.grad_q[i] = self.q.mu[i] / s2;
            }
        }
        let m = S::from_usize_lossy(self.samples_per_step);
        let mut ll = S::zero();
        for _ in 0..self.samples_per_step {
            for (z, (t, (mu, s))) in self
                .zeta
                .iter_mut()
                .zip(self.theta.as_mut_slice().iter_mut().zip(self.q.mu.iter().zip(&sigma)))
            {
                *z = S::lit(self.rng.sample::<f64, _>(StandardNormal));
                *t = *mu + *s * *z;
            }
            ll += self.objective.log_likelihood(self.problem, &self.theta, &mut self.tapes, &mut self.grad_theta)? / m;
            for i in 0..n {
                let g = -self.grad_theta[i] / m;
                self.grad_q[rho_off + i] += g * self.zeta[i] * sigmoid(self.q.rho[i]);
                if !frozen {
                    self.grad_q[i] += g;
                }
            }
        }
        let elbo = ll - kl;
        if !elbo.is_finite() {
            return Err(Error::Diverged { epoch: self.step, what: format!("ELBO is {elbo}") });
        }
        let mut packed: Vec<S> =
            if frozen { self.q.rho.clone() } else { self.q.mu.iter().chain(&self.q.rho).copied().collect() };
        self.adam.step(&mut packed, &self.grad_q).map_err(|e| match e {
            Error::Diverged { what, .. } => Error::Diverged { epoch: self.step, what },
            other => other,
        })?;
        if frozen {
            self.q.rho = packed;
        } else {
            self.q.rho = packed.split_off(n);
            self.q.mu = packed;
        }
        self.step += 1;
        Ok(elbo)
    }

    pub fn into_posterior(self) -> MeanFieldGaussian<S> {
        self.q
    }
}

/// Runs `config.epochs` ELBO steps and returns the fitted posterior with the
/// per-step ELBO trace.
pub fn train_vi<S: Real, P: PinnProblem<S> + ?Sized>(
    q: MeanFieldGaussian<S>,
    problem: &P,
    objective: Objective<S>,
    config: &VIConfig,
) -> Result<(MeanFieldGaussian<S>, Vec<f64>)> {
    let mut trainer = VariationalTrainer::new(q, problem, objective, config)?;
    let mut trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        trace.push(trainer.step()?.as_f64());
    }
    Ok((trainer.into_posterior(), trace))
}

/// `n` i.i.d. draws `μ + σ ⊙ ζ`.
pub fn sample_posterior<S: Real>(q: &MeanFieldGaussian<S>, n: usize, seed: u64) -> Vec<NetworkParameters<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = q.sigma();
    (0..n)
        .map(|_| {
            let flat = q
                .mu
                .iter()
                .zip(&sigma)
                .map(|(&m, &s)| m + s * S::lit(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            q.template.with_params(flat).expect("same architecture")
        })
        .collect()
}

/// Mean, variances and their total on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveBand<S> {
    pub grid: Vec<Vec<S>>,
    pub mean: Vec<S>,
    pub epistemic_var: Vec<S>,
    pub sigma_p2: Vec<S>,
    pub total_var: Vec<S>,
}

impl<S: Real> PredictiveBand<S> {
    pub fn new(grid: Vec<Vec<S>>, mean: Vec<S>, epistemic_var: Vec<S>, sigma_p2: Vec<S>) -> Result<Self> {
        for len in [mean.len(), epistemic_var.len(), sigma_p2.len()] {
            if len != grid.len() {
                return Err(Error::Shape { expected: grid.len(), got: len });
            }
        }
        let total_var = epistemic_var.iter().zip(&sigma_p2).map(|(e, s)| *e + *s).collect();
        Ok(Self { grid, mean, epistemic_var, sigma_p2, total_var })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn sd_total(&self) -> Vec<S> {
        self.total_var.iter().map(|v| v.sqrt()).collect()
    }

    /// CSV with columns `x,mean,epistemic_var,sigma_P2,total_var` (a `t`
    /// column follows `x` on space-time grids).
    pub fn to_csv(&self) -> String {
        let dim = self.grid.first().map_or(1, Vec::len);
        let mut out =
            String::from(if dim == 2 { "x,t,mean,epistemic_var,sigma_P2,total_var\n" } else { "x,mean,epistemic_var,sigma_P2,total_var\n" });
        for i in 0..self.len() {
            for c in &self.grid[i] {
                let _ = write!(out, "{c:e},");
            }
            let _ = writeln!(out, "{:e},{:e},{:e},{:e}", self.mean[i], self.epistemic_var[i], self.sigma_p2[i], self.total_var[i]);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(Error::at_path(path))
    }
}

/// Sample mean and population variance of the constrained surrogate over
/// `samples`; `sigma_p` adds the pseudo-aleatoric part (zero when absent).
pub fn predictive_moments<S: Real, P: PinnProblem<S> + ?Sized>(
    samples: &[NetworkParameters<S>],
    problem: &P,
    grid: &[Vec<S>],
    sigma_p: Option<&[S]>,
) -> Result<PredictiveBand<S>> {
    if samples.is_empty() {
        return Err(Error::config("no posterior samples"));
    }
    if let Some(s) = sigma_p {
        if s.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), got: s.len() });
        }
    }
    let n = S::from_usize_lossy(samples.len());
    let mut mean = Vec::with_capacity(grid.len());
    let mut epistemic = Vec::with_capacity(grid.len());
    let mut values = vec![S::zero(); samples.len()];
    for x in grid {
        for (v, s) in values.iter_mut().zip(samples) {
            *v = problem.surrogate(s, x)?;
        }
        // shift by the first draw so identical draws give exactly zero spread
        let base = values[0];
        let m = values.iter().map(|&v| v - base).sum::<S>() / n;
        let var = values.iter().map(|&v| (v - base - m) * (v - base - m)).sum::<S>() / n;
        mean.push(base + m);
        epistemic.push(var);
    }
    let sigma_p2 = match sigma_p {
        Some(s) => s.iter().map(|v| *v * *v).collect(),
        None => vec![S::zero(); grid.len()],
    };
    PredictiveBand::new(grid.to_vec(), mean, epistemic, sigma_p2)
}
