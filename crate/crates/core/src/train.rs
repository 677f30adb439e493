//! Deterministic PINN training: Adam on the mean squared residual over a
//! fixed collocation grid.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{io, Activation, AdamConfig, AdamState, NetworkParameters, Tape};
use crate::problems::{PinnProblem, Problem};
use crate::scalar::{linspace, Real};

/// Collocation grid: a tensor product of per-axis point counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    pub domain: Vec<(f64, f64)>,
    /// Equally spaced (inclusive) when true, otherwise seeded uniform draws.
    pub equally_spaced: bool,
    /// Per-epoch uniform jitter, as a fraction of the grid cell.
    pub jitter: Option<f64>,
}

impl GridSpec {
    pub fn uniform_1d(count: usize, a: f64, b: f64) -> Self {
        Self { counts: vec![count], domain: vec![(a, b)], equally_spaced: true, jitter: None }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().product()
    }

    fn cell(&self, axis: usize) -> f64 {
        let (a, b) = self.domain[axis];
        if self.counts[axis] > 1 {
            (b - a) / (self.counts[axis] - 1) as f64
        } else {
            b - a
        }
    }

    /// Points in row-major order (last axis fastest).
    pub fn points<S: Real>(&self, seed: u64) -> Vec<Vec<S>> {
        let axes: Vec<Vec<S>> = if self.equally_spaced {
            self.counts
                .iter()
                .zip(&self.domain)
                .map(|(&n, &(a, b))| linspace(S::lit(a), S::lit(b), n))
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            self.counts
                .iter()
                .zip(&self.domain)
                .map(|(&n, &(a, b))| {
                    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(a..=b)).collect();
                    v.sort_by(|p, q| p.total_cmp(q));
                    v.into_iter().map(S::lit).collect()
                })
                .collect()
        };
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.counts.is_empty() || self.counts.len() != self.domain.len() {
            return Err(Error::config("grid counts and domain must have one entry per axis"));
        }
        if self.counts.contains(&0) {
            return Err(Error::config("grid counts must be positive"));
        }
        if self.domain.iter().any(|&(a, b)| !(a < b)) {
            return Err(Error::config("grid domain bounds must be increasing"));
        }
        if let Some(j) = self.jitter {
            if !(0.0..=0.5).contains(&j) {
                return Err(Error::config("jitter must lie in [0, 0.5] grid cells"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub collocation: GridSpec,
    pub seed: u64,
}

impl TrainConfig {
    /// Two hidden tanh layers of 32 units, Adam at 0.01, 32 equally spaced
    /// points on the training domain, full batch.
    pub fn ode(train_domain: (f64, f64), epochs: usize, seed: u64) -> Self {
        Self {
            layer_sizes: vec![1, 32, 32, 1],
            activation: Activation::Tanh,
            epochs,
            batch_size: 32,
            learning_rate: 0.01,
            collocation: GridSpec::uniform_1d(32, train_domain.0, train_domain.1),
            seed,
        }
    }

    /// Two hidden sigmoid layers of 32 units, Adam at 1e-3, an `nx x nt` grid
    /// on `[-1, 1] x [0, 1]` jittered by up to half a cell every epoch.
    pub fn burgers(nx: usize, nt: usize, epochs: usize, seed: u64) -> Self {
        Self {
            layer_sizes: vec![2, 32, 32, 1],
            activation: Activation::Sigmoid,
            epochs,
            batch_size: nx * nt,
            learning_rate: 1e-3,
            collocation: GridSpec {
                counts: vec![nx, nt],
                domain: vec![(-1.0, 1.0), (0.0, 1.0)],
                equally_spaced: true,
                jitter: Some(0.5),
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.collocation.validate()?;
        if self.batch_size == 0 || self.batch_size > self.collocation.total() {
            return Err(Error::config(format!(
                "batch size {} must be in 1..={}",
                self.batch_size,
                self.collocation.total()
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.layer_sizes.first() != Some(&self.collocation.counts.len()) {
            return Err(Error::config("network input width must match the collocation dimension"));
        }
        Ok(())
    }
}

/// A trained deterministic network and its training record.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedPINN<S> {
    pub params: NetworkParameters<S>,
    pub problem_id: String,
    /// Mean squared residual over the collocation set, one entry per epoch,
    /// measured before that epoch's updates.
    pub loss_history: Vec<f64>,
    pub config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    problem_id: String,
    config: TrainConfig,
    final_loss: Option<f64>,
    loss_history: Vec<f64>,
}

impl<S: Real> TrainedPINN<S> {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    /// Writes `<stem>.weights` and a `<stem>.json` metadata sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        io::write_weights(&self.params, &dir.join(format!("{stem}.weights")))?;
        let meta = Sidecar {
            problem_id: self.problem_id.clone(),
            config: self.config.clone(),
            final_loss: self.final_loss(),
            loss_history: self.loss_history.clone(),
        };
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(Error::at_path(&path))?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let params = io::read_weights(&dir.join(format!("{stem}.weights")))?;
        let path = dir.join(format!("{stem}.json"));
        let meta: Sidecar = serde_json::from_str(&std::fs::read_to_string(&path).map_err(Error::at_path(&path))?)?;
        Ok(Self { params, problem_id: meta.problem_id, loss_history: meta.loss_history, config: meta.config })
    }
}

/// Mean of `r(x)²` over `points`.
pub fn mse_residual_loss<S: Real, P: PinnProblem<S> + ?Sized>(
    problem: &P,
    params: &NetworkParameters<S>,
    points: &[Vec<S>],
) -> Result<S> {
    let mut acc = S::zero();
    for x in points {
        let r = problem.residual_at(params, x)?;
        acc += r * r;
    }
    Ok(acc / S::from_usize_lossy(points.len().max(1)))
}

/// Mean squared residual over `points` and its parameter gradient, which is
/// accumulated into `grad` (overwritten).
pub fn residual_loss_and_gradient<S: Real, P: PinnProblem<S> + ?Sized>(
    problem: &P,
    params: &NetworkParameters<S>,
    points: &[Vec<S>],
    tape: &mut Tape<S>,
    grad: &mut [S],
) -> Result<S> {
    grad.iter_mut().for_each(|g| *g = S::zero());
    let m = S::from_usize_lossy(points.len().max(1));
    let two_over_m = S::lit(2.0) / m;
    let mut acc = S::zero();
    for x in points {
        let raw = params.forward_recorded(x, tape)?;
        let (r, cot) = problem.residual_and_cotangent(&raw, x);
        acc += r * r;
        params.backward_into(tape, &cot.scale(two_over_m * r), grad)?;
    }
    Ok(acc / m)
}

fn jittered<S: Real>(base: &[Vec<S>], spec: &GridSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<S>> {
    let Some(amp) = spec.jitter.filter(|&a| a > 0.0) else {
        return base.to_vec();
    };
    let halfwidths: Vec<f64> = (0..spec.counts.len()).map(|a| amp * spec.cell(a)).collect();
    base.iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(axis, &v)| {
                    let (lo, hi) = spec.domain[axis];
                    let d = rng.random_range(-halfwidths[axis]..=halfwidths[axis]);
                    S::lit((v.as_f64() + d).clamp(lo, hi))
                })
                .collect()
        })
        .collect()
}

/// Trains a fresh network on `problem`. `problem_id` is recorded with the result.
pub fn train<S: Real, P: PinnProblem<S> + ?Sized>(
    problem: &P,
    problem_id: &str,
    config: &TrainConfig,
) -> Result<TrainedPINN<S>> {
    config.validate()?;
    if config.layer_sizes[0] != problem.input_dim() {
        return Err(Error::config("network input width does not match the problem"));
    }
    let mut params = NetworkParameters::<S>::init(&config.layer_sizes, config.activation, config.seed)?;
    let base = config.collocation.points::<S>(config.seed);
    let mut adam = AdamState::new(params.num_params(), AdamConfig::with_learning_rate(config.learning_rate));
    let mut tape = Tape::new(&params, problem.tracked())?;
    let mut grad = vec![S::zero(); params.num_params()];
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let points = jittered(&base, &config.collocation, &mut jitter_rng);
        let mut epoch_loss = 0.0;
        for batch in points.chunks(config.batch_size) {
            let loss = residual_loss_and_gradient(problem, &params, batch, &mut tape, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, what: format!("residual loss is {loss}") });
            }
            epoch_loss += loss.as_f64() * batch.len() as f64;
            adam.step(params.as_mut_slice(), &grad).map_err(|e| match e {
                Error::Diverged { what, .. } => Error::Diverged { epoch, what },
                other => other,
            })?;
        }
        loss_history.push(epoch_loss / points.len() as f64);
    }
    if params.as_slice().iter().any(|p| !p.is_finite()) {
        return Err(Error::Diverged { epoch: config.epochs, what: "non-finite parameters".into() });
    }
    Ok(TrainedPINN { params, problem_id: problem_id.to_string(), loss_history, config: config.clone() })
}

/// Trains on a registered problem.
pub fn train_deterministic<S: Real>(problem: &Problem<S>, config: &TrainConfig) -> Result<TrainedPINN<S>> {
    let region = problem.train_region();
    let inside = region.len() == config.collocation.domain.len()
        && region
            .iter()
            .zip(&config.collocation.domain)
            .all(|(&(lo, hi), &(a, b))| a >= lo.as_f64() && b <= hi.as_f64());
    if !inside {
        return Err(Error::config(format!(
            "collocation domain {:?} is not inside the training region of '{}'",
            config.collocation.domain,
            problem.id()
        )));
    }
    train(problem, problem.id(), config)
}

/// Surrogate value `ũ(x)` of a trained model.
pub fn surrogate_values<S: Real, P: PinnProblem<S> + ?Sized>(
    problem: &P,
    params: &NetworkParameters<S>,
    points: &[Vec<S>],
) -> Result<Vec<S>> {
    points.iter().map(|x| problem.surrogate(params, x)).collect()
}

/// Residual jet helper for callers that need `r` on arbitrary points.
pub fn residuals<S: Real, P: PinnProblem<S> + ?Sized>(
    problem: &P,
    params: &NetworkParameters<S>,
    points: &[Vec<S>],
) -> Result<Vec<S>> {
    points.iter().map(|x| problem.residual_at(params, x)).collect()
}
