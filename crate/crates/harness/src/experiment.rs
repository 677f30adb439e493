//! One experiment cell: deterministic training, σ_P, inference, report.

use pinnuq::bounds::{estimate_envelope, pseudo_profile, PseudoAleatoricProfile, ResidualEnvelope};
use pinnuq::nlm::{
    extract_features, nlm_predict, optimize_prior, EvalGrid, FeatureMatrix, PosteriorRecord, SimulatedDataset,
};
use pinnuq::problems::{PinnProblem, Problem};
use pinnuq::scalar::linspace;
use pinnuq::train::{train_deterministic, TrainConfig, TrainedPINN};
use pinnuq::vi::{predictive_moments, sample_posterior, train_vi, vi_init, Likelihood, Objective, PredictiveBand, VIConfig};

use crate::config::{ExperimentConfig, Method};
use crate::error::{HarnessError, Result};
use crate::report::{build_report, ExperimentReport};

/// Seeds derived from the master seed, one per random stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Seeds {
    pub training: u64,
    pub vi_init: u64,
    pub vi_steps: u64,
    pub posterior_draws: u64,
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        Self {
            training: seed,
            vi_init: seed.wrapping_add(1),
            vi_steps: seed.wrapping_add(2),
            posterior_draws: seed.wrapping_add(3),
        }
    }
}

pub fn train_config(config: &ExperimentConfig, problem: &Problem<f64>) -> TrainConfig {
    let seed = Seeds::from_master(config.seed).training;
    match problem {
        Problem::Ode(ode) => TrainConfig::ode(ode.train_domain, config.det_epochs, seed),
        Problem::Burgers(_) => TrainConfig::burgers(config.burgers_grid.0, config.burgers_grid.1, config.det_epochs, seed),
    }
}

/// Deterministic stage on its own, for callers that reuse a trained model
/// across several methods.
pub fn train_stage(config: &ExperimentConfig) -> Result<TrainedPINN<f64>> {
    config.validate()?;
    let problem = config.problem()?;
    train_deterministic(&problem, &train_config(config, &problem)).map_err(HarnessError::stage("deterministic training"))
}

/// Evaluation grid: the test domain for ODEs, an x-by-t lattice for Burgers.
pub fn eval_grid(config: &ExperimentConfig, problem: &Problem<f64>) -> Vec<Vec<f64>> {
    let region = problem.test_region();
    match region.as_slice() {
        [(a, b)] => linspace(*a, *b, config.grid_points).into_iter().map(|x| vec![x]).collect(),
        [(xa, xb), (ta, tb)] => {
            let xs = linspace(*xa, *xb, config.grid_points);
            linspace(*ta, *tb, config.time_points)
                .into_iter()
                .flat_map(|t| xs.iter().map(move |&x| vec![x, t]))
                .collect()
        }
        _ => unreachable!("problems have one or two axes"),
    }
}

fn envelope(config: &ExperimentConfig, problem: &Problem<f64>, trained: &TrainedPINN<f64>) -> Result<Option<ResidualEnvelope<f64>>> {
    let Some(ode) = problem.as_ode() else { return Ok(None) };
    let knots = ResidualEnvelope::uniform_knots(ode.x0, ode.test_domain.1, config.envelope_intervals);
    estimate_envelope(problem, trained, knots, config.oversample, config.safety_factor)
        .map(Some)
        .map_err(HarnessError::stage("residual envelope"))
}

/// Intermediate products kept alongside the report.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub trained: TrainedPINN<f64>,
    pub bound: PseudoAleatoricProfile<f64>,
    pub band: PredictiveBand<f64>,
    pub posterior: Option<PosteriorRecord>,
    pub elbo_trace: Option<Vec<f64>>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let trained = train_stage(config)?;
    run_with_trained(config, trained)
}

/// Runs every stage after deterministic training on an existing model.
pub fn run_with_trained(config: &ExperimentConfig, trained: TrainedPINN<f64>) -> Result<ExperimentReport> {
    config.validate()?;
    let problem = config.problem()?;
    if trained.problem_id != config.problem_id {
        return Err(HarnessError::config(format!(
            "model was trained on '{}', not '{}'",
            trained.problem_id, config.problem_id
        )));
    }
    let seeds = Seeds::from_master(config.seed);
    let grid = eval_grid(config, &problem);
    let env = envelope(config, &problem, &trained)?;
    let bound = pseudo_profile(&problem, &trained.params, env.as_ref(), &grid).map_err(HarnessError::stage("pseudo-aleatoric bound"))?;
    let collocation = trained.config.collocation.points::<f64>(trained.config.seed);
    let sigma_at = |points: &[Vec<f64>]| {
        pseudo_profile(&problem, &trained.params, env.as_ref(), points)
            .map(|p| p.sigma_p)
            .map_err(HarnessError::stage("pseudo-aleatoric bound"))
    };

    let mut posterior = None;
    let mut elbo_trace = None;
    let band = match config.method {
        Method::Deterministic => {
            let mean = grid
                .iter()
                .map(|x| problem.surrogate(&trained.params, x))
                .collect::<pinnuq::Result<Vec<_>>>()
                .map_err(HarnessError::stage("evaluation"))?;
            let zeros = vec![0.0; grid.len()];
            PredictiveBand::new(grid.clone(), mean, zeros.clone(), zeros).map_err(HarnessError::stage("evaluation"))?
        }
        Method::BaselineVi | Method::ErrorAwareVi => {
            let stage = HarnessError::stage("variational inference");
            let (objective, likelihood) = if config.method == Method::BaselineVi {
                (Objective::Baseline { points: collocation.clone(), sigma_d: 1.0 }, Likelihood::BaselineResidual)
            } else {
                let sp = sigma_at(&collocation)?;
                let data = SimulatedDataset::from_problem(&problem, &trained.params, &collocation, &sp).map_err(stage)?;
                (Objective::ErrorAware { data }, Likelihood::ErrorAwareSimulated)
            };
            let prior_sigma = config.vi_prior_sigma.unwrap_or(default_vi_prior(&problem));
            let mut vi = VIConfig::new(prior_sigma, config.vi_epochs, likelihood, trained.config.learning_rate, seeds.vi_steps);
            vi.n_posterior_samples = config.posterior_samples;
            let q = vi_init(&trained.params, seeds.vi_init);
            let (q, trace) = train_vi(q, &problem, objective, &vi).map_err(HarnessError::stage("variational inference"))?;
            elbo_trace = Some(trace);
            let samples = sample_posterior(&q, config.posterior_samples, seeds.posterior_draws);
            let sp = (config.method == Method::ErrorAwareVi).then_some(bound.sigma_p.as_slice());
            predictive_moments(&samples, &problem, &grid, sp).map_err(HarnessError::stage("posterior predictive"))?
        }
        Method::ErrorAwareNlm => {
            let stage = || HarnessError::stage("neural linear model");
            let sp = sigma_at(&collocation)?;
            let data = SimulatedDataset::from_problem(&problem, &trained.params, &collocation, &sp).map_err(stage())?;
            let features = FeatureMatrix::from_problem(&problem, &trained.params, &data.points).map_err(stage())?;
            let score_points = match problem {
                Problem::Ode(ref ode) => linspace(ode.test_domain.0, ode.test_domain.1, config.prior_eval_points)
                    .into_iter()
                    .map(|x| vec![x])
                    .collect(),
                Problem::Burgers(_) => grid.clone(),
            };
            let score_sigma = sigma_at(&score_points)?;
            let eval = EvalGrid::from_problem(&problem, &trained.params, &score_points, &score_sigma).map_err(stage())?;
            let candidates = linspace(0.1, 1.0, config.prior_candidates);
            let search = optimize_prior(&features, &data, &eval, &candidates).map_err(stage())?;
            posterior = Some(search.record());
            let (mut mean, mut epi) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
            for (x, &s) in grid.iter().zip(&bound.sigma_p) {
                let f = extract_features(&problem, &trained.params, x).map_err(stage())?;
                let p = nlm_predict(&search.posterior, &f, s).map_err(stage())?;
                mean.push(p.mean);
                epi.push(p.epistemic_var);
            }
            let sp2 = bound.sigma_p.iter().map(|s| s * s).collect();
            PredictiveBand::new(grid.clone(), mean, epi, sp2).map_err(stage())?
        }
    };

    let artifacts = Artifacts { trained, bound, band, posterior, elbo_trace };
    build_report(config, &problem, artifacts)
}

/// Weight prior: tighter for first-order problems.
pub fn default_vi_prior(problem: &Problem<f64>) -> f64 {
    match problem.as_ode() {
        Some(ode) if ode.order() == 1 => 0.1,
        _ => 1.0,
    }
}
