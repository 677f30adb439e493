//! Physics-informed neural network solvers for linear ODEs and Burgers'
//! equation, with error-aware Bayesian uncertainty bands.
//!
//! The numerical core is generic over [`Real`]; the aliases below fix `f64`,
//! which is what the solvers are tuned for.

pub mod bounds;
pub mod error;
pub mod nlm;
pub mod nn;
pub mod problems;
pub mod scalar;
pub mod train;
pub mod vi;

pub use error::{Error, Result};
pub use nn::{Activation, AdamConfig, AdamState, Jet2, NetworkParameters, Tape};
pub use problems::{PinnProblem, Problem};
pub use scalar::Real;

pub type Network = nn::NetworkParameters<f64>;
pub type Jet = nn::Jet2<f64>;
pub type Ode = problems::OdeProblem<f64>;
pub type Burgers = problems::BurgersProblem<f64>;

pub type Trained = train::TrainedPINN<f64>;
pub type Envelope = bounds::ResidualEnvelope<f64>;
pub type Profile = bounds::PseudoAleatoricProfile<f64>;
pub type Posterior = nlm::NLMPosterior<f64>;
pub type Variational = vi::MeanFieldGaussian<f64>;
pub type Band = vi::PredictiveBand<f64>;
