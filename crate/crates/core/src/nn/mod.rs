//! Minimal neural-network engine: dense networks, second-order input jets,
//! reverse-mode parameter gradients and Adam.

mod adam;
pub mod io;
mod jet;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use jet::{channel_count, Jet2};
pub use network::{Activation, NetworkParameters, Tape};
