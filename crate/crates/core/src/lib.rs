//! Stochastic chemical reaction network simulation and chemical receivers
//! for molecular communication.

pub mod adaptive;
pub mod bm;
pub mod channel;
pub mod config;
pub mod crn;
pub mod experiments;
pub mod markov;
pub mod netfile;
pub mod quadrature;
pub mod receiver;
pub mod sim;

pub use crn::{CrnError, ReactionNetwork, Signal, SignalSchedule, SpeciesId};
pub use sim::{realization_rng, run_ensemble, Recording, SimError, Simulator, Trajectory};
