//! Discrete-time simulator of a cellular network served by drone base
//! stations that steer themselves with a direction-selection game.

pub mod association;
pub mod channel;
pub mod config;
pub mod dma;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod mobility;
pub mod rng;
pub mod traffic;

pub use config::SimConfig;
pub use engine::{run, run_batch, World};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentMatrix};
