//! Restricted Boltzmann machine classifiers with three negative-phase
//! estimators: persistent Gibbs chains, simulated annealing over the compiled
//! Ising form of the model, and an annealer-client interface with mock and
//! replay implementations.

pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod qubo;
pub mod rbm;
pub mod rng;
pub mod sampler;
pub mod training;

pub use error::{Error, Result};
