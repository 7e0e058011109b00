//! Simulation engine for a Bayes-optimal observer.
//!
//! An observer in a randomly drawn state interacts deterministically with a
//! system state and reports the outcome with the largest likelihood ratio.
//! Repeating the interaction over many observer draws turns that
//! deterministic rule into outcome statistics. This crate provides the rule,
//! the samplers, exact and Monte Carlo eigenset measures, and the
//! repeated-measurement experiments that check those statistics against the
//! mixture weights (simplex model) and the Born rule (complex model).
//!
//! Outcome indices are zero-based throughout.

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod observer;
pub mod sampling;
pub mod state_space;
pub mod stats;

pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentResult, RunSettings};
pub use observer::{decide, Decision, LikelihoodRatios, OddsForm};
pub use sampling::{RngStream, SamplerSpec};
pub use state_space::{Frame, MixtureState, Model, OutcomeSet, PureState, State, UnitaryMap};
