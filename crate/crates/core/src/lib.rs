//! Burst detection from coarse two-channel samples of an evolving state.
//!
//! The library simulates a state u(t) obeying u̇ = Au + F, where A generates a
//! strongly continuous semigroup and the forcing F combines decaying bursts, a
//! bounded background source, and bounded measurement noise. From noisy inner
//! products of u against a fixed sampler family taken on a uniform time grid,
//! the detector recovers the burst instants and the inner products of the
//! burst shapes with certified thresholds and error bounds.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod forcing;
pub mod quad;
pub mod sampling;
pub mod semigroup;
pub mod solver;
pub mod space;

pub use error::{Error, Result};
pub use forcing::{BackgroundSource, BurstEvent, BurstTrain, DecayProfile, NoiseModel};
pub use sampling::{MeasurementSeries, SamplerSet};
pub use semigroup::{SemigroupKind, SemigroupModel};
pub use solver::{ModelParams, Scenario};
pub use space::{FunctionExpr, Representation, SpaceElement};
