//! Simulator for an energy-efficient user-centric vehicular edge network.
//!
//! A freeway V2I downlink scenario: multi-antenna roadside access points
//! jointly serve highly mobile vehicle users through per-user virtual cells
//! with maximum ratio transmission. The crate provides the scenario and
//! channel models, the link-level math (SINR, rate, backhaul, energy
//! efficiency), discrete action-space enumeration, tabular Q-learning
//! policies (SARL, per-AP MARL, and segmented-action D-MARL with a central
//! best-action register), non-learning baselines, and metrics aggregation.
//!
//! File formats, CSV export, and the command-line driver live in the
//! companion `vecell-cli` crate.

pub mod action;
pub mod baselines;
pub mod channel;
pub mod learning;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod sim;

mod error;

pub use error::{Error, Result};
