//! Analytical downlink throughput model for dense multi-AP Wi-Fi.
//!
//! The pipeline runs scenario geometry through large-scale gains, channel
//! assignment and user association, the CSMA Markov chain, and per-state
//! PHY rates, then averages rates over the chain's stationary distribution.

pub mod csma;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod phy;
pub mod pipeline;
pub mod propagation;
pub mod radio_plan;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
