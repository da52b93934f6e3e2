//! Peak age-of-information (PAoI) analysis for compute-enabled sensor
//! networks.
//!
//! Sensors feed an aggregator that first processes packets on a
//! non-preemptive priority queue and then sends them FCFS over a Rayleigh
//! fading channel. The crate provides:
//!
//! - [`analytic`]: closed-form / quadrature evaluation of per-sensor average PAoI,
//! - [`simulator`]: a discrete-event simulator of the same tandem queue,
//! - [`optimizer`]: generating-set search over arrival rates minimizing the
//!   largest average PAoI, plus a proportional baseline,
//! - [`experiment`]: the validation and optimization workflows behind the CLI.

pub mod analytic;
pub mod config;
pub mod error;
pub mod experiment;
pub mod model;
pub mod optimizer;
pub mod quadrature;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{ChannelConfig, ProcessorConfig, RateVector, SensorProfile, SystemConfig};
