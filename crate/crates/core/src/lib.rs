//! Discrete-timestep simulator for hierarchical (multi-tier) storage systems.
//!
//! A hierarchy of storage tiers (faster tiers are smaller) holds a population
//! of files, each carrying a temperature in `[0, 1]` that tracks how often it
//! is requested. A migration policy decides, per request, whether the
//! requested file should climb to the next-faster tier, displacing colder
//! residents downward when the destination is full. Two policy families are
//! provided:
//!
//! * three rule-based baselines that compare the file temperature against the
//!   destination tier's mean temperature, and
//! * a learned policy that approximates each tier's expected request cost
//!   with an eight-rule fuzzy basis over the tier state `(s1, s2, s3)` and
//!   trains it online with TD(lambda) against observed response times.
//!
//! [`engine::run_scenario`] drives the whole loop from a [`config::ScenarioConfig`]
//! and produces per-timestep [`metrics::MetricsFrame`] records.

pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod rl;
pub mod storage;
pub mod workload;

pub use error::{Error, Result};
