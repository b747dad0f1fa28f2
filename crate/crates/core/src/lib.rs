//! Scheduling multiclass M/M/1 queues with age-dependent holding costs.
//!
//! * [`cost`]: holding-cost curves and their functionals.
//! * [`policy`]: index rules and a name-keyed registry.
//! * [`sim`]: preemptive event-driven simulation under any index rule.
//! * [`bandit`]: the discounted single-class restless bandit behind the Whittle index.
//! * [`bridge`]: the queue viewed as a restless multi-armed bandit.
//! * [`experiment`]: declarative experiment specs, presets and reports.

pub mod bandit;
pub mod bridge;
pub mod cost;
pub mod error;
pub mod experiment;
pub mod policy;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod stats;

pub use cost::CostFunction;
pub use error::{Error, Result};
