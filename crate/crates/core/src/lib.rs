//! Zeroth-order stochastic search (ZoSS) with SGD/GD baselines, exact evaluators
//! for the associated stability and generalization bounds, and a coupled-trajectory
//! experiment harness that checks measured quantities against those bounds.
//!
//! Module map:
//!
//! * [`rng`]: counter-keyed random streams, so coupled runs can share randomness.
//! * [`losses`]: per-example losses with analytic gradients and certified constants.
//! * [`data`]: synthetic example generation inside a ball of declared radius.
//! * [`estimator`]: the Gaussian-smoothed gradient and Monte Carlo moment verifiers.
//! * [`schedule`]: learning-rate rules and the smoothing-radius cap.
//! * [`optimizers`]: ZoSS / SGD / GD steps and trajectory engine.
//! * [`bounds`]: stability recursions and generalization bounds.
//! * [`harness`]: neighbor datasets, coupled stability and generalization experiments.
//! * [`report`]: JSON / CSV serialization of reports.
//! * [`config`]: declarative `key = value` configuration files.

pub mod bounds;
pub mod config;
pub mod data;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod losses;
pub mod optimizers;
pub mod report;
pub mod rng;
pub mod schedule;
pub mod stats;

pub use error::{Result, ZossError};
pub use losses::{Example, LossModel};
pub use schedule::{gamma, mu_cap, Schedule, ScheduleKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
