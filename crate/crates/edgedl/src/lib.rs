//! Wireless distributed edge learning: completion-time modelling and the
//! CoCoA learner it is built around.
//!
//! A parameter server holds `N` examples, hands them out to `K` edge
//! devices over Rayleigh-fading links, and then runs global iterations of
//! CoCoA. Each iteration costs local compute, an upload of every device's
//! update and a multicast of the new global model. Failed transmissions are
//! repeated until they succeed.
//!
//! * [`channel_model`]: outage probabilities of the three phases.
//! * [`retransmission`]: geometric transmission counts and their maxima.
//! * [`completion_time`]: iteration budget, Monte-Carlo completion time and
//!   its closed-form bounds.
//! * [`device_planner`]: device-count verdicts and conditions.
//! * [`cocoa`]: the learner itself, for checking the learning-side model.
//! * [`experiments`]: config files, dataset loading and CSV sweeps.

pub mod channel_model;
pub mod cocoa;
pub mod completion_time;
pub mod device_planner;
mod error;
pub mod experiments;
pub mod retransmission;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
