//! Multi-servicer spacecraft regulation under partial relative-position feedback.
//!
//! A swarm of servicers, each seeing only a projection `C_i (q_0 - q_i)` of
//! the defunct spacecraft's relative position, cooperates over a
//! communication graph. Each agent runs a derivative-free distributed
//! observer, a control law with an online-adapted deep network, and shares
//! its effective control and network weights with its neighbours.
//!
//! Module map:
//!
//! * [`topology`] - graph Laplacian, interaction matrix, trackability rank test
//! * [`dynamics`] - reference orbit, rectangular and spherical relative motion,
//!   J2 and drag, target motion models
//! * [`dnn`] - feedforward network, weight Jacobian, initialization, projection
//! * [`agent`] - per-agent observer, control and adaptation laws
//! * [`stability`] - closed-form gain constants, ultimate bounds, envelope
//! * [`sim`] - scenario configuration, closed-loop RK4 engine, logs and metrics
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod dnn;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod sim;
pub mod stability;
pub mod topology;

pub use error::{Error, Result, Singularity};
