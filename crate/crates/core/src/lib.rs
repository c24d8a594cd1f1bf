//! Neuroadaptive actor-critic tracking control for a two-link arm with
//! deferred, time-varying error constraints.

// `!(a < b)` is used on purpose so NaN counts as a failed check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constraint;
pub mod control;
pub mod error;
pub mod learning;
pub mod plant;
pub mod rbf;
pub mod sim;
pub mod verify;

pub use error::{BarrierViolation, ConfigError, SimError};
