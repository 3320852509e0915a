//! Moment dynamics of a quantum oscillator coupled to a classical degree of
//! freedom, its maximum-entropy reformulation, and the classical-limit
//! diagnostics built on top of both.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod initial;
pub mod integrator;
pub mod maxent;
pub mod model;
pub mod output;
pub mod trajectory;
pub mod validate;

pub use error::{Error, Result};
