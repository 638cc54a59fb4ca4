//! Geometric Lorenz return maps, their suspension flow, grid approximations of the
//! physical (SRB) measure, and Monte Carlo experiments on its statistical properties:
//! decay of correlations, hitting and recurrence times, local and exact dimension.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod experiments;
pub mod flow;
pub mod maps;
pub mod measures;
pub mod rng;
pub mod statistics;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use maps::{validate, ModelParams, SectionPoint, ValidatedModel};
