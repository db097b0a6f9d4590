//! Multi-structure robust model fitting driven by kernel residual density.
//!
//! The crate generates hypotheses with a self-terminating density-guided
//! sampler, estimates each hypothesis' inlier scale, and selects a set of
//! distinct structures either greedily or through a relaxed quadratic program.

// NaN-rejecting guards are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod density;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod sampler;
pub mod scale;
pub mod selection;

pub use error::{Error, Result};
pub use geometry::{DataPoint, Dataset, Hypothesis, Model, ModelKind};
