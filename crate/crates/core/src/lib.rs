//! Learning-based obstacle avoidance for dynamic movement primitives.
//!
//! Obstacles are approximated by ellipsoids fitted to point clouds, reduced
//! to an ellipse in the plane where steering happens, and fed to a chain of
//! small regressors that predicts the gains of a steering coupling term.

// `!(x > 0.0)` also rejects NaN, which is the point of those checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod dmp;
pub mod error;
pub mod geometry;
pub mod learning;
pub mod optim;
pub mod route;
pub mod sim;

pub use error::{Error, Result};
