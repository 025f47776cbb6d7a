//! Convex variational regularization for linear inverse problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bregman_iteration;
pub mod error;
pub mod estimates;
pub mod experiment;
pub mod io;
pub mod linear;
pub mod operators;
pub mod regularizers;
pub mod risk;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use linear::{inner, DataVector, LinearForwardMap, LinearMap, SolutionVector};
pub use regularizers::{Regularizer, RegularizerKind, Subgradient};
