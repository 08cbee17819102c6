//! Predictive cost adaptive control (PCAC) for discrete-time Lur'e systems.
//!
//! The controller identifies an ARX model online by recursive least squares
//! with F-test driven variable-rate forgetting ([`rls`]), realizes it in block
//! observable canonical form ([`bocf`]) and computes a receding-horizon gain
//! from a backward Riccati recursion ([`bpre`]). The [`lure`] module closes the
//! loop around a Lur'e plant, and [`stability`] certifies each frozen-time
//! closed loop with the discrete-time circle and Tsypkin criteria.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bocf;
pub mod bpre;
pub mod config;
pub mod error;
pub mod export;
pub mod lure;
pub mod numerics;
pub mod rls;
pub mod stability;

pub use error::{Error, Result};
pub use numerics::{CMatrix, Matrix, StateSpace, Vector};
