//! Computational tools for localization of one-dimensional random
//! Schrödinger (Anderson) and CMV operators.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod cmv;
pub mod ensemble;
pub mod error;
pub mod localization;
pub mod lyapunov;
pub mod mat2;
pub mod schrodinger;
pub mod spectral;
pub mod stats;
pub mod tridiag;

pub use error::{Error, Result};
