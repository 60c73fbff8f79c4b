//! Numerical laboratory for the Gelfand problem `Δφ + λe^φ = 0`, `φ = 0` on
//! `∂Ω`, on intervals, balls and ellipses.
//!
//! The minimal solution is reached two ways: as the long-time limit of the
//! flow `(e^u)_t = Δu + λe^u` ([`flow`]) and by Newton continuation in `λ`
//! ([`steady`]). [`geometry`] checks convexity of `e^{-φ/2}` and the boundary
//! functional `G`; [`barriers`] implements the ball barriers and the
//! threshold `λ̄`.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod cli;
pub mod domain;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod steady;

pub use error::{GelfandError, Result};
