//! Spectral–angular coordinates for finite-dimensional density matrices.
//!
//! A state is split into an ordered spectrum, written in gap coordinates
//! `r_a = p_a - p_{a+1}` on a weighted simplex, and an eigenframe on the
//! flag manifold `SU(n)/T^{n-1}`. On top of that split the crate provides
//! information metrics, a trace-distance purity, flag-manifold Monte Carlo
//! and a GKLS integrator that runs either on the matrix or on the split.

// NaN must fail these checks, so they are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod io;
pub mod gkls;
pub mod linalg;
pub mod montecarlo;
pub mod spectral;
pub mod state;
pub mod sun;

pub use error::{Error, Result};
pub use spectral::{GapVector, ProbVector};
pub use state::DensityMatrix;
pub use sun::{AngleSet, UnitaryFrame};
