//! Combination-technique sparse grids.
//!
//! The crate builds sparse grids as linear combinations of tensor grids over
//! downward-closed multi-index sets, and uses them for quadrature,
//! interpolation, derivative estimation, conversion to polynomial chaos and
//! Sobol sensitivity analysis. Grids can be built a priori (from a rule and a
//! level) or adaptively from profit indicators on the reduced margin.
//!
//! Module map:
//!
//! - [`knots`]: univariate rules (Gauss, Clenshaw–Curtis, Leja, weighted
//!   Leja, trapezoidal, midpoint, Genz–Keister)
//! - [`levels`]: level-to-knots maps
//! - [`midx`]: multi-index sets and combination coefficients
//! - [`grid`]: tensor / sparse grids, reduction and recycling
//! - [`evalkit`]: evaluation, quadrature, interpolation, derivatives
//! - [`adaptive`]: a-posteriori adaptive construction
//! - [`pce`]: orthonormal polynomials, modal conversion, Sobol indices
//! - [`uqdemo`]: 1D stochastic diffusion forward / inverse UQ pipeline
//! - [`io`]: JSON grid files and CSV exporters

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adaptive;
pub mod dedup;
pub mod error;
pub mod evalkit;
pub mod grid;
pub mod io;
pub mod knots;
pub mod levels;
pub mod midx;
pub mod optim;
pub mod pce;
pub mod testfns;
pub mod uqdemo;

pub use error::{Result, SgError};
