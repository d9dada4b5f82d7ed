//! Aggregation–diffusion with a nonlinear Riesz potential on radial grids.
//!
//! The free energy is
//! `F(ρ) = ‖ρ‖_m^m/(m−1) − (χ/p′)‖K_{s/2}∗ρ‖_{p′}^{p′}`, and the crate computes
//! its stationary states, HLS-type extremals, gradient-flow dynamics and the
//! small-`s` limits on radially symmetric densities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cache;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod quadrature;
pub mod riesz;
pub mod special;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{ModelParams, ProfileKind, RadialDensity, RadialGrid};
pub use riesz::RieszOperator;
