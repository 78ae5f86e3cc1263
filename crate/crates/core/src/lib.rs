//! Anisotropic fractional Schrödinger operators `(-∇·(A∇))^s + q` on
//! truncated grids.
//!
//! The crate assembles the local elliptic operator, takes fractional powers
//! by spectral calculus (cross-checked by heat-semigroup quadrature), solves
//! exterior Dirichlet problems with embedded soft or hard obstacles,
//! assembles exterior Dirichlet-to-Neumann maps, and runs the associated
//! inverse problems: single-measurement obstacle identification, Runge
//! approximation by exterior control, and potential recovery from
//! multi-measurement DtN data.

pub mod error;
pub mod experiment;
pub mod forward;
pub mod cache;
pub mod config;
pub mod dtn;
pub mod geometry;
pub mod inverse;
pub mod operator;
mod parallel;

pub use error::{Error, Result};
