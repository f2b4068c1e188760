//! Synthesis of scattering potentials with a prescribed far-field pattern.
//!
//! Given a target pattern `f` on the unit sphere, a wavenumber `k` and an
//! incident direction `alpha`, this crate builds a potential `q` supported in
//! the unit ball whose scattering amplitude `A_q(alpha')` approximates `f` in
//! `L^2(S^2)`, and checks the result with an independent Lippmann-Schwinger
//! solve.
//!
//! The construction runs in two stages:
//!
//! 1. [`synthesis::synthesize_h`] builds an auxiliary density `h` whose far-field
//!    integral `-(1/4pi) * int e^{-ik alpha'.x} h(x) dx` reproduces the harmonic
//!    coefficients of `f` up to a truncation degree.
//! 2. [`synthesis::synthesize_q`] turns `h` into a potential through
//!    `q = h / (u0 - int g(x,y) h(y) dy)`, so that `q u = h` for the scattering
//!    solution `u` of `q`.
//!
//! [`forward`] solves the scattering problem for any potential on a ball grid,
//! and [`verify`] strings everything together into round-trip and convergence
//! studies.

pub mod config;
pub mod error;
pub mod forward;
pub mod geom;
pub mod grids;
pub mod harmonics;
pub mod io;
pub mod quadrature;
pub mod report;
pub mod specfun;
pub mod synthesis;
pub mod verify;

pub use error::{Error, Result};
pub use geom::Vec3;
pub use num_complex::Complex64;
