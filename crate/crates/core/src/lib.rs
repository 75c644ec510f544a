//! Numerical laboratory for a scalar wave field coupled to a nonrelativistic
//! charged particle in a confining potential.
//!
//! The field obeys `φ̈ = Δφ − ρ(x − q)`, the particle
//! `q̈ = −∇V(q) + ∫φ ∇ρ(x − q) dx`. The crate provides the stationary states,
//! weighted norms, the free wave group, frequency-domain stability analysis,
//! linearized and nonlinear time integration on a periodic spectral grid, and
//! scattering-state reconstruction.

pub mod charge;
pub mod coupling;
pub mod data;
pub mod error;
pub mod field;
pub mod fit;
pub mod free_wave;
pub mod grid;
pub mod io;
pub mod linear;
pub mod nonlinear;
pub mod norms;
pub mod particle;
pub mod potential;
pub mod quadrature;
pub mod scattering;
pub mod stability;

pub use error::{Error, Result};
