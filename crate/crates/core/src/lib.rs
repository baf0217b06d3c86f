//! Semiclassical states of the damped nonlocal nonlinear Schrödinger equation
//! localized on an evolving closed curve.
//!
//! The crate evolves the zeroth-order Hamilton–Ehrenfest curve system for the
//! 2D rotating-trap model with a Gaussian interaction kernel, solves the
//! steady rotating-circle state and its linearized deformation, constructs the
//! vortex wavefunction from curve data, and cross-validates everything against
//! a direct pseudo-spectral solution of the full PDE.

pub mod curve;
pub mod error;
pub mod hes;
pub mod io;
pub mod moments;
pub mod nlse;
pub mod params;
pub mod pipeline;
pub mod specialfn;
pub mod steady;
pub mod symbols;
#[doc(hidden)]
pub mod testutil;
pub mod wavefield;

pub use error::Error;
pub use params::ModelParams;

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
