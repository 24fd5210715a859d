//! Deterministic spectral solver for the spatially homogeneous Boltzmann
//! equation.
//!
//! The distribution function is expanded in Laguerre-spherical-harmonic basis
//! functions and tested against global polynomials, which contain all five
//! collision invariants. The resulting ODE system `d/dt (M f)_i = f^T Q_i f`
//! is assembled once by quadrature and then advanced with explicit
//! Runge-Kutta schemes.

pub mod assembly;
pub mod basis;
pub mod cache;
pub mod config;
pub mod diagnostics;
pub mod dsmc;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod kernel;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};

/// Velocity (or direction) vector in R^3.
pub type Velocity = nalgebra::Vector3<f64>;
