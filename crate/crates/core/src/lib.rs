//! Band-limited collocation implicit Runge–Kutta (BLC-IRK) toolkit.
//!
//! Generalized Gaussian quadratures for band-limited exponentials, the
//! symplectic integration matrix built on them, stability analysis, a
//! fixed-point propagation engine and a spherical-harmonic gravity model for
//! orbit propagation.

pub mod basis;
pub mod cli;
pub mod dd;
pub mod error;
pub mod gravity;
pub mod legendre;
pub mod linalg;
pub mod orbit;
pub mod prolate;
pub mod quadrature;
pub mod real;
pub mod solver;
pub mod stability;
pub mod tableau;

pub use dd::Dd;
pub use error::{Error, Result};
