//! Numerical core for a non-isothermal viscous nonlocal Cahn-Hilliard system
//! on a bounded box with Neumann spectral discretization.
//!
//! Modules mirror the pieces of the model: [`spectral`] holds the cosine
//! basis and norms, [`kernel`] the nonlocal interaction operator,
//! [`potential`] the polynomial free-energy density and its hypothesis
//! certificates, [`dynamics`] and [`oracle`] the two integrators,
//! [`diagnostics`] every monitored identity, and [`runner`] the recording
//! simulation loop.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod kernel;
pub mod oracle;
pub mod poly;
pub mod potential;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
