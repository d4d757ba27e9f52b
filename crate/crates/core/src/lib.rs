//! Toy reaction-diffusion and nonhomogeneous FitzHugh-Nagumo models.
//!
//! - [`model`]: model family, excitability profiles `c(x)`, stationary states
//! - [`grid`]: uniform grids, Neumann Laplacian, trapezoid quadrature
//! - [`spectral`]: cosine eigenbasis, product lemmas, Galerkin truncation
//! - [`sturm`]: Pruefer shooting for `-d phi'' - f'(ubar) phi = lambda phi`
//! - [`stability`]: mode growth rates and Hopf crossings
//! - [`sim`]: RK4 method of lines and trajectory diagnostics
//! - [`io`]: CSV import/export

pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod sim;
pub mod spectral;
pub mod stability;
pub mod sturm;

pub use error::{Error, Result};
