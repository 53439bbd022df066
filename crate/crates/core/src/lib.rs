//! Scalar-flat normal graphs over cones on products of spheres.
//!
//! The crate builds the link geometry, the weighted link spectrum, a mode-by-mode
//! radial solver for the Jacobi operator, a Picard iteration for the full equation,
//! an independent embedding-based curvature oracle and stability checks.

pub mod cone_calculus;
pub mod config;
pub mod embedding;
pub mod error;
pub mod basis;
pub mod link;
pub mod nonlinear;
pub mod quadrature;
pub mod radial_solver;
pub mod runner;
pub mod space;
pub mod spectrum;
pub mod stability;
pub mod stencil;

pub use error::{Error, Result};
pub use link::{elementary_symmetric, solve_scalar_flat_radii, CliffordLink, CurvatureInvariants};
