//! Numerical laboratory for stability of porous-medium and fast-diffusion
//! equations `∂_t u = Δ u^m` with respect to the exponent `m`.

pub mod barenblatt;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod harness;
pub mod inequalities;
pub mod mollify;
pub mod params;
pub mod quadrature;
pub mod solver;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::{Field, IntervalGrid, Mesh, RadialGrid};
pub use params::{derive_constants, make_exponent, DerivedConstants, Exponent};
