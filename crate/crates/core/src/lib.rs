//! Numerical solvers for pinned Ginzburg-Landau and Allen-Cahn energies with
//! rapidly oscillating pinning terms, plus the limit objects that govern
//! vortex densities and positions.

pub mod allencahn;
pub mod error;
pub mod limits;
pub mod magnetic;
pub mod mesh;
pub mod pinning;
pub mod scalar;

pub use error::{Error, MeshError, Result};
pub use mesh::{ComplexField, Grid, ScalarField};
