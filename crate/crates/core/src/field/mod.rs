//! Periodic grids on the flat torus, sampled fields and spectral calculus.

mod fields;
mod grid;
mod shape;
pub mod snapshot;

pub use fields::{ScalarField, TensorField, VectorField};
pub use grid::Grid;
pub use shape::Shape;
