//! Stochastic compressible Navier–Stokes on the flat torus: pseudo-spectral
//! dynamics, Monte Carlo Young measures, energy and relative-energy
//! diagnostics, and the low Mach number limit experiment.

pub mod commands;
pub mod config;
pub mod constitutive;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod euler;
pub mod field;
pub mod init;
pub mod ledger;
pub mod noise;
pub mod relative;
pub mod scalar;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid64 = field::Grid<f64>;
pub type ScalarField64 = field::ScalarField<f64>;
pub type VectorField64 = field::VectorField<f64>;
pub type TensorField64 = field::TensorField<f64>;
pub type State64 = dynamics::State<f64>;
pub type Dynamics64 = dynamics::Dynamics<f64>;
pub type Grid32 = field::Grid<f32>;
