//! Discrete harmonic maps and pseudo harmonic morphisms on admissible
//! Riemannian polyhedra.

pub mod cli;
pub mod energy;
pub mod error;
pub mod examples;
pub mod harmonic;
pub mod io;
pub mod maps;
pub mod morphism;
pub mod meshes;
pub mod quadrature;
pub mod riemannian;
pub mod simplicial;
pub mod target;

pub use error::{Error, Result};
