//! Finite-dimensional W*-dynamical systems: GNS data, the basic construction
//! over an invariant subalgebra, relatively independent joinings and the
//! relative spectral decomposition.

pub mod algebra;
pub mod basic;
pub mod constructors;
pub mod error;
pub mod gns;
pub mod joining;
pub mod linalg;
pub mod spectrum;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, Tolerances, C64};
