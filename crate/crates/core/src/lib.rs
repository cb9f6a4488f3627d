//! Spectral analysis of Dirac operators with operator-valued chiral mass terms.

pub mod algebra;
pub mod bounds;
pub mod eigen;
pub mod error;
pub mod field;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod sectors;
pub mod spectra;
pub mod symmetry;

pub use error::{CqsmError, Result};
