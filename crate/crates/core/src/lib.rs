//! Parameter estimation under non-Hermitian qubit dynamics.
//!
//! Quantum Fisher information for non-unitary evolutions, optimal
//! measurements, a Hermitian dilation of pseudo-Hermitian Hamiltonians and a
//! seeded Monte-Carlo maximum-likelihood pipeline.

// range checks are written `!(x > y)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dilation;
pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod fisher;
pub mod matcore;
pub mod measure;
pub mod models;

pub use error::{Error, Result};
pub use matcore::{ComplexMatrix, ComplexVector, C64};
pub use models::{HamiltonianModel, PtParam};
