//! Structured dense linear algebra: inertia, Pfaffians, symmetric square
//! roots of unitaries and extreme eigenvalues.

mod dense;
mod inertia;
mod lanczos;
mod pfaffian;
mod sqrt;
mod structured;

pub use dense::{eigh, HermitianBand};
pub use inertia::{inertia, HermitianLdl, Inertia};
pub use lanczos::{extreme_eigenvalues, ExtremeEigenvalues, LanczosOptions};
pub use pfaffian::{pfaffian, pfaffian_sign, PfaffianSign, PfaffianValue, SkewFactor};
pub use sqrt::symmetric_unitary_sqrt;
pub use structured::{MatrixData, Structure, StructuredMatrix};
