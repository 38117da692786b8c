//! Model Hamiltonians, symmetry operators, disorder and spectral flattening.

mod block;
mod decay;
mod disorder;
mod flatten;
mod models;
pub(crate) mod pauli;
mod periodic;
mod symmetry;

pub use block::BlockOperator;
pub use decay::{decay_diagnostic, DecayBin, DecayTable};
pub use disorder::{apply_disorder, DisorderDistribution, DisorderSpec};
pub use flatten::{spectral_flatten, FlattenedHamiltonian, DEFAULT_ZERO_TOL};
pub use periodic::{periodic_flatten, PeriodicFlattening};
pub use models::{build_model, trivial_onsite, ModelSpec};
pub use symmetry::{standard_chiral, standard_symmetry_ops, verify_symmetry, AzClass, RelationCheck, SymmetryData, SymmetryReport};
