//! Dense complex linear algebra on small dimensions.

mod operators;
mod products;
mod spectral;

pub use operators::{
    max_norm, pauli, ComplexMatrix, ComplexVector, DensityMatrix, HermitianOperator, PureState,
    UnitaryOperator, C64,
};
pub use products::{operator_variance, partial_trace, tensor, Subsystem};
pub use spectral::{eig_hermitian, expm_unitary, spectral_gap, Eigensystem, Gauge};
