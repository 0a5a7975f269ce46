//! Numerical thresholds shared by the operator types and the spectral routines.
//!
//! Every routine reads its thresholds from a [`Tolerances`] value; the
//! `Default` instance carries the values the library is validated against.

/// Thresholds used when validating operators and classifying spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative anti-Hermitian defect accepted for Hermitian operators.
    pub hermitian: f64,
    /// Max-norm defect of `U U^dagger - I` accepted for unitaries.
    pub unitary: f64,
    /// Lowest eigenvalue and trace defect accepted for density matrices.
    pub density: f64,
    /// Norm defect accepted for pure states.
    pub state_norm: f64,
    /// Relative eigenvalue spacing below which a spectrum counts as degenerate.
    pub degeneracy: f64,
    /// Eigenvalue threshold separating support from kernel of a state.
    pub rank: f64,
    /// Probability threshold below which outcomes leave the support.
    pub support: f64,
    /// Hermiticity defect accepted for numerically differentiated generators.
    pub generator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            unitary: 1e-10,
            density: 1e-10,
            state_norm: 1e-12,
            degeneracy: 1e-8,
            rank: 1e-10,
            support: 1e-12,
            generator: 1e-8,
        }
    }
}
