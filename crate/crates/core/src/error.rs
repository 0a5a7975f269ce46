use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QmetError {
    #[error("matrix is not Hermitian (anti-Hermitian defect {defect:.3e})")]
    NonHermitianInput { defect: f64 },

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NonUnitaryInput { defect: f64 },

    #[error("invalid density matrix: {reason}")]
    InvalidDensityMatrix { reason: String },

    #[error("state is not normalized (norm {norm})")]
    NonNormalizedState { norm: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate spectrum at theta = {theta}: eigenvalues {index} and {next} differ by {gap:.3e}")]
    DegenerateSpectrum {
        theta: f64,
        index: usize,
        next: usize,
        gap: f64,
    },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("unknown closed-form reference `{0}`")]
    UnknownReference(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("differentiation node {node} leaves the domain ({lo}, {hi})")]
    DomainBoundary { node: f64, lo: f64, hi: f64 },

    #[error("distribution is not normalized (sum {sum}) at theta = {theta}")]
    NonNormalized { theta: f64, sum: f64 },

    #[error("derivative of the state is not traceless (trace {trace:.3e})")]
    NotTraceless { trace: f64 },

    #[error("rank of the state changes between theta = {theta} and node {node}")]
    RankChange { theta: f64, node: f64 },

    #[error("state is rank deficient (smallest eigenvalue {min_eigenvalue:.3e})")]
    RankDeficient { min_eigenvalue: f64 },

    #[error("unknown operator-monotone function tag `{0}`")]
    UnknownMetricTag(String),

    #[error("unitary family is not smooth at theta = {theta} (generator Hermiticity defect {defect:.3e})")]
    NonSmoothFamily { theta: f64, defect: f64 },

    #[error("invalid POVM: {reason}")]
    InvalidPovm { reason: String },

    #[error("aliasing risk: tau * spectral spread = {phase_span:.6} must stay below 2*pi; lower tau or let it default")]
    AliasingRisk { phase_span: f64 },

    #[error("phase-estimation configuration invalid: {reason}")]
    InvalidPhaseConfig { reason: String },

    #[error("oracle too large: {reason}")]
    OracleTooLarge { reason: String },
}

pub type Result<T> = std::result::Result<T, QmetError>;
