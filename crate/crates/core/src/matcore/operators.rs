use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QmetError, Result};
use crate::tolerances::Tolerances;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Largest entry modulus of a matrix.
pub fn max_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    max_norm(&(m - m.adjoint()))
}

fn ensure_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(QmetError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(QmetError::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    Ok(())
}

/// A Hermitian matrix on a `d`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl HermitianOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, &Tolerances::default())
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        ensure_square(&m)?;
        let defect = hermitian_defect(&m);
        if defect > tol.hermitian * (1.0 + max_norm(&m)) {
            return Err(QmetError::NonHermitianInput { defect });
        }
        Ok(Self(m))
    }

    /// Hermitian part `(M + M^dagger) / 2` of an arbitrary square matrix.
    pub fn hermitian_part(m: &ComplexMatrix) -> Self {
        Self((m + m.adjoint()).scale(0.5))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self(DMatrix::from_diagonal(&v))
    }

    pub fn zeros(d: usize) -> Self {
        Self(ComplexMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(ComplexMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }
}

impl std::ops::Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator(&self.0 + &rhs.0)
    }
}

/// A unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(ComplexMatrix);

impl UnitaryOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, &Tolerances::default())
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        ensure_square(&m)?;
        let d = m.nrows();
        let defect = max_norm(&(&m * m.adjoint() - ComplexMatrix::identity(d, d)));
        if defect > tol.unitary {
            return Err(QmetError::NonUnitaryInput { defect });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is unitary by construction.
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn identity(d: usize) -> Self {
        Self(ComplexMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, rhs: &UnitaryOperator) -> Self {
        Self(&self.0 * &rhs.0)
    }

    pub fn apply(&self, psi: &PureState) -> PureState {
        PureState(&self.0 * psi.amplitudes())
    }

    /// `U^k` by repeated multiplication.
    pub fn power(&self, k: u64) -> Self {
        let d = self.dim();
        let mut acc = ComplexMatrix::identity(d, d);
        let mut base = self.0.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        Self(acc)
    }
}

/// A positive semi-definite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, &Tolerances::default())
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        ensure_square(&m)?;
        let defect = hermitian_defect(&m);
        if defect > tol.density {
            return Err(QmetError::InvalidDensityMatrix {
                reason: format!("not Hermitian (defect {defect:.3e})"),
            });
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > tol.density || trace.im.abs() > tol.density {
            return Err(QmetError::InvalidDensityMatrix {
                reason: format!("trace {trace} differs from 1"),
            });
        }
        let herm = HermitianOperator::hermitian_part(&m);
        let min_eig = super::spectral::eig_hermitian(&herm)
            .eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -tol.density {
            return Err(QmetError::InvalidDensityMatrix {
                reason: format!("negative eigenvalue {min_eig:.3e}"),
            });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is a valid state by construction.
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.amplitudes();
        Self(v * v.adjoint())
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(ComplexMatrix::identity(d, d).map(|z| z / d as f64))
    }

    /// Convex mixture `sum_i w_i rho_i`; weights must be non-negative and sum to one.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let d = parts
            .first()
            .map(|(_, r)| r.dim())
            .ok_or_else(|| QmetError::InvalidDensityMatrix {
                reason: "empty mixture".into(),
            })?;
        let mut acc = ComplexMatrix::zeros(d, d);
        for (w, r) in parts {
            if r.dim() != d {
                return Err(QmetError::DimensionMismatch {
                    expected: d,
                    found: r.dim(),
                });
            }
            acc += r.matrix().map(|z| z * *w);
        }
        Self::new(acc)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &UnitaryOperator) -> Self {
        Self(u.matrix() * &self.0 * u.matrix().adjoint())
    }

    /// `tr(rho A)`.
    pub fn expectation(&self, a: &ComplexMatrix) -> C64 {
        (&self.0 * a).trace()
    }
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(ComplexVector);

impl PureState {
    pub fn new(v: ComplexVector) -> Result<Self> {
        Self::with_tolerance(v, &Tolerances::default())
    }

    pub fn with_tolerance(v: ComplexVector, tol: &Tolerances) -> Result<Self> {
        if v.is_empty() {
            return Err(QmetError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > tol.state_norm {
            return Err(QmetError::NonNormalizedState { norm });
        }
        Ok(Self(v))
    }

    /// Normalizes `v`; fails on the zero vector.
    pub fn normalized(v: ComplexVector) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QmetError::NonNormalizedState { norm });
        }
        Ok(Self(v.unscale(norm)))
    }

    pub(crate) fn from_trusted(v: ComplexVector) -> Self {
        Self(v)
    }

    pub fn basis(d: usize, k: usize) -> Self {
        let mut v = ComplexVector::zeros(d);
        v[k] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::new(ComplexVector::from_column_slice(amps))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.0
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// Pauli matrices and small constant operators.
pub mod pauli {
    use super::{C64, ComplexMatrix};

    fn m2(a: [[C64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
    }

    const O: C64 = C64::new(0.0, 0.0);
    const ONE: C64 = C64::new(1.0, 0.0);
    const I: C64 = C64::new(0.0, 1.0);

    pub fn sigma_x() -> ComplexMatrix {
        m2([[O, ONE], [ONE, O]])
    }

    pub fn sigma_y() -> ComplexMatrix {
        m2([[O, -I], [I, O]])
    }

    pub fn sigma_z() -> ComplexMatrix {
        m2([[ONE, O], [O, -ONE]])
    }
}
