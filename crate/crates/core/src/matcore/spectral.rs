use nalgebra::SymmetricEigen;

use super::operators::{C64, ComplexMatrix, HermitianOperator, PureState, UnitaryOperator};
use crate::error::{QmetError, Result};

/// Phase convention applied to the eigenvectors of an [`Eigensystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Largest-modulus entry of every eigenvector is real and non-negative
    /// (ties go to the lowest index).
    PhaseFixed,
    /// Every eigenvector has a real, positive overlap with the matching
    /// eigenvector of a reference eigensystem.
    OverlapAligned,
}

/// Spectral decomposition with eigenvalues in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    eigenvalues: Vec<f64>,
    vectors: ComplexMatrix,
    gauge: Gauge,
}

impl Eigensystem {
    /// `lambda_1 >= ... >= lambda_d`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns, in the order of [`Self::eigenvalues`].
    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    pub fn eigenvector(&self, k: usize) -> PureState {
        PureState::from_trusted(self.vectors.column(k).into_owned())
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn spectral_gap(&self) -> f64 {
        (self.max_eigenvalue() - self.min_eigenvalue()).max(0.0)
    }

    /// `sum_k lambda_k v_k v_k^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(l);
        }
        &scaled * self.vectors.adjoint()
    }

    /// Unitary `R` with `R M R^dagger = diag(lambda_1, ..., lambda_d)`.
    pub fn diagonalizer(&self) -> UnitaryOperator {
        UnitaryOperator::from_trusted(self.vectors.adjoint())
    }

    /// Fails when two consecutive eigenvalues are closer than
    /// `rel_tol * (1 + spectral gap)`.
    pub fn ensure_nondegenerate(&self, theta: f64, rel_tol: f64) -> Result<()> {
        let scale = rel_tol * (1.0 + self.spectral_gap());
        for k in 0..self.dim().saturating_sub(1) {
            let gap = self.eigenvalues[k] - self.eigenvalues[k + 1];
            if gap < scale {
                return Err(QmetError::DegenerateSpectrum {
                    theta,
                    index: k,
                    next: k + 1,
                    gap,
                });
            }
        }
        Ok(())
    }

    /// Multiplies eigenvector `k` by `exp(i phases[k])`.
    pub fn rephased(&self, phases: &[f64]) -> Eigensystem {
        assert_eq!(phases.len(), self.dim(), "one phase per eigenvector");
        let mut vectors = self.vectors.clone();
        for (k, &phi) in phases.iter().enumerate() {
            let e = C64::from_polar(1.0, phi);
            for z in vectors.column_mut(k).iter_mut() {
                *z *= e;
            }
        }
        Eigensystem {
            eigenvalues: self.eigenvalues.clone(),
            vectors,
            gauge: self.gauge,
        }
    }

    /// Re-phases (and, if needed, re-orders) the eigenvectors so that each one
    /// has a real positive overlap with the maximally overlapping eigenvector
    /// of `reference`.
    pub fn aligned_to(&self, reference: &Eigensystem) -> Eigensystem {
        let d = self.dim();
        assert_eq!(d, reference.dim(), "eigensystems of different dimension");
        let overlaps = reference.vectors.adjoint() * &self.vectors;

        let mut perm: Vec<usize> = (0..d)
            .map(|k| {
                (0..d)
                    .max_by(|&a, &b| {
                        overlaps[(k, a)]
                            .norm()
                            .partial_cmp(&overlaps[(k, b)].norm())
                            .unwrap()
                    })
                    .unwrap()
            })
            .collect();
        let mut seen = vec![false; d];
        let is_perm = perm.iter().all(|&j| !std::mem::replace(&mut seen[j], true));
        if !is_perm {
            perm = (0..d).collect();
        }

        let mut vectors = ComplexMatrix::zeros(d, d);
        let mut eigenvalues = Vec::with_capacity(d);
        for (k, &j) in perm.iter().enumerate() {
            let ov = overlaps[(k, j)];
            let phase = if ov.norm() > 0.0 {
                ov.conj() / ov.norm()
            } else {
                C64::new(1.0, 0.0)
            };
            vectors.set_column(k, &(self.vectors.column(j) * phase));
            eigenvalues.push(self.eigenvalues[j]);
        }
        Eigensystem {
            eigenvalues,
            vectors,
            gauge: Gauge::OverlapAligned,
        }
    }
}

fn phase_fix(vectors: &mut ComplexMatrix) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        let mut best_mod = -1.0;
        for (i, z) in col.iter().enumerate() {
            // relative margin keeps the lowest index on ties
            let m = z.norm();
            if m > best_mod * (1.0 + 1e-12) {
                best = i;
                best_mod = m;
            }
        }
        let pivot = col[best];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for z in col.iter_mut() {
                *z *= phase;
            }
            col[best] = C64::new(col[best].norm(), 0.0);
        }
    }
}

/// Eigendecomposition of a Hermitian operator, eigenvalues non-increasing,
/// eigenvectors in the phase-fixed gauge.
pub fn eig_hermitian(m: &HermitianOperator) -> Eigensystem {
    let herm = (m.matrix() + m.matrix().adjoint()).scale(0.5);
    let d = herm.nrows();
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let mut vectors = ComplexMatrix::zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &j) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(j);
        vectors.set_column(k, &col.unscale(col.norm()));
        eigenvalues.push(eig.eigenvalues[j]);
    }
    phase_fix(&mut vectors);
    Eigensystem {
        eigenvalues,
        vectors,
        gauge: Gauge::PhaseFixed,
    }
}

/// `exp(-i t H)` through the eigendecomposition of `H`.
pub fn expm_unitary(h: &HermitianOperator, t: f64) -> UnitaryOperator {
    let d = h.dim();
    if t == 0.0 {
        return UnitaryOperator::identity(d);
    }
    let eig = eig_hermitian(h);
    let mut scaled = eig.vectors.clone();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -t * l);
        for z in scaled.column_mut(k).iter_mut() {
            *z *= phase;
        }
    }
    UnitaryOperator::from_trusted(&scaled * eig.vectors.adjoint())
}

/// `lambda_max(M) - lambda_min(M)`.
pub fn spectral_gap(m: &HermitianOperator) -> f64 {
    eig_hermitian(m).spectral_gap()
}
