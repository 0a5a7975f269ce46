use super::operators::{ComplexMatrix, HermitianOperator, PureState};
use crate::error::{QmetError, Result};

/// Factor kept by [`partial_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Kronecker product `A (x) B`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Partial trace of an operator on `C^{d_A} (x) C^{d_B}`, keeping `keep`.
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    if m.nrows() != da * db || m.ncols() != da * db {
        return Err(QmetError::DimensionMismatch {
            expected: da * db,
            found: m.nrows(),
        });
    }
    let out = match keep {
        Subsystem::A => ComplexMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()
        }),
    };
    Ok(out)
}

/// `<psi|O^2|psi> - <psi|O|psi>^2`, clamped at zero.
pub fn operator_variance(psi: &PureState, o: &HermitianOperator) -> Result<f64> {
    if psi.dim() != o.dim() {
        return Err(QmetError::DimensionMismatch {
            expected: o.dim(),
            found: psi.dim(),
        });
    }
    let v = psi.amplitudes();
    let ov = o.matrix() * v;
    let mean = v.dotc(&ov).re;
    let second = ov.dotc(&ov).re;
    Ok((second - mean * mean).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::operators::{max_norm, pauli, C64, ComplexVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn tensor_of_identities_and_sigma_z() {
        let i2 = ComplexMatrix::identity(2, 2);
        assert_eq!(tensor(&i2, &i2), ComplexMatrix::identity(4, 4));
        let zz = tensor(&pauli::sigma_z(), &i2);
        let diag: Vec<f64> = (0..4).map(|k| zz[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn controlled_block_structure() {
        let p0 = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ]));
        let p1 = ComplexMatrix::identity(2, 2) - &p0;
        let cx = tensor(&p0, &pauli::sigma_x()) + tensor(&p1, &ComplexMatrix::identity(2, 2));
        assert_eq!(cx.view((0, 0), (2, 2)).into_owned(), pauli::sigma_x());
        assert_eq!(cx.view((2, 2), (2, 2)).into_owned(), ComplexMatrix::identity(2, 2));
        assert_eq!(max_norm(&cx.view((0, 2), (2, 2)).into_owned()), 0.0);
    }

    #[test]
    fn partial_trace_of_maximally_entangled_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = ComplexVector::from_vec(vec![
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
        ]);
        let rho = &v * v.adjoint();
        let half = ComplexMatrix::identity(2, 2).map(|z| z * 0.5);
        for keep in [Subsystem::A, Subsystem::B] {
            let r = partial_trace(&rho, (2, 2), keep).unwrap();
            assert_abs_diff_eq!(max_norm(&(r - &half)), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let m = ComplexMatrix::identity(6, 6);
        assert!(matches!(
            partial_trace(&m, (2, 2), Subsystem::A),
            Err(QmetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn variances() {
        let z = HermitianOperator::new(pauli::sigma_z()).unwrap();
        assert_abs_diff_eq!(
            operator_variance(&PureState::basis(2, 0), &z).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = PureState::from_slice(&[C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        assert_abs_diff_eq!(operator_variance(&plus, &z).unwrap(), 1.0, epsilon = 1e-14);

        // balanced superposition of the extremal eigenvectors saturates sigma^2 / 4
        let o = HermitianOperator::from_real_diagonal(&[3.0, 1.0, 0.0]);
        let psi =
            PureState::from_slice(&[C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)])
                .unwrap();
        assert_abs_diff_eq!(operator_variance(&psi, &o).unwrap(), 2.25, epsilon = 1e-14);
    }
}
