//! Random operators and states for property checks and optimizer restarts.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::matcore::{
    eig_hermitian, ComplexMatrix, ComplexVector, DensityMatrix, HermitianOperator, PureState,
    UnitaryOperator, C64,
};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Matrix of i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Hermitian matrix `(G + G^dagger) / 2` from a Ginibre sample.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermitianOperator {
    HermitianOperator::hermitian_part(&ginibre(rng, d, d))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> UnitaryOperator {
    let qr = ginibre(rng, d, d).qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..d {
        let z = r[(k, k)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        for x in q.column_mut(k).iter_mut() {
            *x *= phase;
        }
    }
    UnitaryOperator::from_trusted(q)
}

/// Uniformly distributed pure state.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> PureState {
    loop {
        let v = ComplexVector::from_fn(d, |_, _| gaussian(rng));
        if let Ok(psi) = PureState::normalized(v) {
            return psi;
        }
    }
}

/// Full-rank mixed state: a normalized Wishart sample mixed with `I/d` so
/// that every eigenvalue is at least `floor`.
pub fn random_full_rank_density<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    floor: f64,
) -> DensityMatrix {
    let g = ginibre(rng, d, d);
    let w = &g * g.adjoint();
    let w = w.unscale(w.trace().re);
    let mix = (floor * d as f64).min(1.0);
    let m = w.scale(1.0 - mix) + ComplexMatrix::identity(d, d).scale(mix / d as f64);
    DensityMatrix::from_trusted(HermitianOperator::hermitian_part(&m).into_matrix())
}

/// Random `k`-outcome POVM `Pi_x = S^{-1/2} A_x^dagger A_x S^{-1/2}` with
/// `S = sum_x A_x^dagger A_x`.
pub fn random_povm_elements<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    k: usize,
) -> Vec<HermitianOperator> {
    let effects: Vec<ComplexMatrix> = (0..k)
        .map(|_| {
            let a = ginibre(rng, d, d);
            a.adjoint() * a
        })
        .collect();
    let total = effects
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, e| acc + e);
    let eig = eig_hermitian(&HermitianOperator::hermitian_part(&total));
    let mut inv_sqrt = eig.vectors().clone();
    for (j, &l) in eig.eigenvalues().iter().enumerate() {
        inv_sqrt.column_mut(j).scale_mut(1.0 / l.sqrt());
    }
    let inv_sqrt = &inv_sqrt * eig.vectors().adjoint();
    effects
        .iter()
        .map(|e| HermitianOperator::hermitian_part(&(&inv_sqrt * e * &inv_sqrt)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::max_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 1..6 {
            let u = haar_unitary(&mut rng, d);
            UnitaryOperator::new(u.into_matrix()).unwrap();
        }
    }

    #[test]
    fn povm_completes_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let els = random_povm_elements(&mut rng, 3, 4);
        let sum = els
            .iter()
            .fold(ComplexMatrix::zeros(3, 3), |acc, e| acc + e.matrix());
        assert!(max_norm(&(sum - ComplexMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn full_rank_states_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_full_rank_density(&mut rng, 3, 0.01);
        let rho = DensityMatrix::new(rho.into_matrix()).unwrap();
        let eig = eig_hermitian(&HermitianOperator::hermitian_part(rho.matrix()));
        assert!(eig.min_eigenvalue() >= 0.01 - 1e-12);
    }
}
