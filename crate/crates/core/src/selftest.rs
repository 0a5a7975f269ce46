//! Randomized invariant suites run by the `selftest` command and the
//! acceptance target.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cem::max_gap_lemma_check;
use crate::error::Result;
use crate::fisher::{fisher_of_povm, monotone_metric, qfi, DensityFamily, DiffSpec, MetricTag, Povm};
use crate::matcore::{eig_hermitian, operator_variance, DensityMatrix, HermitianOperator};
use crate::models::HamiltonianModel;
use crate::random::{
    random_full_rank_density, random_hermitian, random_povm_elements, random_state,
};

/// Outcome of one suite. `worst` is the largest observed excess of the
/// checked quantity over its bound (negative when every case has slack).
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub passed: bool,
}

fn linear_model(h0: HermitianOperator, h1: HermitianOperator) -> HamiltonianModel {
    let d = h0.dim();
    HamiltonianModel::custom(
        "random_linear",
        d,
        &[],
        (f64::NEG_INFINITY, f64::INFINITY),
        Arc::new(move |th| &h0 + &h1.scale(th)),
        None,
    )
}

fn random_family<R: Rng>(rng: &mut R, d: usize, mixed: bool) -> (HamiltonianModel, DensityMatrix) {
    let model = linear_model(random_hermitian(rng, d), random_hermitian(rng, d));
    let rho0 = if mixed {
        random_full_rank_density(rng, d, 0.02)
    } else {
        random_state(rng, d).to_density()
    };
    (model, rho0)
}

fn summarize(name: &'static str, excesses: Vec<f64>) -> SuiteReport {
    let worst = excesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SuiteReport {
        name,
        cases: excesses.len(),
        worst,
        passed: worst <= 0.0,
    }
}

/// `F_C(POVM) <= F_Q + 1e-6` for random qubit/qutrit families and random
/// full-rank POVMs.
pub fn braunstein_caves(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diff = DiffSpec::default();
    let mut out = Vec::with_capacity(cases);
    for k in 0..cases {
        let d = 2 + k % 2;
        let (model, rho0) = random_family(&mut rng, d, k % 4 >= 2);
        let family = DensityFamily::unitary_evolution(&model, rng.random_range(0.3..2.0), rho0);
        let outcomes = rng.random_range(2..=4);
        let povm = Povm::new(random_povm_elements(&mut rng, d, outcomes))?;
        let theta = rng.random_range(-1.0..1.0);
        let fc = fisher_of_povm(&family, theta, &povm, &diff)?.value;
        let fq = qfi(&family, theta, &diff)?.value;
        out.push(fc - fq - 1e-6);
    }
    Ok(summarize("braunstein_caves", out))
}

/// `Var_psi(O) <= sigma(O)^2 / 4`.
pub fn popoviciu(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cases);
    for k in 0..cases {
        let d = 2 + k % 5;
        let o = random_hermitian(&mut rng, d);
        let psi = random_state(&mut rng, d);
        let var = operator_variance(&psi, &o)?;
        let gap = eig_hermitian(&o).spectral_gap();
        out.push(var - gap * gap / 4.0 - 1e-12 * (1.0 + gap * gap));
    }
    Ok(summarize("popoviciu", out))
}

/// The spectral gap of `M1 + W M2 W^dagger` never exceeds `sigma(M1) +
/// sigma(M2)` and the aligning unitary reaches it within 1e-9.
pub fn gap_lemma(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cases);
    for k in 0..cases {
        let d = 2 + k % 4;
        let m1 = random_hermitian(&mut rng, d);
        let m2 = random_hermitian(&mut rng, d);
        let r = max_gap_lemma_check(&m1, &m2, 20, &mut rng);
        let over = r.numeric_max - r.analytic - 1e-9;
        let miss = (r.achieved - r.analytic).abs() - 1e-9;
        out.push(over.max(miss));
    }
    Ok(summarize("gap_lemma", out))
}

/// `F_Q(sum_i l_i rho_i) <= sum_i l_i F_Q(rho_i) + 1e-8` under a common unitary family.
pub fn extended_convexity(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diff = DiffSpec::default();
    let mut out = Vec::with_capacity(cases);
    for k in 0..cases {
        let d = 2 + k % 2;
        let model = linear_model(random_hermitian(&mut rng, d), random_hermitian(&mut rng, d));
        let t = rng.random_range(0.3..2.0);
        let theta = rng.random_range(-1.0..1.0);
        let parts = rng.random_range(2..=3);
        let mut weights: Vec<f64> = (0..parts).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let branches: Vec<DensityMatrix> = (0..parts)
            .map(|j| {
                if (k + j) % 2 == 0 {
                    random_state(&mut rng, d).to_density()
                } else {
                    random_full_rank_density(&mut rng, d, 0.02)
                }
            })
            .collect();
        let mut bound = 0.0;
        for (w, rho) in weights.iter().zip(&branches) {
            bound += w * qfi(&DensityFamily::unitary_evolution(&model, t, rho.clone()), theta, &diff)?.value;
        }
        let mix = DensityMatrix::mixture(
            &weights.iter().copied().zip(branches.iter().cloned()).collect::<Vec<_>>(),
        )?;
        let fq = qfi(&DensityFamily::unitary_evolution(&model, t, mix), theta, &diff)?.value;
        out.push(fq - bound - 1e-8);
    }
    Ok(summarize("extended_convexity", out))
}

/// The arithmetic-mean monotone metric coincides with the SLD QFI within 1e-7.
pub fn metric_agreement(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diff = DiffSpec::default();
    let mut out = Vec::with_capacity(cases);
    for k in 0..cases {
        let d = 2 + k % 3;
        let (model, rho0) = random_family(&mut rng, d, true);
        let family = DensityFamily::unitary_evolution(&model, rng.random_range(0.3..2.0), rho0);
        let theta = rng.random_range(-1.0..1.0);
        let a = monotone_metric(MetricTag::Ari, &family, theta, &diff)?.value;
        let q = qfi(&family, theta, &diff)?.value;
        out.push((a - q).abs() - 1e-7);
    }
    Ok(summarize("metric_agreement", out))
}

/// All suites at their standard sizes.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        braunstein_caves(seed, 100)?,
        popoviciu(seed.wrapping_add(1), 200)?,
        gap_lemma(seed.wrapping_add(2), 50)?,
        extended_convexity(seed.wrapping_add(3), 50)?,
        metric_agreement(seed.wrapping_add(4), 50)?,
    ])
}
