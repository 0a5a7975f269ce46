use std::str::FromStr;
use std::sync::Arc;

use super::classical::{fisher_of_probabilities, FisherReport, OutcomeDistribution, SUPPORT_THRESHOLD};
use super::diff::{differentiate, DiffSpec};
use crate::error::{QmetError, Result};
use crate::matcore::{
    eig_hermitian, expm_unitary, max_norm, ComplexMatrix, ComplexVector, DensityMatrix,
    Eigensystem, HermitianOperator, PureState, C64,
};
use crate::models::HamiltonianModel;
use crate::tolerances::Tolerances;

type DensityFn = Arc<dyn Fn(f64) -> Result<DensityMatrix> + Send + Sync>;
type PureFn = Arc<dyn Fn(f64) -> Result<PureState> + Send + Sync>;

/// A one-parameter family of density matrices on an open interval.
#[derive(Clone)]
pub struct DensityFamily {
    f: DensityFn,
    domain: (f64, f64),
}

impl DensityFamily {
    pub fn new(f: impl Fn(f64) -> Result<DensityMatrix> + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    /// `rho_theta = U_t rho_0 U_t^dagger` with `U_t = exp(-i t H(theta))`.
    pub fn unitary_evolution(model: &HamiltonianModel, t: f64, rho0: DensityMatrix) -> Self {
        let m = model.clone();
        let (lo, hi) = model.theta_domain();
        Self::new(move |th| Ok(rho0.conjugate_by(&expm_unitary(&m.h_of(th), t)))).with_domain(lo, hi)
    }

    pub fn at(&self, theta: f64) -> Result<DensityMatrix> {
        (self.f)(theta)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// A one-parameter family of state vectors whose phase varies smoothly.
#[derive(Clone)]
pub struct PureFamily {
    f: PureFn,
    domain: (f64, f64),
}

impl PureFamily {
    pub fn new(f: impl Fn(f64) -> Result<PureState> + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    /// `psi_theta = exp(-i t H(theta)) psi_0`.
    pub fn unitary_evolution(model: &HamiltonianModel, t: f64, psi0: PureState) -> Self {
        let m = model.clone();
        let (lo, hi) = model.theta_domain();
        Self::new(move |th| Ok(expm_unitary(&m.h_of(th), t).apply(&psi0))).with_domain(lo, hi)
    }

    pub fn at(&self, theta: f64) -> Result<PureState> {
        (self.f)(theta)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn to_density(&self) -> DensityFamily {
        let f = self.f.clone();
        DensityFamily::new(move |th| Ok(f(th)?.to_density())).with_domain(self.domain.0, self.domain.1)
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(QmetError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn in_eigenbasis(eig: &Eigensystem, m: &ComplexMatrix) -> ComplexMatrix {
    eig.vectors().adjoint() * m * eig.vectors()
}

fn state_spectrum(rho: &DensityMatrix) -> Eigensystem {
    eig_hermitian(&HermitianOperator::hermitian_part(rho.matrix()))
}

/// Symmetric logarithmic derivative: the Hermitian `L` with
/// `d rho = (rho L + L rho) / 2`, set to zero outside the support.
pub fn sld(rho: &DensityMatrix, drho: &HermitianOperator) -> Result<HermitianOperator> {
    check_dims(rho.dim(), drho.dim())?;
    let trace = drho.matrix().trace();
    if trace.norm() > 1e-9 {
        return Err(QmetError::NotTraceless { trace: trace.norm() });
    }
    let eig = state_spectrum(rho);
    let p = eig.eigenvalues();
    let m = in_eigenbasis(&eig, drho.matrix());
    let d = rho.dim();
    let l = ComplexMatrix::from_fn(d, d, |k, j| {
        let s = p[k] + p[j];
        if s < 1e-12 {
            C64::new(0.0, 0.0)
        } else {
            m[(k, j)] * (2.0 / s)
        }
    });
    Ok(HermitianOperator::hermitian_part(
        &(eig.vectors() * l * eig.vectors().adjoint()),
    ))
}

fn sld_information(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<f64> {
    let l = sld(rho, &HermitianOperator::hermitian_part(drho))?;
    Ok((rho.matrix() * l.matrix() * l.matrix()).trace().re.max(0.0))
}

fn numerical_rank(rho: &DensityMatrix, tol: f64) -> usize {
    state_spectrum(rho)
        .eigenvalues()
        .iter()
        .filter(|&&p| p > tol)
        .count()
}

/// Quantum Fisher information `tr(rho L^2)` of a density-matrix family.
pub fn qfi(family: &DensityFamily, theta: f64, diff: &DiffSpec) -> Result<FisherReport> {
    let tol = Tolerances::default();
    diff.check_domain(theta, family.domain())?;
    let rho = family.at(theta)?;
    let rank = numerical_rank(&rho, tol.rank);
    let h = diff.base_step(theta);
    for node in [theta - h, theta + h] {
        if numerical_rank(&family.at(node)?, tol.rank) != rank {
            return Err(QmetError::RankChange { theta, node });
        }
    }
    let d = differentiate(|x| Ok(family.at(x)?.into_matrix()), theta, diff, family.domain())?;
    Ok(FisherReport::from_pair(
        sld_information(&rho, &d.value)?,
        sld_information(&rho, &d.previous)?,
        diff,
        d.step,
    ))
}

/// Pure-state QFI `4 (<dpsi|dpsi> - |<psi|dpsi>|^2)`.
pub fn qfi_pure(psi: &PureState, dpsi: &ComplexVector) -> Result<f64> {
    check_dims(psi.dim(), dpsi.len())?;
    let overlap = psi.amplitudes().dotc(dpsi);
    Ok((4.0 * (dpsi.norm_squared() - overlap.norm_sqr())).max(0.0))
}

/// [`qfi_pure`] with the tangent vector obtained numerically.
pub fn qfi_pure_family(family: &PureFamily, theta: f64, diff: &DiffSpec) -> Result<FisherReport> {
    let psi = family.at(theta)?;
    let d = differentiate(|x| Ok(family.at(x)?.amplitudes().clone()), theta, diff, family.domain())?;
    Ok(FisherReport::from_pair(
        qfi_pure(&psi, &d.value)?,
        qfi_pure(&psi, &d.previous)?,
        diff,
        d.step,
    ))
}

/// Operator-monotone function selecting a monotone metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricTag {
    /// `(1 + x) / 2`, the SLD metric.
    Ari,
    /// `2x / (1 + x)`, the largest monotone metric.
    Har,
    /// `(x - 1) / ln x`, the Kubo-Mori metric.
    Log,
}

impl MetricTag {
    pub fn f(&self, x: f64) -> f64 {
        match self {
            MetricTag::Ari => 0.5 * (1.0 + x),
            MetricTag::Har => 2.0 * x / (1.0 + x),
            MetricTag::Log => {
                let u = x - 1.0;
                if u.abs() < 1e-5 {
                    1.0 + u / 2.0 - u * u / 12.0
                } else {
                    u / u.ln_1p()
                }
            }
        }
    }
}

impl FromStr for MetricTag {
    type Err = QmetError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ari" => Ok(MetricTag::Ari),
            "har" => Ok(MetricTag::Har),
            "log" => Ok(MetricTag::Log),
            other => Err(QmetError::UnknownMetricTag(other.to_string())),
        }
    }
}

fn metric_value(tag: MetricTag, p: &[f64], m: &ComplexMatrix) -> f64 {
    let d = p.len();
    let mut total = 0.0;
    for k in 0..d {
        total += m[(k, k)].re.powi(2) / p[k];
        for l in 0..d {
            if l != k {
                total += m[(k, l)].norm_sqr() / (p[l] * tag.f(p[k] / p[l]));
            }
        }
    }
    total
}

/// Single-parameter monotone metric of a full-rank family, evaluated from the
/// eigen-decomposition of `rho` and the derivative `d rho` in that basis.
pub fn monotone_metric(
    tag: MetricTag,
    family: &DensityFamily,
    theta: f64,
    diff: &DiffSpec,
) -> Result<FisherReport> {
    let tol = Tolerances::default();
    diff.check_domain(theta, family.domain())?;
    let rho = family.at(theta)?;
    let eig = state_spectrum(&rho);
    let min = eig.min_eigenvalue();
    if min <= tol.rank {
        return Err(QmetError::RankDeficient { min_eigenvalue: min });
    }
    let d = differentiate(|x| Ok(family.at(x)?.into_matrix()), theta, diff, family.domain())?;
    let p = eig.eigenvalues();
    Ok(FisherReport::from_pair(
        metric_value(tag, p, &in_eigenbasis(&eig, &d.value)),
        metric_value(tag, p, &in_eigenbasis(&eig, &d.previous)),
        diff,
        d.step,
    ))
}

/// Positive-operator valued measure with a finite outcome set.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let d = elements
            .first()
            .map(|e| e.dim())
            .ok_or_else(|| QmetError::InvalidPovm {
                reason: "no elements".into(),
            })?;
        let mut sum = ComplexMatrix::zeros(d, d);
        for (i, e) in elements.iter().enumerate() {
            check_dims(d, e.dim())?;
            let low = eig_hermitian(e).min_eigenvalue();
            if low < -1e-10 {
                return Err(QmetError::InvalidPovm {
                    reason: format!("element {i} has eigenvalue {low:.3e}"),
                });
            }
            sum += e.matrix();
        }
        let defect = max_norm(&(sum - ComplexMatrix::identity(d, d)));
        if defect > 1e-9 {
            return Err(QmetError::InvalidPovm {
                reason: format!("elements sum to the identity only within {defect:.3e}"),
            });
        }
        Ok(Self { elements })
    }

    /// Rank-one projectors onto the eigenvectors of an eigensystem.
    pub fn from_eigensystem(eig: &Eigensystem) -> Self {
        let elements = (0..eig.dim())
            .map(|k| {
                let v = eig.vectors().column(k);
                HermitianOperator::hermitian_part(&(v * v.adjoint()))
            })
            .collect();
        Self { elements }
    }

    /// The trivial single-outcome measurement.
    pub fn trivial(d: usize) -> Self {
        Self {
            elements: vec![HermitianOperator::identity(d)],
        }
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Outcome probabilities `tr(rho Pi_x)`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<OutcomeDistribution> {
        check_dims(self.dim(), rho.dim())?;
        OutcomeDistribution::new(
            self.elements
                .iter()
                .map(|e| rho.expectation(e.matrix()).re)
                .collect(),
        )
    }
}

/// Eigenprojectors of the SLD at `theta`.
pub fn sld_measurement(family: &DensityFamily, theta: f64, diff: &DiffSpec) -> Result<Povm> {
    let rho = family.at(theta)?;
    let d = differentiate(|x| Ok(family.at(x)?.into_matrix()), theta, diff, family.domain())?;
    let l = sld(&rho, &HermitianOperator::hermitian_part(&d.value))?;
    Ok(Povm::from_eigensystem(&eig_hermitian(&l)))
}

/// Classical Fisher information of a fixed POVM applied to a state family.
pub fn fisher_of_povm(
    family: &DensityFamily,
    theta: f64,
    povm: &Povm,
    diff: &DiffSpec,
) -> Result<FisherReport> {
    fisher_of_probabilities(
        |x| {
            povm.probabilities(&family.at(x)?)
                .map(OutcomeDistribution::into_probs)
                .map_err(|e| match e {
                    QmetError::NonNormalized { sum, .. } => QmetError::NonNormalized { theta: x, sum },
                    other => other,
                })
        },
        theta,
        diff,
        family.domain(),
        SUPPORT_THRESHOLD,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::pauli;
    use crate::models;
    use approx::assert_abs_diff_eq;

    fn diag_family() -> DensityFamily {
        DensityFamily::new(|th| {
            Ok(DensityMatrix::new(HermitianOperator::from_real_diagonal(&[th, 1.0 - th]).into_matrix()).unwrap())
        })
        .with_domain(0.0, 1.0)
    }

    #[test]
    fn sld_of_maximally_mixed_state() {
        let a = HermitianOperator::new(pauli::sigma_x().scale(0.3) + pauli::sigma_z().scale(-0.2)).unwrap();
        let l = sld(&DensityMatrix::maximally_mixed(2), &a).unwrap();
        assert!(max_norm(&(l.matrix() - a.matrix().scale(2.0))) < 1e-14);
        let zero = sld(&DensityMatrix::maximally_mixed(3), &HermitianOperator::zeros(3)).unwrap();
        assert_eq!(max_norm(zero.matrix()), 0.0);
        let err = sld(&DensityMatrix::maximally_mixed(2), &HermitianOperator::identity(2)).unwrap_err();
        assert!(matches!(err, QmetError::NotTraceless { .. }));
    }

    #[test]
    fn pure_state_formula() {
        let psi = PureState::basis(2, 0);
        let dpsi = PureState::basis(2, 1).amplitudes().clone();
        assert_abs_diff_eq!(qfi_pure(&psi, &dpsi).unwrap(), 4.0, epsilon = 1e-15);
        let phase = psi.amplitudes() * C64::new(0.0, 0.7);
        assert_abs_diff_eq!(qfi_pure(&psi, &phase).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn static_family_has_zero_qfi() {
        let rho = DensityMatrix::maximally_mixed(2);
        let fam = DensityFamily::new(move |_| Ok(rho.clone()));
        assert_eq!(qfi(&fam, 0.3, &DiffSpec::default()).unwrap().value, 0.0);
    }

    #[test]
    fn direction_model_qfi_matches_closed_form() {
        let model = models::qubit_direction(1.0).unwrap();
        let reference = models::reference("qubit_direction_qfi").unwrap();
        for &(th, t) in &[(0.4, 0.3), (1.2, 1.1), (2.5, 2.9)] {
            let fam = PureFamily::unitary_evolution(&model, t, PureState::basis(2, 0));
            let mixed = qfi(&fam.to_density(), th, &DiffSpec::default()).unwrap();
            let pure = qfi_pure_family(&fam, th, &DiffSpec::default()).unwrap();
            let want = reference.call(&[th, 1.0, t]);
            assert_abs_diff_eq!(mixed.value, want, epsilon = 1e-8);
            assert_abs_diff_eq!(pure.value, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn sld_reproduces_pure_qfi() {
        let model = models::qubit_direction(1.0).unwrap();
        let fam = PureFamily::unitary_evolution(&model, 0.8, PureState::basis(2, 0));
        let rho_fam = fam.to_density();
        let th = 1.1;
        let d = differentiate(|x| Ok(rho_fam.at(x)?.into_matrix()), th, &DiffSpec::default(), (0.0, 3.0)).unwrap();
        let rho = rho_fam.at(th).unwrap();
        let l = sld(&rho, &HermitianOperator::hermitian_part(&d.value)).unwrap();
        let via_sld = (rho.matrix() * l.matrix() * l.matrix()).trace().re;
        let pure = qfi_pure_family(&fam, th, &DiffSpec::default()).unwrap().value;
        assert_abs_diff_eq!(via_sld, pure, epsilon = 1e-8);
    }

    #[test]
    fn field_mode_qfi() {
        let model = models::field_mode(1.0, 4).unwrap();
        let (a0, t) = (0.6f64, 1.7);
        let mut v = ComplexVector::zeros(5);
        v[0] = C64::new(a0, 0.0);
        v[1] = C64::new(0.0, (1.0 - a0 * a0).sqrt());
        let fam = PureFamily::unitary_evolution(&model, t, PureState::new(v).unwrap());
        let r = qfi(&fam.to_density(), 1.3, &DiffSpec::default()).unwrap();
        let want = models::reference("jc_field_qfi").unwrap().call(&[t, a0 * a0]);
        assert_abs_diff_eq!(r.value, want, epsilon = 1e-7 * want);
    }

    #[test]
    fn commuting_family_metrics_coincide() {
        for tag in [MetricTag::Ari, MetricTag::Har, MetricTag::Log] {
            let r = monotone_metric(tag, &diag_family(), 0.3, &DiffSpec::default()).unwrap();
            assert_abs_diff_eq!(r.value, 1.0 / (0.3 * 0.7), epsilon = 1e-8);
        }
        assert!(matches!("bkm".parse::<MetricTag>(), Err(QmetError::UnknownMetricTag(_))));
    }

    #[test]
    fn log_metric_function_is_smooth_at_one() {
        let f = |x| MetricTag::Log.f(x);
        assert_eq!(f(1.0), 1.0);
        for u in [2e-6, -2e-6, 2e-5, -2e-5] {
            assert_abs_diff_eq!(f(1.0 + u), u / f64::ln_1p(u), epsilon = 1e-13);
        }
        assert_abs_diff_eq!(f(4.0), 3.0 / 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn rank_deficient_metric_is_rejected() {
        let model = models::qubit_direction(1.0).unwrap();
        let fam = PureFamily::unitary_evolution(&model, 0.8, PureState::basis(2, 0)).to_density();
        let err = monotone_metric(MetricTag::Ari, &fam, 1.0, &DiffSpec::default()).unwrap_err();
        assert!(matches!(err, QmetError::RankDeficient { .. }));
    }

    #[test]
    fn rank_change_is_detected() {
        // eigenvalue crosses the threshold at theta = 0
        let fam = DensityFamily::new(|th: f64| {
            let p = if th > 0.0 { 0.0 } else { 0.25 };
            Ok(DensityMatrix::new(HermitianOperator::from_real_diagonal(&[1.0 - p, p]).into_matrix()).unwrap())
        });
        let err = qfi(&fam, 0.0, &DiffSpec::default()).unwrap_err();
        assert!(matches!(err, QmetError::RankChange { .. }));
    }

    #[test]
    fn povms() {
        let fam = diag_family();
        let trivial = fisher_of_povm(&fam, 0.4, &Povm::trivial(2), &DiffSpec::default()).unwrap();
        assert_eq!(trivial.value, 0.0);
        let z = Povm::from_eigensystem(&eig_hermitian(&HermitianOperator::new(pauli::sigma_z()).unwrap()));
        let r = fisher_of_povm(&fam, 0.4, &z, &DiffSpec::default()).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 / (0.4 * 0.6), epsilon = 1e-8);
        assert!(Povm::new(vec![HermitianOperator::identity(2).scale(0.5)]).is_err());
        assert!(Povm::new(vec![
            HermitianOperator::from_real_diagonal(&[1.5, 0.0]),
            HermitianOperator::from_real_diagonal(&[-0.5, 1.0]),
        ])
        .is_err());
    }

    #[test]
    fn sld_measurement_saturates_qfi() {
        let model = models::qubit_direction(1.0).unwrap();
        let rho0 = DensityMatrix::new(HermitianOperator::from_real_diagonal(&[0.8, 0.2]).into_matrix()).unwrap();
        let fam = DensityFamily::unitary_evolution(&model, 1.1, rho0);
        let th = 0.9;
        let povm = sld_measurement(&fam, th, &DiffSpec::default()).unwrap();
        let fc = fisher_of_povm(&fam, th, &povm, &DiffSpec::default()).unwrap().value;
        let fq = qfi(&fam, th, &DiffSpec::default()).unwrap().value;
        assert_abs_diff_eq!(fc, fq, epsilon = 1e-5 * fq);
    }
}
