//! Controlled energy measurements: local generators, the bound `G`, optimal
//! control and preparation, and a derivative-free cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{QmetError, Result};
use crate::fisher::{differentiate, fisher_of_probabilities, fisher_sum, DiffSpec, FisherReport, SUPPORT_THRESHOLD};
use crate::matcore::{
    eig_hermitian, expm_unitary, max_norm, ComplexMatrix, ComplexVector, DensityMatrix,
    Eigensystem, HermitianOperator, PureState, UnitaryOperator, C64,
};
use crate::models::HamiltonianModel;
use crate::random::{haar_unitary, random_state};
use crate::tolerances::Tolerances;

/// Eigensystem of `H(theta)`, rejecting degenerate spectra.
pub fn energy_eigensystem(model: &HamiltonianModel, theta: f64) -> Result<Eigensystem> {
    let eig = eig_hermitian(&model.h_of(theta));
    eig.ensure_nondegenerate(theta, Tolerances::default().degeneracy)?;
    Ok(eig)
}

/// Energies `xi_0 < xi_1 < ...` (ground state first).
pub fn ascending_energies(eig: &Eigensystem) -> Vec<f64> {
    eig.eigenvalues().iter().rev().copied().collect()
}

/// Rows are `<xi_j|`, ground state first.
fn s_matrix(eig: &Eigensystem) -> ComplexMatrix {
    let d = eig.dim();
    ComplexMatrix::from_fn(d, d, |j, k| eig.vectors()[(k, d - 1 - j)].conj())
}

/// Unitary `S` with `S H S^dagger = diag(xi_0, ..., xi_{d-1})`, ascending.
pub fn diagonalizer_s(model: &HamiltonianModel, theta: f64) -> Result<UnitaryOperator> {
    UnitaryOperator::new(s_matrix(&energy_eigensystem(model, theta)?))
}

/// `i (dU/dtheta) U^dagger` of a unitary family.
pub fn local_generator<F>(
    u_of: F,
    theta: f64,
    diff: &DiffSpec,
    domain: (f64, f64),
) -> Result<HermitianOperator>
where
    F: Fn(f64) -> Result<UnitaryOperator>,
{
    let u = u_of(theta)?;
    let d = differentiate(|x| Ok(u_of(x)?.into_matrix()), theta, diff, domain)?;
    let g = (d.value * u.matrix().adjoint()) * C64::new(0.0, 1.0);
    let defect = max_norm(&(&g - g.adjoint()));
    if defect > Tolerances::default().generator * (1.0 + max_norm(&g)) {
        return Err(QmetError::NonSmoothFamily { theta, defect });
    }
    Ok(HermitianOperator::hermitian_part(&g))
}

/// Generator of the encoding `U_t = exp(-i t H(theta))`.
pub fn dynamical_generator(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    diff: &DiffSpec,
) -> Result<HermitianOperator> {
    local_generator(
        |x| Ok(expm_unitary(&model.h_of(x), t)),
        theta,
        diff,
        model.theta_domain(),
    )
}

fn aligned_generator(
    model: &HamiltonianModel,
    theta: f64,
    reference: &Eigensystem,
    diff: &DiffSpec,
) -> Result<HermitianOperator> {
    local_generator(
        |x| {
            let eig = energy_eigensystem(model, x)?.aligned_to(reference);
            Ok(UnitaryOperator::from_trusted(s_matrix(&eig)))
        },
        theta,
        diff,
        model.theta_domain(),
    )
}

/// Generator `i (dS/dtheta) S^dagger` of the diagonalizer, with eigenvector
/// phases at every node aligned to those at `theta`.
pub fn diagonalizer_generator(
    model: &HamiltonianModel,
    theta: f64,
    diff: &DiffSpec,
) -> Result<HermitianOperator> {
    aligned_generator(model, theta, &energy_eigensystem(model, theta)?, diff)
}

/// True when the extremal eigenvectors of `g_diag` have equal moduli on every
/// index of `support`.
pub fn check_condition(g_diag: &HermitianOperator, support: &[usize]) -> bool {
    let eig = eig_hermitian(g_diag);
    let top = eig.vectors().column(0);
    let bottom = eig.vectors().column(eig.dim() - 1);
    support
        .iter()
        .all(|&j| (top[j].norm() - bottom[j].norm()).abs() <= 1e-8)
}

/// The two local generators and their spectral gaps at `(theta, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorPair {
    pub g_dyn: HermitianOperator,
    pub g_diag: HermitianOperator,
    pub sigma_dyn: f64,
    pub sigma_diag: f64,
    pub theta: f64,
    pub t: f64,
}

pub fn generators(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    diff: &DiffSpec,
) -> Result<GeneratorPair> {
    let g_dyn = dynamical_generator(model, theta, t, diff)?;
    let g_diag = diagonalizer_generator(model, theta, diff)?;
    Ok(GeneratorPair {
        sigma_dyn: eig_hermitian(&g_dyn).spectral_gap(),
        sigma_diag: eig_hermitian(&g_diag).spectral_gap(),
        g_dyn,
        g_diag,
        theta,
        t,
    })
}

/// Closed-form optimum of the controlled-energy-measurement Fisher information.
#[derive(Debug, Clone, PartialEq)]
pub struct CemSolution {
    /// `(sigma_dyn + sigma_diag)^2`; an upper bound only when
    /// `condition_holds` is false.
    pub g_value: f64,
    pub condition_holds: bool,
    pub v_opt: UnitaryOperator,
    pub psi_opt: PureState,
    /// Relative phase between the two extremal eigenvectors in `psi_opt`.
    pub phase: f64,
    pub generators: GeneratorPair,
}

impl CemSolution {
    pub fn is_upper_bound_only(&self) -> bool {
        !self.condition_holds
    }
}

/// Picks the relative phase that keeps every outcome probability
/// `|a_j + e^{i phi} b_j|^2 / 2` as far from zero as possible; a vanishing
/// probability would drop its outcome from the support. Indices the two
/// vectors barely touch are ignored.
fn balanced_phase(a: &ComplexVector, b: &ComplexVector) -> f64 {
    const STEPS: usize = 720;
    let active: Vec<usize> = (0..a.len())
        .filter(|&j| a[j].norm_sqr() + b[j].norm_sqr() > 1e-6)
        .collect();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..STEPS {
        let phi = std::f64::consts::TAU * k as f64 / STEPS as f64;
        let e = C64::from_polar(1.0, phi);
        let worst = active
            .iter()
            .map(|&j| (a[j] + e * b[j]).norm_sqr())
            .fold(f64::INFINITY, f64::min);
        if worst > best.0 + 1e-12 {
            best = (worst, phi);
        }
    }
    best.1
}

/// `G(theta)` with the optimal control `V = S^dagger R_1^dagger R_2` and the
/// optimal preparation `U~^dagger (|l_1> + e^{i phi} |l_d>) / sqrt 2`.
pub fn g_bound(model: &HamiltonianModel, theta: f64, t: f64, diff: &DiffSpec) -> Result<CemSolution> {
    let eig = energy_eigensystem(model, theta)?;
    let s = s_matrix(&eig);
    let gens = generators(model, theta, t, diff)?;
    let eig_diag = eig_hermitian(&gens.g_diag);
    let eig_dyn = eig_hermitian(&gens.g_dyn);
    let d = eig.dim();
    let condition_holds = check_condition(&gens.g_diag, &(0..d).collect::<Vec<_>>());

    let r1 = eig_diag.diagonalizer();
    let r2 = eig_dyn.diagonalizer();
    let v = s.adjoint() * r1.adjoint().matrix() * r2.matrix();
    let u_t = expm_unitary(&model.h_of(theta), t);
    let u_tilde = &s * &v * u_t.matrix();
    let top = eig_diag.vectors().column(0).into_owned();
    let bottom = eig_diag.vectors().column(d - 1).into_owned();
    let phase = balanced_phase(&top, &bottom);
    let target = (top + bottom * C64::from_polar(1.0, phase)).unscale(2f64.sqrt());
    let psi = PureState::normalized(u_tilde.adjoint() * target)?;
    Ok(CemSolution {
        g_value: (gens.sigma_dyn + gens.sigma_diag).powi(2),
        condition_holds,
        v_opt: UnitaryOperator::new(v)?,
        psi_opt: psi,
        phase,
        generators: gens,
    })
}

fn tag_node(e: QmetError, node: f64) -> QmetError {
    match e {
        QmetError::DegenerateSpectrum { index, next, gap, .. } => QmetError::DegenerateSpectrum {
            theta: node,
            index,
            next,
            gap,
        },
        other => other,
    }
}

/// Energy-outcome probabilities `<xi_j| V rho_theta V^dagger |xi_j>`, ground state first.
pub fn cem_probabilities(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    v: &UnitaryOperator,
    rho0: &DensityMatrix,
) -> Result<Vec<f64>> {
    let eig = energy_eigensystem(model, theta).map_err(|e| tag_node(e, theta))?;
    let rho = rho0.conjugate_by(&expm_unitary(&model.h_of(theta), t)).conjugate_by(v);
    let s = s_matrix(&eig);
    let m = &s * rho.matrix() * s.adjoint();
    Ok((0..eig.dim()).map(|j| m[(j, j)].re.max(0.0)).collect())
}

/// Fisher information of the controlled energy measurement `{V^dagger P_j V}`,
/// with `theta` entering both the state and the projectors.
pub fn fisher_cem(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    v: &UnitaryOperator,
    rho0: &DensityMatrix,
    diff: &DiffSpec,
) -> Result<FisherReport> {
    fisher_of_probabilities(
        |x| cem_probabilities(model, x, t, v, rho0),
        theta,
        diff,
        model.theta_domain(),
        SUPPORT_THRESHOLD,
    )
}

/// Restart count and coordinate line searches per restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub restarts: usize,
    pub iterations: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            restarts: 8,
            iterations: 400,
        }
    }
}

/// Best point found by [`optimize_cem`].
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub best_fi: f64,
    pub v: UnitaryOperator,
    pub psi: PureState,
    pub best_restart: usize,
    pub restarts: usize,
    pub evaluations: usize,
    /// Best value reached by each restart, in restart order.
    pub per_restart: Vec<f64>,
}

/// Probability-vector FI of a pure preparation with the differentiation
/// nodes pre-diagonalized.
struct CemObjective {
    d: usize,
    /// `(x, S(x) , U_t(x))` for `theta` and every ladder node.
    nodes: Vec<(f64, ComplexMatrix, ComplexMatrix)>,
    theta: f64,
    diff: DiffSpec,
    domain: (f64, f64),
}

impl CemObjective {
    fn new(model: &HamiltonianModel, theta: f64, t: f64, diff: &DiffSpec) -> Result<Self> {
        diff.check_domain(theta, model.theta_domain())?;
        let mut xs = vec![theta];
        xs.extend(diff.nodes(theta));
        let nodes = xs
            .into_iter()
            .map(|x| {
                let eig = energy_eigensystem(model, x).map_err(|e| tag_node(e, x))?;
                Ok((x, s_matrix(&eig), expm_unitary(&model.h_of(x), t).into_matrix()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            d: model.dim(),
            nodes,
            theta,
            diff: *diff,
            domain: model.theta_domain(),
        })
    }

    fn probs(&self, x: f64, v: &ComplexMatrix, psi: &ComplexVector) -> Vec<f64> {
        let (_, s, u) = self
            .nodes
            .iter()
            .find(|(node, _, _)| *node == x)
            .expect("node outside the precomputed ladder");
        (s * (v * (u * psi))).iter().map(|z| z.norm_sqr()).collect()
    }

    fn value(&self, v: &ComplexMatrix, psi: &ComplexVector) -> f64 {
        let p = self.probs(self.theta, v, psi);
        match differentiate(|x| Ok(self.probs(x, v, psi)), self.theta, &self.diff, self.domain) {
            Ok(dp) => fisher_sum(&p, &dp.value, SUPPORT_THRESHOLD),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// `V = V_seed exp(-i A)` and `psi = B chi` with `B` unitary, `B e_0 = psi_seed`.
struct Chart {
    d: usize,
    v_seed: ComplexMatrix,
    basis: ComplexMatrix,
}

impl Chart {
    fn new(v_seed: &UnitaryOperator, psi_seed: &PureState) -> Self {
        let d = psi_seed.dim();
        let mut cols: Vec<ComplexVector> = vec![psi_seed.amplitudes().clone()];
        for k in 0..d {
            if cols.len() == d {
                break;
            }
            let mut v = PureState::basis(d, k).amplitudes().clone();
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
            let n = v.norm();
            if n > 1e-6 {
                cols.push(v.unscale(n));
            }
        }
        Self {
            d,
            v_seed: v_seed.matrix().clone(),
            basis: ComplexMatrix::from_columns(&cols),
        }
    }

    fn len(&self) -> usize {
        self.d * self.d + 2 * self.d - 2
    }

    fn control(&self, x: &[f64]) -> ComplexMatrix {
        let d = self.d;
        let mut a = ComplexMatrix::zeros(d, d);
        let mut idx = d;
        for k in 0..d {
            a[(k, k)] = C64::new(x[k], 0.0);
            for l in (k + 1)..d {
                let z = C64::new(x[idx], x[idx + 1]);
                a[(k, l)] = z;
                a[(l, k)] = z.conj();
                idx += 2;
            }
        }
        let a = HermitianOperator::hermitian_part(&a);
        &self.v_seed * expm_unitary(&a, 1.0).matrix()
    }

    fn state(&self, x: &[f64]) -> ComplexVector {
        let d = self.d;
        let angles = &x[d * d..d * d + d - 1];
        let phases = &x[d * d + d - 1..];
        let mut chi = ComplexVector::zeros(d);
        let mut radius = 1.0;
        for k in 0..d {
            let amp = if k + 1 < d { radius * angles[k].cos() } else { radius };
            let phase = if k == 0 { 0.0 } else { phases[k - 1] };
            chi[k] = C64::from_polar(amp, phase);
            if k + 1 < d {
                radius *= angles[k].sin();
            }
        }
        &self.basis * chi
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, evals: usize) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..evals.saturating_sub(2) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

struct RestartOutcome {
    value: f64,
    v: ComplexMatrix,
    psi: ComplexVector,
    evaluations: usize,
}

fn coordinate_ascent(obj: &CemObjective, chart: &Chart, iterations: usize) -> RestartOutcome {
    const LINE_EVALS: usize = 24;
    const MIN_WIDTH: f64 = 1e-7;
    let n = chart.len();
    let mut x = vec![0.0; n];
    let eval = |x: &[f64]| obj.value(&chart.control(x), &chart.state(x));
    let mut best = eval(&x);
    let mut evaluations = 1;
    let mut width = vec![0.5; n];
    for it in 0..iterations {
        let c = it % n;
        if width.iter().all(|&w| w < MIN_WIDTH) {
            break;
        }
        if width[c] < MIN_WIDTH {
            continue;
        }
        let x0 = x[c];
        let mut probe = x.clone();
        let (arg, val) = golden_max(
            |s| {
                probe[c] = s;
                eval(&probe)
            },
            x0 - width[c],
            x0 + width[c],
            LINE_EVALS,
        );
        evaluations += LINE_EVALS;
        if val > best + 1e-13 * best.abs().max(1.0) {
            x[c] = arg;
            best = val;
            // keep the bracket when the optimum sits near its edge
            if (arg - x0).abs() < 0.5 * width[c] {
                width[c] *= 0.5;
            }
        } else {
            width[c] *= 0.5;
        }
    }
    RestartOutcome {
        value: best,
        v: chart.control(&x),
        psi: chart.state(&x),
        evaluations,
    }
}

/// Derivative-free maximization of the CEM Fisher information over controls
/// and pure preparations. Restart 0 starts from the closed-form optimum when
/// it exists; restart `k` draws its random start from `seed + k`.
pub fn optimize_cem(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    budget: Budget,
    seed: u64,
    diff: &DiffSpec,
) -> Result<OptimizeResult> {
    if budget.restarts == 0 || budget.iterations == 0 {
        return Err(QmetError::InvalidParameter {
            name: "budget".into(),
            value: 0.0,
            reason: "restarts and iterations must be positive".into(),
        });
    }
    let obj = CemObjective::new(model, theta, t, diff)?;
    let analytic = g_bound(model, theta, t, diff).ok();
    let d = obj.d;
    let outcomes: Vec<RestartOutcome> = (0..budget.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let (v0, psi0) = match (&analytic, k) {
                (Some(sol), 0) => (sol.v_opt.clone(), sol.psi_opt.clone()),
                _ => (haar_unitary(&mut rng, d), random_state(&mut rng, d)),
            };
            coordinate_ascent(&obj, &Chart::new(&v0, &psi0), budget.iterations)
        })
        .collect();
    let (best_restart, best) = outcomes
        .iter()
        .enumerate()
        .fold((0, &outcomes[0]), |acc, (k, o)| if o.value > acc.1.value { (k, o) } else { acc });
    Ok(OptimizeResult {
        best_fi: best.value.max(0.0),
        v: UnitaryOperator::from_trusted(best.v.clone()),
        psi: PureState::normalized(best.psi.clone())?,
        best_restart,
        restarts: budget.restarts,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        per_restart: outcomes.iter().map(|o| o.value).collect(),
    })
}

/// Outcome of [`max_gap_lemma_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    /// Largest gap of `M1 + W M2 W^dagger` over the sampled unitaries and the
    /// aligning one.
    pub numeric_max: f64,
    /// `sigma(M1) + sigma(M2)`.
    pub analytic: f64,
    /// Gap reached by the aligning unitary `R1^dagger R2`.
    pub achieved: f64,
}

/// Checks that unitary conjugation cannot push the spectral gap of a sum
/// beyond the sum of the gaps, and that aligning the eigenbases attains it.
pub fn max_gap_lemma_check<R: Rng + ?Sized>(
    m1: &HermitianOperator,
    m2: &HermitianOperator,
    trials: usize,
    rng: &mut R,
) -> LemmaCheck {
    let e1 = eig_hermitian(m1);
    let e2 = eig_hermitian(m2);
    let analytic = e1.spectral_gap() + e2.spectral_gap();
    let gap_with = |w: &ComplexMatrix| {
        let sum = m1.matrix() + w * m2.matrix() * w.adjoint();
        eig_hermitian(&HermitianOperator::hermitian_part(&sum)).spectral_gap()
    };
    let align = e1.diagonalizer().adjoint().compose(&e2.diagonalizer());
    let achieved = gap_with(align.matrix());
    let mut numeric_max = achieved;
    for _ in 0..trials {
        let w = haar_unitary(rng, m1.dim());
        numeric_max = numeric_max.max(gap_with(w.matrix()));
    }
    LemmaCheck {
        numeric_max,
        analytic,
        achieved,
    }
}
