//! Phase-estimation read-out of controlled energy measurements: ideal and
//! controllized distributions over the `n`-bit register, their Fisher
//! information, and brute-force oracles for both.

use std::f64::consts::TAU;

use crate::cem::{ascending_energies, cem_probabilities, energy_eigensystem};
use crate::error::{QmetError, Result};
use crate::fisher::{classical_fisher, DiffSpec, FisherReport, FnModel, OutcomeDistribution};
use crate::matcore::{
    eig_hermitian, expm_unitary, max_norm, partial_trace, tensor, ComplexMatrix, ComplexVector,
    DensityMatrix, HermitianOperator, Subsystem, UnitaryOperator, C64,
};
use crate::models::HamiltonianModel;

pub const MAX_QUBITS: u32 = 12;
const ALIAS_MARGIN: f64 = 1e-6;

/// How energies are shifted before they enter the read-out phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyShift {
    /// Subtract the ground energy at every node.
    Ground,
    /// Add a fixed offset.
    Fixed(f64),
}

/// Read-out register, controllization and preparation settings.
#[derive(Debug, Clone)]
pub struct PhaseSimConfig {
    pub n: u32,
    pub m: u32,
    /// `None` picks `0.9 * 2 pi / spread` at the working point.
    pub tau: Option<f64>,
    pub shift: EnergyShift,
    pub v: UnitaryOperator,
    pub rho0: DensityMatrix,
    pub t: f64,
}

impl PhaseSimConfig {
    pub fn new(n: u32, m: u32, v: UnitaryOperator, rho0: DensityMatrix, t: f64) -> Result<Self> {
        let cfg = Self {
            n,
            m,
            tau: None,
            shift: EnergyShift::Ground,
            v,
            rho0,
            t,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = Some(tau);
        self.validate()?;
        Ok(self)
    }

    pub fn with_shift(mut self, shift: EnergyShift) -> Self {
        self.shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(QmetError::InvalidPhaseConfig { reason });
        if !(1..=MAX_QUBITS).contains(&self.n) {
            return bad(format!("n = {} outside [1, {MAX_QUBITS}]", self.n));
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad(format!("tau = {tau} must be positive"));
            }
        }
        if self.v.dim() != self.rho0.dim() {
            return Err(QmetError::DimensionMismatch {
                expected: self.v.dim(),
                found: self.rho0.dim(),
            });
        }
        if !self.t.is_finite() {
            return bad("t must be finite".into());
        }
        Ok(())
    }

    pub fn outcomes(&self) -> usize {
        1 << self.n
    }

    /// `tau` to use around `theta`: the configured value or the default for
    /// the spectrum at `theta`.
    pub fn resolve_tau(&self, model: &HamiltonianModel, theta: f64) -> Result<f64> {
        match self.tau {
            Some(t) => Ok(t),
            None => {
                let e = ascending_energies(&energy_eigensystem(model, theta)?);
                Ok(default_tau(e[e.len() - 1] - e[0]))
            }
        }
    }

    fn shifted(&self, energies: &[f64]) -> Vec<f64> {
        let c = match self.shift {
            EnergyShift::Ground => -energies[0],
            EnergyShift::Fixed(c) => c,
        };
        energies.iter().map(|e| e + c).collect()
    }
}

/// `0.9 * 2 pi / (spread + 1e-6)`.
pub fn default_tau(spread: f64) -> f64 {
    0.9 * TAU / (spread + ALIAS_MARGIN)
}

/// `tr(U)/d = a e^{i phi}` and `eps_m = (tr(U)/d)^m - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllizationFactors {
    pub a: f64,
    pub phi: f64,
    pub epsilon: C64,
}

pub fn controllization_factors(u: &UnitaryOperator, m: u32) -> ControllizationFactors {
    let z = u.matrix().trace() / u.dim() as f64;
    let a = z.norm();
    let phi = if a < 1e-14 { 0.0 } else { z.arg() };
    ControllizationFactors {
        a,
        phi,
        epsilon: z.powu(m) - 1.0,
    }
}

/// Which read-out distribution to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Readout {
    Ideal,
    /// Controllization factors from `exp(-i (tau/m) H(theta))` at each node.
    Realistic,
    /// Fixed controllization factors.
    Controllized { a: f64, phi: f64 },
}

/// `(sin(2^n alpha / 2) / (2^n sin(alpha / 2)))^2`, equal to 1 at `alpha = 0 mod 2 pi`.
pub fn fejer_kernel(n: u32, alpha: f64) -> f64 {
    let s = (alpha / 2.0).sin();
    if s.abs() < 1e-9 {
        return 1.0;
    }
    let big = (1u64 << n) as f64;
    let r = (big * alpha / 2.0).sin() / (big * s);
    r * r
}

/// `prod_l [1 + a^{2^{l-1} m} cos(2^{l-1} beta)] / 2^n`.
pub fn realistic_kernel(n: u32, m: u32, a: f64, beta: f64) -> f64 {
    let mut out = 1.0;
    let mut weight = 1.0;
    for _ in 0..n {
        out *= (1.0 + a.powf(weight * m as f64) * (weight * beta).cos()) / 2.0;
        weight *= 2.0;
    }
    out
}

/// Energy-outcome distribution `<xi_j| V rho_theta V^dagger |xi_j>`, ground state first.
pub fn energy_probs(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    v: &UnitaryOperator,
    rho0: &DensityMatrix,
) -> Result<OutcomeDistribution> {
    OutcomeDistribution::new(cem_probabilities(model, theta, t, v, rho0)?)
}

fn aliasing_check(tau: f64, energies: &[f64]) -> Result<()> {
    let span = tau * (energies[energies.len() - 1] - energies[0]);
    if span >= TAU {
        return Err(QmetError::AliasingRisk { phase_span: span });
    }
    Ok(())
}

fn readout_at(
    cfg: &PhaseSimConfig,
    model: &HamiltonianModel,
    x: f64,
    tau: f64,
    mode: Readout,
) -> Result<OutcomeDistribution> {
    cfg.validate()?;
    let eig = energy_eigensystem(model, x)?;
    let energies = ascending_energies(&eig);
    aliasing_check(tau, &energies)?;
    let xi = cfg.shifted(&energies);
    let p = cem_probabilities(model, x, cfg.t, &cfg.v, &cfg.rho0)?;
    let factors = match mode {
        Readout::Ideal => None,
        Readout::Realistic => {
            let u = expm_unitary(&model.h_of(x), tau / cfg.m as f64);
            let f = controllization_factors(&u, cfg.m);
            Some((f.a, f.phi))
        }
        Readout::Controllized { a, phi } => Some((a, phi)),
    };
    let big = cfg.outcomes();
    let probs = (0..big)
        .map(|q| {
            let grid = TAU * q as f64 / big as f64;
            p.iter()
                .zip(&xi)
                .map(|(pj, e)| {
                    let alpha = tau * e + grid;
                    let k = match factors {
                        None => fejer_kernel(cfg.n, alpha),
                        Some((a, phi)) => realistic_kernel(cfg.n, cfg.m, a, alpha + cfg.m as f64 * phi),
                    };
                    pj * k
                })
                .sum::<f64>()
        })
        .collect();
    OutcomeDistribution::new(probs)
}

/// Distribution of the read-out integer `Q` under perfect controlled evolutions.
pub fn ideal_distribution(
    cfg: &PhaseSimConfig,
    model: &HamiltonianModel,
    theta: f64,
) -> Result<OutcomeDistribution> {
    readout_at(cfg, model, theta, cfg.resolve_tau(model, theta)?, Readout::Ideal)
}

/// Distribution of `Q` when each controlled evolution is built from `m`
/// controllized steps.
pub fn realistic_distribution(
    cfg: &PhaseSimConfig,
    model: &HamiltonianModel,
    theta: f64,
) -> Result<OutcomeDistribution> {
    readout_at(cfg, model, theta, cfg.resolve_tau(model, theta)?, Readout::Realistic)
}

/// Distribution of `Q` under `mode` at `theta`.
pub fn readout_distribution(
    cfg: &PhaseSimConfig,
    model: &HamiltonianModel,
    theta: f64,
    mode: Readout,
) -> Result<OutcomeDistribution> {
    readout_at(cfg, model, theta, cfg.resolve_tau(model, theta)?, mode)
}

/// Fisher information of the read-out integer. `tau` is resolved once at
/// `theta`; energies, shifts, outcome probabilities and (realistic mode)
/// controllization factors all follow the differentiation nodes.
pub fn fisher_phase_readout(
    cfg: &PhaseSimConfig,
    model: &HamiltonianModel,
    theta: f64,
    diff: &DiffSpec,
    mode: Readout,
) -> Result<FisherReport> {
    let tau = cfg.resolve_tau(model, theta)?;
    let (lo, hi) = model.theta_domain();
    let family = FnModel::new(cfg.outcomes(), |x| readout_at(cfg, model, x, tau, mode)).with_domain(lo, hi);
    classical_fisher(&family, theta, diff)
}

/// Result of [`tune_tau`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedTau {
    pub tau: f64,
    pub report: FisherReport,
}

/// Maximizes the read-out Fisher information over `tau` below the aliasing
/// limit: a uniform scan followed by golden-section refinement.
pub fn tune_tau(
    cfg: &PhaseSimConfig,
    model: &HamiltonianModel,
    theta: f64,
    diff: &DiffSpec,
    mode: Readout,
) -> Result<TunedTau> {
    const SCAN: usize = 48;
    const REFINE: usize = 40;
    let mut spread = 0.0f64;
    let mut xs = vec![theta];
    xs.extend(diff.nodes(theta));
    for x in xs {
        let e = ascending_energies(&energy_eigensystem(model, x)?);
        spread = spread.max(e[e.len() - 1] - e[0]);
    }
    if spread <= 0.0 {
        let report = fisher_phase_readout(cfg, model, theta, diff, mode)?;
        return Ok(TunedTau {
            tau: cfg.resolve_tau(model, theta)?,
            report,
        });
    }
    let tau_max = 0.98 * TAU / spread;
    let eval = |tau: f64| -> Result<FisherReport> {
        let c = PhaseSimConfig {
            tau: Some(tau),
            ..cfg.clone()
        };
        fisher_phase_readout(&c, model, theta, diff, mode)
    };
    let step = tau_max / SCAN as f64;
    let mut best: Option<(usize, f64)> = None;
    let mut last_err = None;
    for k in 1..=SCAN {
        match eval(step * k as f64) {
            Ok(r) if best.is_none_or(|(_, v)| r.value > v) => best = Some((k, r.value)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let Some((k, _)) = best else {
        return Err(last_err.unwrap_or(QmetError::AliasingRisk { phase_span: TAU }));
    };
    let score = |tau: f64| eval(tau).map(|r| r.value).unwrap_or(f64::NEG_INFINITY);
    let (mut a, mut b) = (step * (k as f64 - 1.0).max(0.05), (step * (k as f64 + 1.0)).min(tau_max));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (score(c), score(d));
    for _ in 0..REFINE {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = score(d);
        }
    }
    let mut candidates = vec![step * k as f64, c, d];
    candidates.retain(|t| *t > 0.0);
    let mut out: Option<TunedTau> = None;
    for tau in candidates {
        if let Ok(report) = eval(tau) {
            if out.is_none_or(|o| report.value > o.report.value) {
                out = Some(TunedTau { tau, report });
            }
        }
    }
    out.ok_or(QmetError::AliasingRisk { phase_span: TAU })
}

pub const ORACLE_MAX_QUBITS: u32 = 6;
pub const ORACLE_MAX_DIM: usize = 4;

/// Ideal read-out distribution from an explicit state-vector simulation of
/// Hadamards, controlled powers of `exp(-i tau H)` and the inverse Fourier
/// transform on the `n` control qubits.
pub fn circuit_oracle(
    cfg: &PhaseSimConfig,
    model: &HamiltonianModel,
    theta: f64,
) -> Result<OutcomeDistribution> {
    cfg.validate()?;
    let d = model.dim();
    if cfg.n > ORACLE_MAX_QUBITS || d > ORACLE_MAX_DIM {
        return Err(QmetError::OracleTooLarge {
            reason: format!(
                "n = {}, d = {d} exceeds n <= {ORACLE_MAX_QUBITS}, d <= {ORACLE_MAX_DIM}",
                cfg.n
            ),
        });
    }
    let tau = cfg.resolve_tau(model, theta)?;
    let h = model.h_of(theta);
    let energies = ascending_energies(&energy_eigensystem(model, theta)?);
    aliasing_check(tau, &energies)?;
    let shift = cfg.shifted(&energies)[0] - energies[0];
    let h_shifted = HermitianOperator::hermitian_part(&(h.matrix() + ComplexMatrix::identity(d, d) * C64::new(shift, 0.0)));

    let rho = cfg
        .rho0
        .conjugate_by(&expm_unitary(&h, cfg.t))
        .conjugate_by(&cfg.v);
    let ensemble = eig_hermitian(&HermitianOperator::hermitian_part(rho.matrix()));

    let n = cfg.n as usize;
    let big = 1usize << n;
    let powers: Vec<ComplexMatrix> = (0..n)
        .map(|l| expm_unitary(&h_shifted, tau * (1u64 << l) as f64).into_matrix())
        .collect();
    let dft = ComplexMatrix::from_fn(big, big, |q, x| {
        C64::from_polar(1.0 / (big as f64).sqrt(), -TAU * (x * q) as f64 / big as f64)
    });

    let mut probs = vec![0.0; big];
    for k in 0..d {
        let w = ensemble.eigenvalues()[k];
        if w <= 1e-15 {
            continue;
        }
        let psi = ensemble.vectors().column(k);
        // index X * d + s, control register X with qubit l on bit l
        let mut state = ComplexVector::zeros(big * d);
        for s in 0..d {
            state[s] = psi[s];
        }
        for l in 0..n {
            let bit = 1usize << l;
            let r = std::f64::consts::FRAC_1_SQRT_2;
            for x in 0..big {
                if x & bit != 0 {
                    continue;
                }
                for s in 0..d {
                    let (i0, i1) = (x * d + s, (x | bit) * d + s);
                    let (a0, a1) = (state[i0], state[i1]);
                    state[i0] = (a0 + a1) * r;
                    state[i1] = (a0 - a1) * r;
                }
            }
        }
        for (l, u) in powers.iter().enumerate() {
            let bit = 1usize << l;
            for x in (0..big).filter(|x| x & bit != 0) {
                let block = state.rows(x * d, d).into_owned();
                state.rows_mut(x * d, d).copy_from(&(u * block));
            }
        }
        for s in 0..d {
            let column = ComplexVector::from_fn(big, |x, _| state[x * d + s]);
            let out = &dft * column;
            for (q, z) in out.iter().enumerate() {
                probs[q] += w * z.norm_sqr();
            }
        }
    }
    OutcomeDistribution::new(probs)
}

pub const CONTROLLIZATION_MAX_DIM: usize = 6;

/// Result of [`controllization_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct ControllizationCheck {
    /// Control (x) system operator after `m` steps.
    pub block: ComplexMatrix,
    /// `a^{|x-y| m} e^{i (y-x) m phi} |x><y| (x) U^{x m} rho U^{dagger y m}`.
    pub closed_form: ComplexMatrix,
    pub max_defect: f64,
}

/// Runs `m` controllization steps on `|x1><y1| (x) rho_sys` with a fresh
/// maximally mixed ancilla each time, using the explicit
/// `W = CSWAP (I (x) U (x) I) CSWAP` on control (x) system (x) ancilla.
pub fn controllization_oracle(
    u: &UnitaryOperator,
    x1: usize,
    y1: usize,
    rho_sys: &DensityMatrix,
    m: u32,
) -> Result<ControllizationCheck> {
    let d = u.dim();
    if d > CONTROLLIZATION_MAX_DIM {
        return Err(QmetError::OracleTooLarge {
            reason: format!("d = {d} exceeds {CONTROLLIZATION_MAX_DIM}"),
        });
    }
    if rho_sys.dim() != d {
        return Err(QmetError::DimensionMismatch {
            expected: d,
            found: rho_sys.dim(),
        });
    }
    if x1 > 1 || y1 > 1 {
        return Err(QmetError::InvalidParameter {
            name: "control".into(),
            value: x1.max(y1) as f64,
            reason: "control indices must be 0 or 1".into(),
        });
    }
    let one = C64::new(1.0, 0.0);
    let swap = ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        if r == (c % d) * d + c / d {
            one
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let proj = |k: usize| {
        let mut p = ComplexMatrix::zeros(2, 2);
        p[(k, k)] = one;
        p
    };
    let id = |n: usize| ComplexMatrix::identity(n, n);
    let cswap = tensor(&proj(0), &swap) + tensor(&proj(1), &id(d * d));
    let middle = tensor(&tensor(&id(2), u.matrix()), &id(d));
    let w = &cswap * middle * &cswap;
    let ancilla = id(d) * C64::new(1.0 / d as f64, 0.0);

    let mut outer = ComplexMatrix::zeros(2, 2);
    outer[(x1, y1)] = one;
    let start = tensor(&outer, rho_sys.matrix());
    let mut block = start.clone();
    for _ in 0..m {
        let full = &w * tensor(&block, &ancilla) * w.adjoint();
        block = partial_trace(&full, (2 * d, d), Subsystem::A)?;
    }

    let f = controllization_factors(u, 1);
    let (xf, yf) = (x1 as f64, y1 as f64);
    let factor = C64::from_polar(
        f.a.powf((xf - yf).abs() * m as f64),
        (yf - xf) * m as f64 * f.phi,
    );
    let um = u.power(m as u64);
    let left = if x1 == 1 { um.matrix().clone() } else { id(d) };
    let right = if y1 == 1 { um.matrix().adjoint() } else { id(d) };
    let closed_form = tensor(&outer, &(left * rho_sys.matrix() * right)) * factor;
    let max_defect = max_norm(&(&block - &closed_form));
    Ok(ControllizationCheck {
        block,
        closed_form,
        max_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cem::{fisher_cem, g_bound};
    use crate::matcore::{pauli, PureState};
    use crate::models;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn direction() -> HamiltonianModel {
        models::qubit_direction(1.0).unwrap()
    }

    fn static_model(h: HermitianOperator) -> HamiltonianModel {
        HamiltonianModel::custom(
            "static",
            h.dim(),
            &[],
            (f64::NEG_INFINITY, f64::INFINITY),
            Arc::new(move |_| h.clone()),
            None,
        )
    }

    fn optimal_cfg(n: u32, m: u32, th: f64, t: f64) -> PhaseSimConfig {
        let sol = g_bound(&direction(), th, t, &DiffSpec::default()).unwrap();
        PhaseSimConfig::new(n, m, sol.v_opt, sol.psi_opt.to_density(), t).unwrap()
    }

    #[test]
    fn config_validation() {
        let v = UnitaryOperator::identity(2);
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(PhaseSimConfig::new(0, 1, v.clone(), rho.clone(), 0.0).is_err());
        assert!(PhaseSimConfig::new(13, 1, v.clone(), rho.clone(), 0.0).is_err());
        assert!(PhaseSimConfig::new(4, 0, v.clone(), rho.clone(), 0.0).is_err());
        let ok = PhaseSimConfig::new(4, 1, v.clone(), rho, 0.0).unwrap();
        assert!(ok.clone().with_tau(-1.0).is_err());
        assert!(ok.with_tau(0.5).is_ok());
        assert!(PhaseSimConfig::new(4, 1, v, DensityMatrix::maximally_mixed(3), 0.0).is_err());
    }

    #[test]
    fn controllization_factor_examples() {
        let f = controllization_factors(&UnitaryOperator::identity(3), 5);
        assert_eq!((f.a, f.phi), (1.0, 0.0));
        assert_abs_diff_eq!(f.epsilon.norm(), 0.0, epsilon = 1e-15);
        let z = UnitaryOperator::new(pauli::sigma_z()).unwrap();
        let f = controllization_factors(&z, 1);
        assert_eq!((f.a, f.phi), (0.0, 0.0));
        let u = expm_unitary(&HermitianOperator::new(pauli::sigma_z()).unwrap(), 0.1);
        let f = controllization_factors(&u, 3);
        assert_abs_diff_eq!(f.a, 0.1f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(f.phi, 0.0, epsilon = 1e-15);
        let u = expm_unitary(&HermitianOperator::new(pauli::sigma_z()).unwrap(), 2.0);
        let f = controllization_factors(&u, 1);
        assert_abs_diff_eq!(f.a, 2f64.cos().abs(), epsilon = 1e-15);
        assert_abs_diff_eq!(f.phi.abs(), PI, epsilon = 1e-12);
    }

    #[test]
    fn epsilon_shrinks_with_m() {
        let h = direction().h_of(1.0);
        let tau = 2.0;
        let mut prev = f64::INFINITY;
        for m in [2u32, 4, 8, 16] {
            let f = controllization_factors(&expm_unitary(&h, tau / m as f64), m);
            let e = f.epsilon.norm();
            assert!(e < prev);
            if prev.is_finite() {
                assert_abs_diff_eq!(prev / e, 2.0, epsilon = 0.3);
            }
            prev = e;
        }
    }

    #[test]
    fn fejer_limits() {
        assert_eq!(fejer_kernel(5, 0.0), 1.0);
        assert_eq!(fejer_kernel(5, TAU), 1.0);
        assert_abs_diff_eq!(fejer_kernel(3, TAU / 8.0), 0.0, epsilon = 1e-30);
        assert_abs_diff_eq!(fejer_kernel(1, 1.0), (1.0 + 1f64.cos()) / 2.0, epsilon = 1e-15);
        for k in 0..16 {
            let alpha = 0.37 + TAU * k as f64 / 16.0;
            assert_abs_diff_eq!(fejer_kernel(4, alpha), realistic_kernel(4, 7, 1.0, alpha), epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_aligned_energy_gives_point_mass() {
        let model = static_model(HermitianOperator::from_real_diagonal(&[0.0, 1.0]));
        let n = 4;
        let tau = TAU * 5.0 / 16.0;
        let rho = PureState::basis(2, 1).to_density();
        let cfg = PhaseSimConfig::new(n, 1, UnitaryOperator::identity(2), rho, 0.0)
            .unwrap()
            .with_tau(tau)
            .unwrap();
        let p = ideal_distribution(&cfg, &model, 0.0).unwrap();
        // alpha = 2 pi (5 + Q) / 16 vanishes mod 2 pi at Q = 11
        for (q, &v) in p.probs().iter().enumerate() {
            assert_abs_diff_eq!(v, if q == 11 { 1.0 } else { 0.0 }, epsilon = 1e-14);
        }
    }

    #[test]
    fn one_dimensional_model_peaks_at_zero() {
        let model = static_model(HermitianOperator::from_real_diagonal(&[2.5]));
        let cfg = PhaseSimConfig::new(3, 1, UnitaryOperator::identity(1), DensityMatrix::maximally_mixed(1), 1.0)
            .unwrap()
            .with_tau(0.4)
            .unwrap();
        let p = ideal_distribution(&cfg, &model, 0.3).unwrap();
        assert_abs_diff_eq!(p.probs()[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn energy_probs_examples() {
        let model = static_model(HermitianOperator::from_real_diagonal(&[0.2, -1.0, 3.0]));
        let ground = PureState::basis(3, 1).to_density();
        let p = energy_probs(&model, 0.0, 0.7, &UnitaryOperator::identity(3), &ground).unwrap();
        assert_abs_diff_eq!(p.probs()[0], 1.0, epsilon = 1e-14);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(2);
        let v = crate::random::haar_unitary(&mut rng, 3);
        let p = energy_probs(&direction_like(), 0.4, 0.7, &v, &DensityMatrix::maximally_mixed(3)).unwrap();
        for x in p.probs() {
            assert_abs_diff_eq!(*x, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    fn direction_like() -> HamiltonianModel {
        models::nv_spin1(1.0, 1.2, 0.1).unwrap()
    }

    #[test]
    fn aliasing_is_reported() {
        let cfg = optimal_cfg(4, 1, 1.0, 1.0).with_tau(4.0).unwrap();
        assert!(matches!(
            ideal_distribution(&cfg, &direction(), 1.0),
            Err(QmetError::AliasingRisk { .. })
        ));
    }

    #[test]
    fn forced_unit_factors_reproduce_ideal() {
        let cfg = optimal_cfg(5, 3, 1.0, 1.0);
        let ideal = ideal_distribution(&cfg, &direction(), 1.0).unwrap();
        let forced = readout_distribution(&cfg, &direction(), 1.0, Readout::Controllized { a: 1.0, phi: 0.0 }).unwrap();
        assert!(ideal.total_variation(&forced) < 1e-13);
    }

    #[test]
    fn ideal_concentrates_with_n() {
        let (th, t) = (1.0, 1.0);
        let model = direction();
        let mut prev = f64::INFINITY;
        for n in [4, 6, 8] {
            let cfg = optimal_cfg(n, 1, th, t);
            let tau = cfg.resolve_tau(&model, th).unwrap();
            let ideal = ideal_distribution(&cfg, &model, th).unwrap();
            // coarse-grain Q to the energy whose phase is circularly nearest
            let e = cfg.shifted(&ascending_energies(&energy_eigensystem(&model, th).unwrap()));
            let p = energy_probs(&model, th, t, &cfg.v, &cfg.rho0).unwrap();
            let big = 1usize << n;
            let mut target = vec![0.0; e.len()];
            for (q, w) in ideal.probs().iter().enumerate() {
                let dist = |ej: f64| {
                    let a = (tau * ej + TAU * q as f64 / big as f64).rem_euclid(TAU);
                    a.min(TAU - a)
                };
                let j = (0..e.len()).min_by(|&a, &b| dist(e[a]).total_cmp(&dist(e[b]))).unwrap();
                target[j] += w;
            }
            let tv = p.total_variation(&OutcomeDistribution::new(target).unwrap());
            assert!(tv < prev, "n = {n}: {tv} >= {prev}");
            prev = tv;
        }
    }

    #[test]
    fn realistic_approaches_ideal_as_m_doubles() {
        let (th, t) = (1.0, 1.0);
        let model = direction();
        let ideal = ideal_distribution(&optimal_cfg(6, 1, th, t), &model, th).unwrap();
        let mut prev = f64::INFINITY;
        for m in [1, 2, 4, 8, 16] {
            let real = realistic_distribution(&optimal_cfg(6, m, th, t), &model, th).unwrap();
            let tv = ideal.total_variation(&real);
            assert!(tv <= prev + 1e-12, "m = {m}");
            prev = tv;
        }
    }

    #[test]
    fn ideal_readout_fi_approaches_cem() {
        let (th, t) = (1.0, 1.0);
        let model = direction();
        let cfg = optimal_cfg(10, 1, th, t);
        let cem = fisher_cem(&model, th, t, &cfg.v, &cfg.rho0, &DiffSpec::default()).unwrap().value;
        let fi = fisher_phase_readout(&cfg, &model, th, &DiffSpec::default(), Readout::Ideal).unwrap().value;
        assert!((fi - cem).abs() / cem < 0.05, "{fi} vs {cem}");
    }

    #[test]
    fn static_readout_carries_no_information() {
        let model = static_model(HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.5]));
        let rho = DensityMatrix::new(HermitianOperator::from_real_diagonal(&[0.2, 0.5, 0.3]).into_matrix()).unwrap();
        let cfg = PhaseSimConfig::new(4, 2, UnitaryOperator::identity(3), rho, 1.0).unwrap();
        for mode in [Readout::Ideal, Readout::Realistic] {
            let r = fisher_phase_readout(&cfg, &model, 0.5, &DiffSpec::default(), mode).unwrap();
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn tuned_realistic_readout_is_close_to_bound() {
        let (th, t) = (1.0, 1.0);
        let model = direction();
        let cfg = optimal_cfg(6, 3, th, t);
        let g = g_bound(&model, th, t, &DiffSpec::default()).unwrap().g_value;
        let tuned = tune_tau(&cfg, &model, th, &DiffSpec::default(), Readout::Realistic).unwrap();
        assert!(tuned.report.value / g >= 0.8, "{}", tuned.report.value / g);
        assert!(tuned.report.value <= g * (1.0 + 1e-6));
    }

    #[test]
    fn single_qubit_oracle_interference() {
        let model = static_model(HermitianOperator::from_real_diagonal(&[0.7, -0.3]));
        let tau = 1.3;
        for k in 0..2 {
            let cfg = PhaseSimConfig::new(1, 1, UnitaryOperator::identity(2), PureState::basis(2, k).to_density(), 0.0)
                .unwrap()
                .with_tau(tau)
                .unwrap();
            let p = circuit_oracle(&cfg, &model, 0.0).unwrap();
            // ground energy -0.3 shifts to 0, the excited one to 1.0
            let alpha = if k == 0 { tau * 1.0 } else { 0.0 };
            assert_abs_diff_eq!(p.probs()[0], (1.0 + alpha.cos()) / 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(p.probs()[1], (1.0 - alpha.cos()) / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn oracle_matches_kernel_formula() {
        let model = direction();
        let cfg = optimal_cfg(3, 1, 0.8, 0.6);
        let p = circuit_oracle(&cfg, &model, 0.8).unwrap();
        let q = ideal_distribution(&cfg, &model, 0.8).unwrap();
        assert!(p.total_variation(&q) < 1e-12);
        let shifted = cfg.clone().with_shift(EnergyShift::Fixed(0.25));
        let p = circuit_oracle(&shifted, &model, 0.8).unwrap();
        let q = ideal_distribution(&shifted, &model, 0.8).unwrap();
        assert!(p.total_variation(&q) < 1e-12);
    }

    #[test]
    fn oracle_size_guard() {
        let cfg = optimal_cfg(7, 1, 1.0, 1.0);
        assert!(matches!(circuit_oracle(&cfg, &direction(), 1.0), Err(QmetError::OracleTooLarge { .. })));
        let big = models::jaynes_cummings(1.0, 0.5, 2).unwrap();
        let cfg = PhaseSimConfig::new(2, 1, UnitaryOperator::identity(6), DensityMatrix::maximally_mixed(6), 0.0).unwrap();
        assert!(matches!(circuit_oracle(&cfg, &big, 1.0), Err(QmetError::OracleTooLarge { .. })));
    }

    #[test]
    fn pure_and_density_inputs_agree() {
        let model = direction();
        let psi = PureState::from_slice(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let a = PhaseSimConfig::new(3, 1, UnitaryOperator::identity(2), psi.to_density(), 0.4).unwrap();
        let rank_one = DensityMatrix::new(psi.amplitudes() * psi.amplitudes().adjoint()).unwrap();
        let b = PhaseSimConfig::new(3, 1, UnitaryOperator::identity(2), rank_one, 0.4).unwrap();
        let pa = circuit_oracle(&a, &model, 1.2).unwrap();
        let pb = circuit_oracle(&b, &model, 1.2).unwrap();
        assert!(pa.total_variation(&pb) < 1e-14);
    }

    #[test]
    fn controllization_diagonal_blocks_are_exact() {
        let u = expm_unitary(&HermitianOperator::new(pauli::sigma_x()).unwrap(), 0.7);
        let rho = DensityMatrix::new(HermitianOperator::from_real_diagonal(&[0.3, 0.7]).into_matrix()).unwrap();
        for x in 0..2 {
            let r = controllization_oracle(&u, x, x, &rho, 3).unwrap();
            assert!(r.max_defect < 1e-12);
        }
    }

    #[test]
    fn controllization_traceless_kills_coherence() {
        let u = UnitaryOperator::new(pauli::sigma_z()).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        let r = controllization_oracle(&u, 0, 1, &rho, 1).unwrap();
        assert!(max_norm(&r.block) < 1e-15);
    }

    #[test]
    fn controllization_qubit_factor() {
        let u = expm_unitary(&HermitianOperator::new(pauli::sigma_z()).unwrap(), 0.1);
        let rho = PureState::from_slice(&[C64::new(0.6, 0.0), C64::new(0.8, 0.0)]).unwrap().to_density();
        let r = controllization_oracle(&u, 0, 1, &rho, 4).unwrap();
        assert!(r.max_defect < 1e-10);
        let u4 = u.power(4);
        let expect = rho.matrix() * u4.matrix().adjoint() * C64::new(0.1f64.cos().powi(4), 0.0);
        let got = r.block.view((0, 2), (2, 2)).into_owned();
        assert!(max_norm(&(got - expect)) < 1e-12);
    }

    #[test]
    fn controllization_size_guard() {
        let u = UnitaryOperator::identity(7);
        let r = controllization_oracle(&u, 0, 1, &DensityMatrix::maximally_mixed(7), 1);
        assert!(matches!(r, Err(QmetError::OracleTooLarge { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn distributions_are_normalized(
            seed in any::<u64>(),
            n in 1u32..=7,
            m in 1u32..=6,
            d in 2usize..=4,
            frac in 0.05f64..0.99,
        ) {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let h = crate::random::random_hermitian(&mut rng, d);
            let model = static_model(h.clone());
            let e = ascending_energies(&eig_hermitian(&h));
            let tau = frac * TAU / (e[d - 1] - e[0]);
            let v = crate::random::haar_unitary(&mut rng, d);
            let rho = crate::random::random_full_rank_density(&mut rng, d, 0.01);
            let cfg = PhaseSimConfig::new(n, m, v, rho, 0.3).unwrap().with_tau(tau).unwrap();
            for mode in [Readout::Ideal, Readout::Realistic] {
                let p = readout_distribution(&cfg, &model, 0.0, mode).unwrap();
                let s: f64 = p.probs().iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }
}
