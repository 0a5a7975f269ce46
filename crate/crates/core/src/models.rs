//! Parametrized Hamiltonian families and closed-form reference functions.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{QmetError, Result};
use crate::fisher::{fisher_of_probabilities, DiffSpec, FisherReport, SUPPORT_THRESHOLD};
use crate::matcore::{
    expm_unitary, pauli, tensor, ComplexMatrix, ComplexVector, HermitianOperator, PureState, C64,
};

/// `theta -> operator` map shared between threads.
pub type OperatorFn = Arc<dyn Fn(f64) -> HermitianOperator + Send + Sync>;

/// A named one-parameter family `theta -> H(theta)`.
#[derive(Clone)]
pub struct HamiltonianModel {
    name: String,
    dim: usize,
    params: BTreeMap<String, f64>,
    h: OperatorFn,
    dh: Option<OperatorFn>,
    domain: (f64, f64),
}

impl fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("domain", &self.domain)
            .field("analytic_derivative", &self.dh.is_some())
            .finish()
    }
}

impl HamiltonianModel {
    /// Builds a custom family. `domain` is an open interval; use infinities
    /// for unbounded ends.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        params: &[(&str, f64)],
        domain: (f64, f64),
        h: OperatorFn,
        dh: Option<OperatorFn>,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            h,
            dh,
            domain,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn h_of(&self, theta: f64) -> HermitianOperator {
        (self.h)(theta)
    }

    pub fn dh_of(&self, theta: f64) -> Option<HermitianOperator> {
        self.dh.as_ref().map(|f| f(theta))
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.dh.is_some()
    }

    pub fn theta_domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta > self.domain.0 && theta < self.domain.1
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(QmetError::InvalidParameter {
            name: name.into(),
            value,
            reason: "must be positive and finite".into(),
        })
    }
}

fn nonnegative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(QmetError::InvalidParameter {
            name: name.into(),
            value,
            reason: "must be non-negative and finite".into(),
        })
    }
}

fn herm(m: ComplexMatrix) -> HermitianOperator {
    HermitianOperator::hermitian_part(&m)
}

/// Qubit in a field of known strength and unknown polar angle:
/// `H = omega (cos(theta) sigma_z + sin(theta) sigma_x)`.
pub fn qubit_direction(omega: f64) -> Result<HamiltonianModel> {
    positive("omega", omega)?;
    let h: OperatorFn = Arc::new(move |th: f64| {
        herm(pauli::sigma_z().scale(omega * th.cos()) + pauli::sigma_x().scale(omega * th.sin()))
    });
    let dh: OperatorFn = Arc::new(move |th: f64| {
        herm(pauli::sigma_z().scale(-omega * th.sin()) + pauli::sigma_x().scale(omega * th.cos()))
    });
    Ok(HamiltonianModel::custom(
        "qubit_direction",
        2,
        &[("omega", omega)],
        (0.0, std::f64::consts::PI),
        h,
        Some(dh),
    ))
}

/// Qubit with a known longitudinal splitting and an unknown transverse
/// component: `H = -omega sigma_z + theta sigma_x`, eigenvalues `+-sqrt(omega^2 + theta^2)`.
pub fn qubit_xcomponent(omega: f64) -> Result<HamiltonianModel> {
    positive("omega", omega)?;
    let h: OperatorFn = Arc::new(move |th: f64| {
        herm(pauli::sigma_z().scale(-omega) + pauli::sigma_x().scale(th))
    });
    let dh: OperatorFn = Arc::new(|_| herm(pauli::sigma_x()));
    Ok(HamiltonianModel::custom(
        "qubit_xcomponent",
        2,
        &[("omega", omega)],
        (f64::NEG_INFINITY, f64::INFINITY),
        h,
        Some(dh),
    ))
}

/// Spin-1 matrices with the normalization used by the NV model
/// (`S_z = 2 diag(1, 0, -1)`, `S_x`, `S_y` carrying a `sqrt(2)` prefactor).
pub mod spin1 {
    use super::{ComplexMatrix, C64};

    fn m3(rows: [[C64; 3]; 3]) -> ComplexMatrix {
        ComplexMatrix::from_fn(3, 3, |i, j| rows[i][j])
    }

    const O: C64 = C64::new(0.0, 0.0);

    pub fn sx() -> ComplexMatrix {
        let s = C64::new(std::f64::consts::SQRT_2, 0.0);
        m3([[O, s, O], [s, O, s], [O, s, O]])
    }

    pub fn sy() -> ComplexMatrix {
        let s = C64::new(0.0, std::f64::consts::SQRT_2);
        m3([[O, -s, O], [s, O, -s], [O, s, O]])
    }

    pub fn sz() -> ComplexMatrix {
        let two = C64::new(2.0, 0.0);
        m3([[two, O, O], [O, O, O], [O, O, -two]])
    }
}

/// NV-centre ground-state triplet in a weak axial field `theta`:
/// `H = mu theta S_z + D S_z^2 + E (S_x^2 - S_y^2)`.
pub fn nv_spin1(mu: f64, d: f64, e: f64) -> Result<HamiltonianModel> {
    positive("mu", mu)?;
    nonnegative("D", d)?;
    nonnegative("E", e)?;
    let sz = spin1::sz();
    let sx = spin1::sx();
    let sy = spin1::sy();
    let fixed = &sz * &sz * C64::new(d, 0.0) + (&sx * &sx - &sy * &sy) * C64::new(e, 0.0);
    let sz_h = sz.clone();
    let h: OperatorFn = Arc::new(move |th: f64| herm(&fixed + sz_h.scale(mu * th)));
    let dh: OperatorFn = Arc::new(move |_| herm(sz.scale(mu)));
    Ok(HamiltonianModel::custom(
        "nv_spin1",
        3,
        &[("mu", mu), ("D", d), ("E", e)],
        (0.0, f64::INFINITY),
        h,
        Some(dh),
    ))
}

/// `chi = sqrt(theta^2 mu^2 + 4 E^2)`.
pub fn nv_chi(theta: f64, mu: f64, e: f64) -> f64 {
    (theta * theta * mu * mu + 4.0 * e * e).sqrt()
}

/// Truncated bosonic annihilation operator on `{|0>, ..., |n_max>}`.
pub fn annihilation(n_max: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n_max + 1, n_max + 1, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Atom-field basis index of `|atom, n>` (`atom` 0 = ground, 1 = excited).
pub fn jc_index(atom: usize, n: usize, n_max: usize) -> usize {
    atom * (n_max + 1) + n
}

fn check_cutoff(n_max: usize) -> Result<()> {
    if n_max < 2 {
        return Err(QmetError::InvalidParameter {
            name: "n_max".into(),
            value: n_max as f64,
            reason: "Fock cutoff must be at least 2".into(),
        });
    }
    Ok(())
}

/// Resonant Jaynes-Cummings family in the mode frequency `theta = omega`:
/// `H = omega (a^dagger a + 1/2) + (omega/2) s_z + kappa sqrt(omega) (a^dagger s_- + a s_+)`
/// on atom (x) field, with `s_z = |e><e| - |g><g|`.
///
/// On resonance the free part commutes with the coupling, so atom
/// populations are those generated by the coupling alone. `omega` is stored
/// as the nominal working point.
pub fn jaynes_cummings(omega: f64, kappa: f64, n_max: usize) -> Result<HamiltonianModel> {
    positive("omega", omega)?;
    nonnegative("kappa", kappa)?;
    check_cutoff(n_max)?;
    let a = annihilation(n_max);
    let ad = a.adjoint();
    let nf = n_max + 1;
    let i_f = ComplexMatrix::identity(nf, nf);
    let i_a = ComplexMatrix::identity(2, 2);
    let number = &ad * &a;
    let half = i_f.scale(0.5);
    // atom basis: 0 = g, 1 = e
    let sigma_minus = ComplexMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
    );
    let sigma_plus = sigma_minus.adjoint();
    let s_z = -pauli::sigma_z();
    let free = tensor(&i_a, &(number + half)) + tensor(&s_z, &i_f).scale(0.5);
    let coupling = tensor(&sigma_minus, &ad) + tensor(&sigma_plus, &a);
    let (free_h, coupling_h) = (free.clone(), coupling.clone());
    let h: OperatorFn = Arc::new(move |w: f64| {
        herm(free_h.scale(w) + coupling_h.scale(kappa * w.max(0.0).sqrt()))
    });
    let dh: OperatorFn = Arc::new(move |w: f64| {
        herm(&free + coupling.scale(0.5 * kappa / w.sqrt()))
    });
    Ok(HamiltonianModel::custom(
        "jaynes_cummings",
        2 * nf,
        &[("omega", omega), ("kappa", kappa), ("n_max", n_max as f64)],
        (0.0, f64::INFINITY),
        h,
        Some(dh),
    ))
}

/// Free cavity mode `H = omega (a^dagger a + 1/2)`, truncated at `n_max`.
pub fn field_mode(omega: f64, n_max: usize) -> Result<HamiltonianModel> {
    positive("omega", omega)?;
    check_cutoff(n_max)?;
    let a = annihilation(n_max);
    let n_half = a.adjoint() * &a + ComplexMatrix::identity(n_max + 1, n_max + 1).scale(0.5);
    let n2 = n_half.clone();
    let h: OperatorFn = Arc::new(move |w: f64| herm(n_half.scale(w)));
    let dh: OperatorFn = Arc::new(move |_| herm(n2.clone()));
    Ok(HamiltonianModel::custom(
        "field_mode",
        n_max + 1,
        &[("omega", omega), ("n_max", n_max as f64)],
        (0.0, f64::INFINITY),
        h,
        Some(dh),
    ))
}

/// `|g> (x) (a0 |0> + a1 |1>)` with real amplitudes and `|a1|^2 = alpha1_sq`.
pub fn jc_probe_state(alpha1_sq: f64, n_max: usize) -> Result<PureState> {
    check_cutoff(n_max)?;
    if !(0.0..=1.0).contains(&alpha1_sq) {
        return Err(QmetError::InvalidParameter {
            name: "alpha1_sq".into(),
            value: alpha1_sq,
            reason: "must lie in [0, 1]".into(),
        });
    }
    let mut v = ComplexVector::zeros(2 * (n_max + 1));
    v[jc_index(0, 0, n_max)] = C64::new((1.0 - alpha1_sq).sqrt(), 0.0);
    v[jc_index(0, 1, n_max)] = C64::new(alpha1_sq.sqrt(), 0.0);
    PureState::new(v)
}

/// `(P(g), P(e))` for the atom after `exp(-i t H(omega))` on `psi`.
pub fn jc_atom_probabilities(model: &HamiltonianModel, omega: f64, t: f64, psi: &PureState) -> Vec<f64> {
    let out = expm_unitary(&model.h_of(omega), t).apply(psi);
    let half = model.dim() / 2;
    let excited: f64 = out.amplitudes().rows(half, half).norm_squared();
    vec![(1.0 - excited).max(0.0), excited]
}

/// Fisher information on `omega` of the atom read-out, by simulation in the
/// truncated atom-field space.
pub fn jc_simulated_fc(
    kappa: f64,
    n_max: usize,
    omega: f64,
    t: f64,
    alpha1_sq: f64,
    diff: &DiffSpec,
) -> Result<FisherReport> {
    let model = jaynes_cummings(omega, kappa, n_max)?;
    let psi = jc_probe_state(alpha1_sq, n_max)?;
    fisher_of_probabilities(
        |w| Ok(jc_atom_probabilities(&model, w, t, &psi)),
        omega,
        diff,
        model.theta_domain(),
        SUPPORT_THRESHOLD,
    )
}

/// Builds a registered model from a name and a parameter lookup; missing
/// parameters fall back to their defaults.
pub fn by_name(name: &str, param: &dyn Fn(&str) -> Option<f64>) -> Result<HamiltonianModel> {
    let get = |k: &str, default: f64| param(k).unwrap_or(default);
    match name {
        "qubit_direction" => qubit_direction(get("omega", 1.0)),
        "qubit_xcomponent" => qubit_xcomponent(get("omega", 1.0)),
        "nv_spin1" => nv_spin1(
            get("mu", 1.0),
            get("D", 1.44 * std::f64::consts::PI),
            get("E", 5e-5 * std::f64::consts::PI),
        ),
        "jaynes_cummings" => jaynes_cummings(
            get("omega", 1.0),
            get("kappa", 0.5),
            get("n_max", 8.0) as usize,
        ),
        "field_mode" => field_mode(get("omega", 1.0), get("n_max", 8.0) as usize),
        other => Err(QmetError::UnknownModel(other.to_string())),
    }
}

/// Names accepted by [`by_name`].
pub const MODEL_NAMES: &[&str] = &[
    "qubit_direction",
    "qubit_xcomponent",
    "nv_spin1",
    "jaynes_cummings",
    "field_mode",
];

/// A closed-form scalar function of named real arguments.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormReference {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub formula: &'static str,
    f: fn(&[f64]) -> f64,
}

impl ClosedFormReference {
    /// Evaluates with arguments given by name, in any order.
    pub fn eval(&self, args: &[(&str, f64)]) -> Result<f64> {
        let mut vals = Vec::with_capacity(self.args.len());
        for want in self.args {
            let v = args
                .iter()
                .find(|(k, _)| k == want)
                .map(|(_, v)| *v)
                .ok_or_else(|| QmetError::InvalidParameter {
                    name: (*want).to_string(),
                    value: f64::NAN,
                    reason: format!("missing argument of `{}`", self.name),
                })?;
            vals.push(v);
        }
        Ok((self.f)(&vals))
    }

    /// Evaluates with positional arguments in the order of [`Self::args`].
    pub fn call(&self, vals: &[f64]) -> f64 {
        assert_eq!(vals.len(), self.args.len(), "wrong arity for {}", self.name);
        (self.f)(vals)
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

fn xcomp_bracket(theta: f64, omega: f64, t: f64) -> f64 {
    let om2 = omega * omega + theta * theta;
    2.0 * om2 * t * t * theta * theta - omega * omega * (2.0 * om2.sqrt() * t).cos() + omega * omega
}

fn nv_bracket(theta: f64, mu: f64, e: f64, t: f64) -> f64 {
    let chi = nv_chi(theta, mu, e);
    2.0 * sq(theta * mu * t * chi) + e * e - e * e * (4.0 * chi * t).cos()
}

const REFERENCES: &[ClosedFormReference] = &[
    ClosedFormReference {
        name: "qubit_direction_qfi",
        args: &["theta", "omega", "t"],
        formula: "4 sin^2(omega t) - sin^2(2 omega t) sin^2(theta)",
        f: |a| 4.0 * sq((a[1] * a[2]).sin()) - sq((2.0 * a[1] * a[2]).sin()) * sq(a[0].sin()),
    },
    ClosedFormReference {
        name: "qubit_direction_max_qfi",
        args: &["omega", "t"],
        formula: "4 sin^2(omega t)",
        f: |a| 4.0 * sq((a[0] * a[1]).sin()),
    },
    ClosedFormReference {
        name: "qubit_direction_g",
        args: &["omega", "t"],
        formula: "(2 |sin(omega t)| + 1)^2",
        f: |a| sq(2.0 * (a[0] * a[1]).sin().abs() + 1.0),
    },
    ClosedFormReference {
        name: "qubit_xcomponent_max_qfi",
        args: &["theta", "omega", "t"],
        formula: "2/W^4 [2 W^2 t^2 theta^2 - omega^2 cos(2 W t) + omega^2], W^2 = omega^2 + theta^2",
        f: |a| 2.0 * xcomp_bracket(a[0], a[1], a[2]) / sq(a[1] * a[1] + a[0] * a[0]),
    },
    ClosedFormReference {
        name: "qubit_xcomponent_g",
        args: &["theta", "omega", "t"],
        formula: "(omega/W^2 + sqrt(2 [2 W^2 t^2 theta^2 - omega^2 cos(2 W t) + omega^2])/W^2)^2",
        f: |a| {
            let w2 = a[1] * a[1] + a[0] * a[0];
            sq(a[1] / w2 + (2.0 * xcomp_bracket(a[0], a[1], a[2])).sqrt() / w2)
        },
    },
    ClosedFormReference {
        name: "nv_max_qfi",
        args: &["theta", "mu", "E", "t"],
        formula: "8 mu^2 [2 theta^2 mu^2 t^2 chi^2 + E^2 - E^2 cos(4 chi t)] / chi^4",
        f: |a| 8.0 * a[1] * a[1] * nv_bracket(a[0], a[1], a[2], a[3]) / sq(sq(nv_chi(a[0], a[1], a[2]))),
    },
    ClosedFormReference {
        name: "nv_g",
        args: &["theta", "mu", "E", "t"],
        formula: "(2 E mu/chi^2 + 2 sqrt(2) mu sqrt(2 theta^2 mu^2 t^2 chi^2 + E^2 - E^2 cos(4 chi t))/chi^2)^2",
        f: |a| {
            let chi2 = sq(nv_chi(a[0], a[1], a[2]));
            sq(2.0 * a[2] * a[1] / chi2
                + 2.0 * std::f64::consts::SQRT_2 * a[1] * nv_bracket(a[0], a[1], a[2], a[3]).sqrt() / chi2)
        },
    },
    ClosedFormReference {
        name: "jc_field_qfi",
        args: &["t", "alpha0_sq"],
        formula: "4 t^2 |a0|^2 |a1|^2",
        f: |a| 4.0 * a[0] * a[0] * a[1] * (1.0 - a[1]),
    },
    ClosedFormReference {
        name: "jc_fc",
        args: &["omega", "kappa", "t", "alpha1_sq"],
        formula: "(W t/omega)^2 |a1|^2 cos^2(W t) / (1 - |a1|^2 sin^2(W t)), W = kappa sqrt(omega)",
        f: |a| {
            let big = a[1] * a[0].sqrt();
            let x = big * a[2];
            sq(x / a[0]) * a[3] * sq(x.cos()) / (1.0 - a[3] * sq(x.sin()))
        },
    },
    ClosedFormReference {
        name: "jc_gamma_threshold",
        args: &["omega", "kappa", "t"],
        formula: "(sqrt(1 + W^2/omega^2 tan^2(W t)) - 1) / (2 tan^2(W t)); gamma > 1 iff |a0|^2 is below it",
        f: |a| {
            let big = a[1] * a[0].sqrt();
            let tan2 = sq((big * a[2]).tan());
            ((1.0 + sq(big / a[0]) * tan2).sqrt() - 1.0) / (2.0 * tan2)
        },
    },
    ClosedFormReference {
        name: "oscillator_qfi",
        args: &["mass", "omega", "t"],
        formula: "(8 m/omega^3) sin^2(omega t/2)",
        f: |a| 8.0 * a[0] / a[1].powi(3) * sq((0.5 * a[1] * a[2]).sin()),
    },
    ClosedFormReference {
        name: "oscillator_fc",
        args: &["mass", "omega"],
        formula: "2 m/omega^3",
        f: |a| 2.0 * a[0] / a[1].powi(3),
    },
    ClosedFormReference {
        name: "oscillator_gamma",
        args: &["omega", "t"],
        formula: "1 / (4 sin^2(omega t/2))",
        f: |a| 1.0 / (4.0 * sq((0.5 * a[0] * a[1]).sin())),
    },
];

/// Looks up a closed-form reference by name.
pub fn reference(name: &str) -> Result<ClosedFormReference> {
    REFERENCES
        .iter()
        .find(|r| r.name == name)
        .copied()
        .ok_or_else(|| QmetError::UnknownReference(name.to_string()))
}

/// All registered references.
pub fn references() -> &'static [ClosedFormReference] {
    REFERENCES
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{eig_hermitian, expm_unitary, max_norm};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn direction_model_values() {
        let m = qubit_direction(1.0).unwrap();
        assert!(max_norm(&(m.h_of(0.0).into_matrix() - pauli::sigma_z())) < 1e-15);
        assert!(max_norm(&(m.h_of(FRAC_PI_2).into_matrix() - pauli::sigma_x())) < 1e-15);
        let m2 = qubit_direction(2.0).unwrap();
        let h = m2.h_of(FRAC_PI_4);
        let want = (pauli::sigma_z() + pauli::sigma_x()).scale(2f64.sqrt());
        assert!(max_norm(&(h.matrix() - want)) < 1e-14);
        let e = eig_hermitian(&h);
        assert_abs_diff_eq!(e.eigenvalues()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvalues()[1], -2.0, epsilon = 1e-12);
        assert!(qubit_direction(0.0).is_err());
    }

    #[test]
    fn direction_eigenvectors_have_half_angle_moduli() {
        // ground state ~ (-sin(theta/2), cos(theta/2)), excited ~ (cos, sin)
        let th = PI / 3.0;
        let e = eig_hermitian(&qubit_direction(1.0).unwrap().h_of(th));
        assert_abs_diff_eq!(e.eigenvalues()[0], 1.0, epsilon = 1e-12);
        let ground = e.eigenvector(1);
        let excited = e.eigenvector(0);
        let (s, co) = ((th / 2.0).sin(), (th / 2.0).cos());
        assert_abs_diff_eq!(ground.amplitudes()[0].re, -s, epsilon = 1e-12);
        assert_abs_diff_eq!(ground.amplitudes()[1].re, co, epsilon = 1e-12);
        assert_abs_diff_eq!(excited.amplitudes()[0].re, co, epsilon = 1e-12);
        assert_abs_diff_eq!(excited.amplitudes()[1].re, s, epsilon = 1e-12);
    }

    #[test]
    fn xcomponent_model_values() {
        let m = qubit_xcomponent(1.0).unwrap();
        assert!(max_norm(&(m.h_of(0.0).into_matrix() + pauli::sigma_z())) < 1e-15);
        let e = eig_hermitian(&m.h_of(1.0));
        assert_abs_diff_eq!(e.eigenvalues()[0], 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvalues()[1], -(2f64.sqrt()), epsilon = 1e-12);
        assert_eq!(m.dh_of(3.7).unwrap().into_matrix(), pauli::sigma_x());
    }

    #[test]
    fn xcomponent_propagator_closed_form() {
        let (w, th, t) = (1.0f64, 0.7f64, 1.3f64);
        let big = (w * w + th * th).sqrt();
        let u = expm_unitary(&qubit_xcomponent(w).unwrap().h_of(th), t);
        let a = C64::new((big * t).cos(), w * (big * t).sin() / big);
        let b = C64::new(0.0, -th * (big * t).sin() / big);
        let want = ComplexMatrix::from_row_slice(2, 2, &[a, b, b, a.conj()]);
        assert!(max_norm(&(u.matrix() - want)) < 1e-9);
    }

    #[test]
    fn nv_matrices() {
        let m = nv_spin1(1.0, 0.7, 0.0).unwrap();
        let h0 = m.h_of(0.0);
        let want = HermitianOperator::from_real_diagonal(&[2.8, 0.0, 2.8]);
        assert!(max_norm(&(h0.matrix() - want.matrix())) < 1e-14);

        let sx = spin1::sx();
        let sy = spin1::sy();
        let diff = &sx * &sx - &sy * &sy;
        let mut want = ComplexMatrix::zeros(3, 3);
        want[(0, 2)] = c(4.0);
        want[(2, 0)] = c(4.0);
        assert!(max_norm(&(diff - want)) < 1e-14);
        assert_abs_diff_eq!(nv_chi(3.0, 1.0, 2.0), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn nv_spectrum_is_zero_and_split_pair() {
        let (mu, d, e, th) = (1.0, 2.0, 0.3, 0.8);
        let eig = eig_hermitian(&nv_spin1(mu, d, e).unwrap().h_of(th));
        let chi = nv_chi(th, mu, e);
        let ev = eig.eigenvalues();
        assert_abs_diff_eq!(ev[0], 4.0 * d + 2.0 * chi, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 4.0 * d - 2.0 * chi, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn jaynes_cummings_matrix_elements() {
        let (w, k, n) = (1.7, 0.4, 4);
        let m = jaynes_cummings(w, k, n).unwrap();
        assert_eq!(m.dim(), 10);
        let big = k * w.sqrt();
        let h = m.h_of(w);
        let e0 = jc_index(1, 0, n);
        let g1 = jc_index(0, 1, n);
        assert_abs_diff_eq!(h.matrix()[(e0, g1)].re, big, epsilon = 1e-14);
        assert_abs_diff_eq!(h.matrix()[(g1, e0)].re, big, epsilon = 1e-14);
        // |g,0> is only coupled to itself
        let g0 = jc_index(0, 0, n);
        for j in 0..m.dim() {
            if j != g0 {
                assert_eq!(h.matrix()[(g0, j)].norm(), 0.0);
            }
        }
        // sqrt(n+1) growth along the ladder
        assert_abs_diff_eq!(
            h.matrix()[(jc_index(1, 2, n), jc_index(0, 3, n))].re,
            big * 3f64.sqrt(),
            epsilon = 1e-14
        );
        let free = jaynes_cummings(w, 0.0, n).unwrap().h_of(w);
        let off = free.matrix().view((0, n + 1), (n + 1, n + 1)).into_owned();
        assert_eq!(max_norm(&off), 0.0);
        assert!(jaynes_cummings(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn analytic_derivatives_match_five_point_stencil() {
        let models = [
            qubit_direction(1.3).unwrap(),
            qubit_xcomponent(0.8).unwrap(),
            nv_spin1(1.0, 1.1, 0.2).unwrap(),
            jaynes_cummings(1.0, 0.7, 3).unwrap(),
            field_mode(1.0, 3).unwrap(),
        ];
        let thetas = [0.3, 0.9, 1.7, 2.6];
        for m in &models {
            for &th in &thetas {
                let h = 1e-3;
                let f = |x: f64| m.h_of(x).into_matrix();
                let fd = (f(th - 2.0 * h) - f(th + 2.0 * h) + (f(th + h) - f(th - h)).scale(8.0))
                    .unscale(12.0 * h);
                let an = m.dh_of(th).unwrap().into_matrix();
                let rel = max_norm(&(fd - &an)) / max_norm(&an).max(1e-300);
                assert!(rel <= 1e-7, "{} at {th}: {rel:e}", m.name());
            }
        }
    }

    #[test]
    fn jc_simulation_matches_closed_form() {
        let fc = reference("jc_fc").unwrap();
        for &(w, k, t, b) in &[(1.0, 0.5, 1.3, 0.4), (2.0, 1.5, 0.7, 0.9), (0.6, 0.5, 3.0, 0.2)] {
            let sim = jc_simulated_fc(k, 4, w, t, b, &DiffSpec::default()).unwrap().value;
            assert_abs_diff_eq!(sim, fc.call(&[w, k, t, b]), epsilon = 1e-8);
        }
        let excited = jc_simulated_fc(0.5, 3, 1.2, 0.8, 1.0, &DiffSpec::default()).unwrap().value;
        let omega_t = 0.5 * 1.2f64.sqrt() * 0.8;
        assert_abs_diff_eq!(excited, (omega_t / 1.2).powi(2), epsilon = 1e-9);
        assert!(jc_probe_state(1.5, 3).is_err());
    }

    #[test]
    fn registry() {
        let qfi = reference("qubit_direction_qfi").unwrap();
        let v = qfi
            .eval(&[("theta", FRAC_PI_2), ("omega", 1.0), ("t", FRAC_PI_4)])
            .unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        let g = reference("qubit_direction_g").unwrap();
        assert_abs_diff_eq!(g.call(&[1.0, FRAC_PI_2]), 9.0, epsilon = 1e-14);
        assert!(matches!(reference("nope"), Err(QmetError::UnknownReference(_))));
        assert!(qfi.eval(&[("theta", 1.0)]).is_err());
        assert!(matches!(
            by_name("nope", &|_| None),
            Err(QmetError::UnknownModel(_))
        ));
        for name in MODEL_NAMES {
            by_name(name, &|_| None).unwrap();
        }
    }

    #[test]
    fn oscillator_ratio_region() {
        let gamma = reference("oscillator_gamma").unwrap();
        let fq = reference("oscillator_qfi").unwrap();
        let fc = reference("oscillator_fc").unwrap();
        for k in 1..50 {
            let t = 0.13 * k as f64;
            let r = fc.call(&[2.0, 1.3]) / fq.call(&[2.0, 1.3, t]);
            assert_abs_diff_eq!(r, gamma.call(&[1.3, t]), epsilon = 1e-9 * r);
            assert_eq!(r > 1.0, (0.5 * 1.3 * t).sin().abs() < 0.5);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn xcomponent_spectrum(w in 0.05f64..5.0, th in -5.0f64..5.0) {
                let e = eig_hermitian(&qubit_xcomponent(w).unwrap().h_of(th));
                let big = (w * w + th * th).sqrt();
                prop_assert!((e.eigenvalues()[0] - big).abs() <= 1e-10);
                prop_assert!((e.eigenvalues()[1] + big).abs() <= 1e-10);
            }

            #[test]
            fn models_are_hermitian(th in 0.01f64..3.1) {
                for m in MODEL_NAMES {
                    let model = by_name(m, &|_| None).unwrap();
                    let h = model.h_of(th).into_matrix();
                    prop_assert!(HermitianOperator::new(h).is_ok());
                }
            }
        }
    }
}
