//! Subcommand implementations. Grid points are evaluated in parallel and
//! emitted in grid order.

use std::time::Instant;

use qmet_core::cem::{dynamical_generator, g_bound, optimize_cem, Budget};
use qmet_core::fisher::{qfi, DensityFamily};
use qmet_core::matcore::{spectral_gap, PureState};
use qmet_core::models::{self, HamiltonianModel};
use qmet_core::phasesim::{fisher_phase_readout, tune_tau, PhaseSimConfig, Readout};
use qmet_core::{selftest, QmetError};
use rayon::prelude::*;

use crate::config::{RunConfig, TauChoice};
use crate::error::CliError;
use crate::output::{Cell, Table};

type Row = Vec<Cell>;

fn model_of(cfg: &RunConfig) -> Result<HamiltonianModel, CliError> {
    models::by_name(&cfg.model, &|k| cfg.param(k)).map_err(|e| CliError::at("model construction", e))
}

fn plane(cfg: &RunConfig) -> Result<Vec<(f64, f64)>, CliError> {
    let thetas = cfg.theta_grid()?;
    let ts = cfg.t_grid()?;
    Ok(thetas
        .iter()
        .flat_map(|&th| ts.iter().map(move |&t| (th, t)))
        .collect())
}

fn sweep<T, F>(items: &[T], label: impl Fn(&T) -> String + Sync, f: F) -> Result<Vec<Row>, CliError>
where
    T: Sync,
    F: Fn(&T) -> Result<Row, QmetError> + Sync,
{
    let results: Vec<Result<Row, QmetError>> = items.par_iter().map(&f).collect();
    results
        .into_iter()
        .zip(items)
        .map(|(r, item)| r.map_err(|e| CliError::at(label(item), e)))
        .collect()
}

fn point_label(p: &(f64, f64)) -> String {
    format!("theta = {}, t = {}", p.0, p.1)
}

fn f(x: f64) -> Cell {
    Cell::F(x)
}

fn optional(x: Option<f64>) -> Cell {
    Cell::F(x.unwrap_or(f64::NAN))
}

fn reference(name: &str, args: &[f64]) -> f64 {
    models::reference(name).expect("registered reference").call(args)
}

/// Closed-form QFI of the `prep = 0` preparation, when one is known.
fn qfi_reference(model: &HamiltonianModel, prep: usize, th: f64, t: f64) -> Option<f64> {
    match (model.name(), prep) {
        ("qubit_direction", 0) => Some(reference("qubit_direction_qfi", &[th, model.param("omega")?, t])),
        _ => None,
    }
}

fn max_qfi_reference(model: &HamiltonianModel, th: f64, t: f64) -> Option<f64> {
    let p = |k: &str| model.param(k);
    match model.name() {
        "qubit_direction" => Some(reference("qubit_direction_max_qfi", &[p("omega")?, t])),
        "qubit_xcomponent" => Some(reference("qubit_xcomponent_max_qfi", &[th, p("omega")?, t])),
        "nv_spin1" => Some(reference("nv_max_qfi", &[th, p("mu")?, p("E")?, t])),
        _ => None,
    }
}

fn g_reference(model: &HamiltonianModel, th: f64, t: f64) -> Option<f64> {
    let p = |k: &str| model.param(k);
    match model.name() {
        "qubit_direction" => Some(reference("qubit_direction_g", &[p("omega")?, t])),
        "qubit_xcomponent" => Some(reference("qubit_xcomponent_g", &[th, p("omega")?, t])),
        "nv_spin1" => Some(reference("nv_g", &[th, p("mu")?, p("E")?, t])),
        _ => None,
    }
}

fn abs_err(value: f64, reference: Option<f64>) -> Cell {
    optional(reference.map(|r| (value - r).abs()))
}

pub fn cmd_qfi(cfg: &RunConfig) -> Result<Table, CliError> {
    let model = model_of(cfg)?;
    if cfg.prep >= model.dim() {
        return Err(CliError::Config(format!(
            "prep = {} is not a basis index of the {}-dimensional model",
            cfg.prep,
            model.dim()
        )));
    }
    let diff = cfg.diff.spec();
    let rho0 = PureState::basis(model.dim(), cfg.prep).to_density();
    let points = plane(cfg)?;
    let rows = sweep(&points, point_label, |&(th, t)| {
        let family = DensityFamily::unitary_evolution(&model, t, rho0.clone());
        let value = qfi(&family, th, &diff)?.value;
        let max = spectral_gap(&dynamical_generator(&model, th, t, &diff)?).powi(2);
        let r = qfi_reference(&model, cfg.prep, th, t);
        let mr = max_qfi_reference(&model, th, t);
        Ok(vec![f(th), f(t), f(value), optional(r), abs_err(value, r), f(max), optional(mr), abs_err(max, mr)])
    })?;
    let mut table = Table::new(&[
        "theta",
        "t",
        "qfi",
        "qfi_ref",
        "qfi_abs_err",
        "max_qfi",
        "max_qfi_ref",
        "max_qfi_abs_err",
    ]);
    table.rows = rows;
    Ok(table)
}

pub fn cmd_gbound(cfg: &RunConfig) -> Result<Table, CliError> {
    let model = model_of(cfg)?;
    let diff = cfg.diff.spec();
    let points = plane(cfg)?;
    let rows = sweep(&points, point_label, |&(th, t)| {
        let sol = g_bound(&model, th, t, &diff)?;
        let gens = &sol.generators;
        let max_qfi = gens.sigma_dyn * gens.sigma_dyn;
        let r = g_reference(&model, th, t);
        Ok(vec![
            f(th),
            f(t),
            f(sol.g_value),
            Cell::B(sol.condition_holds),
            f(max_qfi),
            f(max_qfi / sol.g_value),
            f(gens.sigma_dyn),
            f(gens.sigma_diag),
            optional(r),
            abs_err(sol.g_value, r),
        ])
    })?;
    let mut table = Table::new(&[
        "theta",
        "t",
        "g",
        "condition_holds",
        "max_qfi",
        "gamma",
        "sigma_dyn",
        "sigma_diag",
        "g_ref",
        "g_abs_err",
    ]);
    table.rows = rows;
    Ok(table)
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<Table, CliError> {
    let model = model_of(cfg)?;
    let diff = cfg.diff.spec();
    let budget = Budget {
        restarts: cfg.restarts,
        iterations: cfg.iterations,
    };
    let points = plane(cfg)?;
    let start = Instant::now();
    let rows = sweep(&points, point_label, |&(th, t)| {
        let g = g_bound(&model, th, t, &diff)?.g_value;
        let res = optimize_cem(&model, th, t, budget, cfg.seed, &diff)?;
        Ok(vec![
            f(th),
            f(t),
            f(res.best_fi),
            f(g),
            f((res.best_fi - g).abs() / g),
            Cell::U(res.best_restart as u64),
            Cell::U(res.restarts as u64),
            Cell::U(res.evaluations as u64),
        ])
    })?;
    let mut table = Table::new(&[
        "theta",
        "t",
        "best_fi",
        "g",
        "rel_gap",
        "best_restart",
        "restarts",
        "evaluations",
    ]);
    table.rows = rows;
    table
        .extra
        .insert("wall_time_s".into(), start.elapsed().as_secs_f64().into());
    Ok(table)
}

pub fn cmd_phase_sim(cfg: &RunConfig) -> Result<Table, CliError> {
    let model = model_of(cfg)?;
    let diff = cfg.diff.spec();
    let mut jobs = Vec::new();
    for (th, t) in plane(cfg)? {
        for &n in &cfg.n {
            for &m in &cfg.m {
                jobs.push((th, t, n, m));
            }
        }
    }
    let rows = sweep(
        &jobs,
        |&(th, t, n, m)| format!("theta = {th}, t = {t}, n = {n}, m = {m}"),
        |&(th, t, n, m)| {
            let sol = g_bound(&model, th, t, &diff)?;
            let base = PhaseSimConfig::new(n, m, sol.v_opt.clone(), sol.psi_opt.to_density(), t)?;
            let cfg_tau = match cfg.tau {
                TauChoice::Fixed(v) => base.with_tau(v)?,
                TauChoice::Default => {
                    let tau = base.resolve_tau(&model, th)?;
                    base.with_tau(tau)?
                }
                TauChoice::Tune => {
                    let tuned = tune_tau(&base, &model, th, &diff, Readout::Realistic)?;
                    base.with_tau(tuned.tau)?
                }
            };
            let tau = cfg_tau.tau.expect("tau resolved above");
            let ideal = fisher_phase_readout(&cfg_tau, &model, th, &diff, Readout::Ideal)?.value;
            let real = fisher_phase_readout(&cfg_tau, &model, th, &diff, Readout::Realistic)?.value;
            Ok(vec![
                f(th),
                f(t),
                Cell::U(n as u64),
                Cell::U(m as u64),
                f(tau),
                f(ideal),
                f(real),
                f(sol.g_value),
                f(real / sol.g_value),
            ])
        },
    )?;
    let mut table = Table::new(&["theta", "t", "n", "m", "tau", "fi_ideal", "fi_realistic", "g", "ratio"]);
    table.rows = rows;
    Ok(table)
}

/// Probe frequency `omega` runs over the theta grid.
pub fn cmd_jc(cfg: &RunConfig) -> Result<Table, CliError> {
    let kappa = cfg.param("kappa").unwrap_or(0.5);
    let b0 = cfg.param("alpha0_sq").unwrap_or(0.1);
    let n_max = cfg.param("n_max").unwrap_or(4.0);
    if !(0.0..=1.0).contains(&b0) {
        return Err(CliError::Config(format!("alpha0_sq = {b0} must lie in [0, 1]")));
    }
    if n_max.fract() != 0.0 || n_max < 2.0 {
        return Err(CliError::Config(format!("n_max = {n_max} must be an integer >= 2")));
    }
    if cfg.theta_grid()?.iter().any(|&w| w <= 0.0) {
        return Err(CliError::Config("omega grid (--theta) must be positive".into()));
    }
    let diff = cfg.diff.spec();
    let points = plane(cfg)?;
    let rows = sweep(
        &points,
        |p| format!("omega = {}, t = {}", p.0, p.1),
        |&(w, t)| {
            let fq = reference("jc_field_qfi", &[t, b0]);
            let fc = models::jc_simulated_fc(kappa, n_max as usize, w, t, 1.0 - b0, &diff)?.value;
            let fc_ref = reference("jc_fc", &[w, kappa, t, 1.0 - b0]);
            let gamma = if fq > 0.0 { fc / fq } else { f64::INFINITY };
            let threshold = reference("jc_gamma_threshold", &[w, kappa, t]);
            Ok(vec![
                f(w),
                f(t),
                f(fq),
                f(fc),
                f(fc_ref),
                f(gamma),
                Cell::B(gamma > 1.0),
                Cell::B(fq == 0.0 && fc > 0.0),
                f(threshold),
                Cell::B(b0 < threshold),
            ])
        },
    )?;
    let mut table = Table::new(&[
        "omega",
        "t",
        "fq",
        "fc",
        "fc_ref",
        "gamma",
        "gamma_gt_1",
        "diverges",
        "alpha0_sq_threshold",
        "predicted_gt_1",
    ]);
    table.rows = rows;
    Ok(table)
}

pub fn cmd_oscillator(cfg: &RunConfig) -> Result<Table, CliError> {
    let mass = cfg.param("mass").unwrap_or(1.0);
    let omega = cfg.param("omega").unwrap_or(1.0);
    if !(mass > 0.0 && omega > 0.0) {
        return Err(CliError::Config("mass and omega must be positive".into()));
    }
    let ts = cfg.t_grid()?;
    let rows = ts
        .iter()
        .map(|&t| {
            let fq = reference("oscillator_qfi", &[mass, omega, t]);
            let fc = reference("oscillator_fc", &[mass, omega]);
            let gamma = fc / fq;
            vec![
                f(t),
                f(fq),
                f(fc),
                f(gamma),
                Cell::B(gamma > 1.0),
                Cell::B((omega * t / 2.0).sin().abs() < 0.5),
            ]
        })
        .collect();
    let mut table = Table::new(&["t", "fq", "fc", "gamma", "gamma_gt_1", "predicted_gt_1"]);
    table.rows = rows;
    Ok(table)
}

/// Returns the table and, when a suite fails, the failure to report after
/// the table is written.
pub fn cmd_selftest(cfg: &RunConfig) -> Result<(Table, Option<CliError>), CliError> {
    let reports = selftest::run_all(cfg.seed).map_err(|e| CliError::at("selftest", e))?;
    let mut table = Table::new(&["suite", "cases", "worst_excess", "passed"]);
    let mut failed = Vec::new();
    for r in &reports {
        table.rows.push(vec![
            Cell::S(r.name.to_string()),
            Cell::U(r.cases as u64),
            f(r.worst),
            Cell::B(r.passed),
        ]);
        if !r.passed {
            failed.push(r.name);
        }
    }
    let failure = (!failed.is_empty()).then(|| CliError::Check(format!("suites failed: {}", failed.join(", "))));
    Ok((table, failure))
}
