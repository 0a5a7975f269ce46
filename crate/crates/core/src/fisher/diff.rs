//! Central differences with Richardson extrapolation.

use crate::error::{QmetError, Result};
use crate::matcore::{ComplexMatrix, ComplexVector};

/// How a Fisher-information value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMethod {
    Analytic,
    CentralFd,
    RichardsonFd,
}

impl FisherMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FisherMethod::Analytic => "analytic",
            FisherMethod::CentralFd => "central-fd",
            FisherMethod::RichardsonFd => "richardson-fd",
        }
    }
}

/// Finite-difference settings.
///
/// The base step defaults to `1e-4 (1 + |theta|)`; `levels = 0` is a plain
/// central difference, each further level halves the step and removes the
/// next even power of `h` from the error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffSpec {
    pub step: Option<f64>,
    pub levels: usize,
}

impl Default for DiffSpec {
    fn default() -> Self {
        Self {
            step: None,
            levels: 2,
        }
    }
}

impl DiffSpec {
    pub fn central(step: Option<f64>) -> Self {
        Self { step, levels: 0 }
    }

    pub fn richardson(step: Option<f64>, levels: usize) -> Self {
        Self { step, levels }
    }

    pub fn method(&self) -> FisherMethod {
        if self.levels == 0 {
            FisherMethod::CentralFd
        } else {
            FisherMethod::RichardsonFd
        }
    }

    pub fn base_step(&self, theta: f64) -> f64 {
        self.step.unwrap_or(1e-4 * (1.0 + theta.abs()))
    }

    /// Half-widths of the central differences, largest first.
    pub fn steps(&self, theta: f64) -> Vec<f64> {
        let h = self.base_step(theta);
        let count = self.levels.max(1) + 1;
        (0..count).map(|i| h / f64::powi(2.0, i as i32)).collect()
    }

    /// Every abscissa the ladder evaluates, excluding `theta` itself.
    pub fn nodes(&self, theta: f64) -> Vec<f64> {
        self.steps(theta)
            .into_iter()
            .flat_map(|h| [theta + h, theta - h])
            .collect()
    }

    /// Fails when `theta` or an outer node leaves the open interval `domain`.
    pub fn check_domain(&self, theta: f64, domain: (f64, f64)) -> Result<()> {
        let h = self.base_step(theta);
        for node in [theta, theta - h, theta + h] {
            if !(node > domain.0 && node < domain.1) {
                return Err(QmetError::DomainBoundary {
                    node,
                    lo: domain.0,
                    hi: domain.1,
                });
            }
        }
        Ok(())
    }
}

/// Values that can be linearly combined by the extrapolation ladder.
pub trait Linear: Clone {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self;
}

impl Linear for f64 {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        a * self + b * other
    }
}

impl Linear for Vec<f64> {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self.iter().zip(other).map(|(x, y)| a * x + b * y).collect()
    }
}

impl Linear for ComplexMatrix {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self.scale(a) + other.scale(b)
    }
}

impl Linear for ComplexVector {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self.scale(a) + other.scale(b)
    }
}

/// Derivative estimate together with the best estimate of the previous
/// ladder level, whose distance to `value` serves as an error estimate.
#[derive(Debug, Clone)]
pub struct Derivative<T> {
    pub value: T,
    pub previous: T,
    pub step: f64,
}

/// Differentiates `f` at `theta` according to `spec`.
pub fn differentiate<T, F>(mut f: F, theta: f64, spec: &DiffSpec, domain: (f64, f64)) -> Result<Derivative<T>>
where
    T: Linear,
    F: FnMut(f64) -> Result<T>,
{
    spec.check_domain(theta, domain)?;
    let steps = spec.steps(theta);
    let mut table: Vec<T> = Vec::with_capacity(steps.len());
    for &h in &steps {
        let plus = f(theta + h)?;
        let minus = f(theta - h)?;
        table.push(plus.combine(0.5 / h, &minus, -0.5 / h));
    }
    if spec.levels == 0 {
        return Ok(Derivative {
            value: table[0].clone(),
            previous: table[1].clone(),
            step: steps[0],
        });
    }
    let mut previous = table[1].clone();
    for k in 1..=spec.levels {
        let w = f64::powi(4.0, k as i32);
        let next: Vec<T> = table
            .windows(2)
            .map(|p| p[1].combine(w / (w - 1.0), &p[0], -1.0 / (w - 1.0)))
            .collect();
        if k == spec.levels {
            previous = table.last().cloned().unwrap_or(previous);
        }
        table = next;
    }
    Ok(Derivative {
        value: table[0].clone(),
        previous,
        step: steps[0],
    })
}
