use super::diff::{differentiate, DiffSpec, FisherMethod};
use crate::error::{QmetError, Result};

/// Default probability below which an outcome leaves the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-10;

/// Finite probability distribution over outcomes labelled `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
    support_threshold: f64,
}

impl OutcomeDistribution {
    /// Validates normalization; tiny negative round-off is clipped to zero.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_threshold(probs, SUPPORT_THRESHOLD)
    }

    pub fn with_threshold(mut probs: Vec<f64>, support_threshold: f64) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        let bad = probs.iter().any(|p| !p.is_finite() || *p < -NORMALIZATION_TOL);
        if bad || probs.is_empty() || (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(QmetError::NonNormalized {
                theta: f64::NAN,
                sum,
            });
        }
        for p in probs.iter_mut() {
            *p = p.max(0.0);
        }
        Ok(Self {
            probs,
            support_threshold,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn support_threshold(&self) -> f64 {
        self.support_threshold
    }

    /// Indices of outcomes with probability above the support threshold.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len())
            .filter(|&i| self.probs[i] > self.support_threshold)
            .collect()
    }

    /// Total variation distance `sum |p - q| / 2`.
    pub fn total_variation(&self, other: &OutcomeDistribution) -> f64 {
        assert_eq!(self.len(), other.len(), "distributions of different size");
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// A parametrized family of outcome distributions with a fixed sample space.
pub trait ProbabilityModel: Sync {
    fn at(&self, theta: f64) -> Result<OutcomeDistribution>;
    fn outcome_count(&self) -> usize;
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// [`ProbabilityModel`] backed by a closure.
pub struct FnModel<F> {
    f: F,
    count: usize,
    domain: (f64, f64),
}

impl<F> FnModel<F>
where
    F: Fn(f64) -> Result<OutcomeDistribution> + Sync,
{
    pub fn new(count: usize, f: F) -> Self {
        Self {
            f,
            count,
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }
}

impl<F> ProbabilityModel for FnModel<F>
where
    F: Fn(f64) -> Result<OutcomeDistribution> + Sync,
{
    fn at(&self, theta: f64) -> Result<OutcomeDistribution> {
        (self.f)(theta)
    }

    fn outcome_count(&self) -> usize {
        self.count
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// A Fisher-information value and how it was computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherReport {
    pub value: f64,
    pub method: FisherMethod,
    pub step: f64,
    pub error_estimate: f64,
}

impl FisherReport {
    pub fn analytic(value: f64) -> Self {
        Self {
            value,
            method: FisherMethod::Analytic,
            step: 0.0,
            error_estimate: 0.0,
        }
    }

    pub(crate) fn from_pair(value: f64, previous: f64, spec: &DiffSpec, step: f64) -> Self {
        Self {
            value: value.max(0.0),
            method: spec.method(),
            step,
            error_estimate: (value - previous).abs(),
        }
    }
}

/// `sum_{p_i > eps} (dp_i)^2 / p_i`.
pub fn fisher_sum(p: &[f64], dp: &[f64], eps: f64) -> f64 {
    p.iter()
        .zip(dp)
        .filter(|(p, _)| **p > eps)
        .map(|(p, d)| d * d / p)
        .sum()
}

/// Classical Fisher information of a probability vector valued family,
/// differentiated numerically.
pub fn fisher_of_probabilities<F>(
    probs_of: F,
    theta: f64,
    diff: &DiffSpec,
    domain: (f64, f64),
    eps: f64,
) -> Result<FisherReport>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    diff.check_domain(theta, domain)?;
    let p = probs_of(theta)?;
    let d = differentiate(
        |x| {
            let q = probs_of(x)?;
            if q.len() != p.len() {
                return Err(QmetError::DimensionMismatch {
                    expected: p.len(),
                    found: q.len(),
                });
            }
            Ok(q)
        },
        theta,
        diff,
        domain,
    )?;
    Ok(FisherReport::from_pair(
        fisher_sum(&p, &d.value, eps),
        fisher_sum(&p, &d.previous, eps),
        diff,
        d.step,
    ))
}

/// Classical Fisher information of `model` at `theta`.
pub fn classical_fisher(
    model: &dyn ProbabilityModel,
    theta: f64,
    diff: &DiffSpec,
) -> Result<FisherReport> {
    let count = model.outcome_count();
    let probs_of = |x: f64| -> Result<OutcomeDistribution> {
        let dist = model.at(x).map_err(|e| match e {
            QmetError::NonNormalized { sum, .. } => QmetError::NonNormalized { theta: x, sum },
            other => other,
        })?;
        if dist.len() != count {
            return Err(QmetError::DimensionMismatch {
                expected: count,
                found: dist.len(),
            });
        }
        Ok(dist)
    };
    let eps = probs_of(theta)?.support_threshold();
    fisher_of_probabilities(|x| probs_of(x).map(OutcomeDistribution::into_probs), theta, diff, model.domain(), eps)
}
