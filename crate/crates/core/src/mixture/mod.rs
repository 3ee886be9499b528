//! Mixtures of von Mises distributions: EM fitting, BIC model selection and
//! maximum-posterior cluster assignment.

mod assign;
mod em;
mod select;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circstats::{bessel_i0_scaled, VonMisesSampler};
use crate::circstats::{wrap_angle, CircularSample, StatsError, VonMisesCdf, TAU};

pub use assign::{assign, Arc, ClusterAssignment, HourRange};
pub use em::{em_fit, em_fit_traced, EmOptions};
pub use select::{bic, select_components, BicEntry, ModelSelection, ModelSelectionRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("{m} components need at least {needed} points, sample has {got}")]
    TooSmall { m: usize, needed: usize, got: usize },
    #[error("component count must be at least 1")]
    NoComponents,
    #[error("all {attempts} EM initializations collapsed a component")]
    AllRestartsDegenerate { attempts: usize },
    #[error("invalid mixture: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One weighted von Mises component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesComponent {
    pub weight: f64,
    pub mu: f64,
    pub kappa: f64,
}

impl VonMisesComponent {
    pub fn new(weight: f64, mu: f64, kappa: f64) -> Result<Self, FitError> {
        if !(weight > 0.0 && weight <= 1.0 + 1e-12) {
            return Err(FitError::InvalidModel(format!("weight {weight} outside (0, 1]")));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(FitError::InvalidModel(format!("concentration {kappa} must be >= 0")));
        }
        if !mu.is_finite() {
            return Err(FitError::InvalidModel(format!("mean {mu} is not finite")));
        }
        Ok(Self { weight: weight.min(1.0), mu: wrap_angle(mu), kappa })
    }

    /// `ln(2 pi I_0(kappa)) - kappa`; see [`Self::log_density_with`].
    pub(crate) fn log_norm(&self) -> f64 {
        (TAU * bessel_i0_scaled(self.kappa).unwrap_or(f64::NAN)).ln()
    }

    #[inline]
    pub(crate) fn log_density_with(&self, theta: f64, log_norm: f64) -> f64 {
        self.kappa * ((theta - self.mu).cos() - 1.0) - log_norm
    }

    /// Unweighted component density.
    pub fn pdf(&self, theta: f64) -> f64 {
        self.log_density_with(theta, self.log_norm()).exp()
    }

    pub fn cdf(&self) -> VonMisesCdf {
        VonMisesCdf::new(self.mu, self.kappa).expect("validated component")
    }

    pub fn mean_hours(&self) -> f64 {
        self.mu * 24.0 / TAU
    }
}

/// A fitted (or hand-built) mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VonMisesMixture {
    pub components: Vec<VonMisesComponent>,
    /// Log-likelihood of the sample the mixture was fitted to.
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl VonMisesMixture {
    /// Wraps hand-specified components; weights must sum to 1 within 1e-9.
    pub fn from_components(components: Vec<VonMisesComponent>) -> Result<Self, FitError> {
        if components.is_empty() {
            return Err(FitError::NoComponents);
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(FitError::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components, log_likelihood: f64::NAN, converged: true, iterations: 0 })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Per-component `ln(alpha_j) - ln(2 pi I_0(kappa_j)) + kappa_j`, reused by
    /// every density evaluation.
    pub(crate) fn log_offsets(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight.ln() - c.log_norm()).collect()
    }

    /// Weighted log-densities `ln(alpha_j pdf_j(theta))` into `out`.
    pub(crate) fn weighted_log_densities(&self, offsets: &[f64], theta: f64, out: &mut [f64]) {
        for ((c, &off), o) in self.components.iter().zip(offsets).zip(out.iter_mut()) {
            *o = c.kappa * ((theta - c.mu).cos() - 1.0) + off;
        }
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.pdf(theta)).sum()
    }

    /// Mixture CDF anchored at 0.
    pub fn cdf(&self, theta: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.cdf().eval(theta)).sum::<f64>().clamp(0.0, 1.0)
    }

    /// `sum_i ln pdf(theta_i)`, evaluated with log-sum-exp.
    pub fn log_likelihood_of(&self, sample: &CircularSample) -> f64 {
        let offsets = self.log_offsets();
        let mut buf = vec![0.0; self.components.len()];
        sample
            .angles()
            .iter()
            .map(|&theta| {
                self.weighted_log_densities(&offsets, theta, &mut buf);
                log_sum_exp(&buf)
            })
            .sum()
    }

    /// Draws `n` points; component identities are returned alongside.
    pub fn sample<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(usize, f64)> {
        let samplers: Vec<VonMisesSampler> = self
            .components
            .iter()
            .map(|c| VonMisesSampler::new(c.mu, c.kappa).expect("validated component"))
            .collect();
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = self.components.len() - 1;
                for (j, c) in self.components.iter().enumerate() {
                    acc += c.weight;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                (pick, samplers[pick].sample(rng))
            })
            .collect()
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
