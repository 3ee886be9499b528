//! Rao's spacing test of circular uniformity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_alpha, CircularSample, StatsError, TestMethod, TestResult, TAU};

const MIN_N: usize = 4;

/// `U = 1/2 sum_i |T_i - 2pi/n|` over the n circular spacings, in radians.
/// Expects sorted angles.
pub fn rao_spacing_statistic(angles: &[f64]) -> f64 {
    let n = angles.len();
    if n == 0 {
        return 0.0;
    }
    let lambda = TAU / n as f64;
    let mut total = 0.0;
    for w in angles.windows(2) {
        total += (w[1] - w[0] - lambda).abs();
    }
    total += (TAU - angles[n - 1] + angles[0] - lambda).abs();
    0.5 * total
}

/// [`rao_spacing_statistic`] on the degree scale used by published tables.
pub fn rao_spacing_degrees(angles: &[f64]) -> f64 {
    rao_spacing_statistic(angles).to_degrees()
}

/// Monte Carlo reference distribution of `U` under circular uniformity.
#[derive(Debug, Clone)]
pub struct RaoNull {
    n: usize,
    stats: Vec<f64>,
}

impl RaoNull {
    pub fn simulate(n: usize, samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = vec![0.0; n];
        let stats = (0..samples)
            .map(|_| {
                for x in buf.iter_mut() {
                    *x = rng.random::<f64>() * TAU;
                }
                buf.sort_by(f64::total_cmp);
                rao_spacing_statistic(&buf)
            })
            .collect();
        Self { n, stats }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fraction of reference statistics at least as large as `observed`.
    pub fn p_value(&self, observed: f64) -> f64 {
        if self.stats.is_empty() {
            return 1.0;
        }
        let exceed = self.stats.iter().filter(|&&s| s >= observed).count();
        exceed as f64 / self.stats.len() as f64
    }

    /// Empirical upper `alpha` quantile of the reference statistics.
    pub fn critical_value(&self, alpha: f64) -> Option<f64> {
        if self.stats.is_empty() {
            return None;
        }
        let mut sorted = self.stats.clone();
        sorted.sort_by(f64::total_cmp);
        let idx = ((1.0 - alpha) * sorted.len() as f64).ceil() as usize;
        Some(sorted[idx.min(sorted.len() - 1)])
    }

    pub fn test(&self, sample: &CircularSample, alpha: f64) -> Result<TestResult, StatsError> {
        check_alpha(alpha)?;
        if sample.len() != self.n {
            return Err(StatsError::Domain(format!(
                "reference distribution built for n={}, sample has n={}",
                self.n,
                sample.len()
            )));
        }
        let statistic = rao_spacing_statistic(sample.angles());
        Ok(TestResult::from_p_value(
            TestMethod::RaoSpacing,
            statistic,
            self.p_value(statistic),
            self.critical_value(alpha),
            alpha,
        ))
    }
}

/// Rao's spacing test with a Monte Carlo p-value from `mc_samples` uniform
/// samples of the same size.
pub fn rao_spacing_test(
    sample: &CircularSample,
    alpha: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<TestResult, StatsError> {
    if sample.len() < MIN_N {
        return Err(StatsError::TooSmall { needed: MIN_N, got: sample.len() });
    }
    RaoNull::simulate(sample.len(), mc_samples, seed).test(sample, alpha)
}
