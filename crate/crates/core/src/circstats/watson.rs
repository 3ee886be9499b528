//! Watson's U² goodness-of-fit statistic for circular distributions.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vonmises::{VonMisesCdf, VonMisesSampler};
use super::{
    check_alpha, circular_mean_resultant, kappa_from_rbar, CircularSample, StatsError, TestMethod, TestResult,
};

const KAPPA_CAP: f64 = 1e4;

/// How the U² decision is made.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WatsonMode {
    /// Watson's limiting law, applied to Stephens' finite-n modification.
    Asymptotic,
    /// Parametric bootstrap from the fitted von Mises law, refitting mean and
    /// concentration on every replicate.
    Bootstrap { replicates: usize, seed: u64 },
}

/// `U² = sum (u_i - (2i-1)/(2n))² - n (ubar - 1/2)² + 1/(12n)` for sorted
/// probability-integral transforms `u`.
pub fn watson_u2_statistic(u: &[f64]) -> f64 {
    let n = u.len();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let mut ss = 0.0;
    let mut sum = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        let target = (2 * i + 1) as f64 / (2.0 * nf);
        ss += (ui - target).powi(2);
        sum += ui;
    }
    let mean = sum / nf;
    ss - nf * (mean - 0.5).powi(2) + 1.0 / (12.0 * nf)
}

/// Upper tail of Watson's limiting distribution,
/// `P(U² > x) = 2 sum_k (-1)^(k-1) exp(-2 k² pi² x)`.
pub fn watson_asymptotic_pvalue(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    // U² ~ K² / pi² with K the Kolmogorov limit; use the theta-dual form for
    // small arguments where the alternating series converges slowly.
    let t = PI * x.sqrt();
    let p = if t < 1.0 {
        let mut cdf = 0.0;
        for k in 1..=20 {
            let odd = (2 * k - 1) as f64;
            cdf += (-(odd * odd) * PI * PI / (8.0 * t * t)).exp();
        }
        1.0 - (2.0 * PI).sqrt() / t * cdf
    } else {
        let mut tail = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * t * t).exp();
            tail += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        2.0 * tail
    };
    p.clamp(0.0, 1.0)
}

/// Upper-`alpha` point of the limiting distribution (0.267 at 1%).
pub fn watson_critical_value(alpha: f64) -> Result<f64, StatsError> {
    check_alpha(alpha)?;
    let (mut lo, mut hi) = (1e-6, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if watson_asymptotic_pvalue(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn stephens_modified(u2: f64, n: f64) -> f64 {
    (u2 - 0.1 / n + 0.1 / (n * n)) * (1.0 + 0.8 / n)
}

fn stephens_unmodified(ustar: f64, n: f64) -> f64 {
    ustar / (1.0 + 0.8 / n) + 0.1 / n - 0.1 / (n * n)
}

fn transforms<F: Fn(f64) -> f64>(sample: &CircularSample, cdf: F) -> Result<Vec<f64>, StatsError> {
    let mut u = Vec::with_capacity(sample.len());
    let mut prev = 0.0;
    for (i, &theta) in sample.angles().iter().enumerate() {
        let v = cdf(theta);
        if !(-1e-12..=1.0 + 1e-12).contains(&v) || v < prev - 1e-12 {
            return Err(StatsError::NonMonotoneCdf(i));
        }
        let v = v.clamp(0.0, 1.0).max(prev);
        u.push(v);
        prev = v;
    }
    Ok(u)
}

/// Watson's U² against an arbitrary circular CDF anchored at 0, decided by
/// the limiting distribution.
pub fn watson_u2<F: Fn(f64) -> f64>(
    sample: &CircularSample,
    cdf: F,
    alpha: f64,
) -> Result<TestResult, StatsError> {
    check_alpha(alpha)?;
    if sample.is_empty() {
        return Err(StatsError::TooSmall { needed: 1, got: 0 });
    }
    let u = transforms(sample, cdf)?;
    let stat = watson_u2_statistic(&u);
    let n = sample.len() as f64;
    let p = watson_asymptotic_pvalue(stephens_modified(stat, n));
    let crit = stephens_unmodified(watson_critical_value(alpha)?, n);
    Ok(TestResult::from_p_value(TestMethod::WatsonU2, stat, p, Some(crit), alpha))
}

/// Watson's U² against a von Mises law.
pub fn watson_u2_von_mises(
    sample: &CircularSample,
    mu: f64,
    kappa: f64,
    alpha: f64,
    mode: WatsonMode,
) -> Result<TestResult, StatsError> {
    let cdf = VonMisesCdf::new(mu, kappa)?;
    let asymptotic = watson_u2(sample, |t| cdf.eval(t), alpha)?;
    let WatsonMode::Bootstrap { replicates, seed } = mode else {
        return Ok(asymptotic);
    };
    if replicates == 0 {
        return Ok(asymptotic);
    }
    let n = sample.len();
    let sampler = VonMisesSampler::new(mu, kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..replicates {
        let draw = CircularSample::wrapped((0..n).map(|_| sampler.sample(&mut rng)));
        let fit = circular_mean_resultant(draw.angles(), None)?;
        let refit = VonMisesCdf::new(fit.mu, kappa_from_rbar(fit.rbar, KAPPA_CAP))?;
        let u = transforms(&draw, |t| refit.eval(t))?;
        if watson_u2_statistic(&u) >= asymptotic.statistic {
            exceed += 1;
        }
    }
    let p = exceed as f64 / replicates as f64;
    Ok(TestResult::from_p_value(TestMethod::WatsonU2, asymptotic.statistic, p, None, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_placed_points() {
        let n = 10;
        let u: Vec<f64> = (1..=n).map(|i| (2 * i - 1) as f64 / (2.0 * n as f64)).collect();
        assert!((watson_u2_statistic(&u) - 1.0 / 120.0).abs() < 1e-12);
    }

    #[test]
    fn limiting_law_reproduces_classical_table() {
        // Stephens (1970), upper-tail percentage points of U².
        for &(alpha, tabled) in &[(0.10, 0.152), (0.05, 0.187), (0.025, 0.221), (0.01, 0.267)] {
            let c = watson_critical_value(alpha).unwrap();
            assert!((c - tabled).abs() < 1.5e-3, "alpha={alpha}: {c} vs {tabled}");
        }
    }

    #[test]
    fn series_forms_agree_at_switch() {
        let x = 1.0 / (PI * PI);
        let above = watson_asymptotic_pvalue(x * 1.000_001);
        let below = watson_asymptotic_pvalue(x * 0.999_999);
        assert!((above - below).abs() < 1e-5);
        assert!(watson_asymptotic_pvalue(1e-4) > 0.999_999);
    }

    #[test]
    fn non_monotone_cdf_rejected() {
        let s = CircularSample::new(vec![0.5, 1.0, 2.0]).unwrap();
        let err = watson_u2(&s, |t| if t > 1.5 { 0.1 } else { t / 7.0 }, 0.01).unwrap_err();
        assert_eq!(err, StatsError::NonMonotoneCdf(2));
    }

    #[test]
    fn good_fit_not_rejected() {
        let s = super::super::von_mises_sample(1.0, 2.0, 300, 4).unwrap();
        let r = watson_u2_von_mises(&s, 1.0, 2.0, 0.01, WatsonMode::Asymptotic).unwrap();
        assert!(!r.reject, "{r:?}");
        let wrong = watson_u2_von_mises(&s, 4.0, 2.0, 0.01, WatsonMode::Asymptotic).unwrap();
        assert!(wrong.reject);
    }

    #[test]
    fn bootstrap_mode_is_seeded() {
        let s = super::super::von_mises_sample(1.0, 2.0, 60, 4).unwrap();
        let mode = WatsonMode::Bootstrap { replicates: 100, seed: 8 };
        let a = watson_u2_von_mises(&s, 1.0, 2.0, 0.01, mode).unwrap();
        let b = watson_u2_von_mises(&s, 1.0, 2.0, 0.01, mode).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value.unwrap() > 0.01);
    }
}
