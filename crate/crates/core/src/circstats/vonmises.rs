//! The von Mises distribution: density, distribution function and sampling.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bessel::{bessel_i0_scaled, bessel_ratios};
use super::{wrap_angle, CircularSample, StatsError, TAU};

fn check_params(mu: f64, kappa: f64) -> Result<(), StatsError> {
    if !mu.is_finite() {
        return Err(StatsError::Domain(format!("mean direction must be finite, got {mu}")));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(StatsError::Domain(format!(
            "concentration must be finite and non-negative, got {kappa}"
        )));
    }
    Ok(())
}

/// `ln pdf(theta | mu, kappa)`.
pub fn von_mises_log_pdf(theta: f64, mu: f64, kappa: f64) -> Result<f64, StatsError> {
    check_params(mu, kappa)?;
    Ok(log_pdf_unchecked(theta, mu, kappa, log_norm(kappa)))
}

/// `pdf(theta | mu, kappa) = exp(kappa cos(theta - mu)) / (2 pi I_0(kappa))`.
pub fn von_mises_pdf(theta: f64, mu: f64, kappa: f64) -> Result<f64, StatsError> {
    von_mises_log_pdf(theta, mu, kappa).map(f64::exp)
}

/// `ln(2 pi I_0(kappa)) - kappa`, the normalizer paired with `kappa (cos - 1)`.
pub(crate) fn log_norm(kappa: f64) -> f64 {
    (TAU * bessel_i0_scaled(kappa).unwrap_or(f64::NAN)).ln()
}

#[inline]
pub(crate) fn log_pdf_unchecked(theta: f64, mu: f64, kappa: f64, log_norm: f64) -> f64 {
    kappa * ((theta - mu).cos() - 1.0) - log_norm
}

/// Distribution function of a von Mises law anchored at angle 0:
/// `F(theta)` is the mass on `[0, theta)`.
///
/// Built once per `(mu, kappa)` so repeated evaluation is cheap. Uses the
/// Fourier expansion of the centred CDF with coefficients `I_j(k) / (j I_0(k))`,
/// truncated where they fall below double precision.
#[derive(Debug, Clone)]
pub struct VonMisesCdf {
    mu: f64,
    coeffs: Vec<f64>,
}

impl VonMisesCdf {
    pub fn new(mu: f64, kappa: f64) -> Result<Self, StatsError> {
        check_params(mu, kappa)?;
        let terms = if kappa == 0.0 { 0 } else { 30 + (90.0 * kappa).sqrt().ceil() as usize };
        let coeffs =
            bessel_ratios(kappa, terms).into_iter().enumerate().map(|(j, r)| r / (j + 1) as f64).collect();
        Ok(Self { mu: wrap_angle(mu), coeffs })
    }

    /// Centred CDF on `[-pi, pi)`: mass of `[-pi, x)`.
    fn centred(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            s += c * ((j + 1) as f64 * x).sin();
        }
        (x + PI) / TAU + s / PI
    }

    /// Centred CDF extended to the real line with `H(x + 2pi) = H(x) + 1`.
    fn unwrapped(&self, x: f64) -> f64 {
        let turns = ((x + PI) / TAU).floor();
        let mut reduced = x - turns * TAU;
        if reduced >= PI {
            reduced -= TAU;
        }
        turns + self.centred(reduced)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let f = self.unwrapped(theta - self.mu) - self.unwrapped(-self.mu);
        f.clamp(0.0, 1.0)
    }
}

/// `F(theta)` for a single evaluation; see [`VonMisesCdf`].
pub fn von_mises_cdf(theta: f64, mu: f64, kappa: f64) -> Result<f64, StatsError> {
    Ok(VonMisesCdf::new(mu, kappa)?.eval(theta))
}

/// Best & Fisher (1979) rejection sampler.
#[derive(Debug, Clone, Copy)]
pub struct VonMisesSampler {
    mu: f64,
    kappa: f64,
    r: f64,
}

impl VonMisesSampler {
    pub fn new(mu: f64, kappa: f64) -> Result<Self, StatsError> {
        check_params(mu, kappa)?;
        let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = 2.0 * kappa / (tau + (2.0 * tau).sqrt());
        let r = if rho > 0.0 { (1.0 + rho * rho) / (2.0 * rho) } else { f64::INFINITY };
        Ok(Self { mu, kappa, r })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.kappa < 1e-8 {
            return wrap_angle(rng.random::<f64>() * TAU);
        }
        let r = self.r;
        loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + r * z) / (r + z);
            let c = self.kappa * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let u3: f64 = rng.random();
                let delta = f.clamp(-1.0, 1.0).acos();
                let theta = if u3 > 0.5 { self.mu + delta } else { self.mu - delta };
                return wrap_angle(theta);
            }
        }
    }
}

/// `n` i.i.d. draws, reproducible for a fixed seed.
pub fn von_mises_sample(mu: f64, kappa: f64, n: usize, seed: u64) -> Result<CircularSample, StatsError> {
    if n == 0 {
        return Err(StatsError::TooSmall { needed: 1, got: 0 });
    }
    let sampler = VonMisesSampler::new(mu, kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(CircularSample::wrapped((0..n).map(|_| sampler.sample(&mut rng))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_limit() {
        for &theta in &[0.0, 1.0, 4.0] {
            let p = von_mises_pdf(theta, 2.0, 0.0).unwrap();
            assert!((p - 1.0 / TAU).abs() < 1e-15);
        }
        assert!((von_mises_cdf(PI, 1.3, 0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn peak_density_at_kappa_one() {
        let p = von_mises_pdf(1.0, 1.0, 1.0).unwrap();
        let expected = 1f64.exp() / (TAU * 1.266_065_877_752_008_4);
        assert!((p - expected).abs() < 1e-14);
    }

    #[test]
    fn symmetric_about_mean() {
        for &d in &[0.1, 0.9, 2.5] {
            let a = von_mises_pdf(3.0 + d, 3.0, 4.0).unwrap();
            let b = von_mises_pdf(3.0 - d, 3.0, 4.0).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_endpoints() {
        for &(mu, kappa) in &[(0.0, 0.5), (PI, 2.0), (6.0, 50.0), (0.3, 1e4)] {
            let f = VonMisesCdf::new(mu, kappa).unwrap();
            assert_eq!(f.eval(0.0), 0.0);
            assert!((f.eval(TAU - 1e-12) - 1.0).abs() < 1e-8, "mu={mu} kappa={kappa}");
        }
    }

    #[test]
    fn cdf_half_mass_at_antimode_cut() {
        // Mass on [0, pi) for a law centred at pi/2 equals mass on [pi, 2pi) of
        // one centred at 3pi/2.
        let a = von_mises_cdf(PI, PI / 2.0, 3.0).unwrap();
        let b = 1.0 - von_mises_cdf(PI, 1.5 * PI, 3.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(von_mises_pdf(0.0, 0.0, -1.0).is_err());
        assert!(von_mises_cdf(0.0, f64::NAN, 1.0).is_err());
        assert!(von_mises_sample(0.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = von_mises_sample(2.0, 3.0, 100, 42).unwrap();
        let b = von_mises_sample(2.0, 3.0, 100, 42).unwrap();
        assert_eq!(a, b);
        let c = von_mises_sample(2.0, 3.0, 100, 43).unwrap();
        assert_ne!(a, c);
    }
}
