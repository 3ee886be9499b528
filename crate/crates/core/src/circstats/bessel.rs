//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! A power series is used below [`SERIES_LIMIT`] and the large-argument
//! asymptotic expansion above it. The `_scaled` variants return
//! `exp(-x) * I_n(x)`, which stays finite for every concentration the mixture
//! fitter can reach; the unscaled functions overflow to `+inf` a little above
//! `x = 713`.

use super::StatsError;

/// Switchover point between the power series and the asymptotic expansion.
pub const SERIES_LIMIT: f64 = 15.0;

const MAX_SERIES_TERMS: usize = 500;
const MAX_ASYMPTOTIC_TERMS: usize = 60;

fn check(x: f64) -> Result<(), StatsError> {
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::Domain(format!("Bessel argument must be non-negative, got {x}")));
    }
    Ok(())
}

/// `sum_k (x/2)^(2k+order) / (k! (k+order)!)` for order 0 or 1.
fn series(x: f64, order: u32) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..MAX_SERIES_TERMS {
        let k = k as f64;
        term *= q / (k * (k + f64::from(order)));
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `sqrt(2 pi x) e^{-x} I_order(x)` via the Hankel asymptotic series,
/// truncated at its smallest term.
fn asymptotic_scaled(x: f64, order: u32) -> f64 {
    let mu = 4.0 * f64::from(order * order);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..MAX_ASYMPTOTIC_TERMS {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if prev < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// `I_0(x)`.
pub fn bessel_i0(x: f64) -> Result<f64, StatsError> {
    check(x)?;
    if x < SERIES_LIMIT {
        Ok(series(x, 0))
    } else {
        Ok(asymptotic_scaled(x, 0) * x.exp())
    }
}

/// `I_1(x)`.
pub fn bessel_i1(x: f64) -> Result<f64, StatsError> {
    check(x)?;
    if x < SERIES_LIMIT {
        Ok(series(x, 1))
    } else {
        Ok(asymptotic_scaled(x, 1) * x.exp())
    }
}

/// `exp(-x) I_0(x)`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64, StatsError> {
    check(x)?;
    if x < SERIES_LIMIT {
        Ok(series(x, 0) * (-x).exp())
    } else {
        Ok(asymptotic_scaled(x, 0))
    }
}

/// `exp(-x) I_1(x)`.
pub fn bessel_i1_scaled(x: f64) -> Result<f64, StatsError> {
    check(x)?;
    if x < SERIES_LIMIT {
        Ok(series(x, 1) * (-x).exp())
    } else {
        Ok(asymptotic_scaled(x, 1))
    }
}

/// Mean resultant length of a von Mises distribution, `A(k) = I_1(k) / I_0(k)`.
pub fn bessel_ratio(kappa: f64) -> Result<f64, StatsError> {
    check(kappa)?;
    if kappa == 0.0 {
        return Ok(0.0);
    }
    Ok(bessel_i1_scaled(kappa)? / bessel_i0_scaled(kappa)?)
}

/// `ln I_0(x)`, finite for all non-negative `x`.
pub fn log_bessel_i0(x: f64) -> Result<f64, StatsError> {
    Ok(bessel_i0_scaled(x)?.ln() + x)
}

/// Ratios `I_j(k) / I_0(k)` for `j = 1..=terms`, by backward recurrence on
/// `r_j = I_j / I_{j-1} = 1 / (2j/k + r_{j+1})`.
pub(crate) fn bessel_ratios(kappa: f64, terms: usize) -> Vec<f64> {
    let mut out = vec![0.0; terms];
    if kappa <= 0.0 || terms == 0 {
        return out;
    }
    let start = terms + 60 + ((terms * terms) as f64 + 40.0 * kappa).sqrt().ceil() as usize;
    let mut r = 0.0;
    let mut ratios = vec![0.0; terms + 1];
    for j in (1..=start).rev() {
        r = 1.0 / (2.0 * j as f64 / kappa + r);
        if j <= terms {
            ratios[j] = r;
        }
    }
    let mut acc = 1.0;
    for j in 1..=terms {
        acc *= ratios[j];
        out[j - 1] = acc;
    }
    out
}

/// Solves `A(k) = rbar` for `k`, starting from the Banerjee closed form
/// `rbar (2 - rbar^2) / (1 - rbar^2)` and polishing with safeguarded Newton.
/// The result is clamped to `[0, cap]`.
pub fn kappa_from_rbar(rbar: f64, cap: f64) -> f64 {
    if !(rbar > 0.0) {
        return 0.0;
    }
    if rbar >= 1.0 {
        return cap;
    }
    let a_cap = bessel_ratio(cap).unwrap_or(1.0);
    if rbar >= a_cap {
        return cap;
    }
    let mut lo = 0.0_f64;
    let mut hi = cap;
    let mut k = (rbar * (2.0 - rbar * rbar) / (1.0 - rbar * rbar)).clamp(1e-12, cap);
    for _ in 0..100 {
        let a = bessel_ratio(k).unwrap_or(0.0);
        let f = a - rbar;
        if f.abs() <= 1e-12 {
            break;
        }
        if f > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let deriv = 1.0 - a * a - a / k;
        let mut next = k - f / deriv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= 1e-15 * k {
            k = next;
            break;
        }
        k = next;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_arguments() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_i1(0.0).unwrap(), 0.0);
        // Abramowitz & Stegun table 9.8
        assert!((bessel_i0(1.0).unwrap() - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i1(1.0).unwrap() - 0.565_159_103_992_485_0).abs() < 1e-15);
    }

    #[test]
    fn negative_is_rejected() {
        assert!(bessel_i0(-1.0).is_err());
        assert!(bessel_i1(-0.1).is_err());
        assert!(bessel_i0(f64::NAN).is_err());
    }

    #[test]
    fn continuous_across_switchover() {
        let below = series(SERIES_LIMIT, 0) * (-SERIES_LIMIT).exp();
        let above = asymptotic_scaled(SERIES_LIMIT, 0);
        assert!(((below - above) / below).abs() < 1e-12);
        let below = series(SERIES_LIMIT, 1) * (-SERIES_LIMIT).exp();
        let above = asymptotic_scaled(SERIES_LIMIT, 1);
        assert!(((below - above) / below).abs() < 1e-12);
    }

    #[test]
    fn ratios_match_direct_for_order_one() {
        for &k in &[0.3, 2.0, 14.0, 40.0, 900.0] {
            let r = bessel_ratios(k, 5);
            assert!((r[0] - bessel_ratio(k).unwrap()).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn kappa_inversion_round_trips() {
        for i in 1..10 {
            let rbar = f64::from(i) / 10.0;
            let k = kappa_from_rbar(rbar, 1e4);
            assert!((bessel_ratio(k).unwrap() - rbar).abs() <= 1e-8, "rbar={rbar}");
        }
        assert_eq!(kappa_from_rbar(0.0, 1e4), 0.0);
        assert_eq!(kappa_from_rbar(1.0, 1e4), 1e4);
    }

    #[test]
    fn i0_is_increasing_and_ratio_bounded() {
        let mut prev_i0 = 0.0;
        let mut prev_ratio = -1.0;
        let mut k = 0.0;
        while k < 700.0 {
            let i0 = bessel_i0(k).unwrap();
            let ratio = bessel_ratio(k).unwrap();
            assert!(i0 > prev_i0);
            assert!(ratio > prev_ratio && ratio < 1.0);
            prev_i0 = i0;
            prev_ratio = ratio;
            k += 0.37;
        }
    }
}
