//! Circular statistics on time-of-day data.
//!
//! Angles are radians on `[0, 2pi)`; `0` is midnight. Everything here is pure:
//! randomized procedures take an explicit seed.

mod bessel;
mod dip;
mod rao;
mod sample;
mod vonmises;
mod watson;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bessel::{
    bessel_i0, bessel_i0_scaled, bessel_i1, bessel_i1_scaled, bessel_ratio, kappa_from_rbar, log_bessel_i0,
    SERIES_LIMIT,
};
pub use dip::{circular_dip, dip_statistic, dip_test, DipNull};
pub use rao::{rao_spacing_degrees, rao_spacing_statistic, rao_spacing_test, RaoNull};
pub use sample::{
    circular_mean_resultant, hours_to_radians, radians_to_hours, to_radians, wrap_angle, CircularSample,
    MeanResultant, TAU,
};
pub use vonmises::{
    von_mises_cdf, von_mises_log_pdf, von_mises_pdf, von_mises_sample, VonMisesCdf, VonMisesSampler,
};
pub use watson::{
    watson_asymptotic_pvalue, watson_critical_value, watson_u2, watson_u2_statistic, watson_u2_von_mises,
    WatsonMode,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sample too small: need at least {needed} points, got {got}")]
    TooSmall { needed: usize, got: usize },
    #[error("model CDF is not monotone over the sample (at sorted position {0})")]
    NonMonotoneCdf(usize),
}

/// Which procedure produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    RaoSpacing,
    HartiganDip,
    WatsonU2,
}

/// Outcome of a hypothesis test.
///
/// When `p_value` is present, `reject == (p_value < alpha)`; otherwise the
/// decision is `statistic > critical_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub critical_value: Option<f64>,
    pub alpha: f64,
    pub reject: bool,
}

impl TestResult {
    pub(crate) fn from_p_value(
        method: TestMethod,
        statistic: f64,
        p_value: f64,
        critical_value: Option<f64>,
        alpha: f64,
    ) -> Self {
        Self { method, statistic, p_value: Some(p_value), critical_value, alpha, reject: p_value < alpha }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}
