use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::StatsError;

pub const TAU: f64 = 2.0 * PI;

/// Reduces any finite angle to `[0, 2pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Converts an hour of the day in `[0, 24)` to radians.
pub fn to_radians(hours: f64) -> Result<f64, StatsError> {
    if !(0.0..24.0).contains(&hours) {
        return Err(StatsError::Domain(format!("hour of day must lie in [0, 24), got {hours}")));
    }
    Ok(wrap_angle(hours * TAU / 24.0))
}

/// Like [`to_radians`] but wraps instead of failing.
pub fn hours_to_radians(hours: f64) -> f64 {
    wrap_angle(hours * TAU / 24.0)
}

pub fn radians_to_hours(theta: f64) -> f64 {
    wrap_angle(theta) * 24.0 / TAU
}

/// A sorted sample of angles in `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularSample {
    angles: Vec<f64>,
}

impl CircularSample {
    /// Builds a sample, rejecting angles outside `[0, 2pi)`.
    pub fn new(mut angles: Vec<f64>) -> Result<Self, StatsError> {
        if let Some(bad) = angles.iter().find(|a| !(0.0..TAU).contains(*a)) {
            return Err(StatsError::Domain(format!("angle {bad} outside [0, 2pi)")));
        }
        angles.sort_by(f64::total_cmp);
        Ok(Self { angles })
    }

    /// Builds a sample from arbitrary finite angles, wrapping each onto the circle.
    pub fn wrapped<I: IntoIterator<Item = f64>>(angles: I) -> Self {
        let mut angles: Vec<f64> = angles.into_iter().map(wrap_angle).collect();
        angles.sort_by(f64::total_cmp);
        Self { angles }
    }

    pub fn from_hours<I: IntoIterator<Item = f64>>(hours: I) -> Result<Self, StatsError> {
        let angles = hours.into_iter().map(to_radians).collect::<Result<Vec<_>, _>>()?;
        Self::new(angles)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Empirical CDF `F_n(theta) = #{angles <= theta} / n`.
    pub fn ecdf(&self, theta: f64) -> f64 {
        if self.angles.is_empty() {
            return 0.0;
        }
        let count = self.angles.partition_point(|&a| a <= theta);
        count as f64 / self.angles.len() as f64
    }

    /// The sample rotated by `delta` radians.
    pub fn rotated(&self, delta: f64) -> Self {
        Self::wrapped(self.angles.iter().map(|a| a + delta))
    }

    /// Index of the point that follows the widest circular gap. Ties go to
    /// the lowest index. Rotating the sample rotates this anchor with it.
    pub fn largest_gap_anchor(&self) -> usize {
        Self::largest_gap_anchor_of(&self.angles)
    }

    pub(crate) fn largest_gap_anchor_of(angles: &[f64]) -> usize {
        let n = angles.len();
        if n < 2 {
            return 0;
        }
        let mut best = 0;
        let mut best_gap = angles[0] + TAU - angles[n - 1];
        for i in 1..n {
            let gap = angles[i] - angles[i - 1];
            if gap > best_gap {
                best_gap = gap;
                best = i;
            }
        }
        best
    }
}

/// Mean direction and mean resultant length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanResultant {
    pub mu: f64,
    pub rbar: f64,
    /// Set when the resultant vanishes; `mu` is then reported as 0.
    pub degenerate: bool,
}

const DEGENERATE_RBAR: f64 = 1e-12;

/// Weighted mean direction `atan2(sum w sin, sum w cos)` and resultant
/// length `|sum w (cos, sin)| / sum w`.
pub fn circular_mean_resultant(angles: &[f64], weights: Option<&[f64]>) -> Result<MeanResultant, StatsError> {
    if angles.is_empty() {
        return Err(StatsError::TooSmall { needed: 1, got: 0 });
    }
    let (mut c, mut s, mut total) = (0.0, 0.0, 0.0);
    match weights {
        Some(w) => {
            if w.len() != angles.len() {
                return Err(StatsError::Domain(format!("{} weights for {} angles", w.len(), angles.len())));
            }
            for (&theta, &wi) in angles.iter().zip(w) {
                if !(wi >= 0.0) {
                    return Err(StatsError::Domain(format!("negative weight {wi}")));
                }
                c += wi * theta.cos();
                s += wi * theta.sin();
                total += wi;
            }
        }
        None => {
            for &theta in angles {
                c += theta.cos();
                s += theta.sin();
            }
            total = angles.len() as f64;
        }
    }
    if !(total > 0.0) {
        return Err(StatsError::Domain("weights sum to zero".into()));
    }
    let rbar = (c.hypot(s) / total).min(1.0);
    if rbar < DEGENERATE_RBAR {
        return Ok(MeanResultant { mu: 0.0, rbar: 0.0, degenerate: true });
    }
    Ok(MeanResultant { mu: wrap_angle(s.atan2(c)), rbar, degenerate: false })
}
