use serde::{Deserialize, Serialize};

use super::{log_sum_exp, VonMisesMixture};
use crate::circstats::{radians_to_hours, wrap_angle, CircularSample, TAU};

/// Grid resolution for locating decision boundaries (30-second steps).
const GRID: usize = 2880;
const BISECTION_STEPS: usize = 60;

/// Counter-clockwise arc from `start` to `end` (radians). A full circle is
/// `start = 0, end = 2 pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
}

impl Arc {
    pub fn is_full(&self) -> bool {
        self.end - self.start >= TAU
    }

    pub fn length(&self) -> f64 {
        if self.is_full() {
            TAU
        } else {
            wrap_angle(self.end - self.start)
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.is_full() || wrap_angle(theta - self.start) <= self.length()
    }

    pub fn hours(&self) -> HourRange {
        HourRange {
            start: radians_to_hours(self.start),
            end: if self.is_full() { 24.0 } else { radians_to_hours(self.end) },
        }
    }
}

/// Clock-time interval; `start > end` means it wraps past midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourRange {
    pub start: f64,
    pub end: f64,
}

impl HourRange {
    pub fn wraps(&self) -> bool {
        self.start > self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Component index per sample point (in sorted-sample order).
    pub labels: Vec<usize>,
    pub posterior: Vec<Vec<f64>>,
    /// Smallest arc covering each component's points; `None` if it got none.
    pub ranges: Vec<Option<Arc>>,
    pub decision_arcs: Vec<Vec<Arc>>,
}

impl ClusterAssignment {
    pub fn hour_ranges(&self) -> Vec<Option<HourRange>> {
        self.ranges.iter().map(|r| r.map(|a| a.hours())).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.ranges.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Shortest arc containing every angle in `points` (sorted ascending).
fn covering_arc(points: &[f64]) -> Option<Arc> {
    let n = points.len();
    if n == 0 {
        return None;
    }
    // The arc is the complement of the widest gap between neighbours.
    let mut gap = points[0] + TAU - points[n - 1];
    let mut start = 0;
    for i in 1..n {
        let g = points[i] - points[i - 1];
        if g > gap {
            gap = g;
            start = i;
        }
    }
    let end = (start + n - 1) % n;
    Some(Arc { start: points[start], end: points[end] })
}

/// Point between `lo` and `hi` where `a` stops being the winner.
fn crossover(model: &VonMisesMixture, offsets: &[f64], a: usize, mut lo: f64, mut hi: f64) -> f64 {
    let mut buf = vec![0.0; model.len()];
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        model.weighted_log_densities(offsets, mid, &mut buf);
        if argmax(&buf) == a {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    wrap_angle(0.5 * (lo + hi))
}

fn decision_arcs(model: &VonMisesMixture, offsets: &[f64]) -> Vec<Vec<Arc>> {
    let m = model.len();
    let mut arcs = vec![Vec::new(); m];
    let mut buf = vec![0.0; m];
    let step = TAU / GRID as f64;
    let winners: Vec<usize> = (0..GRID)
        .map(|g| {
            model.weighted_log_densities(offsets, g as f64 * step, &mut buf);
            argmax(&buf)
        })
        .collect();
    let boundaries: Vec<(f64, usize)> = (0..GRID)
        .filter_map(|g| {
            let next = (g + 1) % GRID;
            let (a, b) = (winners[g], winners[next]);
            (a != b).then(|| {
                let lo = g as f64 * step;
                (crossover(model, offsets, a, lo, lo + step), b)
            })
        })
        .collect();
    if boundaries.is_empty() {
        arcs[winners[0]].push(Arc { start: 0.0, end: TAU });
        return arcs;
    }
    for (i, &(start, owner)) in boundaries.iter().enumerate() {
        let end = boundaries[(i + 1) % boundaries.len()].0;
        arcs[owner].push(Arc { start, end });
    }
    for list in &mut arcs {
        list.sort_by(|x, y| x.start.total_cmp(&y.start));
    }
    arcs
}

/// Assigns every sample point to its maximum-posterior component.
pub fn assign(model: &VonMisesMixture, sample: &CircularSample) -> ClusterAssignment {
    let m = model.len();
    let offsets = model.log_offsets();
    let mut buf = vec![0.0; m];
    let mut labels = Vec::with_capacity(sample.len());
    let mut posterior = Vec::with_capacity(sample.len());
    let mut members = vec![Vec::new(); m];
    for &theta in sample.angles() {
        model.weighted_log_densities(&offsets, theta, &mut buf);
        let label = argmax(&buf);
        let norm = log_sum_exp(&buf);
        labels.push(label);
        posterior.push(buf.iter().map(|v| (v - norm).exp()).collect());
        members[label].push(theta);
    }
    ClusterAssignment {
        labels,
        posterior,
        ranges: members.iter().map(|p| covering_arc(p)).collect(),
        decision_arcs: decision_arcs(model, &offsets),
    }
}
