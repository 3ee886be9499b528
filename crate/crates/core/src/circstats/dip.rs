//! Hartigan's dip statistic and its circular counterpart.
//!
//! The linear statistic follows Hartigan & Hartigan's AS 217 algorithm as
//! maintained in the R `diptest` package (including Maechler's termination
//! fix); its minimum value is `1 / (2n)`. The circular dip cuts the circle at
//! every observation, unwraps, and keeps the smallest linear dip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_alpha, CircularSample, StatsError, TestMethod, TestResult, TAU};

const MIN_N: usize = 4;

/// Scratch buffers for repeated linear dip evaluation (1-based, as in AS 217).
#[derive(Debug, Default)]
struct DipWork {
    mn: Vec<usize>,
    mj: Vec<usize>,
    gcm: Vec<usize>,
    lcm: Vec<usize>,
    x: Vec<f64>,
}

impl DipWork {
    fn with_capacity(n: usize) -> Self {
        Self {
            mn: vec![0; n + 1],
            mj: vec![0; n + 1],
            gcm: vec![0; n + 2],
            lcm: vec![0; n + 2],
            x: vec![0.0; n + 1],
        }
    }

    fn resize(&mut self, n: usize) {
        if self.x.len() < n + 1 {
            *self = Self::with_capacity(n);
        }
    }

    /// Dip of `self.x[1..=n]` (sorted), in count units `2n * dip`.
    fn dip_counts(&mut self, n: usize) -> f64 {
        let x = &self.x;
        let (mn, mj, gcm, lcm) = (&mut self.mn, &mut self.mj, &mut self.gcm, &mut self.lcm);
        let mut dip = 1.0;
        if n < 2 || x[n] == x[1] {
            return dip;
        }

        // Convex minorant candidates.
        mn[1] = 1;
        for j in 2..=n {
            mn[j] = j - 1;
            loop {
                let mnj = mn[j];
                let mnmnj = mn[mnj];
                if mnj == 1
                    || (x[j] - x[mnj]) * ((mnj - mnmnj) as f64) < (x[mnj] - x[mnmnj]) * ((j - mnj) as f64)
                {
                    break;
                }
                mn[j] = mnmnj;
            }
        }
        // Concave majorant candidates.
        mj[n] = n;
        for k in (1..n).rev() {
            mj[k] = k + 1;
            loop {
                let mjk = mj[k];
                let mjmjk = mj[mjk];
                if mjk == n
                    || (x[k] - x[mjk]) * (mjk as f64 - mjmjk as f64)
                        < (x[mjk] - x[mjmjk]) * (k as f64 - mjk as f64)
                {
                    break;
                }
                mj[k] = mjmjk;
            }
        }

        let mut low = 1usize;
        let mut high = n;
        loop {
            gcm[1] = high;
            let mut i = 1;
            while gcm[i] > low {
                gcm[i + 1] = mn[gcm[i]];
                i += 1;
            }
            let l_gcm = i;
            let mut ig = l_gcm;
            let mut ix = ig - 1;

            lcm[1] = low;
            let mut i = 1;
            while lcm[i] < high {
                lcm[i + 1] = mj[lcm[i]];
                i += 1;
            }
            let l_lcm = i;
            let mut ih = l_lcm;
            let mut iv = 2usize;

            let mut d = 0.0;
            if l_gcm != 2 || l_lcm != 2 {
                loop {
                    let gcmix = gcm[ix];
                    let lcmiv = lcm[iv];
                    if gcmix > lcmiv {
                        let gcmi1 = gcm[ix + 1];
                        let dx = (lcmiv as f64 - gcmi1 as f64 + 1.0)
                            - (x[lcmiv] - x[gcmi1]) * (gcmix - gcmi1) as f64 / (x[gcmix] - x[gcmi1]);
                        iv += 1;
                        if dx >= d {
                            d = dx;
                            ig = ix + 1;
                            ih = iv - 1;
                        }
                    } else {
                        let lcmiv1 = lcm[iv - 1];
                        let dx = (x[gcmix] - x[lcmiv1]) * (lcmiv - lcmiv1) as f64 / (x[lcmiv] - x[lcmiv1])
                            - (gcmix as f64 - lcmiv1 as f64 - 1.0);
                        ix -= 1;
                        if dx >= d {
                            d = dx;
                            ig = ix + 1;
                            ih = iv;
                        }
                    }
                    if ix < 1 {
                        ix = 1;
                    }
                    if iv > l_lcm {
                        iv = l_lcm;
                    }
                    if gcm[ix] == lcm[iv] {
                        break;
                    }
                }
            } else {
                d = 1.0;
            }
            if d < dip {
                break;
            }

            let mut dip_l: f64 = 0.0;
            for j in ig..l_gcm {
                let mut max_t: f64 = 1.0;
                let jb = gcm[j + 1];
                let je = gcm[j];
                if je - jb > 1 && x[je] != x[jb] {
                    let c = (je - jb) as f64 / (x[je] - x[jb]);
                    for jj in jb..=je {
                        let t = (jj - jb + 1) as f64 - (x[jj] - x[jb]) * c;
                        max_t = max_t.max(t);
                    }
                }
                dip_l = dip_l.max(max_t);
            }
            let mut dip_u: f64 = 0.0;
            for j in ih..l_lcm {
                let mut max_t: f64 = 1.0;
                let jb = lcm[j];
                let je = lcm[j + 1];
                if je - jb > 1 && x[je] != x[jb] {
                    let c = (je - jb) as f64 / (x[je] - x[jb]);
                    for jj in jb..=je {
                        let t = (x[jj] - x[jb]) * c - (jj as f64 - jb as f64 - 1.0);
                        max_t = max_t.max(t);
                    }
                }
                dip_u = dip_u.max(max_t);
            }
            dip = dip.max(dip_u.max(dip_l));

            if low == gcm[ig] && high == lcm[ih] {
                break;
            }
            low = gcm[ig];
            high = lcm[ih];
        }
        dip
    }
}

/// Hartigan's dip of a sorted linear sample. Values lie in `[1/(2n), 1/4]`.
pub fn dip_statistic(sorted: &[f64]) -> Result<f64, StatsError> {
    let n = sorted.len();
    if n == 0 {
        return Err(StatsError::TooSmall { needed: 1, got: 0 });
    }
    if let Some(i) = sorted.windows(2).position(|w| w[1] < w[0]) {
        return Err(StatsError::Domain(format!("sample not sorted at index {}", i + 1)));
    }
    let mut work = DipWork::with_capacity(n);
    work.x[1..=n].copy_from_slice(sorted);
    Ok(work.dip_counts(n) / (2 * n) as f64)
}

/// Circular dip: the minimum linear dip over all n cuts of the circle.
///
/// Cuts are tried starting from the widest gap. With `stop_below`, the scan
/// returns as soon as a cut falls under that value (the result is then only
/// an upper bound, still below `stop_below`).
fn circular_dip_with(work: &mut DipWork, angles: &[f64], stop_below: Option<f64>) -> f64 {
    let n = angles.len();
    work.resize(n);
    let anchor = CircularSample::largest_gap_anchor_of(angles);
    let mut best = f64::INFINITY;
    for step in 0..n {
        let cut = (anchor + step) % n;
        let origin = angles[cut];
        for j in 0..n {
            let idx = cut + j;
            let v = if idx < n { angles[idx] - origin } else { angles[idx - n] + TAU - origin };
            work.x[j + 1] = v;
        }
        let dip = work.dip_counts(n) / (2 * n) as f64;
        if dip < best {
            best = dip;
            if let Some(limit) = stop_below {
                if best < limit {
                    return best;
                }
            }
        }
    }
    best
}

/// Circular dip statistic of a sample.
pub fn circular_dip(sample: &CircularSample) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::TooSmall { needed: 1, got: 0 });
    }
    let mut work = DipWork::with_capacity(sample.len());
    Ok(circular_dip_with(&mut work, sample.angles(), None))
}

/// Bootstrap reference distribution of the circular dip under circular
/// uniformity. Replicate `i` draws from ChaCha stream `i`, so the result does
/// not depend on thread scheduling.
#[derive(Debug, Clone)]
pub struct DipNull {
    n: usize,
    stats: Vec<f64>,
}

impl DipNull {
    pub fn simulate(n: usize, replicates: usize, seed: u64) -> Self {
        let stats = (0..replicates)
            .into_par_iter()
            .map_init(
                || (DipWork::with_capacity(n), vec![0.0; n]),
                |(work, buf), i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    for x in buf.iter_mut() {
                        *x = rng.random::<f64>() * TAU;
                    }
                    buf.sort_by(f64::total_cmp);
                    circular_dip_with(work, buf, None)
                },
            )
            .collect();
        Self { n, stats }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p_value(&self, observed: f64) -> f64 {
        if self.stats.is_empty() {
            return 1.0;
        }
        let exceed = self.stats.iter().filter(|&&s| s >= observed - 1e-12).count();
        exceed as f64 / self.stats.len() as f64
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
        let statistic = circular_dip(sample)?;
        Ok(TestResult::from_p_value(TestMethod::HartiganDip, statistic, self.p_value(statistic), None, alpha))
    }
}

/// Circular dip test of unimodality with a bootstrap p-value against the
/// circular-uniform null of the same size.
pub fn dip_test(
    sample: &CircularSample,
    alpha: f64,
    bootstrap_samples: usize,
    seed: u64,
) -> Result<TestResult, StatsError> {
    check_alpha(alpha)?;
    let n = sample.len();
    if n < MIN_N {
        return Err(StatsError::TooSmall { needed: MIN_N, got: n });
    }
    let statistic = circular_dip(sample)?;
    // Only "null >= observed" matters, so each replicate may stop early once
    // one of its cuts drops below the observed value.
    let threshold = statistic - 1e-12;
    let exceed: usize = (0..bootstrap_samples)
        .into_par_iter()
        .map_init(
            || (DipWork::with_capacity(n), vec![0.0; n]),
            |(work, buf), i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                for x in buf.iter_mut() {
                    *x = rng.random::<f64>() * TAU;
                }
                buf.sort_by(f64::total_cmp);
                usize::from(circular_dip_with(work, buf, Some(threshold)) >= threshold)
            },
        )
        .sum();
    let p = if bootstrap_samples == 0 { 1.0 } else { exceed as f64 / bootstrap_samples as f64 };
    Ok(TestResult::from_p_value(TestMethod::HartiganDip, statistic, p, None, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evenly_spaced_attains_minimum() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((dip_statistic(&x).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn two_point_masses() {
        let mut x = vec![0.0; 20];
        x.extend(vec![1.0; 20]);
        assert!((dip_statistic(&x).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn matches_r_diptest_reference() {
        // Values from the reference C implementation (min.is.0 = FALSE).
        let cases: [(&[f64], f64); 3] = [
            (&[0.1, 0.4, 0.5, 0.9, 1.2, 1.3, 5.0, 5.2, 5.3, 5.9, 6.1, 6.4], 0.181_372_549_019_607_84),
            (&[0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.3, 2.1, 3.4, 5.5, 8.9, 14.4], 0.038_461_538_461_538_464),
            (&[1., 1., 1., 2., 2., 3., 3., 3., 3., 4., 7., 7., 8., 8., 8.], 0.126_666_666_666_666_65),
        ];
        for (x, expected) in cases {
            assert!((dip_statistic(x).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn unsorted_rejected() {
        assert!(dip_statistic(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn circular_dip_rotation_invariant() {
        let s = CircularSample::new(vec![0.1, 0.3, 0.35, 1.0, 3.0, 3.1, 3.3, 3.35, 5.0]).unwrap();
        let a = circular_dip(&s).unwrap();
        for &delta in &[0.5, 2.0, 4.4] {
            let b = circular_dip(&s.rotated(delta)).unwrap();
            assert!((a - b).abs() < 1e-9, "delta={delta}: {a} vs {b}");
        }
    }

    #[test]
    fn early_exit_agrees_with_full_scan_on_decision() {
        let s = CircularSample::new(vec![0.2, 0.25, 0.3, 3.3, 3.35, 3.4, 3.45, 0.22]).unwrap();
        let full = circular_dip(&s).unwrap();
        let mut work = DipWork::with_capacity(s.len());
        let cut = circular_dip_with(&mut work, s.angles(), Some(full + 0.01));
        assert!(cut < full + 0.01);
    }

    #[test]
    fn null_is_reproducible() {
        let a = DipNull::simulate(20, 50, 5);
        let b = DipNull::simulate(20, 50, 5);
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn bootstrap_matches_cached_null() {
        let s = CircularSample::new((0..30).map(|i| 0.2 * f64::from(i)).collect()).unwrap();
        let direct = dip_test(&s, 0.05, 200, 11).unwrap();
        let cached = DipNull::simulate(30, 200, 11).test(&s, 0.05).unwrap();
        assert_eq!(direct.p_value, cached.p_value);
    }
}
