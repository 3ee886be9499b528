use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, FitError, VonMisesComponent, VonMisesMixture};
use crate::circstats::{circular_mean_resultant, kappa_from_rbar, CircularSample};

/// Responsibility mass below which a component counts as collapsed.
const EMPTY_MASS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub seed: u64,
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of successful random initializations; the best is kept.
    pub restarts: usize,
    pub kappa_cap: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { seed: 0, tol: 1e-6, max_iter: 500, restarts: 10, kappa_cap: 1e4 }
    }
}

impl EmOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

struct Run {
    components: Vec<VonMisesComponent>,
    trace: Vec<f64>,
    converged: bool,
}

/// Initial means sit at `m` distinct sample points chosen relative to the
/// widest-gap anchor, so a rotated sample gets the rotated initialization.
fn initial_components(sample: &CircularSample, m: usize, rng: &mut ChaCha8Rng) -> Vec<VonMisesComponent> {
    let n = sample.len();
    let anchor = sample.largest_gap_anchor();
    let mut picks = sample_indices(rng, n, m).into_vec();
    picks.sort_unstable();
    picks
        .into_iter()
        .map(|p| VonMisesComponent {
            weight: 1.0 / m as f64,
            mu: sample.angles()[(anchor + p) % n],
            kappa: 1.0,
        })
        .collect()
}

/// One EM run from `components`; `None` when a component collapses.
fn run_em(sample: &CircularSample, mut components: Vec<VonMisesComponent>, opts: &EmOptions) -> Option<Run> {
    let angles = sample.angles();
    let n = angles.len();
    let m = components.len();
    let mut resp = vec![0.0; n * m];
    let mut buf = vec![0.0; m];
    let mut trace = Vec::new();
    let mut converged = false;

    for iter in 0..=opts.max_iter {
        // E-step on the current parameters.
        let offsets: Vec<f64> = components.iter().map(|c| c.weight.ln() - c.log_norm()).collect();
        let mut ll = 0.0;
        for (i, &theta) in angles.iter().enumerate() {
            for (j, c) in components.iter().enumerate() {
                buf[j] = c.kappa * ((theta - c.mu).cos() - 1.0) + offsets[j];
            }
            let norm = log_sum_exp(&buf);
            ll += norm;
            for j in 0..m {
                resp[i * m + j] = (buf[j] - norm).exp();
            }
        }
        let improved = trace.last().map(|&prev: &f64| ll - prev);
        trace.push(ll);
        if matches!(improved, Some(d) if d < opts.tol) {
            converged = true;
            break;
        }
        if iter == opts.max_iter {
            break;
        }

        // M-step.
        let mut weights = vec![0.0; n];
        for (j, comp) in components.iter_mut().enumerate() {
            let mut mass = 0.0;
            for i in 0..n {
                weights[i] = resp[i * m + j];
                mass += weights[i];
            }
            if mass < EMPTY_MASS {
                return None;
            }
            let mr = circular_mean_resultant(angles, Some(&weights)).ok()?;
            comp.weight = mass / n as f64;
            comp.mu = mr.mu;
            comp.kappa = kappa_from_rbar(mr.rbar, opts.kappa_cap);
        }
    }
    Some(Run { components, trace, converged })
}

fn check_size(sample: &CircularSample, m: usize) -> Result<(), FitError> {
    if m == 0 {
        return Err(FitError::NoComponents);
    }
    if sample.len() < 2 * m {
        return Err(FitError::TooSmall { m, needed: 2 * m, got: sample.len() });
    }
    Ok(())
}

/// Best-of-restarts EM fit; also returns the log-likelihood trace of the
/// winning run (one entry per E-step).
pub fn em_fit_traced(
    sample: &CircularSample,
    m: usize,
    opts: &EmOptions,
) -> Result<(VonMisesMixture, Vec<f64>), FitError> {
    check_size(sample, m)?;
    let restarts = opts.restarts.max(1);
    let max_attempts = restarts * 5;
    let mut best: Option<Run> = None;
    let mut successes = 0;
    let mut attempts = 0;
    while successes < restarts && attempts < max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(attempts as u64);
        attempts += 1;
        let init = initial_components(sample, m, &mut rng);
        let Some(run) = run_em(sample, init, opts) else {
            continue;
        };
        successes += 1;
        let better = match &best {
            None => true,
            Some(b) => run.trace.last() > b.trace.last(),
        };
        if better {
            best = Some(run);
        }
    }
    let Some(run) = best else {
        return Err(FitError::AllRestartsDegenerate { attempts });
    };
    let mut components = run.components;
    components.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.mu.total_cmp(&b.mu)));
    let mixture = VonMisesMixture {
        components,
        log_likelihood: *run.trace.last().expect("at least one E-step"),
        converged: run.converged,
        iterations: run.trace.len() - 1,
    };
    Ok((mixture, run.trace))
}

/// Fits an `m`-component von Mises mixture by EM with seeded random restarts.
///
/// Components are returned in order of decreasing weight.
pub fn em_fit(sample: &CircularSample, m: usize, opts: &EmOptions) -> Result<VonMisesMixture, FitError> {
    em_fit_traced(sample, m, opts).map(|(mix, _)| mix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circstats::{bessel_ratio, von_mises_sample};

    #[test]
    fn single_component_is_the_closed_form_mle() {
        let s = von_mises_sample(1.2, 4.0, 300, 5).unwrap();
        let fit = em_fit(&s, 1, &EmOptions::default()).unwrap();
        let mr = circular_mean_resultant(s.angles(), None).unwrap();
        let c = fit.components[0];
        assert!((c.weight - 1.0).abs() < 1e-12);
        assert!((c.mu - mr.mu).abs() < 1e-12);
        assert!((bessel_ratio(c.kappa).unwrap() - mr.rbar).abs() < 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn too_few_points() {
        let s = CircularSample::new(vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(
            em_fit(&s, 2, &EmOptions::default()).unwrap_err(),
            FitError::TooSmall { m: 2, needed: 4, got: 3 }
        );
        assert_eq!(em_fit(&s, 0, &EmOptions::default()).unwrap_err(), FitError::NoComponents);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let a = von_mises_sample(1.0, 6.0, 150, 1).unwrap();
        let b = von_mises_sample(4.0, 2.0, 100, 2).unwrap();
        let s = CircularSample::wrapped(a.angles().iter().chain(b.angles()).copied());
        for m in 1..=3 {
            let (_, trace) = em_fit_traced(&s, m, &EmOptions::with_seed(7)).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "m={m}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn stored_log_likelihood_matches_recomputation() {
        let s = von_mises_sample(3.0, 2.0, 80, 9).unwrap();
        let fit = em_fit(&s, 2, &EmOptions::with_seed(3)).unwrap();
        assert!((fit.log_likelihood - fit.log_likelihood_of(&s)).abs() < 1e-9);
        let total: f64 = fit.components.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_points_hit_the_kappa_cap() {
        let s = CircularSample::new(vec![2.0; 10]).unwrap();
        let fit = em_fit(&s, 1, &EmOptions::default()).unwrap();
        assert_eq!(fit.components[0].kappa, 1e4);
    }
}
