use labelrefine::circstats::{von_mises_sample, wrap_angle, CircularSample, TAU};
use labelrefine::mixture::{
    assign, em_fit, select_components, EmOptions, VonMisesComponent, VonMisesMixture,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

fn draw(model: &VonMisesMixture, n: usize, seed: u64) -> CircularSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CircularSample::wrapped(model.sample(n, &mut rng).into_iter().map(|(_, t)| t))
}

fn bedroom_like() -> VonMisesMixture {
    VonMisesMixture::from_components(vec![
        VonMisesComponent::new(0.76, 2.05, 3.85).unwrap(),
        VonMisesComponent::new(0.24, 5.94, 1.56).unwrap(),
    ])
    .unwrap()
}

/// Independent EM oracle started at the generating parameters. Bessel
/// functions by trapezoid quadrature of the integral form; kappa by bisection.
fn oracle_em(x: &[f64], mut comps: Vec<(f64, f64, f64)>) -> f64 {
    fn i_n(order: i32, k: f64) -> f64 {
        // e^{-k} I_n(k) by trapezoid on (1/pi) int_0^pi e^{k(cos t - 1)} cos(n t) dt
        let steps = 4000;
        let h = std::f64::consts::PI / steps as f64;
        let f = |t: f64| (k * (t.cos() - 1.0)).exp() * (order as f64 * t).cos();
        let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
        for i in 1..steps {
            s += f(i as f64 * h);
        }
        s * h / std::f64::consts::PI
    }
    let log_pdf =
        |t: f64, (w, mu, k): (f64, f64, f64)| w.ln() + k * ((t - mu).cos() - 1.0) - (TAU * i_n(0, k)).ln();
    let mut prev = f64::NEG_INFINITY;
    loop {
        let mut ll = 0.0;
        let mut resp = vec![[0.0; 2]; x.len()];
        for (i, &t) in x.iter().enumerate() {
            let a = log_pdf(t, comps[0]);
            let b = log_pdf(t, comps[1]);
            let m = a.max(b);
            let z = m + ((a - m).exp() + (b - m).exp()).ln();
            ll += z;
            resp[i] = [(a - z).exp(), (b - z).exp()];
        }
        if ll - prev < 1e-8 {
            return ll;
        }
        prev = ll;
        for j in 0..2 {
            let (mut n, mut c, mut s) = (0.0, 0.0, 0.0);
            for (i, &t) in x.iter().enumerate() {
                n += resp[i][j];
                c += resp[i][j] * t.cos();
                s += resp[i][j] * t.sin();
            }
            let rbar = c.hypot(s) / n;
            let (mut lo, mut hi) = (0.0, 1e4);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if i_n(1, mid) / i_n(0, mid) < rbar {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            comps[j] = (n / x.len() as f64, s.atan2(c), 0.5 * (lo + hi));
        }
    }
}

#[test]
fn fit_reaches_the_likelihood_of_a_truth_started_oracle() {
    let truth = bedroom_like();
    let start: Vec<(f64, f64, f64)> = truth.components.iter().map(|c| (c.weight, c.mu, c.kappa)).collect();
    for seed in 0..4 {
        let s = draw(&truth, 400, 100 + seed);
        let fit = em_fit(&s, 2, &EmOptions::with_seed(seed)).unwrap();
        let oracle = oracle_em(s.angles(), start.clone());
        assert!(
            fit.log_likelihood >= oracle - 1e-4,
            "seed {seed}: fit {} < oracle {}",
            fit.log_likelihood,
            oracle
        );
    }
}

#[test]
fn recovers_means_and_weights() {
    let truth = bedroom_like();
    let mut good = 0;
    for seed in 0..20 {
        let s = draw(&truth, 1000, 100 + seed);
        let fit = em_fit(&s, 2, &EmOptions::with_seed(seed)).unwrap();
        let (a, b) = (fit.components[0], fit.components[1]);
        let ok = circ_dist(a.mu, 2.05) <= 0.15
            && circ_dist(b.mu, 5.94) <= 0.3
            && (a.weight - 0.76).abs() <= 0.05
            && (a.kappa - 3.85).abs() <= 0.2 * 3.85;
        good += usize::from(ok);
    }
    assert!(good >= 16, "recovered in {good}/20 seeds");
}

#[test]
fn bimodal_sweep_bottoms_out_at_two() {
    let s = draw(&bedroom_like(), 600, 3);
    let sel = select_components(&s, 5, 10.0, &EmOptions::with_seed(3)).unwrap();
    assert_eq!(sel.record.chosen, 2);
    let min = sel.record.candidates.iter().min_by(|a, b| a.bic.total_cmp(&b.bic)).unwrap();
    assert_eq!(min.m, 2);
}

#[test]
fn separated_pair_selects_two() {
    let mut hits = 0;
    for seed in 0..20 {
        let a = von_mises_sample(1.0, 8.0, 250, 2 * seed).unwrap();
        let b = von_mises_sample(1.0 + std::f64::consts::PI, 8.0, 250, 2 * seed + 1).unwrap();
        let s = CircularSample::wrapped(a.angles().iter().chain(b.angles()).copied());
        let sel = select_components(&s, 4, 10.0, &EmOptions::with_seed(seed)).unwrap();
        hits += usize::from(sel.record.chosen == 2);
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn uniform_selects_one() {
    let mut hits = 0;
    for seed in 0..20 {
        let s = von_mises_sample(0.0, 0.0, 200, 500 + seed).unwrap();
        let sel = select_components(&s, 4, 10.0, &EmOptions::with_seed(seed)).unwrap();
        hits += usize::from(sel.record.chosen == 1);
    }
    assert!(hits >= 18, "{hits}/20");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotation_moves_fitted_means(seed in 0u64..1000, delta in 0.0f64..TAU, m in 1usize..=3) {
        let s = draw(&bedroom_like(), 120, seed);
        let opts = EmOptions::with_seed(seed);
        let base = em_fit(&s, m, &opts).unwrap();
        let turned = em_fit(&s.rotated(delta), m, &opts).unwrap();
        for (a, b) in base.components.iter().zip(&turned.components) {
            prop_assert!(circ_dist(a.mu + delta, b.mu) < 1e-6, "{} vs {}", a.mu + delta, b.mu);
            prop_assert!((a.weight - b.weight).abs() < 1e-6);
        }
    }

    #[test]
    fn em_never_decreases_likelihood(seed in 0u64..1000, m in 1usize..=3) {
        let s = draw(&bedroom_like(), 80, seed);
        let (_, trace) = labelrefine::mixture::em_fit_traced(&s, m, &EmOptions::with_seed(seed)).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn permuting_components_permutes_labels(
        mus in proptest::collection::vec(0.0f64..TAU, 3),
        kappas in proptest::collection::vec(0.1f64..20.0, 3),
        raw_w in proptest::collection::vec(0.1f64..1.0, 3),
        points in proptest::collection::vec(0.0f64..TAU, 1..40),
    ) {
        let total: f64 = raw_w.iter().sum();
        let comps: Vec<VonMisesComponent> = (0..3)
            .map(|j| VonMisesComponent::new(raw_w[j] / total, mus[j], kappas[j]).unwrap())
            .collect();
        let perm = [2usize, 0, 1];
        let model = VonMisesMixture::from_components(comps.clone()).unwrap();
        let permuted = VonMisesMixture::from_components(perm.iter().map(|&j| comps[j]).collect()).unwrap();
        let s = CircularSample::wrapped(points);
        let a = assign(&model, &s);
        let b = assign(&permuted, &s);
        for (i, (&la, &lb)) in a.labels.iter().zip(&b.labels).enumerate() {
            // Exact posterior ties could break differently; skip those.
            let p = &a.posterior[i];
            let tied = p.iter().filter(|&&x| (x - p[la]).abs() < 1e-12).count() > 1;
            if !tied {
                prop_assert_eq!(perm[lb], la);
            }
        }
    }

    #[test]
    fn posterior_rows_are_distributions(
        points in proptest::collection::vec(0.0f64..TAU, 1..60),
        seed in 0u64..100,
    ) {
        let s = draw(&bedroom_like(), 60, seed);
        let fit = em_fit(&s, 2, &EmOptions::with_seed(seed)).unwrap();
        let a = assign(&fit, &CircularSample::wrapped(points));
        for (row, &label) in a.posterior.iter().zip(&a.labels) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&p| p <= row[label]));
        }
    }

    #[test]
    fn chosen_bic_never_worse_than_previous(seed in 0u64..200) {
        let s = draw(&bedroom_like(), 150, seed);
        let sel = select_components(&s, 4, 10.0, &EmOptions::with_seed(seed)).unwrap();
        let c = &sel.record.candidates;
        let chosen = sel.record.chosen;
        if chosen > 1 {
            prop_assert!(c[chosen - 1].bic <= c[chosen - 2].bic);
        }
        for e in c {
            prop_assert_eq!(e.bic, -2.0 * e.log_likelihood + e.param_count as f64 * (e.sample_size as f64).ln());
        }
    }
}
