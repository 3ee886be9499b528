use std::f64::consts::TAU;

use labelrefine::circstats::{
    bessel_i0, bessel_i1, circular_dip, dip_test, rao_spacing_degrees, rao_spacing_statistic, rao_spacing_test,
    von_mises_cdf, von_mises_pdf, watson_u2, CircularSample, VonMisesCdf,
};
use proptest::prelude::*;

fn angles(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..TAU, min..max)
}

/// Simpson's rule on `[0, 2pi]`.
fn simpson(f: impl Fn(f64) -> f64, steps: usize) -> f64 {
    let h = TAU / steps as f64;
    let mut s = f(0.0) + f(TAU);
    for i in 1..steps {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn pdf_integrates_to_one() {
    for kappa in [0.0, 0.5, 1.0, 5.0, 50.0] {
        let mass = simpson(|t| von_mises_pdf(t, 0.7, kappa).unwrap(), 20_000);
        assert!((mass - 1.0).abs() < 1e-8, "kappa {kappa}: {mass}");
    }
}

#[test]
fn i0_matches_integral_definition() {
    for kappa in [0.0, 0.5, 1.0, 5.0, 14.9, 15.1, 50.0, 500.0] {
        let oracle = simpson(|t| (kappa * t.cos()).exp(), 20_000) / TAU;
        let got = bessel_i0(kappa).unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-8, "kappa {kappa}: {got} vs {oracle}");
    }
}

#[test]
fn degree_scale_is_a_unit_change() {
    let s = CircularSample::new(vec![0.1, 0.4, 2.0, 3.5, 5.0]).unwrap();
    let rad = rao_spacing_statistic(s.angles());
    assert!((rao_spacing_degrees(s.angles()) - rad * 180.0 / std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn clustered_sample_is_rejected_by_rao_and_dip() {
    let points: Vec<f64> = (0..60).map(|i| if i % 2 == 0 { 1.0 } else { 4.0 } + 0.01 * (i as f64)).collect();
    let s = CircularSample::wrapped(points);
    assert!(rao_spacing_test(&s, 0.01, 999, 1).unwrap().reject);
    assert!(dip_test(&s, 0.01, 500, 1).unwrap().reject);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cdf_is_monotone_from_zero_to_one(mu in 0.0..TAU, kappa in 0.0..60.0f64) {
        let cdf = VonMisesCdf::new(mu, kappa).unwrap();
        prop_assert!(cdf.eval(0.0).abs() < 1e-9);
        prop_assert!((cdf.eval(TAU - 1e-12) - 1.0).abs() < 1e-6);
        let mut prev = 0.0;
        for i in 0..=400 {
            let v = cdf.eval(TAU * i as f64 / 400.0 - if i == 400 { 1e-12 } else { 0.0 });
            prop_assert!(v >= prev - 1e-12, "dropped at step {}", i);
            prev = v;
        }
        prop_assert!((von_mises_cdf(1.0, mu, kappa).unwrap() - cdf.eval(1.0)).abs() < 1e-15);
    }

    #[test]
    fn rao_is_rotation_invariant(xs in angles(4, 60), delta in 0.0..TAU) {
        let s = CircularSample::new(xs).unwrap();
        let a = rao_spacing_statistic(s.angles());
        let b = rao_spacing_statistic(s.rotated(delta).angles());
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn dip_is_rotation_invariant(xs in angles(4, 60), delta in 0.0..TAU) {
        let s = CircularSample::new(xs).unwrap();
        let a = circular_dip(&s).unwrap();
        let b = circular_dip(&s.rotated(delta)).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn watson_is_rotation_invariant(
        xs in angles(2, 60), mu in 0.0..TAU, kappa in 0.1..10.0f64, delta in 0.0..TAU
    ) {
        let s = CircularSample::new(xs).unwrap();
        let here = VonMisesCdf::new(mu, kappa).unwrap();
        let moved = VonMisesCdf::new((mu + delta) % TAU, kappa).unwrap();
        let a = watson_u2(&s, |t| here.eval(t), 0.01).unwrap().statistic;
        let b = watson_u2(&s.rotated(delta), |t| moved.eval(t), 0.01).unwrap().statistic;
        prop_assert!((a - b).abs() < 1e-7, "{} vs {}", a, b);
    }

    #[test]
    fn monte_carlo_p_values_are_seeded(xs in angles(4, 40), seed in any::<u64>()) {
        let s = CircularSample::new(xs).unwrap();
        prop_assert_eq!(rao_spacing_test(&s, 0.01, 99, seed).unwrap(), rao_spacing_test(&s, 0.01, 99, seed).unwrap());
        prop_assert_eq!(dip_test(&s, 0.01, 99, seed).unwrap(), dip_test(&s, 0.01, 99, seed).unwrap());
    }

    #[test]
    fn bessel_is_increasing_with_bounded_ratio(a in 0.0..700.0f64, step in 1e-3..5.0f64) {
        let b = a + step;
        prop_assert!(bessel_i0(b).unwrap() > bessel_i0(a).unwrap());
        let ratio = |k: f64| bessel_i1(k).unwrap() / bessel_i0(k).unwrap();
        let (ra, rb) = (ratio(a), ratio(b));
        prop_assert!((0.0..1.0).contains(&ra) && (0.0..1.0).contains(&rb));
        prop_assert!(rb >= ra - 1e-12, "{} then {}", ra, rb);
    }
}
