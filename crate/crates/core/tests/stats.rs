use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use selfsim::stats::{ks_two_sample, summarize, Estimate};
use selfsim::Error;

#[test]
fn constant_sample_has_zero_variance() {
    let s = summarize(&[4.2; 50]).unwrap();
    assert_eq!(s.variance, 0.0);
    assert_eq!(s.min, 4.2);
    assert_eq!(s.max, 4.2);
}

#[test]
fn small_sample_mean_and_median() {
    let s = summarize(&[3.0, 1.0, 2.0]).unwrap();
    assert_eq!(s.mean, 2.0);
    assert_eq!(s.variance, 1.0);
    let median = s.quantiles.iter().find(|(q, _)| *q == 0.5).unwrap().1;
    assert_eq!(median, 2.0);
}

#[test]
fn empty_sample_rejected() {
    assert!(matches!(summarize(&[]), Err(Error::EmptySample)));
}

#[test]
fn exponential_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let exp = Exp::new(2.0).unwrap();
    let samples: Vec<f64> = (0..100_000).map(|_| exp.sample(&mut rng)).collect();
    let est = Estimate::of(&samples).unwrap();
    assert!(est.within(0.5, 3.0), "{est:?}");
}

#[test]
fn ks_detects_shift_and_accepts_same_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let exp = Exp::new(1.0).unwrap();
    let a: Vec<f64> = (0..5000).map(|_| exp.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..5000).map(|_| exp.sample(&mut rng)).collect();
    let shifted: Vec<f64> = b.iter().map(|x| x + 0.1).collect();
    assert!(ks_two_sample(&a, &b, 0.01).unwrap().pass);
    assert!(!ks_two_sample(&a, &shifted, 0.01).unwrap().pass);
}

#[test]
fn ks_critical_value_at_one_percent() {
    let r = ks_two_sample(&[0.0; 10_000], &[0.0; 10_000], 0.01).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert!((r.critical_value - 1.6276 * (2.0f64 / 10_000.0).sqrt()).abs() < 1e-5);
}

proptest! {
    #[test]
    fn summary_is_ordered(samples in prop::collection::vec(-1e3..1e3f64, 1..200)) {
        let s = summarize(&samples).unwrap();
        prop_assert!(s.variance >= 0.0);
        prop_assert!(s.min <= s.mean + 1e-9 && s.mean <= s.max + 1e-9);
        for w in s.quantiles.windows(2) {
            prop_assert!(w[0].1 <= w[1].1);
        }
    }
}
