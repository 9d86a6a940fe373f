use std::f64::consts::E;

use proptest::prelude::*;
use rayon::prelude::*;

use selfsim::levy::{simulate, CadlagPath, Diffusion, LevyModel};
use selfsim::rng::derive_seed;
use selfsim::timechange::{build_timechange, exp_integral, ExpIntegral, Lifetime};
use selfsim::{scalar, Error};

fn unit_drift(horizon: f64) -> CadlagPath {
    simulate(&LevyModel::new(1).with_drift(&[1.0]), horizon, 0).unwrap()
}

fn step_path() -> CadlagPath {
    CadlagPath::from_breakpoints(
        1,
        vec![0.0, 1.0, 2.0],
        vec![scalar(0.0), scalar(0.0), scalar(1.0)],
        vec![scalar(0.0), scalar(1.0), scalar(1.0)],
    )
    .unwrap()
}

#[test]
fn unit_drift_clock() {
    let tc = build_timechange(&unit_drift(30.0), -1.0).unwrap();
    for t in [0.1, 1.0, 5.0] {
        assert!((tc.phi(t).unwrap() - (1.0 - (-t).exp())).abs() < 1e-15);
    }
    let target = 1.0 - (-2.0f64).exp();
    assert!((tc.invert(target).unwrap() - 2.0).abs() < 1e-12);
    match tc.lifetime() {
        Lifetime::Converged { value, .. } => assert!((value - 1.0).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_alpha_is_identity_and_divergent() {
    let xi = simulate(&LevyModel::new(1).with_jump(2.0, &[0.5], 0.0), 3.0, 7).unwrap();
    let tc = build_timechange(&xi, 0.0).unwrap();
    assert_eq!(tc.phi(1.3).unwrap(), 1.3);
    assert!((tc.invert(0.7).unwrap() - 0.7).abs() < 1e-15);
    assert!(matches!(tc.lifetime(), Lifetime::Divergent { .. }));
}

#[test]
fn step_path_clock() {
    let tc = build_timechange(&step_path(), 1.0).unwrap();
    assert!((tc.phi(2.0).unwrap() - (1.0 + E)).abs() < 1e-14);
    // Riemann oracle
    let h = 1e-5;
    let riemann: f64 = (0..200_000).map(|k| (step_path().value_at((k as f64 + 0.5) * h).unwrap().alive().unwrap().x).exp() * h).sum();
    assert!((tc.phi(2.0).unwrap() - riemann).abs() < 1e-8);
}

#[test]
fn invert_beyond_total_is_error() {
    let tc = build_timechange(&step_path(), 1.0).unwrap();
    assert!(matches!(tc.invert(10.0), Err(Error::BeyondLifetime { .. })));
}

#[test]
fn killed_lifetime_is_clock_at_kill() {
    let model = LevyModel::new(1).with_drift(&[0.5]).with_kill_rate(1.0);
    let xi = (0..).map(|s| simulate(&model, 50.0, s).unwrap()).find(|p| p.is_killed()).unwrap();
    let kill = xi.kill_time().unwrap();
    let tc = build_timechange(&xi, 0.8).unwrap();
    let exact = (0.8f64 * 0.5 * kill).exp_m1() / (0.8 * 0.5);
    assert_eq!(tc.lifetime(), Lifetime::Killed(tc.total()));
    assert!((tc.total() - exact).abs() < 1e-12 * exact.max(1.0));
}

#[test]
fn prefactor_scales_exactly() {
    let xi = simulate(&LevyModel::new(1).with_jump(1.0, &[0.3], 0.0).with_drift(&[-0.2]), 4.0, 3).unwrap();
    let base = build_timechange(&xi, 0.6).unwrap();
    let scaled = build_timechange(&xi, 0.6).unwrap().with_prefactor(2.5).unwrap();
    for s in [0.3, 1.7, 4.0] {
        assert_eq!(scaled.phi(s).unwrap(), 2.5 * base.phi(s).unwrap());
    }
}

#[test]
fn integral_against_constant_xi_is_increment() {
    let eta = simulate(&LevyModel::new(1).with_jump(2.0, &[0.7], 0.0).with_drift(&[0.1]), 2.0, 9).unwrap();
    let xi = CadlagPath::constant(1, scalar(0.0), 2.0);
    let value = exp_integral(&xi, &eta, 1.3, 2.0).unwrap();
    assert!((value - (eta.end_value().x - eta.start_value().x)).abs() < 1e-14);
}

#[test]
fn integral_of_drift_against_decaying_weight() {
    let eta = unit_drift(1.0);
    let value = exp_integral(&unit_drift(1.0), &eta, -1.0, 1.0).unwrap();
    assert!((value - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
}

#[test]
fn single_jump_weighted_by_left_value() {
    let eta = CadlagPath::from_breakpoints(
        1,
        vec![0.0, 0.5, 1.0],
        vec![scalar(0.0), scalar(0.0), scalar(2.0)],
        vec![scalar(0.0), scalar(2.0), scalar(2.0)],
    )
    .unwrap();
    let value = exp_integral(&unit_drift(1.0), &eta, 1.0, 1.0).unwrap();
    assert!((value - 2.0 * 0.5f64.exp()).abs() < 1e-14);
}

#[test]
fn mismatched_axes_rejected() {
    assert!(matches!(
        exp_integral(&unit_drift(1.0), &unit_drift(2.0), 1.0, 0.5),
        Err(Error::TimeAxisMismatch(_))
    ));
}

#[test]
fn brownian_integral_is_left_point_sum() {
    let model = LevyModel::new(2)
        .with_diffusion(Diffusion::Matrix([[0.4, 0.1], [0.1, 0.3]]))
        .with_jump(1.5, &[0.3, 0.8], 0.0);
    let pair = simulate(&model, 1.0, 21).unwrap();
    let (xi, eta) = (pair.component(0), pair.component(1));
    let integral = ExpIntegral::new(&xi, &eta, 0.7).unwrap();
    let times = pair.breakpoints();
    let mut sum = 0.0;
    for i in 0..times.len() - 1 {
        let weight = (0.7 * xi.right_values()[i].x).exp();
        sum += weight * (eta.left_values()[i + 1].x - eta.right_values()[i].x);
        let jump = eta.right_values()[i + 1].x - eta.left_values()[i + 1].x;
        sum += (0.7 * xi.left_values()[i + 1].x).exp() * jump;
    }
    assert!((integral.at(1.0).unwrap() - sum).abs() < 1e-12 * (1.0 + sum.abs()));
}

#[test]
fn lifetime_of_killed_driver_is_exponential_when_alpha_zero() {
    let model = LevyModel::new(1).with_kill_rate(2.0).with_jump(1.0, &[0.5], 0.0);
    let samples: Vec<f64> = (0..20_000u64)
        .into_par_iter()
        .map(|i| {
            let xi = simulate(&model, 100.0, derive_seed(31, 0, i)).unwrap();
            build_timechange(&xi, 0.0).unwrap().lifetime().value()
        })
        .collect();
    let est = selfsim::stats::Estimate::of(&samples).unwrap();
    assert!(est.within(0.5, 3.0), "{est:?}");
}

fn driver_strategy() -> impl Strategy<Value = (LevyModel, f64, u64)> {
    (-1.0..1.0f64, 0.0..0.5f64, 0.1..3.0f64, -1.0..1.0f64, -2.0..2.0f64, any::<u64>()).prop_map(
        |(drift, var, rate, size, alpha, seed)| {
            let model = LevyModel::new(1)
                .with_drift(&[drift])
                .with_diffusion(Diffusion::Scalar(var))
                .with_jump(rate, &[size], 0.0)
                .with_grid_step(1.0 / 128.0);
            (model, alpha, seed)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clock_is_increasing_and_invertible((model, alpha, seed) in driver_strategy(), fractions in prop::collection::vec(0.0..1.0f64, 1..40)) {
        let xi = simulate(&model, 2.0, seed).unwrap();
        let tc = build_timechange(&xi, alpha).unwrap();
        prop_assert_eq!(tc.phi(0.0).unwrap(), 0.0);
        let values = tc.breakpoint_values();
        for w in values.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        for f in fractions {
            let t = f * tc.total();
            let s = tc.invert(t).unwrap();
            prop_assert!((tc.phi(s).unwrap() - t).abs() <= 1e-10 * tc.total().max(1.0));
            let s_back = tc.invert(tc.phi(2.0 * f).unwrap().min(t)).unwrap();
            prop_assert!(s_back.is_finite());
        }
    }

    #[test]
    fn integral_is_linear_in_pure_jump_eta(seed in any::<u64>(), beta in -1.5..1.5f64) {
        let xi = simulate(&LevyModel::new(1).with_drift(&[0.3]).with_jump(1.0, &[-0.5], 0.0), 2.0, seed).unwrap();
        let eta1 = simulate(&LevyModel::new(1).with_jump(2.0, &[0.4], 0.0), 2.0, seed.wrapping_add(1)).unwrap();
        let eta2 = simulate(&LevyModel::new(1).with_jump(1.0, &[-1.1], 0.0), 2.0, seed.wrapping_add(2)).unwrap();
        let merged = eta1.sum(&eta2).unwrap();
        for t in [0.5, 1.2, 2.0] {
            let whole = exp_integral(&xi, &merged, beta, t).unwrap();
            let parts = exp_integral(&xi, &eta1, beta, t).unwrap() + exp_integral(&xi, &eta2, beta, t).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole.abs()));
        }
    }
}
