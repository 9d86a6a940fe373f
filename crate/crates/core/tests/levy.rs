use proptest::prelude::*;
use rayon::prelude::*;

use selfsim::levy::{simulate, CadlagPath, Diffusion, LevyModel, PathValue};
use selfsim::rng::derive_seed;
use selfsim::stats::{ks_two_sample, Estimate};
use selfsim::{scalar, Error, Point};

fn alive(v: PathValue) -> Point {
    v.alive().expect("alive")
}

#[test]
fn pure_drift_is_linear() {
    let path = simulate(&LevyModel::new(1).with_drift(&[1.0]), 2.0, 1).unwrap();
    assert_eq!(path.breakpoints(), &[0.0, 2.0]);
    assert_eq!(alive(path.value_at(0.5).unwrap()).x, 0.5);
    assert_eq!(path.left_value_at(1.0).unwrap().x, 1.0);
    assert_eq!(path.end_value().x, 2.0);
}

#[test]
fn compound_poisson_mean() {
    let model = LevyModel::new(1).with_jump(1.0, &[1.0], 0.0);
    let values: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| alive(simulate(&model, 1.0, derive_seed(11, 0, i)).unwrap().value_at(1.0).unwrap()).x)
        .collect();
    let est = Estimate::of(&values).unwrap();
    assert!(est.within(1.0, 3.0), "{est:?}");
}

#[test]
fn killed_fraction_matches_exponential_survival() {
    let model = LevyModel::new(1).with_kill_rate(2.0);
    let killed: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate(&model, 1.0, derive_seed(12, 0, i)).unwrap();
            f64::from(u8::from(path.is_killed()))
        })
        .collect();
    let est = Estimate::of(&killed).unwrap();
    assert!(est.within(1.0 - (-2.0f64).exp(), 3.0), "{est:?}");
}

#[test]
fn evaluation_at_jump_is_right_limit() {
    let path = CadlagPath::from_breakpoints(
        1,
        vec![0.0, 1.0, 2.0],
        vec![scalar(0.0), scalar(0.0), scalar(3.0)],
        vec![scalar(0.0), scalar(3.0), scalar(3.0)],
    )
    .unwrap();
    assert_eq!(alive(path.value_at(1.0).unwrap()).x, 3.0);
    assert_eq!(path.left_value_at(1.0).unwrap().x, 0.0);
    assert_eq!(path.left_value_at(1.5).unwrap().x, alive(path.value_at(1.5).unwrap()).x);
    assert_eq!(path.jump_count(), 1);
}

#[test]
fn past_kill_is_cemetery() {
    let path = simulate(&LevyModel::new(1).with_kill_rate(50.0), 10.0, 3).unwrap();
    let kill = path.kill_time().expect("killed");
    assert!(path.value_at(kill).unwrap().is_cemetery());
    assert!(path.value_at(kill + 1.0).unwrap().is_cemetery());
    assert!(matches!(path.left_value_at(0.0), Err(Error::NoLeftLimit)));
}

#[test]
fn non_psd_diffusion_rejected() {
    let model = LevyModel::new(2).with_diffusion(Diffusion::Matrix([[1.0, 2.0], [2.0, 1.0]]));
    assert!(matches!(simulate(&model, 1.0, 0), Err(Error::Model(_))));
}

#[test]
fn csv_rows_for_jumps_and_kill() {
    let model = LevyModel::new(1).with_jump(3.0, &[1.0], 0.0).with_kill_rate(1.0);
    let path = (0..)
        .map(|s| simulate(&model, 5.0, s).unwrap())
        .find(|p| p.is_killed() && p.jump_count() > 0)
        .unwrap();
    let mut buf = Vec::new();
    path.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x0,is_jump,killed");
    assert_eq!(lines.len(), 1 + path.breakpoints().len() + path.jump_count() + 1);
    assert!(lines.last().unwrap().ends_with(",,0,1"));
}

#[test]
fn csv_floats_round_trip() {
    let model = LevyModel::new(1).with_diffusion(Diffusion::Scalar(1.0)).with_grid_step(0.1);
    let path = simulate(&model, 1.0, 4).unwrap();
    let mut buf = Vec::new();
    path.write_csv(&mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    for (row, expected) in reader.records().zip(path.right_values()) {
        let value: f64 = row.unwrap()[1].parse().unwrap();
        assert_eq!(value, expected.x);
    }
}

#[test]
fn increments_are_stationary() {
    let model = LevyModel::new(1)
        .with_drift(&[0.3])
        .with_diffusion(Diffusion::Scalar(0.5))
        .with_jump(2.0, &[-0.4], 0.0);
    let (t, s) = (0.7, 0.5);
    let shifted: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let p = simulate(&model, t + s, derive_seed(13, 0, i)).unwrap();
            alive(p.value_at(t + s).unwrap()).x - alive(p.value_at(t).unwrap()).x
        })
        .collect();
    let fresh: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| alive(simulate(&model, s, derive_seed(13, 1, i)).unwrap().value_at(s).unwrap()).x)
        .collect();
    let ks = ks_two_sample(&shifted, &fresh, 0.01).unwrap();
    assert!(ks.pass, "{ks:?}");
}

#[test]
fn model_laplace_exponent_of_drift_and_kill() {
    let model = LevyModel::new(1).with_drift(&[2.0]).with_kill_rate(0.5);
    assert!((model.laplace_exponent(1.5) - (3.0 + 0.5)).abs() < 1e-15);
}

fn model_strategy() -> impl Strategy<Value = LevyModel> {
    (
        -1.0..1.0f64,
        0.0..0.5f64,
        0.1..3.0f64,
        -1.0..1.0f64,
        0.0..0.5f64,
        0.0..1.0f64,
    )
        .prop_map(|(drift, var, rate, size, kill_prob, kill)| {
            LevyModel::new(1)
                .with_drift(&[drift])
                .with_diffusion(Diffusion::Scalar(var))
                .with_jump(rate, &[size], kill_prob)
                .with_kill_rate(kill)
                .with_grid_step(1.0 / 64.0)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulation_is_deterministic(model in model_strategy(), seed in any::<u64>()) {
        let a = simulate(&model, 3.0, seed).unwrap();
        let b = simulate(&model, 3.0, seed).unwrap();
        prop_assert_eq!(a.breakpoints(), b.breakpoints());
        prop_assert_eq!(a.right_values(), b.right_values());
        prop_assert_eq!(a.kill_time(), b.kill_time());
    }

    #[test]
    fn segments_are_continuous(model in model_strategy(), seed in any::<u64>()) {
        let p = simulate(&model, 3.0, seed).unwrap();
        let t = p.breakpoints();
        prop_assert_eq!(t[0], 0.0);
        for i in 0..t.len() - 1 {
            prop_assert!(t[i + 1] > t[i]);
            let end = p.right_values()[i] + p.slopes()[i] * (t[i + 1] - t[i]);
            prop_assert!((end - p.left_values()[i + 1]).amax() <= 1e-12 * (1.0 + end.amax()));
        }
        if let Some(kill) = p.kill_time() {
            prop_assert_eq!(kill, *t.last().unwrap());
        }
    }

    #[test]
    fn horizons_are_prefix_consistent(model in model_strategy(), seed in any::<u64>()) {
        let short = simulate(&model, 1.0, seed).unwrap();
        let long = simulate(&model, 2.0, seed).unwrap();
        for s in [0.1, 0.35, 0.8, 1.0] {
            match (short.value_at(s).unwrap(), long.value_at(s).unwrap()) {
                (PathValue::Alive(a), PathValue::Alive(b)) => prop_assert!((a - b).amax() < 1e-12),
                (a, b) => prop_assert_eq!(a.is_cemetery(), b.is_cemetery()),
            }
        }
    }

    #[test]
    fn raising_kill_rate_never_delays_kill(model in model_strategy(), extra in 0.0..3.0f64, seed in any::<u64>()) {
        let base = simulate(&model, 5.0, seed).unwrap();
        let more = model.clone().with_kill_rate(model.base_kill_rate + extra);
        let faster = simulate(&more, 5.0, seed).unwrap();
        let k = |p: &CadlagPath| p.kill_time().unwrap_or(f64::INFINITY);
        prop_assert!(k(&faster) <= k(&base));
    }
}
