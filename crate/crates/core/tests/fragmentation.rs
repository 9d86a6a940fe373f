use proptest::prelude::*;
use rayon::prelude::*;

use selfsim::fragmentation::{
    compare_routes, levy_measure_pi, simulate_direct, simulate_direct_capped, simulate_via_levy,
    total_dissipation_samples, DislocationMeasure, EquivalenceOptions, MassPartition,
};
use selfsim::rng::derive_seed;
use selfsim::stats::Estimate;

fn binary() -> DislocationMeasure {
    DislocationMeasure::binary()
}

fn half() -> DislocationMeasure {
    DislocationMeasure::dissipative()
}

#[test]
fn dissipative_levy_measure() {
    let model = levy_measure_pi(&half()).unwrap();
    assert_eq!(model.jumps.len(), 2);
    let surviving = model.jumps.iter().find(|j| j.kill_prob == 0.0).unwrap();
    assert_eq!(surviving.displacement, vec![2f64.ln(), 0.5]);
    assert_eq!(surviving.rate, 0.5);
    let coupled = model.jumps.iter().find(|j| j.kill_prob == 1.0).unwrap();
    assert_eq!(coupled.displacement, vec![0.0, 0.5]);
    assert_eq!(coupled.rate, 0.5);
    assert!((model.total_kill_rate() - half().dissipation_rate()).abs() < 1e-15);
    assert_eq!(model.base_kill_rate, 0.0);
}

#[test]
fn rates_are_accounted_per_fragment() {
    let nu = DislocationMeasure::new(vec![(vec![0.5, 0.25], 2.0), (vec![0.6, 0.4], 1.0)], 0.0).unwrap();
    let model = levy_measure_pi(&nu).unwrap();
    // surviving jumps carry rate w·x_i, the coupled jump w·dust
    assert!((model.total_jump_rate() - (2.0 * 0.75 + 2.0 * 0.25 + 1.0)).abs() < 1e-15);
    assert!((model.total_kill_rate() - 0.5).abs() < 1e-15);
    assert!((nu.total_rate() - 3.0).abs() < 1e-15);
}

#[test]
fn partition_json_round_trip() {
    let nu = DislocationMeasure::new(vec![(vec![0.25, 0.5], 1.5)], 0.1).unwrap();
    let text = serde_json::to_string(&nu).unwrap();
    let back: DislocationMeasure = serde_json::from_str(&text).unwrap();
    assert_eq!(back, nu);
    assert!(serde_json::from_str::<MassPartition>("[0.7, 0.7]").is_err());
}

#[test]
fn binary_direct_mean_mass() {
    let values: Vec<f64> = (0..20_000u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_direct(&binary(), 0.0, 1.0, 1.0, derive_seed(40, 0, i)).unwrap();
            let state = path.state_at(1.0).unwrap();
            assert_eq!(state.dissipated, 0.0);
            state.mass
        })
        .collect();
    let est = Estimate::of(&values).unwrap();
    assert!(est.within((-0.5f64).exp(), 3.0), "{est:?}");
}

#[test]
fn binary_levy_mean_mass() {
    let values: Vec<f64> = (0..20_000u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_via_levy(&binary(), 0.0, 1.0, 1.0, derive_seed(41, 0, i)).unwrap();
            path.state_at(1.0).unwrap().mass
        })
        .collect();
    let est = Estimate::of(&values).unwrap();
    assert!(est.within((-0.5f64).exp(), 3.0), "{est:?}");
}

#[test]
fn total_dissipation_is_linear_in_mass() {
    let out = total_dissipation_samples(&half(), 0.0, 3.0, 20_000, 42).unwrap();
    assert_eq!(out.capped, 0);
    let est = Estimate::of(&out.samples).unwrap();
    assert!(est.within(2.0, 3.0), "{est:?}");
}

#[test]
fn no_dissipation_gives_zero_and_capped_count() {
    let out = total_dissipation_samples(&binary(), 0.0, 1.0, 50, 43).unwrap();
    assert!(out.samples.iter().all(|&d| d == 0.0));
    assert_eq!(out.capped, 50);
}

#[test]
fn accumulation_hits_event_cap() {
    let path = simulate_direct_capped(&binary(), -1.0, 1.0, 100.0, 3, 20).unwrap();
    assert!(path.capped());
    assert_eq!(path.event_count(), 20);
    assert!(path.end() < 100.0);
}

#[test]
fn accumulation_is_death_in_finite_time() {
    let path = simulate_direct(&binary(), -1.0, 1.0, 100.0, 3).unwrap();
    assert!(!path.capped());
    let death = path.death_time().unwrap();
    assert!(death < 100.0);
    assert!(!path.state_at(death).unwrap().alive);
}

#[test]
fn positive_alpha_is_not_capped() {
    let path = simulate_direct(&binary(), 1.0, 1.0, 20.0, 3).unwrap();
    assert!(!path.capped());
}

#[test]
fn small_equivalence_runs_rejected() {
    let opts = EquivalenceOptions::new(1.0, 1.0, 500);
    assert!(compare_routes(&binary(), 0.0, 0.0, &opts, 0).is_err());
}

#[test]
fn bad_alpha_or_mass_rejected() {
    assert!(simulate_direct(&binary(), 0.0, 0.0, 1.0, 0).is_err());
    assert!(simulate_via_levy(&binary(), f64::NAN, 1.0, 1.0, 0).is_err());
}

fn measure() -> impl Strategy<Value = DislocationMeasure> {
    (0.05..0.5f64, 0.05..0.45f64, 0.2..3.0f64, 0.0..0.5f64).prop_map(|(a, b, w, erosion)| {
        DislocationMeasure::new(vec![(vec![a, b], w), (vec![0.5], 1.0)], erosion).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn direct_paths_conserve_tagged_mass(nu in measure(), alpha in -0.5..1.0f64, x0 in 0.5..4.0f64, seed in any::<u64>()) {
        let path = simulate_direct(&nu, alpha, x0, 3.0, seed).unwrap();
        let states = path.right_states();
        for w in states.windows(2) {
            prop_assert!(w[1].dissipated >= w[0].dissipated);
            prop_assert!(w[1].mass <= w[0].mass);
        }
        let cad = path.path().unwrap();
        for (i, (l, r)) in cad.left_values().iter().zip(cad.right_values()).enumerate().skip(1) {
            if path.death_time() == Some(cad.breakpoints()[i]) {
                break;
            }
            // an event moves Y(t−)·dust into Z and keeps a fraction of the rest
            let dz = r.y - l.y;
            prop_assert!(dz >= -1e-15 && r.x <= l.x + 1e-15);
            prop_assert!(r.x + dz <= l.x * (1.0 + 1e-12));
        }
    }

    #[test]
    fn levy_route_dissipation_is_nondecreasing(nu in measure(), alpha in -0.5..1.0f64, seed in any::<u64>()) {
        let path = simulate_via_levy(&nu, alpha, 1.0, 3.0, seed).unwrap();
        for w in path.right_states().windows(2) {
            prop_assert!(w[1].dissipated >= w[0].dissipated - 1e-15);
        }
    }

    #[test]
    fn levy_route_scales_with_initial_mass(alpha in -1.0..1.0f64, x0 in 0.3..4.0f64, seed in any::<u64>()) {
        let nu = half().with_erosion(0.2).unwrap();
        let unit = simulate_via_levy(&nu, alpha, 1.0, 2.0, seed).unwrap();
        let scaled = simulate_via_levy(&nu, alpha, x0, 2.0 * x0.powf(-alpha), seed).unwrap();
        for t in [0.3, 1.0, 2.0] {
            let a = unit.state_at(t).unwrap();
            let b = scaled.state_at(t * x0.powf(-alpha)).unwrap();
            prop_assert_eq!(a.alive, b.alive);
            prop_assert!((x0 * a.mass - b.mass).abs() <= 1e-10 * b.mass.max(1.0));
            prop_assert!((x0 * a.dissipated - b.dissipated).abs() <= 1e-10 * b.dissipated.max(1.0));
        }
    }

    #[test]
    fn dissipative_half_conserves_mass_until_death(alpha in -0.5..1.0f64, erosion in 0.0..0.5f64, x0 in 0.5..3.0f64, seed in any::<u64>()) {
        let nu = half().with_erosion(erosion).unwrap();
        let path = simulate_direct(&nu, alpha, x0, 2.0, seed).unwrap();
        for s in path.right_states() {
            if s.alive {
                prop_assert!((s.mass + s.dissipated - x0).abs() <= 1e-12 * x0);
            }
        }
    }
}
