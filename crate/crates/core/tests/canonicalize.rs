use std::sync::LazyLock;

use nalgebra::Matrix2;
use proptest::prelude::*;

use selfsim::canonicalize::{
    canonicalize, classify, commutator_y0, jacobian2, verify_homomorphism, CanonicalMap, Commutativity, GroupKind,
    DEFAULT_QUAD_TOL,
};
use selfsim::domain::Domain;
use selfsim::invariance::InvarianceComponents;
use selfsim::lamperti::Psi;
use selfsim::tgroup::TPoint;
use selfsim::{scalar, Error, Point};

static FRAGMENTATION: LazyLock<CanonicalMap> =
    LazyLock::new(|| canonicalize(&InvarianceComponents::fragmentation(0.5), DEFAULT_QUAD_TOL).unwrap());

fn exp_exp_plane(power: f64) -> InvarianceComponents {
    let psi = Psi::componentwise(&Psi::exp(), &Psi::exp()).unwrap();
    InvarianceComponents::additive_plane()
        .pushforward(&psi)
        .unwrap()
        .with_c(move |y| y.x.powf(power))
}

#[test]
fn t_law_jacobian_matches_finite_differences() {
    let analytic = InvarianceComponents::t_law(1.0);
    let mut numeric = InvarianceComponents::t_law(1.0);
    numeric.jacobian2 = None;
    for y in [Point::new(0.3, -1.0), Point::new(-1.5, 0.8), Point::zeros()] {
        let a = jacobian2(&analytic, &y).unwrap();
        let n = jacobian2(&numeric, &y).unwrap();
        assert!((a - Matrix2::new(1.0, 0.0, 0.0, y.x.exp())).amax() < 1e-15);
        assert!((a - n).amax() < 1e-8, "{a} vs {n}");
    }
}

#[test]
fn pssmp_jacobian_is_multiplier() {
    let mut comps = InvarianceComponents::pssmp(0.5);
    comps.jacobian2 = None;
    let j = jacobian2(&comps, &scalar(2.5)).unwrap();
    assert!((j[(0, 0)] - 2.5).abs() < 1e-9);
    assert!((jacobian2(&comps, &comps.y0).unwrap() - Matrix2::identity()).amax() < 1e-9);
}

#[test]
fn flat_law_is_degenerate() {
    let comps = InvarianceComponents::new(
        "quintic",
        Domain::real_line(2.0),
        scalar(0.0),
        |y, x| scalar(y.x + x.x.powi(5)),
        |y, x| scalar((x.x - y.x).signum() * (x.x - y.x).abs().powf(0.2)),
        |_| 1.0,
    );
    assert!(matches!(jacobian2(&comps, &scalar(0.5)), Err(Error::Degenerate(_))));
}

#[test]
fn commutator_examples() {
    let t = InvarianceComponents::t_law(0.0);
    assert!((commutator_y0(&t).unwrap() - Point::new(0.0, 1.0)).amax() < 1e-6);
    let mut t_fd = InvarianceComponents::t_law(0.0);
    t_fd.jacobian2 = None;
    assert!((commutator_y0(&t_fd).unwrap() - Point::new(0.0, 1.0)).amax() < 1e-6);
    assert!(commutator_y0(&InvarianceComponents::additive_plane()).unwrap().amax() < 1e-12);
    let pushed = InvarianceComponents::additive_plane().pushforward(&Psi::by_name("tanh-tanh").unwrap()).unwrap();
    let class = classify(&pushed, None).unwrap();
    assert!(class.commutator_norm < class.tol_comm);
}

#[test]
fn classification_examples() {
    let cases = [
        (InvarianceComponents::t_law(1.0), Commutativity::Noncommutative),
        (InvarianceComponents::additive_plane(), Commutativity::Commutative),
        (InvarianceComponents::fragmentation(0.5), Commutativity::Noncommutative),
        (exp_exp_plane(-0.5), Commutativity::Commutative),
    ];
    for (comps, expected) in cases {
        assert_eq!(classify(&comps, None).unwrap().kind, expected, "{}", comps.name);
    }
}

#[test]
fn classification_conflict_is_reported() {
    // a noncommutative law whose bracket tolerance is forced far too high
    let comps = InvarianceComponents::t_law(0.0);
    assert!(matches!(classify(&comps, Some(1e3)), Err(Error::ClassificationConflict(_))));
}

#[test]
fn pssmp_map_is_log() {
    let g = canonicalize(&InvarianceComponents::pssmp(0.5), DEFAULT_QUAD_TOL).unwrap();
    assert_eq!(g.kind(), GroupKind::Line);
    assert!((g.alpha() - 0.5).abs() < 1e-10);
    for y in [0.05, 0.3, 1.0, 4.0, 25.0] {
        assert!((g.forward(&scalar(y)).unwrap().x - y.ln()).abs() < 1e-9, "y = {y}");
    }
    assert!(verify_homomorphism(&g, 32).unwrap().max_residual < 1e-8);
}

#[test]
fn additive_line_map_is_identity() {
    let g = canonicalize(&InvarianceComponents::additive_line(), DEFAULT_QUAD_TOL).unwrap();
    assert_eq!(g.alpha(), 0.0);
    for y in [-1.7, 0.0, 0.4] {
        assert!((g.forward(&scalar(y)).unwrap().x - y).abs() < 1e-14);
    }
    assert!(verify_homomorphism(&g, 32).unwrap().max_residual < 1e-12);
}

#[test]
fn tanh_pushforward_map_is_psi_inverse() {
    let psi = Psi::tanh_warp(1.0).unwrap();
    let comps = InvarianceComponents::from_process(&psi, 0.0, 0.0);
    let g = canonicalize(&comps, DEFAULT_QUAD_TOL).unwrap();
    for y in [-0.9, -0.3, 0.0, 0.5, 0.95] {
        let expected = psi.inverse(&scalar(y)).x;
        assert!((g.forward(&scalar(y)).unwrap().x - expected).abs() < 1e-9, "y = {y}");
    }
}

#[test]
fn commutative_exp_pushforward_matches_log_log() {
    let comps = exp_exp_plane(-0.5);
    let g = canonicalize(&comps, DEFAULT_QUAD_TOL).unwrap();
    assert_eq!(g.kind(), GroupKind::PlaneAdd);
    let m = g.m();
    for y in [Point::new(0.5, 2.0), Point::new(3.0, 0.2), Point::new(1.0, 1.0)] {
        let expected = m * Point::new(y.x.ln(), y.y.ln());
        assert!((g.forward(&y).unwrap() - expected).amax() < 1e-8, "{y:?}");
    }
    assert!(verify_homomorphism(&g, 12).unwrap().max_residual < 1e-6);
    assert!(g.alpha_consistency(12).unwrap() < 1e-6);
}

#[test]
fn t_law_map_is_identity() {
    let beta = 0.7;
    let g = canonicalize(&InvarianceComponents::t_law(beta), DEFAULT_QUAD_TOL).unwrap();
    assert_eq!(g.kind(), GroupKind::PlaneT);
    assert!((g.alpha() + beta).abs() < 1e-8);
    for y in [Point::new(0.3, -1.1), Point::new(-1.9, 1.9)] {
        assert!((g.forward(&y).unwrap() - y).amax() < 1e-8);
    }
}

#[test]
fn t_law_through_exp_map_holds_far_from_anchors() {
    let psi = Psi::componentwise(&Psi::exp(), &Psi::exp()).unwrap();
    let comps = InvarianceComponents::t_law(0.7).pushforward(&psi).unwrap();
    let g = canonicalize(&comps, DEFAULT_QUAD_TOL).unwrap();
    assert_eq!(g.kind(), GroupKind::PlaneT);
    let m = g.m();
    for y in [Point::new(8.0, 1e6), Point::new(0.1, 1e-8), Point::new(2.0, 50.0)] {
        let expected = m * Point::new(y.x.ln(), y.y.ln());
        assert!((g.forward(&y).unwrap() - expected).amax() < 1e-6, "{y:?}");
    }
    assert!(verify_homomorphism(&g, 12).unwrap().max_residual < 1e-5);
}

#[test]
fn jacobian_at_reference_is_m() {
    for comps in [InvarianceComponents::fragmentation(0.5), exp_exp_plane(-0.5), InvarianceComponents::t_law(0.2)] {
        let g = canonicalize(&comps, DEFAULT_QUAD_TOL).unwrap();
        assert!((g.jacobian(&comps.y0).unwrap() - g.m()).amax() < 1e-6, "{}", comps.name);
        assert_eq!(g.forward(&comps.y0).unwrap(), Point::zeros());
    }
}

#[test]
fn fragmentation_map_is_a_homomorphism() {
    let g = &*FRAGMENTATION;
    assert_eq!(g.kind(), GroupKind::PlaneT);
    assert!(verify_homomorphism(g, 12).unwrap().max_residual < 1e-5);
    assert!(g.alpha_consistency(12).unwrap() < 1e-6);
    assert!(g.path_independence(8).unwrap() < 1e-6);
}

#[test]
fn inverse_outside_range_fails_cleanly() {
    let g = canonicalize(&InvarianceComponents::pssmp(0.5), DEFAULT_QUAD_TOL).unwrap();
    assert!(g.inverse(&scalar(f64::NAN)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fragmentation_inverse_round_trip(y1 in 0.2..5.0f64, y2 in -2.0..2.0f64) {
        let g = &*FRAGMENTATION;
        let y = Point::new(y1, y2);
        let back = g.inverse(&g.forward(&y).unwrap()).unwrap();
        prop_assert!((back - y).amax() < 1e-8 * (1.0 + y.amax()), "{:?} -> {:?}", y, back);
    }

    #[test]
    fn fragmentation_homomorphism_at_random_pairs(
        y in (0.4..2.5f64, -1.0..1.0f64),
        z in (0.4..2.5f64, -1.0..1.0f64),
    ) {
        let g = &*FRAGMENTATION;
        let comps = g.components();
        let (y, z) = (Point::new(y.0, y.1), Point::new(z.0, z.1));
        let lhs = g.forward(&comps.f(&y, &z)).unwrap();
        let rhs: Point = TPoint::from(g.forward(&y).unwrap()).compose_unchecked(TPoint::from(g.forward(&z).unwrap())).into();
        prop_assert!((lhs - rhs).amax() < 1e-5);
    }
}
