use std::f64::consts::E;

use proptest::prelude::*;

use selfsim::invariance::{check_good, check_group, star, InvarianceComponents, DEFAULT_GRID_SIZE};
use selfsim::lamperti::Psi;
use selfsim::{scalar, Error, Point};

#[test]
fn pssmp_components_are_good() {
    let report = check_good(&InvarianceComponents::pssmp(0.7), DEFAULT_GRID_SIZE, None).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(report.multiplicative_residual < 1e-12);
}

#[test]
fn process_components_are_good() {
    for (psi, alpha, beta) in [
        (Psi::exp(), 0.5, 0.0),
        (Psi::tanh_warp(1.0).unwrap(), -0.4, 0.0),
        (Psi::identity(2), 0.7, 1.0),
        (Psi::componentwise(&Psi::exp(), &Psi::exp()).unwrap(), 0.3, -0.5),
    ] {
        let components = InvarianceComponents::from_process(&psi, alpha, beta);
        let report = check_good(&components, 24, None).unwrap();
        assert!(report.pass, "{}: {report:?}", components.name);
    }
}

#[test]
fn non_multiplicative_c_fails() {
    let report = check_good(&InvarianceComponents::pssmp_bad_c(0.5), DEFAULT_GRID_SIZE, None).unwrap();
    assert!(!report.pass);
    assert!(report.multiplicative_residual >= report.tol);
}

#[test]
fn pssmp_is_a_group() {
    let report = check_group(&InvarianceComponents::pssmp(0.5), 32, None).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(report.associativity_residual < 1e-10);
    assert!(report.neutral_residual < 1e-10);
    assert!(report.inverse_residual < 1e-10);
    assert!(report.commutative);
}

#[test]
fn t_law_is_a_noncommutative_group() {
    let report = check_group(&InvarianceComponents::t_law(1.0), 24, None).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(!report.commutative);
    assert!(report.commutativity_residual > 1e-3);
}

#[test]
fn perturbed_product_is_not_associative() {
    let report = check_group(&InvarianceComponents::perturbed_product(), 24, None).unwrap();
    assert!(!report.pass);
    assert!(report.associativity_residual >= report.tol);
}

#[test]
fn fragmentation_components_form_a_group() {
    let components = InvarianceComponents::fragmentation(0.5);
    let report = check_group(&components, 24, None).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(!report.commutative);
}

#[test]
fn star_examples() {
    let pssmp = InvarianceComponents::pssmp(0.5);
    assert_eq!(star(&pssmp, &scalar(2.0), &scalar(3.0)).unwrap().x, 6.0);
    let t = InvarianceComponents::t_law(1.0);
    let out = star(&t, &Point::new(1.0, 2.0), &Point::new(3.0, 4.0)).unwrap();
    assert_eq!(out.x, 4.0);
    assert!((out.y - (2.0 + 4.0 * E)).abs() < 1e-15);
    let x = Point::new(-0.4, 1.3);
    assert_eq!(star(&t, &t.y0, &x).unwrap(), x);
}

#[test]
fn star_rejects_points_outside_domain() {
    let pssmp = InvarianceComponents::pssmp(0.5);
    assert!(matches!(star(&pssmp, &scalar(-1.0), &scalar(3.0)), Err(Error::Domain(_))));
}

#[test]
fn commutativity_flag_matches_declaration() {
    for components in [
        InvarianceComponents::pssmp(0.3),
        InvarianceComponents::additive_plane(),
        InvarianceComponents::t_law(0.0),
        InvarianceComponents::fragmentation(1.0),
        InvarianceComponents::from_process(&Psi::identity(2), 0.2, 0.0),
    ] {
        let report = check_group(&components, 16, None).unwrap();
        assert_eq!(Some(report.commutative), report.declared_commutative, "{}", components.name);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    }
}

#[test]
fn tiny_grid_rejected() {
    assert!(check_good(&InvarianceComponents::pssmp(1.0), 1, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn t_law_star_is_associative(
        a in (-2.0..2.0f64, -2.0..2.0f64),
        b in (-2.0..2.0f64, -2.0..2.0f64),
        c in (-2.0..2.0f64, -2.0..2.0f64),
    ) {
        let t = InvarianceComponents::t_law(0.5);
        let (a, b, c) = (Point::new(a.0, a.1), Point::new(b.0, b.1), Point::new(c.0, c.1));
        let left = t.f(&t.f(&a, &b), &c);
        let right = t.f(&a, &t.f(&b, &c));
        prop_assert!((left - right).amax() <= 1e-12 * (1.0 + left.amax()));
    }

    #[test]
    fn c_is_multiplicative_for_fragmentation(
        y in (0.2..5.0f64, -2.0..2.0f64),
        z in (0.2..5.0f64, -2.0..2.0f64),
        alpha in -1.0..1.0f64,
    ) {
        let frag = InvarianceComponents::fragmentation(alpha);
        let (y, z) = (Point::new(y.0, y.1), Point::new(z.0, z.1));
        let lhs = frag.c(&frag.f(&y, &z));
        let rhs = frag.c(&y) * frag.c(&z);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        prop_assert!((frag.f_inv(&y, &frag.f(&y, &z)) - z).amax() <= 1e-12 * (1.0 + z.amax()));
    }
}
