//! Invariance components `(f_y, c_y)` and numerical checks of the axioms
//! they must satisfy to define a group law `y ⋆ x = f_y(x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::Domain;
use crate::lamperti::Psi;
use crate::stats::halton;
use crate::tgroup::TPoint;
use crate::{scalar, Error, Point, Result};

pub type BinaryMap = Arc<dyn Fn(&Point, &Point) -> Point + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
/// `y ↦ J₂f(y, y₀)`, the Jacobian of `f` in its second argument at `y₀`.
pub type JacobianMap = Arc<dyn Fn(&Point) -> Matrix2<f64> + Send + Sync>;

pub const DEFAULT_GRID_SIZE: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Clone)]
pub struct InvarianceComponents {
    pub name: String,
    pub dim: usize,
    pub f: BinaryMap,
    /// Inverse of `f_y`: `f_inv(y, f(y, x)) = x`.
    pub f_inv: BinaryMap,
    pub c: ScalarMap,
    pub y0: Point,
    pub domain: Domain,
    pub jacobian2: Option<JacobianMap>,
    pub declared_commutative: Option<bool>,
}

impl fmt::Debug for InvarianceComponents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InvarianceComponents")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("y0", &self.y0)
            .field("domain", &self.domain)
            .field("analytic_jacobian", &self.jacobian2.is_some())
            .finish()
    }
}

impl InvarianceComponents {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        y0: Point,
        f: impl Fn(&Point, &Point) -> Point + Send + Sync + 'static,
        f_inv: impl Fn(&Point, &Point) -> Point + Send + Sync + 'static,
        c: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim: domain.dim(),
            f: Arc::new(f),
            f_inv: Arc::new(f_inv),
            c: Arc::new(c),
            y0,
            domain,
            jacobian2: None,
            declared_commutative: None,
        }
    }

    pub fn with_c(mut self, c: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.c = Arc::new(c);
        self
    }

    pub fn with_jacobian2(mut self, jac: impl Fn(&Point) -> Matrix2<f64> + Send + Sync + 'static) -> Self {
        self.jacobian2 = Some(Arc::new(jac));
        self
    }

    pub fn with_commutative(mut self, commutative: bool) -> Self {
        self.declared_commutative = Some(commutative);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn f(&self, y: &Point, x: &Point) -> Point {
        (self.f)(y, x)
    }

    pub fn f_inv(&self, y: &Point, x: &Point) -> Point {
        (self.f_inv)(y, x)
    }

    pub fn c(&self, y: &Point) -> f64 {
        (self.c)(y)
    }

    /// Multiplication on `(0, ∞)` with `c(y) = y^{−α}`.
    pub fn pssmp(alpha: f64) -> Self {
        Self::new(
            format!("pssmp(alpha={alpha})"),
            Domain::interval(0.0, f64::INFINITY, 0.1, 10.0),
            scalar(1.0),
            |y, x| scalar(y.x * x.x),
            |y, x| scalar(x.x / y.x),
            move |y| y.x.powf(-alpha),
        )
        .with_jacobian2(|y| Matrix2::new(y.x, 0.0, 0.0, 1.0))
        .with_commutative(true)
    }

    /// Addition on the line with `c ≡ 1`.
    pub fn additive_line() -> Self {
        Self::new(
            "additive-line",
            Domain::real_line(2.0),
            scalar(0.0),
            |y, x| scalar(y.x + x.x),
            |y, x| scalar(x.x - y.x),
            |_| 1.0,
        )
        .with_jacobian2(|_| Matrix2::identity())
        .with_commutative(true)
    }

    /// Addition on the plane with `c ≡ 1`.
    pub fn additive_plane() -> Self {
        Self::new("additive-plane", Domain::plane(2.0), Point::zeros(), |y, x| y + x, |y, x| x - y, |_| 1.0)
            .with_jacobian2(|_| Matrix2::identity())
            .with_commutative(true)
    }

    /// The group `T` with `c(y) = e^{β y₁}`.
    pub fn t_law(beta: f64) -> Self {
        Self::new(
            format!("t-law(beta={beta})"),
            Domain::plane(2.0),
            Point::zeros(),
            |y, x| TPoint::from(*y).compose_unchecked(TPoint::from(*x)).into(),
            |y, x| TPoint::from(*y).inverse_unchecked().compose_unchecked(TPoint::from(*x)).into(),
            move |y| (beta * y.x).exp(),
        )
        .with_jacobian2(|y| Matrix2::new(1.0, 0.0, 0.0, y.x.exp()))
        .with_commutative(false)
    }

    /// Tagged-fragment components: `f_y(x) = (y₁x₁, y₂ + y₁x₂)` on
    /// `(0, ∞) × ℝ`, with `c(y) = y₁^α`.
    pub fn fragmentation(alpha: f64) -> Self {
        let e2 = std::f64::consts::E * std::f64::consts::E;
        Self::new(
            format!("fragmentation(alpha={alpha})"),
            Domain::rectangle(
                [0.0, f64::NEG_INFINITY],
                [f64::INFINITY, f64::INFINITY],
                [1.0 / e2, -2.0],
                [e2, 2.0],
            ),
            Point::new(1.0, 0.0),
            |y, x| Point::new(y.x * x.x, y.y + y.x * x.y),
            |y, x| Point::new(x.x / y.x, (x.y - y.y) / y.x),
            move |y| y.x.powf(alpha),
        )
        .with_jacobian2(|y| Matrix2::new(y.x, 0.0, 0.0, y.x))
        .with_commutative(false)
    }

    /// Multiplication with the non-multiplicative `c(y) = y^{−α} + 1`.
    pub fn pssmp_bad_c(alpha: f64) -> Self {
        Self::pssmp(alpha)
            .with_c(move |y| y.x.powf(-alpha) + 1.0)
            .with_name(format!("pssmp-bad-c(alpha={alpha})"))
    }

    /// The non-associative law `f(y, x) = yx + 0.01` on `(0, ∞)`.
    pub fn perturbed_product() -> Self {
        Self::new(
            "perturbed-product",
            Domain::interval(0.0, f64::INFINITY, 0.1, 10.0),
            scalar(1.0),
            |y, x| scalar(y.x * x.x + 0.01),
            |y, x| scalar((x.x - 0.01) / y.x),
            |_| 1.0,
        )
    }

    /// Components of the process `X_y(t) = y ⋆ L(φ_y⁻¹(t))` built from `ψ`,
    /// `α` and (in dimension 2) `β`: the law is `ψ` of translation or of the
    /// `β`-twisted `T` law, and `c_y = e^{−α π₁(ψ⁻¹(y))}`.
    pub fn from_process(psi: &Psi, alpha: f64, beta: f64) -> Self {
        let (p1, p2, p3) = (psi.clone(), psi.clone(), psi.clone());
        let dim = psi.dim();
        let y0 = psi.forward(&Point::zeros());
        let name = format!("process(psi={}, alpha={alpha}, beta={beta})", psi.name());
        if dim == 1 {
            Self::new(
                name,
                psi.domain().clone(),
                y0,
                move |y, x| p1.forward(&(p1.inverse(y) + p1.inverse(x))),
                move |y, x| p2.forward(&(p2.inverse(x) - p2.inverse(y))),
                move |y| (-alpha * p3.inverse(y).x).exp(),
            )
            .with_commutative(true)
        } else {
            Self::new(
                name,
                psi.domain().clone(),
                y0,
                move |y, x| {
                    let (u, v) = (p1.inverse(y), p1.inverse(x));
                    p1.forward(&Point::new(u.x + v.x, u.y + (beta * u.x).exp() * v.y))
                },
                move |y, x| {
                    let (u, w) = (p2.inverse(y), p2.inverse(x));
                    p2.forward(&Point::new(w.x - u.x, (-beta * u.x).exp() * (w.y - u.y)))
                },
                move |y| (-alpha * p3.inverse(y).x).exp(),
            )
            .with_commutative(beta == 0.0)
        }
    }

    /// Transports the components through `ψ`: `f^ψ(y, x) = ψ(f(ψ⁻¹y, ψ⁻¹x))`.
    pub fn pushforward(&self, psi: &Psi) -> Result<Self> {
        if psi.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "psi has dim {} but the components have dim {}",
                psi.dim(),
                self.dim
            )));
        }
        let (f, f_inv, c) = (self.f.clone(), self.f_inv.clone(), self.c.clone());
        let (p1, p2, p3) = (psi.clone(), psi.clone(), psi.clone());
        let mut out = Self::new(
            format!("{} pushed through {}", self.name, psi.name()),
            psi.domain().clone(),
            psi.forward(&self.y0),
            move |y, x| p1.forward(&f(&p1.inverse(y), &p1.inverse(x))),
            move |y, x| p2.forward(&f_inv(&p2.inverse(y), &p2.inverse(x))),
            move |y| c(&p3.inverse(y)),
        );
        out.declared_commutative = self.declared_commutative;
        Ok(out)
    }
}

/// `y ⋆ x = f_y(x)`.
pub fn star(components: &InvarianceComponents, y: &Point, x: &Point) -> Result<Point> {
    for (label, p) in [("y", y), ("x", x)] {
        if !components.domain.contains(p) {
            return Err(Error::Domain(format!("{label} = {p:?} is not in {}", components.domain.name())));
        }
    }
    Ok(components.f(y, x))
}

/// Deterministic Halton points inside the domain's sampling box; returns the
/// points inside the domain and the number skipped.
pub fn grid_points(domain: &Domain, count: usize) -> (Vec<Point>, usize) {
    let (lo, hi) = domain.sample_box();
    let dims = domain.dim();
    let mut points = Vec::with_capacity(count);
    let mut skipped = 0;
    for k in 0..count as u64 {
        let u = halton(k, dims);
        let mut p = Point::zeros();
        for d in 0..dims {
            p[d] = lo[d] + u[d] * (hi[d] - lo[d]);
        }
        if domain.contains(&p) {
            points.push(p);
        } else {
            skipped += 1;
        }
    }
    (points, skipped)
}

/// Deterministic Halton triples inside the domain.
fn grid_triples(domain: &Domain, count: usize) -> (Vec<[Point; 3]>, usize) {
    let (lo, hi) = domain.sample_box();
    let dims = domain.dim();
    let mut triples = Vec::with_capacity(count);
    let mut skipped = 0;
    for k in 0..count as u64 {
        let u = halton(k, 3 * dims);
        let mut t = [Point::zeros(); 3];
        for (j, p) in t.iter_mut().enumerate() {
            for d in 0..dims {
                p[d] = lo[d] + u[j * dims + d] * (hi[d] - lo[d]);
            }
        }
        if t.iter().all(|p| domain.contains(p)) {
            triples.push(t);
        } else {
            skipped += 1;
        }
    }
    (triples, skipped)
}

/// `‖a − b‖∞ / max(1, ‖b‖∞)`, infinite when either side is not finite.
pub(crate) fn rel_residual(a: &Point, b: &Point) -> f64 {
    let scale = b.amax().max(1.0);
    let r = (a - b).amax() / scale;
    if r.is_finite() {
        r
    } else {
        f64::INFINITY
    }
}

fn rel_scalar(a: f64, b: f64) -> f64 {
    let r = (a - b).abs() / b.abs().max(1.0);
    if r.is_finite() {
        r
    } else {
        f64::INFINITY
    }
}

fn max_of(values: impl ParallelIterator<Item = f64>) -> f64 {
    values.reduce(|| 0.0, f64::max)
}

/// Residuals of the good-component axioms.
#[derive(Clone, Debug, Serialize)]
pub struct GoodReport {
    pub identity_residual: f64,
    pub unit_residual: f64,
    pub multiplicative_residual: f64,
    pub inverse_consistency: f64,
    pub min_c: f64,
    pub points: usize,
    pub pairs: usize,
    pub skipped: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Default tolerance `1e−7 · max(1, diameter)` of the sampling box.
pub fn default_tol(components: &InvarianceComponents) -> f64 {
    DEFAULT_TOL * components.domain.diameter().max(1.0)
}

/// Checks `f(y₀, ·) = id`, `c(y₀) = 1` and `c(f(y, z)) = c(y) c(z)` on a
/// Halton grid. Residuals are relative to `max(1, |reference|)`.
pub fn check_good(components: &InvarianceComponents, grid_size: usize, tol: Option<f64>) -> Result<GoodReport> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid_size must be at least 2".into()));
    }
    let tol = tol.unwrap_or_else(|| default_tol(components));
    let (points, mut skipped) = grid_points(&components.domain, grid_size);
    let y0 = components.y0;
    let identity_residual = max_of(points.par_iter().map(|x| rel_residual(&components.f(&y0, x), x)));
    let unit_residual = rel_scalar(components.c(&y0), 1.0);
    let min_c = points.iter().map(|p| components.c(p)).fold(f64::INFINITY, f64::min);
    let inverse_consistency = max_of(points.par_iter().flat_map_iter(|y| {
        points
            .iter()
            .map(move |x| rel_residual(&components.f_inv(y, &components.f(y, x)), x))
    }));
    let pair_results: Vec<Option<f64>> = points
        .par_iter()
        .flat_map_iter(|y| {
            points.iter().map(move |z| {
                let yz = components.f(y, z);
                if !components.domain.contains(&yz) {
                    return None;
                }
                Some(rel_scalar(components.c(&yz), components.c(y) * components.c(z)))
            })
        })
        .collect();
    skipped += pair_results.iter().filter(|r| r.is_none()).count();
    let multiplicative_residual = pair_results.iter().flatten().fold(0.0, |m: f64, &r| m.max(r));
    let pass = identity_residual < tol
        && unit_residual < tol
        && multiplicative_residual < tol
        && min_c > 0.0
        && !points.is_empty();
    Ok(GoodReport {
        identity_residual,
        unit_residual,
        multiplicative_residual,
        inverse_consistency,
        min_c,
        points: points.len(),
        pairs: pair_results.len(),
        skipped,
        tol,
        pass,
    })
}

/// Residuals of the group axioms for `y ⋆ x = f_y(x)`.
#[derive(Clone, Debug, Serialize)]
pub struct GroupReport {
    pub associativity_residual: f64,
    pub neutral_residual: f64,
    pub inverse_residual: f64,
    pub commutativity_residual: f64,
    pub commutative: bool,
    pub declared_commutative: Option<bool>,
    pub triples: usize,
    pub pairs: usize,
    pub skipped: usize,
    pub tol: f64,
    pub good_precondition: bool,
    pub warnings: Vec<String>,
    pub pass: bool,
}

/// Checks associativity, the neutral element `y₀`, inverses
/// `f(y, f_inv(y, y₀)) = y₀`, and measures commutativity.
pub fn check_group(components: &InvarianceComponents, grid_size: usize, tol: Option<f64>) -> Result<GroupReport> {
    let good = check_good(components, grid_size, tol)?;
    let tol = good.tol;
    let mut warnings = Vec::new();
    if !good.pass {
        warnings.push("components are not good; group residuals may be meaningless".to_string());
    }
    let domain = &components.domain;
    let (points, mut skipped) = grid_points(domain, grid_size);
    let (triples, skipped_triples) = grid_triples(domain, grid_size * grid_size);
    skipped += skipped_triples;
    let y0 = components.y0;
    let assoc: Vec<Option<f64>> = triples
        .par_iter()
        .map(|[a, b, c]| {
            let ab = components.f(a, b);
            let bc = components.f(b, c);
            if !domain.contains(&ab) || !domain.contains(&bc) {
                return None;
            }
            Some(rel_residual(&components.f(&ab, c), &components.f(a, &bc)))
        })
        .collect();
    skipped += assoc.iter().filter(|r| r.is_none()).count();
    let associativity_residual = assoc.iter().flatten().fold(0.0, |m: f64, &r| m.max(r));
    let neutral_residual = max_of(points.par_iter().map(|y| rel_residual(&components.f(y, &y0), y)));
    let inverse_residual = max_of(points.par_iter().map(|y| {
        let inv = components.f_inv(y, &y0);
        if !domain.contains(&inv) {
            return f64::INFINITY;
        }
        rel_residual(&components.f(y, &inv), &y0)
    }));
    let commutativity_residual = max_of(points.par_iter().flat_map_iter(|y| {
        points
            .iter()
            .map(move |z| rel_residual(&components.f(y, z), &components.f(z, y)))
    }));
    let commutative = commutativity_residual < tol;
    if let Some(declared) = components.declared_commutative {
        if declared != commutative {
            warnings.push(format!(
                "declared commutative = {declared} but the grid residual is {commutativity_residual:e}"
            ));
        }
    }
    let declared_ok = components.declared_commutative.is_none_or(|d| d == commutative);
    let pass = associativity_residual < tol && neutral_residual < tol && inverse_residual < tol && declared_ok;
    Ok(GroupReport {
        associativity_residual,
        neutral_residual,
        inverse_residual,
        commutativity_residual,
        commutative,
        declared_commutative: components.declared_commutative,
        triples: assoc.len(),
        pairs: points.len() * points.len(),
        skipped,
        tol,
        good_precondition: good.pass,
        warnings,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_examples() {
        let p = InvarianceComponents::pssmp(0.5);
        assert_eq!(star(&p, &scalar(2.0), &scalar(3.0)).unwrap().x, 6.0);
        let t = InvarianceComponents::t_law(1.0);
        let r = star(&t, &Point::new(1.0, 2.0), &Point::new(3.0, 4.0)).unwrap();
        assert_eq!(r, Point::new(4.0, 2.0 + 4.0 * std::f64::consts::E));
        let x = Point::new(-0.3, 1.7);
        assert_eq!(star(&t, &t.y0, &x).unwrap(), x);
    }

    #[test]
    fn star_rejects_points_outside() {
        let p = InvarianceComponents::pssmp(0.5);
        assert!(matches!(star(&p, &scalar(-1.0), &scalar(3.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn pssmp_group_residuals_tiny() {
        let report = check_group(&InvarianceComponents::pssmp(0.5), 32, Some(1e-7)).unwrap();
        assert!(report.pass);
        assert!(report.associativity_residual < 1e-10);
        assert!(report.commutative);
    }

    #[test]
    fn grid_skips_points_outside() {
        let domain = Domain::region("disc", |p| p.norm() < 1.0, [-1.0, -1.0], [1.0, 1.0]);
        let (pts, skipped) = grid_points(&domain, 100);
        assert_eq!(pts.len() + skipped, 100);
        assert!(skipped > 10);
    }
}
