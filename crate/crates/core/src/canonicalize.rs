//! The canonical diffeomorphism `g` and index `α` of good invariance
//! components.
//!
//! In dimension 1, `g(y) = ∫_{y₀}^y dz / ∂₂f(z, y₀)` maps `(E, ⋆)` onto
//! `(ℝ, +)`. In dimension 2 the group is either commutative, and
//! `g = ∫ M J₂f(γ, y₀)⁻¹ dγ` maps it onto `(ℝ², +)`, or not, and the
//! weighted pair `g₁ = ∫ π₁(M J₂f⁻¹ dγ)`, `g₂ = ∫ e^{g₁(γ)} π₂(M J₂f⁻¹ dγ)`
//! maps it onto `(ℝ², T)`. The index is `α = −log c(g⁻¹(e₁))`.

use std::cell::RefCell;
use std::collections::BinaryHeap;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::invariance::{grid_points, InvarianceComponents};
use crate::quadrature::{gk15, integrate};
use crate::tgroup::TPoint;
use crate::{scalar, Error, Point, Result};

pub const DEFAULT_QUAD_TOL: f64 = 1e-11;
const MAX_PANELS: usize = 4000;
const SEGMENT_CHECKS: usize = 64;
const ANCHORS_PER_DIM_1D: usize = 17;
const ANCHORS_PER_DIM_2D: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroupKind {
    Line,
    PlaneAdd,
    PlaneT,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Commutativity {
    Commutative,
    Noncommutative,
}

fn eps_root(power: f64) -> f64 {
    f64::EPSILON.powf(power)
}

/// Central difference `(F(x + h) − F(x − h)) / (2h)` along coordinate `k`,
/// with the step rounded so that `x ± h` is exact.
fn central_step(x: &Point, k: usize, power: f64) -> (Point, Point, f64) {
    let h = eps_root(power) * x[k].abs().max(1.0);
    let mut plus = *x;
    let mut minus = *x;
    plus[k] += h;
    minus[k] -= h;
    (plus, minus, plus[k] - minus[k])
}

fn check_jacobian(j: Matrix2<f64>, y: &Point) -> Result<Matrix2<f64>> {
    let scale = j.amax().max(1.0);
    let det = j.determinant();
    if !(det.abs() >= 1e-12 * scale * scale) {
        return Err(Error::Degenerate(format!("J2f({y:?}, y0) has determinant {det:e}")));
    }
    Ok(j)
}

/// `J₂f(y, y₀)`: analytic when supplied, otherwise central differences in
/// the second argument. In dimension 1 the derivative sits at entry (0, 0)
/// and entry (1, 1) is 1.
pub fn jacobian2(components: &InvarianceComponents, y: &Point) -> Result<Matrix2<f64>> {
    if !components.domain.contains(y) {
        return Err(Error::Domain(format!("{y:?} is not in {}", components.domain.name())));
    }
    if let Some(jac) = &components.jacobian2 {
        return check_jacobian(jac(y), y);
    }
    let y0 = components.y0;
    let mut j = Matrix2::identity();
    for k in 0..components.dim {
        let (plus, minus, width) = central_step(&y0, k, 1.0 / 3.0);
        let col = (components.f(y, &plus) - components.f(y, &minus)) / width;
        for r in 0..components.dim {
            j[(r, k)] = col[r];
        }
    }
    check_jacobian(j, y)
}

/// The Lie bracket `Y₀ = ∂_{y₁}[J₂f(y, y₀) e₂] − ∂_{y₂}[J₂f(y, y₀) e₁]` at
/// `y = y₀`, together with the largest mixed second derivative (the scale
/// used by the classification tolerance).
pub fn commutator_with_scale(components: &InvarianceComponents) -> Result<(Point, f64)> {
    if components.dim != 2 {
        return Err(Error::InvalidArgument("the commutator needs dimension 2".into()));
    }
    let y0 = components.y0;
    // mixed[a][b] = ∂²f / ∂y_a ∂x_b at (y0, y0)
    let mut mixed = [[Point::zeros(); 2]; 2];
    if let Some(jac) = &components.jacobian2 {
        for a in 0..2 {
            let (plus, minus, width) = central_step(&y0, a, 1.0 / 3.0);
            let d = (jac(&plus) - jac(&minus)) / width;
            for b in 0..2 {
                mixed[a][b] = Point::new(d[(0, b)], d[(1, b)]);
            }
        }
    } else {
        for a in 0..2 {
            let (ya_p, ya_m, wa) = central_step(&y0, a, 0.25);
            for b in 0..2 {
                let (xb_p, xb_m, wb) = central_step(&y0, b, 0.25);
                let value = components.f(&ya_p, &xb_p) - components.f(&ya_p, &xb_m) - components.f(&ya_m, &xb_p)
                    + components.f(&ya_m, &xb_m);
                mixed[a][b] = value / (wa * wb);
            }
        }
    }
    let scale = mixed.iter().flatten().map(|p| p.amax()).fold(0.0, f64::max);
    Ok((mixed[0][1] - mixed[1][0], scale))
}

pub fn commutator_y0(components: &InvarianceComponents) -> Result<Point> {
    Ok(commutator_with_scale(components)?.0)
}

/// Gradient of `c` at `y₀` by central differences.
pub fn grad_c_y0(components: &InvarianceComponents) -> Point {
    let y0 = components.y0;
    let mut g = Point::zeros();
    for k in 0..components.dim {
        let (plus, minus, width) = central_step(&y0, k, 1.0 / 3.0);
        g[k] = (components.c(&plus) - components.c(&minus)) / width;
    }
    g
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub kind: Commutativity,
    pub commutator: [f64; 2],
    pub commutator_norm: f64,
    pub tol_comm: f64,
    pub grid_residual: f64,
}

/// Commutative iff `‖Y₀‖ < tol_comm` (default `1e−5 · max(1, mixed scale)`),
/// cross-checked against `max |f(y, z) − f(z, y)|` on a grid.
pub fn classify(components: &InvarianceComponents, tol_comm: Option<f64>) -> Result<Classification> {
    let (y0, scale) = commutator_with_scale(components)?;
    let tol = tol_comm.unwrap_or(1e-5 * scale.max(1.0));
    let norm = y0.norm();
    let (points, _) = grid_points(&components.domain, 16);
    let grid_residual = points
        .iter()
        .flat_map(|y| {
            points
                .iter()
                .map(move |z| crate::invariance::rel_residual(&components.f(y, z), &components.f(z, y)))
        })
        .fold(0.0, f64::max);
    let by_bracket = norm < tol;
    let by_grid = grid_residual < 1e-8 * components.domain.diameter().max(1.0);
    if by_bracket != by_grid {
        return Err(Error::ClassificationConflict(format!(
            "commutator norm {norm:e} (tol {tol:e}) disagrees with grid residual {grid_residual:e}"
        )));
    }
    Ok(Classification {
        kind: if by_bracket { Commutativity::Commutative } else { Commutativity::Noncommutative },
        commutator: [y0.x, y0.y],
        commutator_norm: norm,
        tol_comm: tol,
        grid_residual,
    })
}

const WEIGHTED_DEPTH: usize = 6;
/// Relative tolerance of the partition that resolves `ω₂`.
const PARTITION_REL_TOL: f64 = 1e-8;

/// `∫_a^b e^{g₁(s)} ω₂(s) ds` with `g₁(s) = g₁(a) + ∫_a^s ω₁`, by GK15 with
/// bisection. The depth is bounded because finite-difference Jacobians put a
/// noise floor under the error estimate.
fn weighted_panel(omega: &dyn Fn(f64) -> Point, a: f64, b: f64, g1_a: f64, tol: f64, depth: usize) -> f64 {
    let g1 = |s: f64| if s == a { g1_a } else { g1_a + gk15(&mut |u| [omega(u).x], a, s).0[0] };
    let (value, error) = gk15(&mut |s| [g1(s).exp() * omega(s).y], a, b);
    if error <= tol * (b - a) || depth == 0 {
        return value[0];
    }
    let mid = 0.5 * (a + b);
    weighted_panel(omega, a, mid, g1_a, tol, depth - 1) + weighted_panel(omega, mid, b, g1(mid), tol, depth - 1)
}

/// The canonical map with its forward table.
#[derive(Clone, Debug)]
pub struct CanonicalMap {
    kind: GroupKind,
    components: InvarianceComponents,
    alpha: f64,
    m: Matrix2<f64>,
    grad_c: Option<Point>,
    commutator: Option<Point>,
    quad_tol: f64,
    anchors: Vec<(Point, Point)>,
}

/// Report fields of a [`CanonicalMap`].
#[derive(Clone, Debug, Serialize)]
pub struct CanonicalSummary {
    pub kind: GroupKind,
    pub alpha: f64,
    pub m: [[f64; 2]; 2],
    pub grad_c_y0: Option<[f64; 2]>,
    pub commutator_y0: Option<[f64; 2]>,
    pub quad_tol: f64,
}

struct ErrorSlot(RefCell<Option<Error>>);

impl ErrorSlot {
    fn new() -> Self {
        Self(RefCell::new(None))
    }

    fn record(&self, e: Error) {
        let mut slot = self.0.borrow_mut();
        if slot.is_none() {
            *slot = Some(e);
        }
    }

    fn finish<T>(self, value: T) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

impl CanonicalMap {
    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m(&self) -> Matrix2<f64> {
        self.m
    }

    pub fn grad_c_y0(&self) -> Option<Point> {
        self.grad_c
    }

    pub fn commutator_y0(&self) -> Option<Point> {
        self.commutator
    }

    pub fn components(&self) -> &InvarianceComponents {
        &self.components
    }

    pub fn summary(&self) -> CanonicalSummary {
        CanonicalSummary {
            kind: self.kind,
            alpha: self.alpha,
            m: [[self.m[(0, 0)], self.m[(0, 1)]], [self.m[(1, 0)], self.m[(1, 1)]]],
            grad_c_y0: self.grad_c.map(|p| [p.x, p.y]),
            commutator_y0: self.commutator.map(|p| [p.x, p.y]),
            quad_tol: self.quad_tol,
        }
    }

    /// The target group law.
    pub fn combine(&self, a: &Point, b: &Point) -> Point {
        match self.kind {
            GroupKind::Line | GroupKind::PlaneAdd => a + b,
            GroupKind::PlaneT => TPoint::from(*a).compose_unchecked(TPoint::from(*b)).into(),
        }
    }

    /// `M · J₂f(p, y₀)⁻¹ · v` (dimension 2) or `v / ∂₂f(p, y₀)` (dimension 1).
    fn form(&self, p: &Point, v: &Point) -> Result<Point> {
        let j = jacobian2(&self.components, p)?;
        if self.components.dim == 1 {
            return Ok(scalar(v.x / j[(0, 0)]));
        }
        let w = j
            .lu()
            .solve(v)
            .ok_or_else(|| Error::Degenerate(format!("J2f({p:?}, y0) is singular")))?;
        Ok(self.m * w)
    }

    /// Increment of `g` along the straight segment `a → b`, given `g(a)`.
    fn integrate_segment(&self, a: &Point, ga: &Point, b: &Point) -> Result<Point> {
        let dir = b - a;
        if dir == Point::zeros() {
            return Ok(*ga);
        }
        let slot = ErrorSlot::new();
        let omega = |s: f64| -> Point {
            match self.form(&(a + dir * s), &dir) {
                Ok(w) => w,
                Err(e) => {
                    slot.record(e);
                    Point::new(f64::NAN, f64::NAN)
                }
            }
        };
        let tol = self.quad_tol;
        let result = match self.kind {
            GroupKind::Line => {
                let sign_ok = RefCell::new(true);
                let r = integrate(
                    |s| {
                        let w = omega(s).x;
                        if !(w * dir.x > 0.0) {
                            *sign_ok.borrow_mut() = false;
                        }
                        [w]
                    },
                    0.0,
                    1.0,
                    tol,
                    MAX_PANELS,
                );
                if !sign_ok.into_inner() {
                    slot.record(Error::Degenerate(format!(
                        "the derivative of f in its second argument changes sign between {a:?} and {b:?}"
                    )));
                }
                scalar(ga.x + r.value[0])
            }
            GroupKind::PlaneAdd => {
                let r = integrate(
                    |s| {
                        let w = omega(s);
                        [w.x, w.y]
                    },
                    0.0,
                    1.0,
                    tol,
                    MAX_PANELS,
                );
                Point::new(ga.x + r.value[0], ga.y + r.value[1])
            }
            GroupKind::PlaneT => {
                let first = integrate(|s| [omega(s).x], 0.0, 1.0, tol, MAX_PANELS);
                // ω₂ can vary on scales that ω₁ does not resolve
                let scale = 1.0 + gk15(&mut |s| [omega(s).y.abs()], 0.0, 1.0).0[0];
                let coarse = integrate(|s| [omega(s).y], 0.0, 1.0, PARTITION_REL_TOL * scale, MAX_PANELS);
                let mut cuts: Vec<f64> = first.panels.iter().chain(&coarse.panels).map(|p| p.a).collect();
                cuts.push(1.0);
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let mut g1_left = ga.x;
                let mut second = 0.0;
                for w in cuts.windows(2) {
                    second += weighted_panel(&omega, w[0], w[1], g1_left, tol, WEIGHTED_DEPTH);
                    g1_left += gk15(&mut |s| [omega(s).x], w[0], w[1]).0[0];
                }
                Point::new(ga.x + first.value[0], ga.y + second)
            }
        };
        slot.finish(result)
    }

    /// Integrates from `start` (with known `g`) through `waypoints` to `end`.
    fn integrate_polyline(&self, start: &Point, g_start: &Point, waypoints: &[Point], end: &Point) -> Result<Point> {
        let mut at = *start;
        let mut g = *g_start;
        for w in waypoints.iter().chain(std::iter::once(end)) {
            if !self.components.domain.segment_inside(&at, w, SEGMENT_CHECKS) {
                return Err(Error::Connectivity(format!("segment {at:?} -> {w:?} leaves the domain")));
            }
            g = self.integrate_segment(&at, &g, w)?;
            at = *w;
        }
        Ok(g)
    }

    /// `g` along the polyline `y₀ → waypoints → y`.
    pub fn evaluate_along(&self, y: &Point, waypoints: &[Point]) -> Result<Point> {
        self.ensure_inside(y)?;
        let y0 = self.components.y0;
        self.integrate_polyline(&y0, &Point::zeros(), waypoints, y)
    }

    fn ensure_inside(&self, y: &Point) -> Result<()> {
        if self.components.domain.contains(y) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{y:?} is not in {}", self.components.domain.name())))
        }
    }

    /// Shortest admissible polyline from `from` to `to` through anchor
    /// points (visibility graph over the anchor grid).
    fn visibility_route(&self, from: &Point, to: &Point, nodes: &[Point]) -> Result<Vec<Point>> {
        let domain = &self.components.domain;
        let mut pts = vec![*from];
        pts.extend_from_slice(nodes);
        pts.push(*to);
        let n = pts.len();
        let target = n - 1;
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        dist[0] = 0.0;
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> std::cmp::Ordering {
                o.0.total_cmp(&self.0)
            }
        }
        let mut heap = BinaryHeap::new();
        heap.push(Item(0.0, 0));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == target {
                break;
            }
            for v in 0..n {
                if v == u {
                    continue;
                }
                let nd = d + (pts[v] - pts[u]).norm();
                if nd < dist[v] && domain.segment_inside(&pts[u], &pts[v], SEGMENT_CHECKS) {
                    dist[v] = nd;
                    prev[v] = u;
                    heap.push(Item(nd, v));
                }
            }
        }
        if !dist[target].is_finite() {
            return Err(Error::Connectivity(format!("no polyline from {from:?} to {to:?}")));
        }
        let mut route = Vec::new();
        let mut at = prev[target];
        while at != 0 {
            route.push(pts[at]);
            at = prev[at];
        }
        route.reverse();
        Ok(route)
    }

    /// `g(y)`, integrated from the nearest anchor that sees `y`.
    pub fn forward(&self, y: &Point) -> Result<Point> {
        self.ensure_inside(y)?;
        let domain = &self.components.domain;
        let mut order: Vec<usize> = (0..self.anchors.len()).collect();
        order.sort_by(|&i, &j| {
            (self.anchors[i].0 - y)
                .norm()
                .total_cmp(&(self.anchors[j].0 - y).norm())
        });
        for &i in order.iter().take(8) {
            let (a, ga) = &self.anchors[i];
            if domain.segment_inside(a, y, SEGMENT_CHECKS) {
                return self.integrate_segment(a, ga, y);
            }
        }
        let (a, ga) = &self.anchors[order[0]];
        let nodes: Vec<Point> = self.anchors.iter().map(|(p, _)| *p).collect();
        let route = self.visibility_route(a, y, &nodes)?;
        self.integrate_polyline(a, ga, &route, y)
    }

    /// `Jg(y)`: `1/∂₂f` on the line, `M J₂f⁻¹` for the additive plane and
    /// `diag(1, e^{g₁}) M J₂f⁻¹` for `T`.
    pub fn jacobian(&self, y: &Point) -> Result<Matrix2<f64>> {
        let j = jacobian2(&self.components, y)?;
        let inv = j
            .try_inverse()
            .ok_or_else(|| Error::Degenerate(format!("J2f({y:?}, y0) is singular")))?;
        Ok(match self.kind {
            GroupKind::Line => Matrix2::new(1.0 / j[(0, 0)], 0.0, 0.0, 1.0),
            GroupKind::PlaneAdd => self.m * inv,
            GroupKind::PlaneT => {
                let g1 = self.forward(y)?.x;
                Matrix2::new(1.0, 0.0, 0.0, g1.exp()) * self.m * inv
            }
        })
    }

    /// `g⁻¹(z)`.
    pub fn inverse(&self, z: &Point) -> Result<Point> {
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!("cannot invert non-finite {z:?}")));
        }
        if self.components.dim == 1 {
            self.inverse_line(z.x).map(scalar)
        } else {
            self.inverse_plane(z)
        }
    }

    fn inverse_line(&self, z: f64) -> Result<f64> {
        let domain = &self.components.domain;
        let inside = |x: f64| domain.contains(&scalar(x));
        let g = |x: f64| self.forward(&scalar(x)).map(|p| p.x);
        let (first, last) = (self.anchors[0], self.anchors[self.anchors.len() - 1]);
        let (mut lo, mut g_lo, mut hi, mut g_hi);
        if z < first.1.x {
            hi = first.0.x;
            g_hi = first.1.x;
            let width = (last.0.x - first.0.x).max(1.0);
            let mut step = width;
            loop {
                let mut cand = hi - step;
                while !inside(cand) {
                    cand = 0.5 * (cand + hi);
                    if cand == hi {
                        return Err(Error::Inversion(format!("no preimage of {z} below {hi}")));
                    }
                }
                let gc = g(cand)?;
                if gc <= z {
                    lo = cand;
                    g_lo = gc;
                    break;
                }
                hi = cand;
                g_hi = gc;
                step *= 2.0;
            }
        } else if z > last.1.x {
            lo = last.0.x;
            g_lo = last.1.x;
            let width = (last.0.x - first.0.x).max(1.0);
            let mut step = width;
            loop {
                let mut cand = lo + step;
                while !inside(cand) {
                    cand = 0.5 * (cand + lo);
                    if cand == lo {
                        return Err(Error::Inversion(format!("no preimage of {z} above {lo}")));
                    }
                }
                let gc = g(cand)?;
                if gc >= z {
                    hi = cand;
                    g_hi = gc;
                    break;
                }
                lo = cand;
                g_lo = gc;
                step *= 2.0;
            }
        } else {
            let k = self.anchors.partition_point(|(_, gv)| gv.x <= z).clamp(1, self.anchors.len() - 1);
            lo = self.anchors[k - 1].0.x;
            g_lo = self.anchors[k - 1].1.x;
            hi = self.anchors[k].0.x;
            g_hi = self.anchors[k].1.x;
        }
        if g_lo == z {
            return Ok(lo);
        }
        if g_hi == z {
            return Ok(hi);
        }
        let mut x = lo + (z - g_lo) / (g_hi - g_lo) * (hi - lo);
        for _ in 0..200 {
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            let r = g(x)? - z;
            if r.abs() <= 1e-15 * z.abs().max(1.0) {
                return Ok(x);
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                return Ok(x);
            }
            let d = jacobian2(&self.components, &scalar(x))?[(0, 0)];
            x -= r * d;
        }
        Err(Error::Inversion(format!("bracketed Newton did not converge for g(y) = {z}")))
    }

    fn inverse_plane(&self, z: &Point) -> Result<Point> {
        let domain = &self.components.domain;
        let mut y = self
            .anchors
            .iter()
            .min_by(|a, b| (a.1 - z).norm().total_cmp(&(b.1 - z).norm()))
            .expect("anchors are nonempty")
            .0;
        let tol = 1e-13 * z.amax().max(1.0);
        let mut r = self.forward(&y)? - z;
        for _ in 0..100 {
            if r.amax() <= tol {
                return Ok(y);
            }
            let jac = self.jacobian(&y)?;
            let step = jac
                .lu()
                .solve(&(-r))
                .ok_or_else(|| Error::Inversion(format!("singular Jacobian of g at {y:?}")))?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = y + step * lambda;
                if domain.contains(&cand) {
                    let rc = self.forward(&cand)? - z;
                    if rc.norm() < r.norm() {
                        y = cand;
                        r = rc;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                if r.amax() <= 1e-9 * z.amax().max(1.0) {
                    return Ok(y);
                }
                return Err(Error::Inversion(format!("damped Newton stalled at {y:?} for target {z:?}")));
            }
        }
        if r.amax() <= 1e-9 * z.amax().max(1.0) {
            return Ok(y);
        }
        Err(Error::Inversion(format!("damped Newton did not converge after 100 steps for {z:?}")))
    }

    fn new(
        kind: GroupKind,
        components: &InvarianceComponents,
        quad_tol: f64,
        m: Matrix2<f64>,
        grad_c: Option<Point>,
        commutator: Option<Point>,
    ) -> Result<Self> {
        if !(quad_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("quad_tol must be positive, got {quad_tol}")));
        }
        let y0 = components.y0;
        let mut map = Self {
            kind,
            components: components.clone(),
            alpha: 0.0,
            m,
            grad_c,
            commutator,
            quad_tol,
            anchors: vec![(y0, Point::zeros())],
        };
        let (lo, hi) = components.domain.sample_box();
        let mut nodes = Vec::new();
        if components.dim == 1 {
            for k in 0..ANCHORS_PER_DIM_1D {
                let x = lo[0] + (hi[0] - lo[0]) * k as f64 / (ANCHORS_PER_DIM_1D - 1) as f64;
                nodes.push(scalar(x));
            }
        } else {
            for i in 0..ANCHORS_PER_DIM_2D {
                for j in 0..ANCHORS_PER_DIM_2D {
                    let s = i as f64 / (ANCHORS_PER_DIM_2D - 1) as f64;
                    let t = j as f64 / (ANCHORS_PER_DIM_2D - 1) as f64;
                    nodes.push(Point::new(lo[0] + s * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1])));
                }
            }
        }
        nodes.retain(|p| components.domain.contains(p) && *p != y0);
        let values: Vec<Result<(Point, Point)>> = nodes
            .par_iter()
            .map(|p| {
                let g = if components.domain.segment_inside(&y0, p, SEGMENT_CHECKS) {
                    map.integrate_segment(&y0, &Point::zeros(), p)?
                } else {
                    let route = map.visibility_route(&y0, p, &nodes)?;
                    map.integrate_polyline(&y0, &Point::zeros(), &route, p)?
                };
                Ok((*p, g))
            })
            .collect();
        for v in values {
            map.anchors.push(v?);
        }
        if components.dim == 1 {
            map.anchors.sort_by(|a, b| a.0.x.total_cmp(&b.0.x));
        }
        let unit = Point::new(1.0, 0.0);
        let c_unit = components.c(&map.inverse(&unit)?);
        if !(c_unit > 0.0 && c_unit.is_finite()) {
            return Err(Error::Degenerate(format!("c(g^-1(1)) = {c_unit} is not positive")));
        }
        map.alpha = -c_unit.ln();
        Ok(map)
    }

    /// Largest `|c(g⁻¹(z)) − e^{−α z₁}|` (relative) over a grid of
    /// `[−1, 1]ᵈ`.
    pub fn alpha_consistency(&self, count: usize) -> Result<f64> {
        let cube = if self.components.dim == 1 {
            crate::domain::Domain::real_line(1.0)
        } else {
            crate::domain::Domain::plane(1.0)
        };
        let (zs, _) = grid_points(&cube, count);
        let residuals: Vec<f64> = zs
            .par_iter()
            .map(|z| -> Result<f64> {
                let y = self.inverse(z)?;
                let expected = (-self.alpha * z.x).exp();
                Ok((self.components.c(&y) - expected).abs() / expected.max(1.0))
            })
            .collect::<Result<_>>()?;
        Ok(residuals.into_iter().fold(0.0, f64::max))
    }

    /// Largest deviation between `g` from the anchor table and `g` along a
    /// different polyline `y₀ → w → y`.
    pub fn path_independence(&self, count: usize) -> Result<f64> {
        let domain = &self.components.domain;
        let (points, _) = grid_points(domain, count);
        let y0 = self.components.y0;
        let candidates: Vec<Point> = self.anchors.iter().map(|a| a.0).filter(|p| *p != y0).collect();
        let deviations: Vec<f64> = points
            .par_iter()
            .enumerate()
            .map(|(k, y)| -> Result<f64> {
                let direct = self.forward(y)?;
                let n = candidates.len();
                let w = (0..n)
                    .map(|i| candidates[(7 * k + 3 * i) % n])
                    .find(|w| {
                        (w - y).norm() > 1e-3
                            && domain.segment_inside(&y0, w, SEGMENT_CHECKS)
                            && domain.segment_inside(w, y, SEGMENT_CHECKS)
                    });
                let Some(w) = w else {
                    return Ok(0.0);
                };
                let other = self.evaluate_along(y, &[w])?;
                Ok((direct - other).amax())
            })
            .collect::<Result<_>>()?;
        Ok(deviations.into_iter().fold(0.0, f64::max))
    }
}

/// Canonical map on the line.
pub fn build_g_1d(components: &InvarianceComponents, quad_tol: f64) -> Result<CanonicalMap> {
    if components.dim != 1 {
        return Err(Error::InvalidArgument("build_g_1d needs one-dimensional components".into()));
    }
    CanonicalMap::new(GroupKind::Line, components, quad_tol, Matrix2::identity(), None, None)
}

/// Canonical map onto `(ℝ², +)`.
pub fn build_g_2d_commutative(components: &InvarianceComponents, quad_tol: f64) -> Result<CanonicalMap> {
    let class = classify(components, None)?;
    if class.kind != Commutativity::Commutative {
        return Err(Error::Precondition("components are not commutative".into()));
    }
    let grad = grad_c_y0(components);
    let m = if grad.norm() < 1e-9 {
        Matrix2::identity()
    } else {
        Matrix2::new(grad.x, grad.y, -grad.y, grad.x)
    };
    let commutator = Point::new(class.commutator[0], class.commutator[1]);
    CanonicalMap::new(GroupKind::PlaneAdd, components, quad_tol, m, Some(grad), Some(commutator))
}

/// Canonical map onto `(ℝ², T)`.
pub fn build_g_2d_noncommutative(components: &InvarianceComponents, quad_tol: f64) -> Result<CanonicalMap> {
    let class = classify(components, None)?;
    if class.kind != Commutativity::Noncommutative {
        return Err(Error::Precondition("components are commutative".into()));
    }
    let y = Point::new(class.commutator[0], class.commutator[1]);
    let m = Matrix2::new(y.y, -y.x, y.x, y.y);
    CanonicalMap::new(GroupKind::PlaneT, components, quad_tol, m, None, Some(y))
}

/// Dispatches on dimension and commutativity.
pub fn canonicalize(components: &InvarianceComponents, quad_tol: f64) -> Result<CanonicalMap> {
    if components.dim == 1 {
        return build_g_1d(components, quad_tol);
    }
    match classify(components, None)?.kind {
        Commutativity::Commutative => build_g_2d_commutative(components, quad_tol),
        Commutativity::Noncommutative => build_g_2d_noncommutative(components, quad_tol),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HomomorphismReport {
    pub max_residual: f64,
    pub pairs: usize,
    pub skipped: usize,
}

/// Largest `‖g(f(y, z)) − g(y) ⊕ g(z)‖∞` over grid pairs.
pub fn verify_homomorphism(gmap: &CanonicalMap, grid_size: usize) -> Result<HomomorphismReport> {
    let comps = &gmap.components;
    let (points, mut skipped) = grid_points(&comps.domain, grid_size);
    let images: Vec<Point> = points.par_iter().map(|p| gmap.forward(p)).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..points.len()).map(move |j| (i, j)))
        .collect();
    let residuals: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<Option<f64>> {
            let yz = comps.f(&points[i], &points[j]);
            if !comps.domain.contains(&yz) {
                return Ok(None);
            }
            let lhs = gmap.forward(&yz)?;
            let rhs = gmap.combine(&images[i], &images[j]);
            Ok(Some((lhs - rhs).amax()))
        })
        .collect::<Result<_>>()?;
    skipped += residuals.iter().filter(|r| r.is_none()).count();
    Ok(HomomorphismReport {
        max_residual: residuals.iter().flatten().fold(0.0, |m: f64, &r| m.max(r)),
        pairs: residuals.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_at_reference_is_identity() {
        let comps = InvarianceComponents::fragmentation(0.5);
        let j = jacobian2(&comps, &comps.y0).unwrap();
        assert!((j - Matrix2::identity()).amax() < 1e-15);
    }

    #[test]
    fn jacobian_outside_domain_rejected() {
        let comps = InvarianceComponents::pssmp(0.5);
        assert!(matches!(jacobian2(&comps, &scalar(-1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn additive_plane_is_identity() {
        let g = canonicalize(&InvarianceComponents::additive_plane(), DEFAULT_QUAD_TOL).unwrap();
        assert_eq!(g.kind(), GroupKind::PlaneAdd);
        assert_eq!(g.m(), Matrix2::identity());
        assert_eq!(g.alpha(), 0.0);
        let y = Point::new(0.7, -1.3);
        assert!((g.forward(&y).unwrap() - y).amax() < 1e-14);
    }

    #[test]
    fn reference_maps_to_zero() {
        let comps = InvarianceComponents::t_law(0.4);
        let g = canonicalize(&comps, DEFAULT_QUAD_TOL).unwrap();
        assert_eq!(g.forward(&comps.y0).unwrap(), Point::zeros());
    }
}
