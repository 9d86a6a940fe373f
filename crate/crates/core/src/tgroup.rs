//! The group `T` on the plane, `y T z = (y₁ + z₁, y₂ + e^{y₁} z₂)`, and Lévy
//! processes on it.
//!
//! A pair `(ξ, η)` of real Lévy processes gives the `T`-valued process
//! `Y(t) = (ξ(t), ∫₀ᵗ e^{ξ(s−)} dη(s))`, and every Lévy process on `T`
//! arises this way. The jump of `Y` at `t` in the group sense,
//! `Y(t−)⁻¹ T Y(t)`, is the jump `(Δξ, Δη)` of the pair.

use rayon::prelude::*;
use serde::Serialize;

use crate::levy::{simulate, CadlagPath, LevyModel, PathValue};
use crate::rng::derive_seed;
use crate::stats::mean;
use crate::timechange::{exp_affine_integral, ExpIntegral};
use crate::{Error, Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct TPoint {
    pub y1: f64,
    pub y2: f64,
}

impl TPoint {
    pub const IDENTITY: TPoint = TPoint { y1: 0.0, y2: 0.0 };

    pub fn new(y1: f64, y2: f64) -> Self {
        Self { y1, y2 }
    }

    /// `self T other`, failing when the result is not finite.
    pub fn compose(self, other: TPoint) -> Result<TPoint> {
        let r = self.compose_unchecked(other);
        if r.y1.is_finite() && r.y2.is_finite() {
            Ok(r)
        } else {
            Err(Error::Overflow(format!("{self:?} T {other:?} is out of range")))
        }
    }

    pub fn compose_unchecked(self, other: TPoint) -> TPoint {
        TPoint {
            y1: self.y1 + other.y1,
            y2: self.y2 + self.y1.exp() * other.y2,
        }
    }

    pub fn inverse(self) -> Result<TPoint> {
        let r = self.inverse_unchecked();
        if r.y2.is_finite() {
            Ok(r)
        } else {
            Err(Error::Overflow(format!("inverse of {self:?} is out of range")))
        }
    }

    pub fn inverse_unchecked(self) -> TPoint {
        TPoint {
            y1: -self.y1,
            y2: -(-self.y1).exp() * self.y2,
        }
    }

    pub fn sup_norm(self) -> f64 {
        self.y1.abs().max(self.y2.abs())
    }
}

impl From<Point> for TPoint {
    fn from(p: Point) -> Self {
        TPoint { y1: p.x, y2: p.y }
    }
}

impl From<TPoint> for Point {
    fn from(p: TPoint) -> Self {
        Point::new(p.y1, p.y2)
    }
}

pub fn t_compose(y: TPoint, z: TPoint) -> Result<TPoint> {
    y.compose(z)
}

pub fn t_inverse(y: TPoint) -> Result<TPoint> {
    y.inverse()
}

/// A Lévy process on `T` together with its generating pair.
#[derive(Clone, Debug)]
pub struct TLevyPath {
    y: CadlagPath,
    pair: CadlagPath,
    integral: ExpIntegral,
    generated: bool,
}

impl TLevyPath {
    /// The `T`-valued path.
    pub fn path(&self) -> &CadlagPath {
        &self.y
    }

    /// The pair `(ξ, η)`.
    pub fn pair(&self) -> &CadlagPath {
        &self.pair
    }

    /// Whether the pair was the input (as opposed to recovered from `Y`).
    pub fn is_forward(&self) -> bool {
        self.generated
    }

    /// Exact value at `t`: `Y(tᵢ) T (local increment of the pair)`.
    pub fn value_at(&self, t: f64) -> Result<PathValue> {
        let base = self.y.value_at(t)?;
        let PathValue::Alive(_) = base else {
            return Ok(base);
        };
        let times = self.y.breakpoints();
        let i = times.partition_point(|&s| s <= t) - 1;
        if times[i] == t {
            return Ok(base);
        }
        let start = TPoint::from(self.y.right_values()[i]);
        let xi = self.pair.value_at(t)?.alive().expect("alive before kill").x;
        let local = TPoint::new(
            xi - start.y1,
            (self.integral.at(t)? - self.integral.right_values()[i]) * (-start.y1).exp(),
        );
        Ok(PathValue::Alive(start.compose_unchecked(local).into()))
    }

    /// Group jumps `Y(t−)⁻¹ T Y(t)` at every breakpoint.
    pub fn t_jumps(&self) -> Vec<(f64, TPoint)> {
        let y = &self.y;
        (0..y.breakpoints().len())
            .map(|i| {
                let left = TPoint::from(y.left_values()[i]);
                let right = TPoint::from(y.right_values()[i]);
                (y.breakpoints()[i], left.inverse_unchecked().compose_unchecked(right))
            })
            .collect()
    }

    /// `∫₀ᵗ e^{π₁(Y(u−))} du` at every breakpoint.
    pub fn exp_clock(&self) -> Vec<f64> {
        let y = &self.y;
        let mut out = Vec::with_capacity(y.breakpoints().len());
        out.push(0.0);
        let mut acc = 0.0;
        for i in 0..y.breakpoints().len() - 1 {
            let dt = y.breakpoints()[i + 1] - y.breakpoints()[i];
            acc += exp_affine_integral(y.right_values()[i].x, y.slopes()[i].x, dt);
            out.push(acc);
        }
        out
    }
}

/// `Y(t) = (ξ(t), ∫₀ᵗ e^{ξ(s−)} dη(s))`.
pub fn levy_on_t(pair: &CadlagPath) -> Result<TLevyPath> {
    if pair.dim() != 2 {
        return Err(Error::InvalidArgument("levy_on_t needs a two-dimensional pair".into()));
    }
    let xi = pair.component(0);
    let integral = ExpIntegral::new(&xi, &pair.component(1), 1.0)?;
    let left = xi
        .left_values()
        .iter()
        .zip(integral.left_values())
        .map(|(a, b)| Point::new(a.x, *b))
        .collect();
    let right = xi
        .right_values()
        .iter()
        .zip(integral.right_values())
        .map(|(a, b)| Point::new(a.x, *b))
        .collect();
    let mut y = CadlagPath::from_breakpoints(2, pair.breakpoints().to_vec(), left, right)?;
    if pair.is_killed() {
        y = y.killed_at_end(pair.terminal_jump());
    }
    Ok(TLevyPath {
        y: y.with_continuation(pair.continuation()),
        pair: pair.clone(),
        integral,
        generated: true,
    })
}

/// Recovers the pair from breakpoint values of `Y`, given the drift of the
/// pair (`None` treats the whole slope of `η` as drift, as [`ExpIntegral`] does).
fn pair_from_values(y: &CadlagPath, drift: Option<Point>) -> Result<CadlagPath> {
    let times = y.breakpoints();
    let n = times.len();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let start = y.right_values()[0];
    left.push(Point::new(start.x, 0.0));
    right.push(Point::new(start.x, 0.0));
    let eta_drift = drift.map_or(0.0, |d| d.y);
    let mut eta = 0.0;
    for i in 0..n - 1 {
        let dt = times[i + 1] - times[i];
        let (a, b) = (y.right_values()[i], y.left_values()[i + 1]);
        let slope = (b.x - a.x) / dt;
        let weight = exp_affine_integral(a.x, slope, dt);
        eta += match drift {
            Some(_) => eta_drift * dt + (b.y - a.y - eta_drift * weight) * (-a.x).exp(),
            None => (b.y - a.y) * dt / weight,
        };
        left.push(Point::new(b.x, eta));
        let c = y.right_values()[i + 1];
        eta += (c.y - b.y) * (-b.x).exp();
        right.push(Point::new(c.x, eta));
    }
    let mut pair = CadlagPath::from_breakpoints(2, times.to_vec(), left, right)?
        .with_drift(drift)
        .with_continuation(y.continuation());
    if y.is_killed() {
        pair = pair.killed_at_end(y.terminal_jump());
    }
    Ok(pair)
}

/// `ξ = π₁ ∘ Y` and `η = ∫ e^{−π₁(Y(s−))} dπ₂(Y)(s)`.
pub fn pair_from_levy_on_t(y: &TLevyPath) -> Result<CadlagPath> {
    pair_from_values(&y.y, y.pair.drift())
}

fn from_y_values(y: CadlagPath, drift: Option<Point>) -> Result<TLevyPath> {
    let pair = pair_from_values(&y, drift)?;
    let integral = ExpIntegral::new(&pair.component(0), &pair.component(1), 1.0)?;
    Ok(TLevyPath {
        y,
        pair,
        integral,
        generated: false,
    })
}

/// Removes the jumps of `Y` whose group jump lies in
/// `A_M = {x : |x|∞ >= M}` by splicing `R(t) = R(tᵢ−) T Y(tᵢ)⁻¹ T Y(t)`.
pub fn remove_big_jumps(y: &TLevyPath, big: f64) -> Result<TLevyPath> {
    if !(big > 0.0) {
        return Err(Error::InvalidArgument(format!("M must be positive, got {big}")));
    }
    let path = &y.y;
    let n = path.breakpoints().len();
    let mut correction = TPoint::IDENTITY;
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let before = TPoint::from(path.left_values()[i]);
        let after = TPoint::from(path.right_values()[i]);
        let r_left = correction.compose(before)?;
        let jump = before.inverse_unchecked().compose_unchecked(after);
        if i > 0 && jump.sup_norm() >= big {
            correction = r_left.compose(after.inverse()?)?;
            left.push(Point::from(r_left));
            right.push(Point::from(r_left));
        } else {
            left.push(Point::from(r_left));
            right.push(Point::from(correction.compose(after)?));
        }
    }
    let mut r = CadlagPath::from_breakpoints(2, path.breakpoints().to_vec(), left, right)?
        .with_continuation(path.continuation());
    if path.is_killed() {
        let terminal = path
            .terminal_jump()
            .filter(|j| TPoint::from(*j).sup_norm() < big);
        r = r.killed_at_end(terminal);
    }
    from_y_values(r, y.pair.drift())
}

/// Monte Carlo estimate with standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub alpha_m: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

fn ensure_unkilled_pair_model(model: &LevyModel) -> Result<()> {
    model.validate()?;
    if model.dim != 2 {
        return Err(Error::InvalidArgument("the pair model must be two-dimensional".into()));
    }
    if model.total_kill_rate() > 0.0 {
        return Err(Error::InvalidArgument("the pair model must not kill".into()));
    }
    Ok(())
}

/// `α_M = E[π₂(R(1))] / E[∫₀¹ e^{π₁(R(u−))} du]` with a delta-method
/// standard error.
pub fn estimate_alpha_m(model: &LevyModel, big: f64, n_paths: usize, seed: u64) -> Result<AlphaEstimate> {
    ensure_unkilled_pair_model(model)?;
    if n_paths < 100 {
        return Err(Error::InvalidArgument(format!("n_paths must be >= 100, got {n_paths}")));
    }
    let samples: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let pair = simulate(model, 1.0, derive_seed(seed, 0, i))?;
            let r = remove_big_jumps(&levy_on_t(&pair)?, big)?;
            let num = r.path().end_value().y;
            let den = *r.exp_clock().last().expect("nonempty");
            Ok((num, den))
        })
        .collect::<Result<_>>()?;
    let nums: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let dens: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (mn, md) = (mean(&nums), mean(&dens));
    if !(md > 0.0) {
        return Err(Error::Estimation(format!("denominator estimate {md} is not positive")));
    }
    let alpha = mn / md;
    let resid: Vec<f64> = samples.iter().map(|(a, b)| (a - alpha * b).powi(2)).collect();
    let n = n_paths as f64;
    let std_error = (crate::stats::pairwise_sum(&resid) / (n * (n - 1.0))).sqrt() / md;
    Ok(AlphaEstimate {
        alpha_m: alpha,
        std_error,
        n_paths,
    })
}

/// `W(t) = π₂(R(t)) − α_M ∫₀ᵗ e^{π₁(R(u−))} du` with exact evaluation.
#[derive(Clone, Debug)]
pub struct RecenteredW {
    r: TLevyPath,
    alpha_m: f64,
    clock: Vec<f64>,
}

impl RecenteredW {
    pub fn new(y: &TLevyPath, big: f64, alpha_m: f64) -> Result<Self> {
        if !alpha_m.is_finite() {
            return Err(Error::InvalidArgument("alpha_M must be finite".into()));
        }
        let r = remove_big_jumps(y, big)?;
        let clock = r.exp_clock();
        Ok(Self { r, alpha_m, clock })
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let p = self.r.path();
        let value = self
            .r
            .value_at(t)?
            .alive()
            .ok_or_else(|| Error::InvalidArgument("W is undefined after the kill time".into()))?;
        let times = p.breakpoints();
        let i = times.partition_point(|&s| s <= t) - 1;
        let partial = if times[i] == t {
            0.0
        } else {
            exp_affine_integral(p.right_values()[i].x, p.slopes()[i].x, t - times[i])
        };
        Ok(value.y - self.alpha_m * (self.clock[i] + partial))
    }

    /// Breakpoint values of `W` as a one-dimensional path.
    pub fn path(&self) -> Result<CadlagPath> {
        let p = self.r.path();
        let w = |v: &Point, c: f64| crate::scalar(v.y - self.alpha_m * c);
        let left = p.left_values().iter().zip(&self.clock).map(|(v, c)| w(v, *c)).collect();
        let right = p.right_values().iter().zip(&self.clock).map(|(v, c)| w(v, *c)).collect();
        let mut out = CadlagPath::from_breakpoints(1, p.breakpoints().to_vec(), left, right)?;
        if p.is_killed() {
            out = out.killed_at_end(None);
        }
        Ok(out)
    }
}

/// The recentered process as a path (see [`RecenteredW`]).
pub fn recentered_w(y: &TLevyPath, big: f64, alpha_m: f64) -> Result<CadlagPath> {
    RecenteredW::new(y, big, alpha_m)?.path()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn compose_examples() {
        let r = t_compose(TPoint::new(1.0, 2.0), TPoint::new(3.0, 4.0)).unwrap();
        assert_eq!(r, TPoint::new(4.0, 2.0 + 4.0 * E));
        let z = TPoint::new(-0.4, 7.0);
        assert_eq!(t_compose(TPoint::IDENTITY, z).unwrap(), z);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(t_inverse(TPoint::new(0.0, 5.0)).unwrap(), TPoint::new(0.0, -5.0));
        let r = t_inverse(TPoint::new(1.0, E)).unwrap();
        assert_eq!(r.y1, -1.0);
        assert!((r.y2 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn overflow_is_a_range_error() {
        assert!(matches!(
            t_compose(TPoint::new(800.0, 1.0), TPoint::new(0.0, 1.0)),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn pure_drift_alpha_is_drift() {
        let model = LevyModel::new(2).with_drift(&[0.0, 0.8]);
        let est = estimate_alpha_m(&model, 1.0, 100, 3).unwrap();
        assert!((est.alpha_m - 0.8).abs() < 1e-14);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn zero_eta_alpha_is_zero() {
        let model = LevyModel::new(2).with_jump(2.0, &[0.4, 0.0], 0.0).with_jump(1.0, &[-0.3, 0.0], 0.0);
        let est = estimate_alpha_m(&model, 1.0, 200, 5).unwrap();
        assert_eq!(est.alpha_m, 0.0);
    }
}
