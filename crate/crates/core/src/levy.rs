//! Finite-activity Lévy processes on the line and the plane.
//!
//! A [`LevyModel`] combines a drift, a Brownian part, a finite catalogue of
//! jumps and killing. [`simulate`] draws an exact [`CadlagPath`]: jumps are
//! placed at their true times, and the Brownian part is realized on a grid of
//! width `grid_step` with affine interpolation inside each cell.
//!
//! Randomness is split over three independent ChaCha streams of the seed
//! (jump events, Brownian cells, base killing). Simulation is therefore
//! prefix-consistent: the same seed with a longer horizon reproduces the
//! shorter path exactly on the common time range.

use std::io::Write;

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::stream_rng;
use crate::{Error, Point, Result};

const JUMP_STREAM: u64 = 0;
const BROWNIAN_STREAM: u64 = 1;
const KILL_STREAM: u64 = 2;

pub const DEFAULT_GRID_STEP: f64 = 1.0 / 1024.0;

fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}

/// One jump type of the catalogue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub rate: f64,
    pub displacement: Vec<f64>,
    /// Probability that an occurrence of this jump kills the process.
    #[serde(default)]
    pub kill_prob: f64,
}

/// Covariance per unit time of the Brownian part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diffusion {
    /// Variance in dimension 1, isotropic variance in dimension 2.
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyModel {
    pub dim: usize,
    #[serde(default)]
    pub drift: Vec<f64>,
    #[serde(default)]
    pub diffusion: Option<Diffusion>,
    #[serde(default)]
    pub jumps: Vec<JumpSpec>,
    #[serde(default)]
    pub base_kill_rate: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

impl LevyModel {
    /// The zero process in dimension `dim`.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            drift: vec![0.0; dim],
            diffusion: None,
            jumps: Vec::new(),
            base_kill_rate: 0.0,
            grid_step: DEFAULT_GRID_STEP,
        }
    }

    pub fn with_drift(mut self, drift: &[f64]) -> Self {
        self.drift = drift.to_vec();
        self
    }

    pub fn with_diffusion(mut self, diffusion: Diffusion) -> Self {
        self.diffusion = Some(diffusion);
        self
    }

    pub fn with_jump(mut self, rate: f64, displacement: &[f64], kill_prob: f64) -> Self {
        self.jumps.push(JumpSpec {
            rate,
            displacement: displacement.to_vec(),
            kill_prob,
        });
        self
    }

    pub fn with_kill_rate(mut self, rate: f64) -> Self {
        self.base_kill_rate = rate;
        self
    }

    pub fn with_grid_step(mut self, grid_step: f64) -> Self {
        self.grid_step = grid_step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Model(msg));
        if self.dim != 1 && self.dim != 2 {
            return bad(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if !self.drift.is_empty() && self.drift.len() != self.dim {
            return bad(format!("drift has {} components for dim {}", self.drift.len(), self.dim));
        }
        if self.drift.iter().any(|d| !d.is_finite()) {
            return bad("drift must be finite".into());
        }
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return bad(format!("grid_step must be positive, got {}", self.grid_step));
        }
        if !(self.base_kill_rate >= 0.0 && self.base_kill_rate.is_finite()) {
            return bad(format!("base_kill_rate must be >= 0, got {}", self.base_kill_rate));
        }
        for (i, jump) in self.jumps.iter().enumerate() {
            if !(jump.rate > 0.0 && jump.rate.is_finite()) {
                return bad(format!("jumps[{i}].rate must be > 0, got {}", jump.rate));
            }
            if !(0.0..=1.0).contains(&jump.kill_prob) {
                return bad(format!("jumps[{i}].kill_prob must lie in [0, 1], got {}", jump.kill_prob));
            }
            if jump.displacement.len() != self.dim {
                return bad(format!(
                    "jumps[{i}].displacement has {} components for dim {}",
                    jump.displacement.len(),
                    self.dim
                ));
            }
            if jump.displacement.iter().any(|d| !d.is_finite()) {
                return bad(format!("jumps[{i}].displacement must be finite"));
            }
        }
        self.brownian_factor().map(|_| ())
    }

    pub fn drift_point(&self) -> Point {
        let mut p = Point::zeros();
        for (i, d) in self.drift.iter().enumerate().take(2) {
            p[i] = *d;
        }
        p
    }

    pub fn covariance(&self) -> Result<Matrix2<f64>> {
        let cov = match (&self.diffusion, self.dim) {
            (None, _) => Matrix2::zeros(),
            (Some(Diffusion::Scalar(v)), 1) => Matrix2::new(*v, 0.0, 0.0, 0.0),
            (Some(Diffusion::Scalar(v)), _) => Matrix2::new(*v, 0.0, 0.0, *v),
            (Some(Diffusion::Matrix(m)), 2) => Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
            (Some(Diffusion::Matrix(_)), _) => {
                return Err(Error::Model("a diffusion matrix requires dim 2".into()))
            }
        };
        Ok(cov)
    }

    /// Lower-triangular factor `L` with `L Lᵀ` equal to the covariance, or
    /// `None` when there is no Brownian part.
    fn brownian_factor(&self) -> Result<Option<Matrix2<f64>>> {
        let cov = self.covariance()?;
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("diffusion must be finite".into()));
        }
        let scale = cov.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(None);
        }
        let tol = 1e-12 * scale;
        let (a, b, b2, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 0)], cov[(1, 1)]);
        if (b - b2).abs() > tol {
            return Err(Error::Model("diffusion matrix is not symmetric".into()));
        }
        if a < -tol || c < -tol || a * c - b * b < -tol * scale {
            return Err(Error::Model("diffusion is not positive semidefinite".into()));
        }
        let (a, c) = (a.max(0.0), c.max(0.0));
        let factor = if a > tol {
            let l00 = a.sqrt();
            let l10 = b / l00;
            Matrix2::new(l00, 0.0, l10, (c - l10 * l10).max(0.0).sqrt())
        } else {
            if b.abs() > tol {
                return Err(Error::Model("diffusion is not positive semidefinite".into()));
            }
            Matrix2::new(0.0, 0.0, 0.0, c.sqrt())
        };
        Ok(Some(factor))
    }

    pub fn total_jump_rate(&self) -> f64 {
        self.jumps.iter().map(|j| j.rate).sum()
    }

    /// Total rate at which the process is sent to the cemetery.
    pub fn total_kill_rate(&self) -> f64 {
        self.base_kill_rate + self.jumps.iter().map(|j| j.rate * j.kill_prob).sum::<f64>()
    }

    /// Whether paths of this model are deterministic (pure drift, no killing).
    pub fn is_deterministic(&self) -> bool {
        self.jumps.is_empty()
            && self.base_kill_rate == 0.0
            && matches!(self.brownian_factor(), Ok(None))
    }

    /// Laplace exponent of the first coordinate `ξ`, including killing:
    /// `E[exp(-q ξ(t)); t < kill time] = exp(-t Φ(q))`.
    pub fn laplace_exponent(&self, q: f64) -> f64 {
        let variance = self.covariance().map(|c| c[(0, 0)]).unwrap_or(0.0);
        let drift = self.drift_point().x;
        let jumps: f64 = self
            .jumps
            .iter()
            .map(|j| j.rate * (j.kill_prob + (1.0 - j.kill_prob) * -(-q * j.displacement[0]).exp_m1()))
            .sum();
        q * drift - 0.5 * q * q * variance + jumps + self.base_kill_rate
    }

    /// Mean of the first coordinate per unit time, ignoring killing.
    pub fn first_coordinate_mean(&self) -> f64 {
        self.drift_point().x
            + self
                .jumps
                .iter()
                .map(|j| j.rate * (1.0 - j.kill_prob) * j.displacement[0])
                .sum::<f64>()
    }
}

/// The value of a path at a time: a point, or the cemetery.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathValue {
    Alive(Point),
    Cemetery,
}

impl PathValue {
    pub fn alive(self) -> Option<Point> {
        match self {
            PathValue::Alive(p) => Some(p),
            PathValue::Cemetery => None,
        }
    }

    pub fn is_cemetery(self) -> bool {
        matches!(self, PathValue::Cemetery)
    }
}

/// What a path does after its last breakpoint when it was not killed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuation {
    /// Continues forever with the last slope.
    Deterministic,
    /// Unknown beyond the horizon.
    Random,
}

/// A càdlàg path, affine between breakpoints, optionally killed.
///
/// Breakpoints start at 0 and end at the horizon or the kill time. At a
/// kill time the stored left and right values coincide with the pre-kill
/// limit; the path is the cemetery from then on.
#[derive(Clone, Debug, PartialEq)]
pub struct CadlagPath {
    dim: usize,
    times: Vec<f64>,
    left: Vec<Point>,
    right: Vec<Point>,
    slopes: Vec<Point>,
    kill_time: Option<f64>,
    terminal_jump: Option<Point>,
    drift: Option<Point>,
    continuation: Continuation,
}

impl CadlagPath {
    /// Builds a path from breakpoint values; slopes are the chords.
    pub fn from_breakpoints(dim: usize, times: Vec<f64>, left: Vec<Point>, right: Vec<Point>) -> Result<Self> {
        if times.is_empty() || times.len() != left.len() || times.len() != right.len() {
            return Err(Error::InvalidArgument("breakpoint arrays must be nonempty and of equal length".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidArgument("the first breakpoint must be 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("breakpoints must be strictly increasing".into()));
        }
        let slopes = (0..times.len() - 1)
            .map(|i| (left[i + 1] - right[i]) / (times[i + 1] - times[i]))
            .collect();
        Ok(Self {
            dim,
            times,
            left,
            right,
            slopes,
            kill_time: None,
            terminal_jump: None,
            drift: None,
            continuation: Continuation::Random,
        })
    }

    /// The constant path equal to `value` on `[0, horizon]`.
    pub fn constant(dim: usize, value: Point, horizon: f64) -> Self {
        let mut builder = PathBuilder::new(dim, value);
        builder.advance(horizon, Point::zeros());
        builder.finish(None, None, Continuation::Deterministic)
    }

    /// Marks the path as killed at its last breakpoint, with an optional
    /// terminal jump recorded in the ledger but not applied.
    pub fn killed_at_end(mut self, terminal_jump: Option<Point>) -> Self {
        let last = self.times.len() - 1;
        self.right[last] = self.left[last];
        self.kill_time = Some(self.times[last]);
        self.terminal_jump = terminal_jump;
        self
    }

    /// Declares the drift part of the slopes; the remainder is Brownian.
    pub fn with_drift(mut self, drift: Option<Point>) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_continuation(mut self, continuation: Continuation) -> Self {
        self.continuation = continuation;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.times
    }

    pub fn left_values(&self) -> &[Point] {
        &self.left
    }

    pub fn right_values(&self) -> &[Point] {
        &self.right
    }

    pub fn slopes(&self) -> &[Point] {
        &self.slopes
    }

    pub fn kill_time(&self) -> Option<f64> {
        self.kill_time
    }

    pub fn is_killed(&self) -> bool {
        self.kill_time.is_some()
    }

    /// Displacement of the killing jump, when the kill came from a jump.
    pub fn terminal_jump(&self) -> Option<Point> {
        self.terminal_jump
    }

    pub fn drift(&self) -> Option<Point> {
        self.drift
    }

    pub fn continuation(&self) -> Continuation {
        self.continuation
    }

    /// Last breakpoint: the horizon, or the kill time.
    pub fn end(&self) -> f64 {
        *self.times.last().expect("paths have at least one breakpoint")
    }

    /// Value just before the end (the final value for unkilled paths).
    pub fn end_value(&self) -> Point {
        *self.left.last().expect("paths have at least one breakpoint")
    }

    pub fn start_value(&self) -> Point {
        self.right[0]
    }

    /// Breakpoint indices where the path jumps.
    pub fn jump_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.times.len()).filter(|&i| self.left[i] != self.right[i])
    }

    pub fn jump_count(&self) -> usize {
        self.jump_indices().count()
    }

    /// Right-continuous value at `t`.
    pub fn value_at(&self, t: f64) -> Result<PathValue> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
        }
        if let Some(kill) = self.kill_time {
            if t >= kill {
                return Ok(PathValue::Cemetery);
            }
        }
        let end = self.end();
        if t > end {
            return Err(Error::BeyondHorizon { t, end });
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        if self.times[i] == t {
            return Ok(PathValue::Alive(self.right[i]));
        }
        Ok(PathValue::Alive(self.right[i] + self.slopes[i] * (t - self.times[i])))
    }

    /// Left limit at `t`.
    pub fn left_value_at(&self, t: f64) -> Result<Point> {
        if t <= 0.0 {
            return Err(Error::NoLeftLimit);
        }
        let end = self.end();
        if t > end {
            return Err(Error::BeyondHorizon { t, end });
        }
        let j = self.times.partition_point(|&s| s < t);
        if self.times[j] == t {
            return Ok(self.left[j]);
        }
        let i = j - 1;
        Ok(self.right[i] + self.slopes[i] * (t - self.times[i]))
    }

    /// The `index`-th coordinate as a one-dimensional path.
    pub fn component(&self, index: usize) -> Self {
        let pick = |p: &Point| crate::scalar(p[index]);
        Self {
            dim: 1,
            times: self.times.clone(),
            left: self.left.iter().map(pick).collect(),
            right: self.right.iter().map(pick).collect(),
            slopes: self.slopes.iter().map(pick).collect(),
            kill_time: self.kill_time,
            terminal_jump: self.terminal_jump.as_ref().map(pick),
            drift: self.drift.as_ref().map(pick),
            continuation: self.continuation,
        }
    }

    /// The same path with extra (jump-free) breakpoints at `extra` times.
    pub fn refined(&self, extra: &[f64]) -> Self {
        let end = self.end();
        let mut times: Vec<f64> = self
            .times
            .iter()
            .copied()
            .chain(extra.iter().copied().filter(|&t| t > 0.0 && t < end))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        if times.len() == self.times.len() {
            return self.clone();
        }
        let mut out = Self {
            times: Vec::with_capacity(times.len()),
            left: Vec::with_capacity(times.len()),
            right: Vec::with_capacity(times.len()),
            slopes: Vec::with_capacity(times.len()),
            ..self.clone()
        };
        let mut seg = 0;
        for &t in &times {
            while seg + 1 < self.times.len() && self.times[seg + 1] <= t {
                seg += 1;
            }
            if self.times[seg] == t {
                out.left.push(self.left[seg]);
                out.right.push(self.right[seg]);
            } else {
                let v = self.right[seg] + self.slopes[seg] * (t - self.times[seg]);
                out.left.push(v);
                out.right.push(v);
            }
            out.times.push(t);
        }
        for i in 0..times.len() - 1 {
            let seg = self.times.partition_point(|&s| s <= times[i]) - 1;
            out.slopes.push(self.slopes[seg]);
        }
        out
    }

    /// Pointwise sum of two paths sharing horizon and kill status.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::TimeAxisMismatch("dimensions differ".into()));
        }
        if self.end() != other.end() || self.kill_time != other.kill_time {
            return Err(Error::TimeAxisMismatch("horizons or kill times differ".into()));
        }
        let a = self.refined(&other.times);
        let b = other.refined(&self.times);
        let add = |x: &[Point], y: &[Point]| x.iter().zip(y).map(|(p, q)| p + q).collect::<Vec<_>>();
        let terminal = match (a.terminal_jump, b.terminal_jump) {
            (None, None) => None,
            (p, q) => Some(p.unwrap_or_default() + q.unwrap_or_default()),
        };
        let drift = match (a.drift, b.drift) {
            (Some(p), Some(q)) => Some(p + q),
            _ => None,
        };
        Ok(Self {
            dim: self.dim,
            left: add(&a.left, &b.left),
            right: add(&a.right, &b.right),
            slopes: add(&a.slopes, &b.slopes),
            times: a.times,
            kill_time: a.kill_time,
            terminal_jump: terminal,
            drift,
            continuation: if a.continuation == b.continuation { a.continuation } else { Continuation::Random },
        })
    }

    /// Writes the path as CSV: `t, x0[, x1], is_jump, killed`.
    ///
    /// A jump produces two rows at its time (pre-jump, then post-jump with
    /// `is_jump = 1`); a kill produces a final row with empty components.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim).map(|i| format!("x{i}")));
        header.extend(["is_jump".to_string(), "killed".to_string()]);
        out.write_record(&header)?;
        let row = |t: f64, p: Option<&Point>, jump: bool, killed: bool| {
            let mut r = vec![t.to_string()];
            for i in 0..self.dim {
                r.push(p.map(|p| p[i].to_string()).unwrap_or_default());
            }
            r.push(u8::from(jump).to_string());
            r.push(u8::from(killed).to_string());
            r
        };
        for (i, &t) in self.times.iter().enumerate() {
            if self.left[i] != self.right[i] {
                out.write_record(row(t, Some(&self.left[i]), false, false))?;
                out.write_record(row(t, Some(&self.right[i]), true, false))?;
            } else {
                out.write_record(row(t, Some(&self.right[i]), false, false))?;
            }
        }
        if let Some(kill) = self.kill_time {
            out.write_record(row(kill, None, false, true))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Incremental construction of a [`CadlagPath`] with exact continuity.
pub(crate) struct PathBuilder {
    dim: usize,
    times: Vec<f64>,
    left: Vec<Point>,
    right: Vec<Point>,
    slopes: Vec<Point>,
}

impl PathBuilder {
    pub(crate) fn new(dim: usize, start: Point) -> Self {
        Self {
            dim,
            times: vec![0.0],
            left: vec![start],
            right: vec![start],
            slopes: Vec::new(),
        }
    }

    pub(crate) fn current(&self) -> Point {
        *self.right.last().expect("builder starts with a breakpoint")
    }

    pub(crate) fn now(&self) -> f64 {
        *self.times.last().expect("builder starts with a breakpoint")
    }

    /// Moves to time `t` with constant `slope`, adding a breakpoint there.
    pub(crate) fn advance(&mut self, t: f64, slope: Point) {
        let value = self.current() + slope * (t - self.now());
        self.slopes.push(slope);
        self.times.push(t);
        self.left.push(value);
        self.right.push(value);
    }

    /// Applies a jump at the current breakpoint.
    pub(crate) fn jump(&mut self, displacement: Point) {
        let last = self.right.len() - 1;
        self.right[last] += displacement;
    }

    pub(crate) fn finish(self, kill: Option<Option<Point>>, drift: Option<Point>, continuation: Continuation) -> CadlagPath {
        let path = CadlagPath {
            dim: self.dim,
            times: self.times,
            left: self.left,
            right: self.right,
            slopes: self.slopes,
            kill_time: None,
            terminal_jump: None,
            drift,
            continuation,
        };
        match kill {
            Some(terminal) => path.killed_at_end(terminal),
            None => path,
        }
    }
}

fn to_point(v: &[f64]) -> Point {
    let mut p = Point::zeros();
    for (i, x) in v.iter().enumerate().take(2) {
        p[i] = *x;
    }
    p
}

/// Draws a sample path of `model` on `[0, horizon]`.
pub fn simulate(model: &LevyModel, horizon: f64, seed: u64) -> Result<CadlagPath> {
    model.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let factor = model.brownian_factor()?;
    let drift = model.drift_point();
    let step = model.grid_step;
    let total_rate = model.total_jump_rate();
    let displacements: Vec<Point> = model.jumps.iter().map(|j| to_point(&j.displacement)).collect();

    let mut jump_rng = stream_rng(seed, JUMP_STREAM);
    let mut brownian_rng = stream_rng(seed, BROWNIAN_STREAM);
    let mut kill_rng = stream_rng(seed, KILL_STREAM);

    let kill_at = if model.base_kill_rate > 0.0 {
        let e: f64 = kill_rng.sample(Exp1);
        e / model.base_kill_rate
    } else {
        f64::INFINITY
    };
    let mut next_jump = if total_rate > 0.0 {
        let e: f64 = jump_rng.sample(Exp1);
        e / total_rate
    } else {
        f64::INFINITY
    };

    let mut cell: u64 = 0;
    let draw_slope = |rng: &mut rand_chacha::ChaCha8Rng| -> Point {
        match factor {
            Some(l) => {
                let z = Point::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                drift + l * z / step.sqrt()
            }
            None => drift,
        }
    };
    let mut slope = draw_slope(&mut brownian_rng);
    let mut cell_end = if factor.is_some() { step } else { f64::INFINITY };

    let mut builder = PathBuilder::new(model.dim, Point::zeros());
    let mut kill: Option<Option<Point>> = None;
    loop {
        let t = next_jump.min(kill_at).min(cell_end).min(horizon);
        builder.advance(t, slope);
        if t == kill_at {
            kill = Some(None);
            break;
        }
        if t == next_jump {
            let u: f64 = jump_rng.random::<f64>() * total_rate;
            let mut acc = 0.0;
            let mut chosen = model.jumps.len() - 1;
            for (k, j) in model.jumps.iter().enumerate() {
                acc += j.rate;
                if u < acc {
                    chosen = k;
                    break;
                }
            }
            let spec = &model.jumps[chosen];
            if spec.kill_prob > 0.0 && jump_rng.random::<f64>() < spec.kill_prob {
                kill = Some(Some(displacements[chosen]));
                break;
            }
            builder.jump(displacements[chosen]);
            let e: f64 = jump_rng.sample(Exp1);
            next_jump = t + e / total_rate;
        }
        if t == horizon {
            break;
        }
        if t == cell_end {
            cell += 1;
            slope = draw_slope(&mut brownian_rng);
            cell_end = (cell + 1) as f64 * step;
        }
    }
    let continuation = if model.is_deterministic() {
        Continuation::Deterministic
    } else {
        Continuation::Random
    };
    Ok(builder.finish(kill, Some(drift), continuation))
}
