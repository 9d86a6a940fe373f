//! Forward construction of self-similar Markov processes from a Lévy driver
//! and recovery of the driver from a trajectory.
//!
//! In dimension 1, `X_y(t) = ψ(ψ⁻¹(y) + ξ(φ_y⁻¹(t)))` with
//! `φ_y(s) = ∫₀ˢ e^{α(ψ⁻¹(y) + ξ(r))} dr`. In dimension 2 the second
//! coordinate before `ψ` is `π₂ψ⁻¹(y) + ∫₀^{φ_y⁻¹(t)} e^{β(π₁ψ⁻¹(y) + ξ(r−))} dη(r)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonicalize::CanonicalMap;
use crate::domain::Domain;
use crate::invariance::InvarianceComponents;
use crate::levy::{simulate, CadlagPath, LevyModel, PathValue};
use crate::rng::derive_seed;
use crate::timechange::{build_timechange, ExpIntegral, Lifetime, TimeChange};
use crate::{scalar, Error, Point, Result};

type PointMap = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// A diffeomorphism from `ℝᵈ` onto a domain.
#[derive(Clone)]
pub struct Psi {
    name: String,
    dim: usize,
    forward: PointMap,
    inverse: PointMap,
    domain: Domain,
}

impl fmt::Debug for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Psi").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl Psi {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        forward: impl Fn(&Point) -> Point + Send + Sync + 'static,
        inverse: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim: domain.dim(),
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
            domain,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn forward(&self, u: &Point) -> Point {
        (self.forward)(u)
    }

    pub fn inverse(&self, y: &Point) -> Point {
        (self.inverse)(y)
    }

    /// `exp : ℝ → (0, ∞)`.
    pub fn exp() -> Self {
        let (lo, hi) = ((-2.0f64).exp(), 2.0f64.exp());
        Self::new(
            "exp",
            Domain::interval(0.0, f64::INFINITY, lo, hi),
            |u| scalar(u.x.exp()),
            |y| scalar(y.x.ln()),
        )
    }

    pub fn identity(dim: usize) -> Self {
        let domain = if dim == 1 { Domain::real_line(2.0) } else { Domain::plane(2.0) };
        Self::new(if dim == 1 { "identity" } else { "identity2" }, domain, |u| *u, |y| *y)
    }

    /// `u ↦ scale · u + shift` on the line.
    pub fn affine(scale: f64, shift: f64) -> Result<Self> {
        if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
            return Err(Error::InvalidArgument("affine psi needs a finite nonzero scale".into()));
        }
        let (a, b) = (shift - 2.0 * scale.abs(), shift + 2.0 * scale.abs());
        Ok(Self::new(
            format!("affine(scale={scale}, shift={shift})"),
            Domain::interval(f64::NEG_INFINITY, f64::INFINITY, a, b),
            move |u| scalar(scale * u.x + shift),
            move |y| scalar((y.x - shift) / scale),
        ))
    }

    /// `u ↦ A u + b` on the plane.
    pub fn affine2(matrix: [[f64; 2]; 2], shift: [f64; 2]) -> Result<Self> {
        let a = Matrix2::new(matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1]);
        let inv = a
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::InvalidArgument("affine2 psi needs an invertible matrix".into()))?;
        let b = Point::new(shift[0], shift[1]);
        let corners = [(-2.0, -2.0), (-2.0, 2.0), (2.0, -2.0), (2.0, 2.0)].map(|(x, y)| a * Point::new(x, y) + b);
        let lower = [0, 1].map(|d| corners.iter().map(|c| c[d]).fold(f64::INFINITY, f64::min));
        let upper = [0, 1].map(|d| corners.iter().map(|c| c[d]).fold(f64::NEG_INFINITY, f64::max));
        Ok(Self::new(
            "affine2",
            Domain::plane(2.0).with_sample_box(lower, upper),
            move |u| a * u + b,
            move |y| inv * (y - b),
        ))
    }

    /// `u ↦ tanh(u / scale)` onto `(−1, 1)`.
    pub fn tanh_warp(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument("tanh-warp scale must be positive".into()));
        }
        let edge = (2.0 / scale).tanh();
        Ok(Self::new(
            format!("tanh-warp(scale={scale})"),
            Domain::interval(-1.0, 1.0, -edge, edge),
            move |u| scalar((u.x / scale).tanh()),
            move |y| scalar(scale * y.x.atanh()),
        ))
    }

    /// Two one-dimensional maps acting coordinatewise.
    pub fn componentwise(first: &Psi, second: &Psi) -> Result<Self> {
        if first.dim != 1 || second.dim != 1 {
            return Err(Error::InvalidArgument("componentwise psi needs two one-dimensional maps".into()));
        }
        let (d1, d2) = (first.domain.clone(), second.domain.clone());
        let (b1, b2) = (d1.sample_box(), d2.sample_box());
        let domain = Domain::region(
            format!("{} x {}", d1.name(), d2.name()),
            move |p| d1.contains(&scalar(p.x)) && d2.contains(&scalar(p.y)),
            [b1.0[0], b2.0[0]],
            [b1.1[0], b2.1[0]],
        );
        let (f1, f2, g1, g2) = (first.clone(), second.clone(), first.clone(), second.clone());
        Ok(Self::new(
            format!("{}*{}", first.name, second.name),
            domain,
            move |u| Point::new(f1.forward(&scalar(u.x)).x, f2.forward(&scalar(u.y)).x),
            move |y| Point::new(g1.inverse(&scalar(y.x)).x, g2.inverse(&scalar(y.y)).x),
        ))
    }

    /// `(u, v) ↦ e^u (cos θ, sin θ)` with `θ = π tanh(v)`: onto the plane
    /// slit along the closed negative real axis.
    pub fn polar_slit() -> Self {
        use std::f64::consts::PI;
        let r = 2.0f64.exp();
        Self::new(
            "polar-slit",
            Domain::region("slit plane", |p| !(p.y == 0.0 && p.x <= 0.0), [-r, -r], [r, r]),
            |u| {
                let radius = u.x.exp();
                let theta = PI * u.y.tanh();
                Point::new(radius * theta.cos(), radius * theta.sin())
            },
            |y| Point::new(y.norm().ln(), (y.y.atan2(y.x) / PI).atanh()),
        )
    }

    /// Built-in maps by name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "exp" => Ok(Self::exp()),
            "identity" => Ok(Self::identity(1)),
            "identity2" => Ok(Self::identity(2)),
            "tanh-warp" => Self::tanh_warp(1.0),
            "exp-exp" => Self::componentwise(&Self::exp(), &Self::exp()),
            "tanh-tanh" => Self::componentwise(&Self::tanh_warp(1.0)?, &Self::tanh_warp(1.0)?),
            "exp-identity" => Self::componentwise(&Self::exp(), &Self::identity(1)),
            "polar-slit" => Ok(Self::polar_slit()),
            other => Err(Error::InvalidArgument(format!(
                "unknown psi '{other}' (known: {})",
                Self::REGISTRY.join(", ")
            ))),
        }
    }

    pub const REGISTRY: [&'static str; 8] = [
        "exp",
        "identity",
        "identity2",
        "tanh-warp",
        "exp-exp",
        "tanh-tanh",
        "exp-identity",
        "polar-slit",
    ];

    /// Largest round-trip error of `inverse ∘ forward` on a grid of
    /// `[−2, 2]ᵈ` and of `forward ∘ inverse` on the domain grid.
    pub fn round_trip_residual(&self, count: usize) -> f64 {
        let cube = if self.dim == 1 { Domain::real_line(2.0) } else { Domain::plane(2.0) };
        let (us, _) = crate::invariance::grid_points(&cube, count);
        let (ys, _) = crate::invariance::grid_points(&self.domain, count);
        let a = us
            .iter()
            .map(|u| crate::invariance::rel_residual(&self.inverse(&self.forward(u)), u))
            .fold(0.0, f64::max);
        let b = ys
            .iter()
            .map(|y| crate::invariance::rel_residual(&self.forward(&self.inverse(y)), y))
            .fold(0.0, f64::max);
        a.max(b)
    }
}

/// JSON description of a built-in `ψ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PsiSpec {
    Exp,
    Identity {
        #[serde(default = "one")]
        dim: usize,
    },
    Affine {
        scale: f64,
        shift: f64,
    },
    Affine2 {
        matrix: [[f64; 2]; 2],
        shift: [f64; 2],
    },
    TanhWarp {
        #[serde(default = "unit")]
        scale: f64,
    },
    Componentwise {
        parts: Vec<PsiSpec>,
    },
    PolarSlit,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl PsiSpec {
    pub fn build(&self) -> Result<Psi> {
        match self {
            PsiSpec::Exp => Ok(Psi::exp()),
            PsiSpec::Identity { dim } if *dim == 1 || *dim == 2 => Ok(Psi::identity(*dim)),
            PsiSpec::Identity { dim } => Err(Error::InvalidArgument(format!("identity psi dim must be 1 or 2, got {dim}"))),
            PsiSpec::Affine { scale, shift } => Psi::affine(*scale, *shift),
            PsiSpec::Affine2 { matrix, shift } => Psi::affine2(*matrix, *shift),
            PsiSpec::TanhWarp { scale } => Psi::tanh_warp(*scale),
            PsiSpec::Componentwise { parts } => match parts.as_slice() {
                [a, b] => Psi::componentwise(&a.build()?, &b.build()?),
                _ => Err(Error::InvalidArgument("componentwise psi needs exactly two parts".into())),
            },
            PsiSpec::PolarSlit => Ok(Psi::polar_slit()),
        }
    }
}

/// Everything needed to build `X_y`.
#[derive(Clone, Debug)]
pub struct SelfSimilarProcessSpec {
    pub psi: Psi,
    pub driver: LevyModel,
    pub alpha: f64,
    pub beta: f64,
    pub start: Point,
}

/// Driver time horizons are doubled up to this bound.
pub const DEFAULT_MAX_DRIVER_HORIZON: f64 = 1024.0;
/// Relative size of the expected tail of `φ` accepted as converged.
pub const TAIL_TOL: f64 = 1e-13;

impl SelfSimilarProcessSpec {
    pub fn validate(&self) -> Result<()> {
        self.driver.validate()?;
        if self.driver.dim != self.psi.dim() {
            return Err(Error::InvalidArgument(format!(
                "driver dim {} does not match psi dim {}",
                self.driver.dim,
                self.psi.dim()
            )));
        }
        if !self.psi.domain().contains(&self.start) {
            return Err(Error::Domain(format!("start {:?} is outside {}", self.start, self.psi.domain().name())));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::InvalidArgument("alpha and beta must be finite".into()));
        }
        Ok(())
    }

    /// `ψ⁻¹(start)`.
    pub fn base_point(&self) -> Point {
        self.psi.inverse(&self.start)
    }

    /// The invariance components of the process family.
    pub fn components(&self) -> InvarianceComponents {
        InvarianceComponents::from_process(&self.psi, self.alpha, self.beta)
    }

    /// The same spec started elsewhere.
    pub fn started_at(&self, start: Point) -> Self {
        Self { start, ..self.clone() }
    }
}

/// A driver path long enough for a target clock value, with its time change.
#[derive(Clone, Debug)]
pub struct CoveredDriver {
    pub path: CadlagPath,
    pub timechange: TimeChange,
    pub lifetime: Lifetime,
    /// The driver horizon bound was hit before the target was covered.
    pub truncated: bool,
}

/// Simulates the driver with horizons 1, 2, 4, ... (the simulation is
/// prefix-consistent, so doubling only reveals more of one realization)
/// until it is killed, its life-time has converged, or `φ` reaches `target`.
pub fn simulate_covering(
    model: &LevyModel,
    alpha: f64,
    prefactor: f64,
    target: f64,
    seed: u64,
    max_horizon: f64,
) -> Result<CoveredDriver> {
    let mut horizon = 1.0_f64;
    let mut previous: Option<CoveredDriver> = None;
    loop {
        let path = simulate(model, horizon, seed)?;
        let xi = if path.dim() == 1 { path.clone() } else { path.component(0) };
        let timechange = match build_timechange(&xi, alpha).and_then(|tc| tc.with_prefactor(prefactor)) {
            Ok(tc) => tc,
            // the clock left the floating-point range: keep the last finite cover
            Err(Error::Overflow(_)) if previous.is_some() => return Ok(previous.expect("checked")),
            Err(e) => return Err(e),
        };
        let lifetime = timechange.lifetime_with_model(model, TAIL_TOL);
        let done = match lifetime {
            Lifetime::Killed(_) => true,
            Lifetime::Converged { value, tail } => tail <= TAIL_TOL * value,
            Lifetime::Divergent { .. } if target == f64::INFINITY => true,
            _ => timechange.total() >= target,
        };
        if done || horizon >= max_horizon {
            let truncated = !done;
            return Ok(CoveredDriver {
                path,
                timechange,
                lifetime,
                truncated,
            });
        }
        previous = Some(CoveredDriver {
            path,
            timechange,
            lifetime,
            truncated: true,
        });
        horizon *= 2.0;
    }
}

/// A trajectory of `X_y` with exact evaluation at any time.
#[derive(Clone, Debug)]
pub struct LampertiTrajectory {
    /// Breakpoint values pushed through `φ_y`, Δ-terminated when finite.
    pub path: CadlagPath,
    pub driver: CadlagPath,
    pub timechange: TimeChange,
    pub lifetime: Lifetime,
    pub truncated: bool,
    psi: Psi,
    base: Point,
    beta: f64,
    integral: Option<ExpIntegral>,
}

impl LampertiTrajectory {
    /// `ψ⁻¹(X)` at driver time `s`, from the left or the right.
    fn driver_state(&self, s: f64, left: bool) -> Result<Point> {
        let d = if left {
            self.driver.left_value_at(s)?
        } else {
            self.driver
                .value_at(s)?
                .alive()
                .ok_or_else(|| Error::InvalidArgument("driver time beyond kill".into()))?
        };
        let mut u = Point::new(self.base.x + d.x, 0.0);
        if let Some(integral) = &self.integral {
            let times = integral.breakpoints();
            let i = times.partition_point(|&r| r < s);
            let value = if left && i < times.len() && times[i] == s {
                integral.left_values()[i]
            } else {
                integral.at(s)?
            };
            u.y = self.base.y + (self.beta * self.base.x).exp() * value;
        }
        Ok(u)
    }

    fn push(&self, u: &Point) -> Result<Point> {
        let x = self.psi.forward(u);
        if x.x.is_finite() && x.y.is_finite() {
            Ok(x)
        } else {
            Err(Error::Overflow(format!("psi({u:?}) is not finite")))
        }
    }

    /// Exact `X_y(t)`.
    pub fn value_at(&self, t: f64) -> Result<PathValue> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
        }
        if let Some(zeta) = self.lifetime.finite() {
            if t >= zeta {
                return Ok(PathValue::Cemetery);
            }
        }
        let total = self.timechange.total();
        if t >= total {
            if self.lifetime.finite().is_some() {
                return Ok(PathValue::Alive(self.push(&self.driver_state(self.driver.end(), true)?)?));
            }
            if t == total {
                return Ok(PathValue::Alive(self.push(&self.driver_state(self.driver.end(), false)?)?));
            }
            return Err(Error::BeyondHorizon { t, end: total });
        }
        let s = self.timechange.invert(t)?;
        Ok(PathValue::Alive(self.push(&self.driver_state(s, false)?)?))
    }
}

/// Builds `X_y` on `[0, horizon]` (real time).
pub fn build_trajectory(spec: &SelfSimilarProcessSpec, horizon: f64, seed: u64) -> Result<LampertiTrajectory> {
    build_trajectory_with(spec, horizon, seed, DEFAULT_MAX_DRIVER_HORIZON)
}

pub fn build_trajectory_with(
    spec: &SelfSimilarProcessSpec,
    horizon: f64,
    seed: u64,
    max_driver_horizon: f64,
) -> Result<LampertiTrajectory> {
    spec.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let base = spec.base_point();
    let prefactor = (spec.alpha * base.x).exp();
    let covered = simulate_covering(&spec.driver, spec.alpha, prefactor, horizon, seed, max_driver_horizon)?;
    let driver = covered.path;
    let integral = if driver.dim() == 2 {
        Some(ExpIntegral::new(&driver.component(0), &driver.component(1), spec.beta)?)
    } else {
        None
    };
    let mut traj = LampertiTrajectory {
        path: CadlagPath::constant(spec.psi.dim(), spec.start, 1.0),
        driver,
        timechange: covered.timechange,
        lifetime: covered.lifetime,
        truncated: covered.truncated,
        psi: spec.psi.clone(),
        base,
        beta: spec.beta,
        integral,
    };
    traj.path = real_time_path(&traj, horizon)?;
    Ok(traj)
}

/// Driver breakpoints pushed through `φ_y`, cut at `horizon`.
fn real_time_path(traj: &LampertiTrajectory, horizon: f64) -> Result<CadlagPath> {
    let clock = traj.timechange.breakpoint_values();
    let driver_times = traj.driver.breakpoints();
    let mut times = vec![0.0];
    let first = traj.push(&traj.driver_state(0.0, false)?)?;
    let mut left = vec![first];
    let mut right = vec![first];
    let n = driver_times.len();
    let killed = traj.driver.is_killed();
    for i in 1..n {
        let tau = clock[i];
        if tau > horizon {
            break;
        }
        let l = traj.push(&traj.driver_state(driver_times[i], true)?)?;
        let is_kill = killed && i == n - 1;
        let r = if is_kill { l } else { traj.push(&traj.driver_state(driver_times[i], false)?)? };
        if tau <= *times.last().expect("nonempty") {
            *right.last_mut().expect("nonempty") = r;
            continue;
        }
        times.push(tau);
        left.push(l);
        right.push(r);
    }
    let last = *times.last().expect("nonempty");
    let zeta = traj.lifetime.finite();
    let mut kill = false;
    match zeta {
        Some(z) if z <= horizon => {
            if z > last {
                let v = *right.last().expect("nonempty");
                times.push(z);
                left.push(v);
                right.push(v);
            }
            kill = true;
        }
        _ => {
            let total = traj.timechange.total();
            let end = horizon.min(total);
            if end > last {
                let v = if end < total {
                    traj.value_at(end)?.alive().expect("alive before the life-time")
                } else {
                    traj.push(&traj.driver_state(traj.driver.end(), true)?)?
                };
                times.push(end);
                left.push(v);
                right.push(v);
            }
        }
    }
    let mut path = CadlagPath::from_breakpoints(traj.psi.dim(), times, left, right)?;
    if kill {
        path = path.killed_at_end(None);
    }
    Ok(path)
}

/// Samples `X_y(t)` for `n` independent seeds.
pub fn sample_at(spec: &SelfSimilarProcessSpec, t: f64, n: usize, seed: u64) -> Result<Vec<PathValue>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| build_trajectory(spec, t, derive_seed(seed, 0, i))?.value_at(t))
        .collect()
}

/// Options for [`recover_driver`].
#[derive(Clone, Copy, Debug)]
pub struct RecoveryOptions {
    /// Trapezoid sub-steps per segment where `c` varies along the segment.
    pub substeps: usize,
    /// Shift a trajectory started away from `y₀` back to `y₀`.
    pub normalize_start: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            substeps: 16,
            normalize_start: false,
        }
    }
}

/// Recovers the driver: `t ↦ g(X(A⁻¹(t)))` with `A(t) = ∫₀ᵗ c(X(u)) du`.
pub fn recover_driver(
    trajectory: &CadlagPath,
    components: &InvarianceComponents,
    g: &CanonicalMap,
    options: RecoveryOptions,
) -> Result<CadlagPath> {
    let start = trajectory.start_value();
    let at_reference = crate::invariance::rel_residual(&start, &components.y0) < 1e-12;
    if !at_reference && !options.normalize_start {
        return Err(Error::Precondition(format!(
            "trajectory starts at {start:?}, not at the reference point {:?}",
            components.y0
        )));
    }
    let shift = |x: &Point| if at_reference { *x } else { components.f_inv(&start, x) };
    let times = trajectory.breakpoints();
    let n = times.len();
    let mut clock = Vec::with_capacity(n);
    clock.push(0.0);
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let dt = times[i + 1] - times[i];
        let a = trajectory.right_values()[i];
        let b = trajectory.left_values()[i + 1];
        let increment = if a == b {
            components.c(&a) * dt
        } else {
            let k = options.substeps.max(1);
            let h = dt / k as f64;
            let mut sum = 0.5 * (components.c(&a) + components.c(&b));
            for j in 1..k {
                sum += components.c(&(a + (b - a) * (j as f64 / k as f64)));
            }
            sum * h
        };
        acc += increment;
        clock.push(acc);
    }
    let mut out_times = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let l = g.forward(&shift(&trajectory.left_values()[i]))?;
        let r = g.forward(&shift(&trajectory.right_values()[i]))?;
        if i > 0 && clock[i] <= *out_times.last().expect("nonempty") {
            *right.last_mut().expect("nonempty") = r;
            continue;
        }
        out_times.push(clock[i]);
        left.push(l);
        right.push(r);
    }
    let mut path = CadlagPath::from_breakpoints(trajectory.dim(), out_times, left, right)?;
    if trajectory.is_killed() {
        path = path.killed_at_end(None);
    }
    Ok(path)
}

/// Samples of the life-time `φ_y(+∞)`.
#[derive(Clone, Debug, Serialize)]
pub struct LifetimeSamples {
    pub samples: Vec<f64>,
    /// Paths without a finite life-time: divergent, or undetermined within
    /// the horizon bound.
    pub excluded: usize,
}

pub fn lifetime_law_sample(spec: &SelfSimilarProcessSpec, n_paths: usize, seed: u64) -> Result<LifetimeSamples> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
    }
    let base = spec.base_point();
    let prefactor = (spec.alpha * base.x).exp();
    let results: Vec<Option<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let covered = simulate_covering(
                &spec.driver,
                spec.alpha,
                prefactor,
                f64::INFINITY,
                derive_seed(seed, 0, i),
                DEFAULT_MAX_DRIVER_HORIZON,
            )?;
            Ok(if covered.truncated { None } else { covered.lifetime.finite() })
        })
        .collect::<Result<_>>()?;
    let excluded = results.iter().filter(|r| r.is_none()).count();
    Ok(LifetimeSamples {
        samples: results.into_iter().flatten().collect(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trips() {
        for name in Psi::REGISTRY {
            let psi = Psi::by_name(name).unwrap();
            assert!(psi.round_trip_residual(200) < 1e-9, "{name}");
        }
    }

    #[test]
    fn unknown_psi_rejected() {
        assert!(Psi::by_name("sinh").is_err());
    }

    #[test]
    fn psi_spec_builds_componentwise() {
        let spec = PsiSpec::Componentwise {
            parts: vec![PsiSpec::Exp, PsiSpec::TanhWarp { scale: 2.0 }],
        };
        let psi = spec.build().unwrap();
        assert_eq!(psi.dim(), 2);
        assert!(psi.round_trip_residual(100) < 1e-9);
    }

    #[test]
    fn start_outside_domain_rejected() {
        let spec = SelfSimilarProcessSpec {
            psi: Psi::exp(),
            driver: LevyModel::new(1),
            alpha: 1.0,
            beta: 0.0,
            start: scalar(-1.0),
        };
        assert!(matches!(spec.validate(), Err(Error::Domain(_))));
    }
}
