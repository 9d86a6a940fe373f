//! The tagged fragment `(Y, Z)` of a self-similar fragmentation with a
//! finite dislocation measure: mass of the fragment containing a uniformly
//! tagged point, and the mass it has dissipated so far.
//!
//! The direct route runs the event dynamics. The Lévy route builds the
//! bivariate driver `(ξ, η)` from the dislocation measure and sets
//! `Y(t) = x e^{−ξ(φ⁻¹(t))}`, `Z(t) = x ∫₀^{φ⁻¹(t)} e^{−ξ(s−)} dη(s)` with
//! `φ(t) = x^{−α} ∫₀ᵗ e^{α ξ(s)} ds`.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lamperti::{simulate_covering, DEFAULT_MAX_DRIVER_HORIZON};
use crate::levy::{simulate, CadlagPath, LevyModel};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{ks_two_sample, Estimate, KsResult};
use crate::timechange::{ExpIntegral, TimeChange};
use crate::{Error, Point, Result};

pub const DEFAULT_EVENT_CAP: usize = 1_000_000;
pub const KS_LEVEL: f64 = 0.01;
const SUM_SLACK: f64 = 1e-12;
const QUANTUM_DIGITS: i32 = 10;

/// Nonincreasing masses in `[0, 1]` with sum at most 1. Zeros are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MassPartition {
    masses: Vec<f64>,
}

impl MassPartition {
    pub fn new(mut masses: Vec<f64>) -> Result<Self> {
        if let Some(bad) = masses.iter().find(|m| !(**m >= 0.0 && **m <= 1.0)) {
            return Err(Error::Model(format!("mass {bad} is outside [0, 1]")));
        }
        masses.retain(|&m| m > 0.0);
        masses.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = masses.iter().sum();
        if total > 1.0 + SUM_SLACK {
            return Err(Error::Model(format!("masses sum to {total} > 1")));
        }
        Ok(Self { masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `1 − Σ xᵢ`, clamped at 0.
    pub fn dust(&self) -> f64 {
        (1.0 - self.masses.iter().sum::<f64>()).max(0.0)
    }

    /// The partition `(1, 0, ...)`, which does nothing.
    pub fn is_trivial(&self) -> bool {
        self.masses.len() == 1 && self.masses[0] == 1.0
    }
}

impl TryFrom<Vec<f64>> for MassPartition {
    type Error = Error;

    fn try_from(masses: Vec<f64>) -> Result<Self> {
        Self::new(masses)
    }
}

impl From<MassPartition> for Vec<f64> {
    fn from(p: MassPartition) -> Self {
        p.masses
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub masses: MassPartition,
    pub weight: f64,
}

/// A finite dislocation measure with an erosion coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DislocationMeasure {
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub erosion: f64,
}

impl DislocationMeasure {
    pub fn new(atoms: Vec<(Vec<f64>, f64)>, erosion: f64) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(m, weight)| Ok(Atom { masses: MassPartition::new(m)?, weight }))
            .collect::<Result<Vec<_>>>()?;
        let nu = Self { atoms, erosion };
        nu.validate()?;
        Ok(nu)
    }

    /// `δ_{(1/2, 1/2)}`: binary splitting, nothing dissipated.
    pub fn binary() -> Self {
        Self::new(vec![(vec![0.5, 0.5], 1.0)], 0.0).expect("valid")
    }

    /// `δ_{(1/2)}`: half the mass is lost at each event.
    pub fn dissipative() -> Self {
        Self::new(vec![(vec![0.5], 1.0)], 0.0).expect("valid")
    }

    pub fn with_erosion(mut self, erosion: f64) -> Result<Self> {
        self.erosion = erosion;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::Model("a dislocation measure needs at least one atom".into()));
        }
        for atom in &self.atoms {
            if !(atom.weight > 0.0 && atom.weight.is_finite()) {
                return Err(Error::Model(format!("atom weight must be positive, got {}", atom.weight)));
            }
            if atom.masses.is_trivial() {
                return Err(Error::Model("the partition (1, 0, ...) cannot carry weight".into()));
            }
        }
        if !(self.erosion >= 0.0 && self.erosion.is_finite()) {
            return Err(Error::Model(format!("erosion must be >= 0, got {}", self.erosion)));
        }
        Ok(())
    }

    pub fn total_rate(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `∫ (1 − Σ xᵢ) ν(dx)`.
    pub fn dissipation_rate(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.masses.dust()).sum()
    }
}

/// `(Y, Z)` at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TaggedState {
    pub mass: f64,
    pub dissipated: f64,
    pub alive: bool,
}

#[derive(Clone, Debug)]
enum Route {
    Direct {
        alpha: f64,
        erosion: f64,
    },
    Levy {
        xi: CadlagPath,
        integral: ExpIntegral,
        timechange: TimeChange,
    },
}

/// A tagged-fragment trajectory with exact evaluation.
#[derive(Clone, Debug)]
pub struct FragPath {
    x0: f64,
    /// Event times (direct) or images of driver breakpoints (Lévy route).
    times: Vec<f64>,
    left: Vec<TaggedState>,
    right: Vec<TaggedState>,
    /// Simulated range; beyond it only a dead fragment is known.
    end: f64,
    death_time: Option<f64>,
    capped: bool,
    events: usize,
    route: Route,
}

impl FragPath {
    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn death_time(&self) -> Option<f64> {
        self.death_time
    }

    /// The event cap (direct) or the driver horizon bound (Lévy route) was
    /// reached before the requested horizon.
    pub fn capped(&self) -> bool {
        self.capped
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn right_states(&self) -> &[TaggedState] {
        &self.right
    }

    /// The final state of a dead fragment.
    fn dead_state(&self) -> TaggedState {
        TaggedState {
            mass: 0.0,
            dissipated: self.right.last().expect("nonempty").dissipated,
            alive: false,
        }
    }

    /// `(Y(t), Z(t))`.
    pub fn state_at(&self, t: f64) -> Result<TaggedState> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
        }
        if let Some(death) = self.death_time {
            if t >= death {
                return Ok(self.dead_state());
            }
        }
        if t > self.end {
            return Err(Error::BeyondHorizon { t, end: self.end });
        }
        match &self.route {
            Route::Direct { alpha, erosion } => {
                let k = self.times.partition_point(|&u| u <= t) - 1;
                let start = self.right[k];
                let mass = eroded_mass(start.mass, *alpha, *erosion, t - self.times[k]);
                Ok(TaggedState {
                    mass,
                    dissipated: start.dissipated + (start.mass - mass),
                    alive: true,
                })
            }
            Route::Levy {
                xi,
                integral,
                timechange,
                ..
            } => {
                let s = if t >= timechange.total() {
                    // the end of the covered range, or inside the converged tail
                    xi.end()
                } else {
                    timechange.invert(t)?
                };
                let xi_s = if s == xi.end() { xi.end_value().x } else { xi.value_at(s)?.alive().expect("alive").x };
                Ok(TaggedState {
                    mass: self.x0 * (-xi_s).exp(),
                    dissipated: self.x0 * integral.at(s)?,
                    alive: true,
                })
            }
        }
    }

    /// `(Y, Z)` as a path: exact at breakpoints, chords in between.
    pub fn path(&self) -> Result<CadlagPath> {
        let to_point = |s: &TaggedState| Point::new(s.mass, s.dissipated);
        let mut times = self.times.clone();
        let mut left: Vec<Point> = self.left.iter().map(to_point).collect();
        let mut right: Vec<Point> = self.right.iter().map(to_point).collect();
        let last = *times.last().expect("nonempty");
        match self.death_time {
            Some(death) => {
                if death > last {
                    let before = self.state_before(death)?;
                    times.push(death);
                    left.push(to_point(&before));
                    right.push(to_point(&before));
                }
                let path = CadlagPath::from_breakpoints(2, times, left, right)?;
                Ok(path.killed_at_end(None))
            }
            None => {
                if self.end > last {
                    let v = to_point(&self.state_at(self.end)?);
                    times.push(self.end);
                    left.push(v);
                    right.push(v);
                }
                CadlagPath::from_breakpoints(2, times, left, right)
            }
        }
    }

    fn state_before(&self, t: f64) -> Result<TaggedState> {
        match &self.route {
            Route::Direct { alpha, erosion } => {
                let k = self.times.partition_point(|&u| u < t) - 1;
                let start = self.right[k];
                let mass = eroded_mass(start.mass, *alpha, *erosion, t - self.times[k]);
                Ok(TaggedState {
                    mass,
                    dissipated: start.dissipated + (start.mass - mass),
                    alive: true,
                })
            }
            Route::Levy { .. } => Ok(*self.left.last().expect("nonempty")),
        }
    }
}

/// Mass after `dt` of erosion `dY/dt = −c Y^{1+α}` from `mass`.
fn eroded_mass(mass: f64, alpha: f64, erosion: f64, dt: f64) -> f64 {
    if erosion == 0.0 || dt == 0.0 {
        return mass;
    }
    if alpha == 0.0 {
        return mass * (-erosion * dt).exp();
    }
    let arg = alpha * erosion * dt * mass.powf(alpha);
    if arg <= -1.0 {
        return 0.0;
    }
    mass * (-arg.ln_1p() / alpha).exp()
}

/// Real time needed to run intrinsic time `sigma` from `mass`:
/// `∫₀^σ (mass e^{−c u})^{−α} du`.
fn real_wait(mass: f64, alpha: f64, erosion: f64, sigma: f64) -> f64 {
    let scale = mass.powf(-alpha);
    let rate = alpha * erosion;
    if rate == 0.0 {
        scale * sigma
    } else {
        scale * (rate * sigma).exp_m1() / rate
    }
}

/// Event-driven simulation on `[0, horizon]`.
///
/// Splitting happens at rate `Y^α ν(𝒫₁)` and the tagged point is eroded
/// away at rate `c Y^α`. Between events the mass erodes and `Z` collects the
/// eroded mass. At a splitting with partition `x`, `Z` gains `Y(1 − Σ xⱼ)`
/// and the tagged fragment becomes `Y xᵢ` with probability `xᵢ`, or is lost
/// with probability `1 − Σ xⱼ`.
pub fn simulate_direct(nu: &DislocationMeasure, alpha: f64, x0: f64, horizon: f64, seed: u64) -> Result<FragPath> {
    simulate_direct_capped(nu, alpha, x0, horizon, seed, DEFAULT_EVENT_CAP)
}

pub fn simulate_direct_capped(
    nu: &DislocationMeasure,
    alpha: f64,
    x0: f64,
    horizon: f64,
    seed: u64,
    event_cap: usize,
) -> Result<FragPath> {
    check_inputs(nu, alpha, x0, horizon)?;
    let mut rng = stream_rng(seed, 0);
    let total_rate = nu.total_rate();
    let erosion = nu.erosion;
    let hazard = total_rate + erosion;
    let start = TaggedState {
        mass: x0,
        dissipated: 0.0,
        alive: true,
    };
    let mut times = vec![0.0];
    let mut left = vec![start];
    let mut right = vec![start];
    let mut t = 0.0_f64;
    let mut state = start;
    let mut death_time = None;
    let mut capped = false;
    let mut events = 0;
    loop {
        let e: f64 = rng.sample(Exp1);
        let sigma = e / hazard;
        let t_next = t + real_wait(state.mass, alpha, erosion, sigma);
        if t_next > horizon {
            break;
        }
        if !(t_next > t) {
            // accumulation of events: the mass vanishes at t
            death_time = Some(t);
            break;
        }
        let before_mass = state.mass * (-erosion * sigma).exp();
        let before = TaggedState {
            mass: before_mass,
            dissipated: state.dissipated + (state.mass - before_mass),
            alive: true,
        };
        t = t_next;
        events += 1;
        let u: f64 = rng.random::<f64>() * hazard;
        if u < erosion {
            death_time = Some(t);
            times.push(t);
            left.push(before);
            right.push(TaggedState { mass: 0.0, alive: false, ..before });
            break;
        }
        let atom = pick_atom(nu, u - erosion);
        let dissipated = before.dissipated + before.mass * atom.masses.dust();
        let v: f64 = rng.random();
        let mut cumulative = 0.0;
        let mut survivor = None;
        for &x in atom.masses.masses() {
            cumulative += x;
            if v < cumulative {
                survivor = Some(x);
                break;
            }
        }
        times.push(t);
        left.push(before);
        match survivor {
            Some(x) if before.mass * x > 0.0 => {
                state = TaggedState {
                    mass: before.mass * x,
                    dissipated,
                    alive: true,
                };
                right.push(state);
            }
            _ => {
                state = TaggedState {
                    mass: 0.0,
                    dissipated,
                    alive: false,
                };
                right.push(state);
                death_time = Some(t);
                break;
            }
        }
        if events >= event_cap {
            capped = true;
            break;
        }
    }
    let end = if capped { t } else { horizon };
    Ok(FragPath {
        x0,
        times,
        left,
        right,
        end: death_time.map_or(end, |d: f64| d.min(end)),
        death_time,
        capped,
        events,
        route: Route::Direct { alpha, erosion },
    })
}

fn pick_atom(nu: &DislocationMeasure, mut u: f64) -> &Atom {
    for atom in &nu.atoms {
        if u < atom.weight {
            return atom;
        }
        u -= atom.weight;
    }
    nu.atoms.last().expect("nonempty")
}

fn check_inputs(nu: &DislocationMeasure, alpha: f64, x0: f64, horizon: f64) -> Result<()> {
    nu.validate()?;
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::InvalidArgument(format!("initial mass must be positive, got {x0}")));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be finite, got {alpha}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// The driver `(ξ, η)`: for each atom `x` of weight `w`, jumps
/// `(−log xᵢ, 1 − Σ xⱼ)` at rate `w xᵢ`, and a jump `(0, 1 − Σ xⱼ)` at rate
/// `w (1 − Σ xⱼ)` that kills `ξ`. Erosion `c` adds drift `(c, c)` and
/// killing at rate `c`.
pub fn levy_measure_pi(nu: &DislocationMeasure) -> Result<LevyModel> {
    nu.validate()?;
    let mut model = LevyModel::new(2);
    for atom in &nu.atoms {
        let dust = atom.masses.dust();
        for &x in atom.masses.masses() {
            model = model.with_jump(atom.weight * x, &[-x.ln(), dust], 0.0);
        }
        if dust > 0.0 {
            model = model.with_jump(atom.weight * dust, &[0.0, dust], 1.0);
        }
    }
    if nu.erosion > 0.0 {
        model = model.with_drift(&[nu.erosion, nu.erosion]).with_kill_rate(nu.erosion);
    }
    model.validate()?;
    Ok(model)
}

/// The Lévy-route trajectory on `[0, horizon]`.
pub fn simulate_via_levy(nu: &DislocationMeasure, alpha: f64, x0: f64, horizon: f64, seed: u64) -> Result<FragPath> {
    check_inputs(nu, alpha, x0, horizon)?;
    let model = levy_measure_pi(nu)?;
    let covered = simulate_covering(&model, alpha, x0.powf(-alpha), horizon, seed, DEFAULT_MAX_DRIVER_HORIZON)?;
    let driver = covered.path;
    let xi = driver.component(0);
    let integral = ExpIntegral::new(&xi, &driver.component(1), -1.0)?;
    let clock = covered.timechange.breakpoint_values();
    let death_time = covered.lifetime.finite();
    let state = |k: usize, from_left: bool| -> TaggedState {
        let (x, z) = if from_left {
            (xi.left_values()[k].x, integral.left_values()[k])
        } else {
            (xi.right_values()[k].x, integral.right_values()[k])
        };
        TaggedState {
            mass: x0 * (-x).exp(),
            dissipated: x0 * z,
            alive: true,
        }
    };
    let mut times = vec![0.0];
    let mut left = vec![state(0, false)];
    let mut right = vec![state(0, false)];
    let killed = driver.is_killed();
    let n = clock.len();
    for k in 1..n {
        if clock[k] > horizon {
            break;
        }
        let l = state(k, true);
        let mut r = state(k, false);
        if killed && k == n - 1 {
            r = TaggedState { mass: 0.0, alive: false, ..r };
        }
        if clock[k] <= *times.last().expect("nonempty") {
            *right.last_mut().expect("nonempty") = r;
            continue;
        }
        times.push(clock[k]);
        left.push(l);
        right.push(r);
    }
    let end = match death_time {
        Some(d) => d.min(horizon),
        None => covered.timechange.total().min(horizon),
    };
    if let (Some(d), false) = (death_time, killed) {
        // converged clock: the mass has vanished by accumulation
        if d <= horizon {
            let last = *right.last().expect("nonempty");
            if d > *times.last().expect("nonempty") {
                times.push(d);
                left.push(last);
                right.push(TaggedState { mass: 0.0, alive: false, ..last });
            }
        }
    }
    let events = driver.jump_count();
    Ok(FragPath {
        x0,
        times,
        left,
        right,
        end,
        death_time,
        capped: covered.truncated,
        events,
        route: Route::Levy {
            xi,
            integral,
            timechange: covered.timechange,
        },
    })
}

/// Options of [`compare_routes`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EquivalenceOptions {
    pub x0: f64,
    pub t_probe: f64,
    pub n: usize,
    /// Death times beyond this are censored to `+∞`.
    pub death_horizon: f64,
    pub level: f64,
}

impl EquivalenceOptions {
    pub fn new(x0: f64, t_probe: f64, n: usize) -> Self {
        Self {
            x0,
            t_probe,
            n,
            death_horizon: 10.0 * t_probe,
            level: KS_LEVEL,
        }
    }
}

/// Samples of `Y(t)`, `Z(t)` and the death time along one route.
#[derive(Clone, Debug, Default)]
pub struct RouteSamples {
    pub mass: Vec<f64>,
    pub dissipated: Vec<f64>,
    pub death: Vec<f64>,
    pub capped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RouteSummary {
    pub alpha: f64,
    pub mean_mass: Estimate,
    pub mean_dissipated: Estimate,
    pub dead_fraction: f64,
    pub capped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub options: EquivalenceOptions,
    pub direct: RouteSummary,
    pub levy: RouteSummary,
    pub ks_mass: KsResult,
    pub ks_dissipated: KsResult,
    pub ks_death: KsResult,
    pub pass: bool,
}

fn route_samples(
    opts: &EquivalenceOptions,
    seed: u64,
    stream: u64,
    run: impl Fn(u64) -> Result<FragPath> + Sync,
) -> Result<RouteSamples> {
    let rows: Vec<(TaggedState, f64, bool)> = (0..opts.n as u64)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let path = run(derive_seed(seed, stream, i))?;
            let state = match path.state_at(opts.t_probe) {
                Ok(s) => s,
                Err(Error::BeyondHorizon { .. }) if path.capped() => *path.right_states().last().expect("nonempty"),
                Err(e) => return Err(e),
            };
            let death = match path.death_time() {
                Some(d) if d <= opts.death_horizon => d,
                _ => f64::INFINITY,
            };
            Ok((state, death, path.capped()))
        })
        .collect::<Result<_>>()?;
    let mut out = RouteSamples::default();
    for (s, d, c) in rows {
        out.mass.push(s.mass);
        out.dissipated.push(s.dissipated);
        out.death.push(d);
        out.capped += c as usize;
    }
    Ok(out)
}

fn summary(alpha: f64, s: &RouteSamples) -> Result<RouteSummary> {
    Ok(RouteSummary {
        alpha,
        mean_mass: Estimate::of(&s.mass)?,
        mean_dissipated: Estimate::of(&s.dissipated)?,
        dead_fraction: s.death.iter().filter(|d| d.is_finite()).count() as f64 / s.death.len() as f64,
        capped: s.capped,
    })
}

/// Direct-route samples (seeds `derive_seed(seed, 0, i)`).
pub fn direct_samples(nu: &DislocationMeasure, alpha: f64, opts: &EquivalenceOptions, seed: u64) -> Result<RouteSamples> {
    route_samples(opts, seed, 0, |s| simulate_direct(nu, alpha, opts.x0, opts.death_horizon, s))
}

/// Lévy-route samples (seeds `derive_seed(seed, 1, i)`).
pub fn levy_samples(nu: &DislocationMeasure, alpha: f64, opts: &EquivalenceOptions, seed: u64) -> Result<RouteSamples> {
    route_samples(opts, seed, 1, |s| simulate_via_levy(nu, alpha, opts.x0, opts.death_horizon, s))
}

/// Rounds to `QUANTUM_DIGITS` significant digits, so that atoms such as
/// `2^{-k}` and `e^{-k log 2}` tie.
fn quantized(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&x| {
            if x == 0.0 || !x.is_finite() {
                return x;
            }
            let scale = 10f64.powi(QUANTUM_DIGITS - 1 - x.abs().log10().floor() as i32);
            (x * scale).round() / scale
        })
        .collect()
}

/// KS comparison of the two routes, each with its own `α`.
pub fn compare_routes(
    nu: &DislocationMeasure,
    direct_alpha: f64,
    levy_alpha: f64,
    opts: &EquivalenceOptions,
    seed: u64,
) -> Result<EquivalenceReport> {
    if opts.n < 1000 {
        return Err(Error::InvalidArgument(format!("equivalence test needs n >= 1000, got {}", opts.n)));
    }
    if !(opts.t_probe > 0.0 && opts.death_horizon >= opts.t_probe) {
        return Err(Error::InvalidArgument("need 0 < t_probe <= death_horizon".into()));
    }
    let a = direct_samples(nu, direct_alpha, opts, seed)?;
    let b = levy_samples(nu, levy_alpha, opts, seed)?;
    let ks = |x: &[f64], y: &[f64]| ks_two_sample(&quantized(x), &quantized(y), opts.level);
    let ks_mass = ks(&a.mass, &b.mass)?;
    let ks_dissipated = ks(&a.dissipated, &b.dissipated)?;
    let ks_death = ks(&a.death, &b.death)?;
    Ok(EquivalenceReport {
        options: *opts,
        direct: summary(direct_alpha, &a)?,
        levy: summary(levy_alpha, &b)?,
        pass: ks_mass.pass && ks_dissipated.pass && ks_death.pass,
        ks_mass,
        ks_dissipated,
        ks_death,
    })
}

pub fn equivalence_test(
    nu: &DislocationMeasure,
    alpha: f64,
    x0: f64,
    t_probe: f64,
    n: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    compare_routes(nu, alpha, alpha, &EquivalenceOptions::new(x0, t_probe, n), seed)
}

/// Total dissipated mass per path, with the number of paths whose driver
/// was still alive at the horizon bound.
#[derive(Clone, Debug, Serialize)]
pub struct DissipationSamples {
    pub samples: Vec<f64>,
    pub capped: usize,
}

/// `Z(∞) = x ∫₀^{T} e^{−ξ(s−)} dη(s)` via the Lévy route. The value does
/// not depend on `α`.
pub fn total_dissipation_samples(
    nu: &DislocationMeasure,
    alpha: f64,
    x0: f64,
    n: usize,
    seed: u64,
) -> Result<DissipationSamples> {
    check_inputs(nu, alpha, x0, 1.0)?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let model = levy_measure_pi(nu)?;
    let rows: Vec<(f64, bool)> = (0..n as u64)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let s = derive_seed(seed, 1, i);
            let mut horizon = 1.0;
            loop {
                let driver = simulate(&model, horizon, s)?;
                let done = driver.is_killed();
                if done || horizon >= DEFAULT_MAX_DRIVER_HORIZON {
                    let integral = ExpIntegral::new(&driver.component(0), &driver.component(1), -1.0)?;
                    let total = *integral.right_values().last().expect("nonempty");
                    return Ok((x0 * total, !done));
                }
                horizon *= 2.0;
            }
        })
        .collect::<Result<_>>()?;
    Ok(DissipationSamples {
        capped: rows.iter().filter(|r| r.1).count(),
        samples: rows.into_iter().map(|r| r.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sorted_and_zeros_dropped() {
        let p = MassPartition::new(vec![0.2, 0.0, 0.5]).unwrap();
        assert_eq!(p.masses(), &[0.5, 0.2]);
        assert!((p.dust() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn oversized_partition_rejected() {
        assert!(MassPartition::new(vec![0.6, 0.6]).is_err());
        assert!(MassPartition::new(vec![1.2]).is_err());
    }

    #[test]
    fn trivial_atom_rejected() {
        assert!(DislocationMeasure::new(vec![(vec![1.0], 1.0)], 0.0).is_err());
    }

    #[test]
    fn binary_driver_has_no_killing() {
        let model = levy_measure_pi(&DislocationMeasure::binary()).unwrap();
        assert_eq!(model.total_kill_rate(), 0.0);
        assert_eq!(model.total_jump_rate(), 1.0);
        for j in &model.jumps {
            assert_eq!(j.displacement, vec![2f64.ln(), 0.0]);
        }
    }

    #[test]
    fn erosion_adds_drift_and_kill() {
        let nu = DislocationMeasure::dissipative().with_erosion(0.3).unwrap();
        let model = levy_measure_pi(&nu).unwrap();
        assert_eq!(model.drift, vec![0.3, 0.3]);
        assert!((model.total_kill_rate() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn binary_has_no_dissipation() {
        let path = simulate_direct(&DislocationMeasure::binary(), 0.0, 1.0, 5.0, 3).unwrap();
        assert!(path.right_states().iter().all(|s| s.dissipated == 0.0));
    }

    #[test]
    fn eroded_mass_matches_intrinsic_clock() {
        let (mass, alpha, c, sigma) = (0.7, 0.6, 0.4, 1.3);
        let dt = real_wait(mass, alpha, c, sigma);
        let expected = mass * (-c * sigma).exp();
        assert!((eroded_mass(mass, alpha, c, dt) - expected).abs() < 1e-14);
    }
}
