//! Exponential functionals of a path and their exact inverses.
//!
//! On every affine segment of `ξ` the integrand `e^{αξ}` has a closed-form
//! antiderivative, so `φ(t) = ∫₀ᵗ e^{αξ(s)} ds` and its inverse are exact up
//! to floating rounding.

use crate::levy::{CadlagPath, Continuation, LevyModel};
use crate::{Error, Result};

/// `∫₀^τ e^{a + b u} du`, stable for small `b τ`.
pub(crate) fn exp_affine_integral(a: f64, b: f64, tau: f64) -> f64 {
    if b == 0.0 {
        a.exp() * tau
    } else {
        a.exp() * (b * tau).exp_m1() / b
    }
}

/// Life-time of a time change: the value of `φ` at the end of the path or at
/// infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lifetime {
    /// The driver was killed; `φ(kill time)`.
    Killed(f64),
    /// The integral converges; `tail` is the part beyond the horizon.
    Converged { value: f64, tail: f64 },
    /// The integral grows without bound; truncated at the horizon.
    Divergent { at_horizon: f64 },
    /// Convergence cannot be decided from the path; truncated at the horizon.
    Undetermined { at_horizon: f64 },
}

impl Lifetime {
    /// The life-time when it is finite and known.
    pub fn finite(self) -> Option<f64> {
        match self {
            Lifetime::Killed(v) | Lifetime::Converged { value: v, .. } => Some(v),
            _ => None,
        }
    }

    /// The reported value, truncated at the horizon when not finite.
    pub fn value(self) -> f64 {
        match self {
            Lifetime::Killed(v) | Lifetime::Converged { value: v, .. } => v,
            Lifetime::Divergent { at_horizon } | Lifetime::Undetermined { at_horizon } => at_horizon,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TimeChange {
    times: Vec<f64>,
    cumulative: Vec<f64>,
    seg_start: Vec<f64>,
    seg_slope: Vec<f64>,
    alpha: f64,
    prefactor: f64,
    killed: bool,
    continuation: Continuation,
    end_value: f64,
    last_slope: f64,
}

/// Builds `φ(t) = ∫₀ᵗ e^{α ξ(s)} ds` along a one-dimensional path.
pub fn build_timechange(xi: &CadlagPath, alpha: f64) -> Result<TimeChange> {
    if xi.dim() != 1 {
        return Err(Error::InvalidArgument("the time change needs a one-dimensional path".into()));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let times = xi.breakpoints().to_vec();
    let n = times.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut seg_start = Vec::with_capacity(n);
    let mut seg_slope = Vec::with_capacity(n);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let v0 = xi.right_values()[i].x;
        let m = xi.slopes()[i].x;
        let dt = times[i + 1] - times[i];
        acc += exp_affine_integral(alpha * v0, alpha * m, dt);
        if !acc.is_finite() {
            return Err(Error::Overflow(format!(
                "exponential functional overflows on segment starting at t = {}",
                times[i]
            )));
        }
        cumulative.push(acc);
        seg_start.push(v0);
        seg_slope.push(m);
    }
    Ok(TimeChange {
        times,
        cumulative,
        seg_start,
        seg_slope,
        alpha,
        prefactor: 1.0,
        killed: xi.is_killed(),
        continuation: xi.continuation(),
        end_value: xi.end_value().x,
        last_slope: xi.slopes().last().map_or(0.0, |s| s.x),
    })
}

impl TimeChange {
    /// Multiplies the whole time change by a constant factor.
    pub fn with_prefactor(mut self, prefactor: f64) -> Result<Self> {
        if !(prefactor > 0.0 && prefactor.is_finite()) {
            return Err(Error::InvalidArgument(format!("prefactor must be positive, got {prefactor}")));
        }
        self.prefactor = prefactor;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Driver time covered by the table.
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("at least one breakpoint")
    }

    /// `φ` at the end of the covered range.
    pub fn total(&self) -> f64 {
        self.prefactor * self.cumulative.last().expect("at least one breakpoint")
    }

    /// `φ` at the breakpoints of the source path.
    pub fn breakpoint_values(&self) -> Vec<f64> {
        self.cumulative.iter().map(|c| self.prefactor * c).collect()
    }

    /// `φ(s)` for `s` within the covered range.
    pub fn phi(&self, s: f64) -> Result<f64> {
        let end = self.horizon();
        if !(s >= 0.0) || s > end {
            return Err(Error::BeyondHorizon { t: s, end });
        }
        let i = self.times.partition_point(|&u| u <= s) - 1;
        if self.times[i] == s {
            return Ok(self.prefactor * self.cumulative[i]);
        }
        let partial = exp_affine_integral(
            self.alpha * self.seg_start[i],
            self.alpha * self.seg_slope[i],
            s - self.times[i],
        );
        Ok(self.prefactor * (self.cumulative[i] + partial))
    }

    /// `φ⁻¹(t)` for `0 <= t < total`.
    pub fn invert(&self, t: f64) -> Result<f64> {
        let total = self.total();
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("clock value must be >= 0, got {t}")));
        }
        if t >= total {
            return Err(Error::BeyondLifetime { t, total });
        }
        let i = (self.cumulative.partition_point(|&c| self.prefactor * c <= t) - 1).min(self.seg_start.len() - 1);
        if self.prefactor * self.cumulative[i] == t {
            return Ok(self.times[i]);
        }
        let rest = (t / self.prefactor - self.cumulative[i]).max(0.0);
        let level = (self.alpha * self.seg_start[i]).exp();
        let rate = self.alpha * self.seg_slope[i];
        let tau = if rate == 0.0 {
            rest / level
        } else {
            (rest * rate / level).ln_1p() / rate
        };
        let dt = self.times[i + 1] - self.times[i];
        Ok(self.times[i] + tau.clamp(0.0, dt))
    }

    /// Life-time as far as the path alone can tell.
    ///
    /// A killed path gives `φ(kill time)`. A deterministic continuation beyond
    /// the horizon is integrated in closed form. With `α = 0` and no killing
    /// the clock is the identity and diverges.
    pub fn lifetime(&self) -> Lifetime {
        let total = self.total();
        if self.killed {
            return Lifetime::Killed(total);
        }
        if self.alpha == 0.0 {
            return Lifetime::Divergent { at_horizon: total };
        }
        match self.continuation {
            Continuation::Deterministic => {
                let rate = self.alpha * self.last_slope;
                if rate < 0.0 {
                    let tail = self.prefactor * (self.alpha * self.end_value).exp() / -rate;
                    Lifetime::Converged { value: total + tail, tail }
                } else {
                    Lifetime::Divergent { at_horizon: total }
                }
            }
            Continuation::Random => Lifetime::Undetermined { at_horizon: total },
        }
    }

    /// Life-time using the law of the driver beyond the horizon.
    ///
    /// By the Markov property the conditional mean of the remaining integral
    /// is `prefactor · e^{α ξ(H)} / Φ(−α)` where `Φ` is the Laplace exponent of
    /// the driver. When that mean is below `rel_tol · φ(H)` the life-time is
    /// reported as converged. Without killing and with `α · E[ξ(1)] >= 0` the
    /// integral diverges almost surely.
    pub fn lifetime_with_model(&self, model: &LevyModel, rel_tol: f64) -> Lifetime {
        let plain = self.lifetime();
        let at_horizon = match plain {
            Lifetime::Undetermined { at_horizon } => at_horizon,
            // a killing driver dies in finite time whatever the clock does
            Lifetime::Divergent { at_horizon } if model.total_kill_rate() > 0.0 => at_horizon,
            _ => return plain,
        };
        if model.total_kill_rate() == 0.0 && self.alpha * model.first_coordinate_mean() >= 0.0 {
            return Lifetime::Divergent { at_horizon };
        }
        let exponent = model.laplace_exponent(-self.alpha);
        if exponent > 0.0 {
            let tail = self.prefactor * (self.alpha * self.end_value).exp() / exponent;
            if tail <= rel_tol * at_horizon {
                return Lifetime::Converged { value: at_horizon + tail, tail };
            }
        }
        Lifetime::Undetermined { at_horizon }
    }
}

/// Life-time of a time change (see [`TimeChange::lifetime`]).
pub fn lifetime(tc: &TimeChange) -> Lifetime {
    tc.lifetime()
}

/// Running values of `∫₀ᵗ e^{β ξ(s−)} dη(s)` along a joint path.
///
/// Jumps of `η` are weighted by `e^{β ξ(s−)}`. On each segment the declared
/// drift of `η` is integrated in closed form and the Brownian remainder of
/// the slope uses the left-point weight `e^{β ξ(segment start)}`. A terminal
/// jump of `η` at the kill time counts in the value at the kill time.
#[derive(Clone, Debug)]
pub struct ExpIntegral {
    times: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    xi_start: Vec<f64>,
    xi_slope: Vec<f64>,
    eta_slope: Vec<f64>,
    eta_drift: Option<f64>,
    beta: f64,
}

impl ExpIntegral {
    pub fn new(xi: &CadlagPath, eta: &CadlagPath, beta: f64) -> Result<Self> {
        if xi.dim() != 1 || eta.dim() != 1 {
            return Err(Error::InvalidArgument("exp_integral needs one-dimensional paths".into()));
        }
        if xi.end() != eta.end() || xi.kill_time() != eta.kill_time() {
            return Err(Error::TimeAxisMismatch(format!(
                "xi ends at {} (killed: {}), eta at {} (killed: {})",
                xi.end(),
                xi.is_killed(),
                eta.end(),
                eta.is_killed()
            )));
        }
        let (xi, eta) = if xi.breakpoints() == eta.breakpoints() {
            (xi.clone(), eta.clone())
        } else {
            (xi.refined(eta.breakpoints()), eta.refined(xi.breakpoints()))
        };
        let times = xi.breakpoints().to_vec();
        let n = times.len();
        let eta_drift = eta.drift().map(|d| d.x);
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        left.push(0.0);
        right.push(0.0);
        let mut xi_start = Vec::with_capacity(n);
        let mut xi_slope = Vec::with_capacity(n);
        let mut eta_slope = Vec::with_capacity(n);
        for i in 0..n - 1 {
            let v0 = xi.right_values()[i].x;
            let m = xi.slopes()[i].x;
            let s = eta.slopes()[i].x;
            xi_start.push(v0);
            xi_slope.push(m);
            eta_slope.push(s);
            let dt = times[i + 1] - times[i];
            let at_end = right[i] + segment_integral(beta, v0, m, s, eta_drift, dt);
            let jump = eta.right_values()[i + 1].x - eta.left_values()[i + 1].x;
            let weight = (beta * xi.left_values()[i + 1].x).exp();
            let after = if jump != 0.0 { at_end + weight * jump } else { at_end };
            if !after.is_finite() {
                return Err(Error::Overflow(format!("exponential integral overflows at t = {}", times[i + 1])));
            }
            left.push(at_end);
            right.push(after);
        }
        if let Some(terminal) = eta.terminal_jump() {
            let weight = (beta * xi.end_value().x).exp();
            right[n - 1] = left[n - 1] + weight * terminal.x;
        }
        Ok(Self {
            times,
            left,
            right,
            xi_start,
            xi_slope,
            eta_slope,
            eta_drift,
            beta,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.times
    }

    /// Values just before each breakpoint.
    pub fn left_values(&self) -> &[f64] {
        &self.left
    }

    /// Values at each breakpoint, jumps included.
    pub fn right_values(&self) -> &[f64] {
        &self.right
    }

    /// The integral over `[0, t]`.
    pub fn at(&self, t: f64) -> Result<f64> {
        let end = *self.times.last().expect("at least one breakpoint");
        if !(t >= 0.0) || t > end {
            return Err(Error::BeyondHorizon { t, end });
        }
        let i = self.times.partition_point(|&u| u <= t) - 1;
        if self.times[i] == t {
            return Ok(self.right[i]);
        }
        Ok(self.right[i]
            + segment_integral(
                self.beta,
                self.xi_start[i],
                self.xi_slope[i],
                self.eta_slope[i],
                self.eta_drift,
                t - self.times[i],
            ))
    }
}

fn segment_integral(beta: f64, v0: f64, m: f64, eta_slope: f64, eta_drift: Option<f64>, dt: f64) -> f64 {
    let drift = eta_drift.unwrap_or(eta_slope);
    let mut value = 0.0;
    if drift != 0.0 {
        value += drift * exp_affine_integral(beta * v0, beta * m, dt);
    }
    let noise = eta_slope - drift;
    if noise != 0.0 {
        value += noise * dt * (beta * v0).exp();
    }
    value
}

/// `∫₀ᵗ e^{β ξ(s−)} dη(s)`.
pub fn exp_integral(xi: &CadlagPath, eta: &CadlagPath, beta: f64, t: f64) -> Result<f64> {
    ExpIntegral::new(xi, eta, beta)?.at(t)
}
