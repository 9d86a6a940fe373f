//! Open subsets of the line or the plane, with a bounding box for sampling.

use std::fmt;
use std::sync::Arc;

use crate::Point;

type Membership = Arc<dyn Fn(&Point) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct Domain {
    name: String,
    dim: usize,
    contains: Membership,
    lower: [f64; 2],
    upper: [f64; 2],
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl Domain {
    /// The open interval `(lo, hi)` (either end may be infinite), sampled on
    /// `[sample_lo, sample_hi]`.
    pub fn interval(lo: f64, hi: f64, sample_lo: f64, sample_hi: f64) -> Self {
        Self {
            name: format!("({lo}, {hi})"),
            dim: 1,
            contains: Arc::new(move |p: &Point| p.x > lo && p.x < hi && p.x.is_finite()),
            lower: [sample_lo, 0.0],
            upper: [sample_hi, 0.0],
        }
    }

    pub fn real_line(half_width: f64) -> Self {
        Self::interval(f64::NEG_INFINITY, f64::INFINITY, -half_width, half_width)
    }

    /// A planar region given by its membership predicate and sampling box.
    pub fn region(
        name: impl Into<String>,
        contains: impl Fn(&Point) -> bool + Send + Sync + 'static,
        lower: [f64; 2],
        upper: [f64; 2],
    ) -> Self {
        Self {
            name: name.into(),
            dim: 2,
            contains: Arc::new(move |p: &Point| p.x.is_finite() && p.y.is_finite() && contains(p)),
            lower,
            upper,
        }
    }

    /// The open rectangle `(lo0, hi0) × (lo1, hi1)`.
    pub fn rectangle(open_lower: [f64; 2], open_upper: [f64; 2], lower: [f64; 2], upper: [f64; 2]) -> Self {
        let name = format!(
            "({}, {}) x ({}, {})",
            open_lower[0], open_upper[0], open_lower[1], open_upper[1]
        );
        Self::region(
            name,
            move |p| {
                p.x > open_lower[0] && p.x < open_upper[0] && p.y > open_lower[1] && p.y < open_upper[1]
            },
            lower,
            upper,
        )
    }

    pub fn plane(half_width: f64) -> Self {
        let inf = f64::INFINITY;
        Self::rectangle([-inf, -inf], [inf, inf], [-half_width; 2], [half_width; 2])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, p: &Point) -> bool {
        (self.contains)(p)
    }

    pub fn sample_box(&self) -> ([f64; 2], [f64; 2]) {
        (self.lower, self.upper)
    }

    /// Replaces the sampling box, keeping the membership predicate.
    pub fn with_sample_box(mut self, lower: [f64; 2], upper: [f64; 2]) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    /// Diagonal length of the sampling box.
    pub fn diameter(&self) -> f64 {
        let dx = self.upper[0] - self.lower[0];
        let dy = if self.dim == 2 { self.upper[1] - self.lower[1] } else { 0.0 };
        dx.hypot(dy)
    }

    /// Whether the closed segment `[a, b]` stays inside, tested on `checks`
    /// equally spaced points.
    pub fn segment_inside(&self, a: &Point, b: &Point, checks: usize) -> bool {
        (0..=checks).all(|k| {
            let s = k as f64 / checks as f64;
            self.contains(&(a + (b - a) * s))
        })
    }
}
