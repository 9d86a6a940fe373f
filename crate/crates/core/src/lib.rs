//! Self-similar Markov processes built from Lévy drivers.
//!
//! The crate simulates finite-activity Lévy processes on the line and the
//! plane, pushes them through exponential time changes to obtain processes
//! with a general self-similarity property, recovers drivers from
//! trajectories, and constructs the canonical group isomorphism attached to
//! a family of invariance components. A tagged-fragment engine covers the
//! fragmentation example.

pub mod canonicalize;
pub mod domain;
pub mod error;
pub mod fragmentation;
pub mod invariance;
pub mod lamperti;
pub mod levy;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod tgroup;
pub mod timechange;

pub use error::{Error, Result};

/// A point of the line or the plane. One-dimensional values live in `x`.
pub type Point = nalgebra::Vector2<f64>;

/// Embeds a scalar as a one-dimensional [`Point`].
pub fn scalar(x: f64) -> Point {
    Point::new(x, 0.0)
}
