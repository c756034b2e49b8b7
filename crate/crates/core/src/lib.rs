//! Planning and control stack for head-to-head autonomous oval racing.
//!
//! The pipeline is: an offline [`raceline`] over a [`track`], online
//! point-mass maneuver candidates ([`pointmass`], [`maneuver`]) scored by the
//! [`planner`] against opponent [`prediction`]s using rectangular
//! [`collision`] bounds, and finally [`control`] turning the chosen maneuver
//! into steering and throttle/brake commands.

pub mod collision;
pub mod control;
pub mod error;
pub mod maneuver;
pub mod planner;
pub mod pointmass;
pub mod prediction;
pub mod raceline;
pub mod track;
pub mod vehicle;

pub use error::{Error, Result};

/// Standard gravity, m/s².
pub const G: f64 = 9.81;

/// Euclidean length of `(x, y)`; cheaper than `f64::hypot` on hot paths
/// where overflow cannot occur.
#[inline]
pub(crate) fn norm(x: f64, y: f64) -> f64 {
    (x * x + y * y).sqrt()
}
