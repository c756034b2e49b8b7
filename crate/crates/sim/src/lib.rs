//! Deterministic fixed-step multi-vehicle race simulation and race metrics.

pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod log;
pub mod metrics;
pub mod race;

pub use config::Config;
pub use error::{Result, SimError};
