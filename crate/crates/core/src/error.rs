use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("track loop is not closed: end pose misses start by {distance:.3e} m / {angle:.3e} rad")]
    LoopNotClosed { distance: f64, angle: f64 },
    #[error("non-positive dimension: {0}")]
    NonPositiveDimension(String),
    #[error("arc radius {radius} m must exceed track width {width} m")]
    ArcTooTight { radius: f64, width: f64 },
    #[error("empty segment list")]
    EmptyTrack,
    #[error("point is too far off the track for a unique projection (distance {0:.2} m)")]
    ProjectionAmbiguous(f64),
    #[error("lateral offset {y} m is outside the track [0, {width}]")]
    OffTrack { y: f64, width: f64 },
    #[error("infeasible race line parameters: {0}")]
    InfeasibleInset(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("invalid race line: {0}")]
    InvalidRaceLine(String),
    #[error("no real bang-bang solution (A = {0})")]
    NoRealSolution(f64),
    #[error("infeasible boundary conditions: switch time outside [0, T] for both roots")]
    InfeasibleBoundary,
    #[error("invalid end points: {0}")]
    InvalidEndPoints(String),
    #[error("time {t} outside [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },
    #[error("zero speed")]
    ZeroSpeed,
    #[error("maneuvers sampled on different grids ({0} s vs {1} s)")]
    MismatchedGrids(f64, f64),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("lateral-shift target point at {q1_x:.1} m lies beyond the {x_max} m horizon")]
    BeyondHorizon { q1_x: f64, x_max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
