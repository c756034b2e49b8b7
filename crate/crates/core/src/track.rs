//! Closed race track built from straight and circular segments, and the
//! road-aligned frame anchored to a vehicle's station on the left boundary.
//!
//! The segment list describes the *left* boundary of the track. A road-aligned
//! point `(x, y)` is the signed arc length `x` along that boundary relative to
//! an ego station, and the offset `y` from the boundary into the track
//! (towards the right-hand side in the driving direction).

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::norm;

const CLOSURE_TOL_M: f64 = 1e-6;
const CLOSURE_TOL_RAD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Straight { length: f64 },
    /// `sweep` in radians; positive sweeps turn left.
    Arc { radius: f64, sweep: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Straight { length } => length,
            Segment::Arc { radius, sweep } => radius * sweep.abs(),
        }
    }

    /// Signed curvature of the boundary, positive for left turns.
    pub fn curvature(&self) -> f64 {
        match *self {
            Segment::Straight { .. } => 0.0,
            Segment::Arc { radius, sweep } => sweep.signum() / radius,
        }
    }
}

/// Track description as read from a track config file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackConfig {
    pub width: f64,
    pub segments: Vec<Segment>,
}

impl TrackConfig {
    /// Indianapolis-like oval: two 1006 m straights, two 201 m chutes and four
    /// 90° turns of 256 m radius on the inner (left) boundary. 4022.5 m long.
    /// Approximation only; no surveyed boundary data is used.
    pub fn ims_like() -> Self {
        let turn = Segment::Arc {
            radius: 256.0,
            sweep: PI / 2.0,
        };
        TrackConfig {
            width: 14.0,
            segments: vec![
                Segment::Straight { length: 1006.0 },
                turn,
                Segment::Straight { length: 201.0 },
                turn,
                Segment::Straight { length: 1006.0 },
                turn,
                Segment::Straight { length: 201.0 },
                turn,
            ],
        }
    }

    /// Parses the line format:
    ///
    /// ```text
    /// width 14
    /// straight 1006
    /// arc 256 90
    /// ```
    ///
    /// `#` starts a comment. Arc sweeps are in degrees, positive to the left.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut width = None;
        let mut segments = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64> {
                let tok = fields
                    .get(i)
                    .ok_or_else(|| err(lineno, format!("missing field {} in `{line}`", i)))?;
                tok.parse::<f64>()
                    .map_err(|_| err(lineno, format!("`{tok}` is not a number")))
            };
            let expect_len = |n: usize| -> Result<()> {
                if fields.len() != n {
                    return Err(err(lineno, format!("expected {} fields, got {}", n, fields.len())));
                }
                Ok(())
            };
            match fields[0] {
                "width" => {
                    expect_len(2)?;
                    if width.is_some() {
                        return Err(err(lineno, "duplicate width line".into()));
                    }
                    width = Some(num(1)?);
                }
                "straight" => {
                    expect_len(2)?;
                    segments.push(Segment::Straight { length: num(1)? });
                }
                "arc" => {
                    expect_len(3)?;
                    segments.push(Segment::Arc {
                        radius: num(1)?,
                        sweep: num(2)?.to_radians(),
                    });
                }
                other => return Err(err(lineno, format!("unknown segment kind `{other}`"))),
            }
        }
        let width = width.ok_or_else(|| err(0, "missing `width` line".into()))?;
        Ok(TrackConfig { width, segments })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("width {}\n", self.width);
        for seg in &self.segments {
            match *seg {
                Segment::Straight { length } => writeln!(out, "straight {length}"),
                Segment::Arc { radius, sweep } => writeln!(out, "arc {radius} {}", sweep.to_degrees()),
            }
            .expect("writing to a String");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Boundary point, tangent heading and signed curvature at a station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFrame {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub curvature: f64,
}

impl BoundaryFrame {
    fn tangent(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }

    /// Unit normal pointing from the left boundary into the track.
    fn normal(&self) -> (f64, f64) {
        (self.heading.sin(), -self.heading.cos())
    }
}

/// World-frame position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Road-aligned kinematic state relative to an ego station.
///
/// `x_dot` is the rate of change of `x` (progress along the left boundary),
/// `y_dot` the rate of change of the lateral offset.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RaPoint {
    pub x: f64,
    pub y: f64,
    pub x_dot: f64,
    pub y_dot: f64,
}

#[derive(Debug, Clone)]
pub struct TrackModel {
    segments: Vec<Segment>,
    starts: Vec<(f64, Pose)>,
    width: f64,
    total_length: f64,
    min_radius: f64,
}

pub fn build_track(config: &TrackConfig) -> Result<TrackModel> {
    TrackModel::build(config)
}

impl TrackModel {
    pub fn build(config: &TrackConfig) -> Result<Self> {
        if config.segments.is_empty() {
            return Err(Error::EmptyTrack);
        }
        if !(config.width > 0.0) {
            return Err(Error::NonPositiveDimension(format!("width {}", config.width)));
        }
        let mut min_radius = f64::INFINITY;
        for seg in &config.segments {
            match *seg {
                Segment::Straight { length } if !(length > 0.0) => {
                    return Err(Error::NonPositiveDimension(format!("straight length {length}")));
                }
                Segment::Arc { radius, sweep } => {
                    if !(radius > 0.0) || !(sweep.abs() > 0.0) {
                        return Err(Error::NonPositiveDimension(format!(
                            "arc radius {radius}, sweep {sweep}"
                        )));
                    }
                    if radius <= config.width {
                        return Err(Error::ArcTooTight {
                            radius,
                            width: config.width,
                        });
                    }
                    min_radius = min_radius.min(radius);
                }
                _ => {}
            }
        }

        let mut pose = Pose {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        };
        let mut s = 0.0;
        let mut starts = Vec::with_capacity(config.segments.len());
        for seg in &config.segments {
            starts.push((s, pose));
            pose = advance(pose, seg, seg.length());
            s += seg.length();
        }
        let distance = pose.x.hypot(pose.y);
        let angle = {
            let d = pose.heading.rem_euclid(TAU);
            d.min(TAU - d)
        };
        if distance > CLOSURE_TOL_M || angle > CLOSURE_TOL_RAD {
            return Err(Error::LoopNotClosed { distance, angle });
        }

        Ok(TrackModel {
            segments: config.segments.clone(),
            starts,
            width: config.width,
            total_length: s,
            min_radius,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Station range `[start, end)` and the segment for every segment.
    pub fn segment_spans(&self) -> impl Iterator<Item = (f64, f64, &Segment)> + '_ {
        self.starts
            .iter()
            .zip(&self.segments)
            .map(|((s, _), seg)| (*s, *s + seg.length(), seg))
    }

    pub fn wrap_station(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.total_length);
        if w >= self.total_length {
            0.0
        } else {
            w
        }
    }

    /// Wraps a station difference into `(-L/2, L/2]`.
    pub fn wrap_delta(&self, ds: f64) -> f64 {
        let l = self.total_length;
        let mut d = ds.rem_euclid(l);
        if d > l / 2.0 {
            d -= l;
        }
        d
    }

    fn segment_index(&self, s: f64) -> usize {
        match self
            .starts
            .binary_search_by(|(start, _)| start.partial_cmp(&s).expect("finite station"))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    pub fn frame_at(&self, station: f64) -> BoundaryFrame {
        let s = self.wrap_station(station);
        let i = self.segment_index(s);
        let (s0, start) = self.starts[i];
        let seg = &self.segments[i];
        let p = advance(start, seg, s - s0);
        BoundaryFrame {
            x: p.x,
            y: p.y,
            heading: p.heading,
            curvature: seg.curvature(),
        }
    }

    pub fn curvature_at(&self, station: f64) -> f64 {
        let s = self.wrap_station(station);
        self.segments[self.segment_index(s)].curvature()
    }

    /// Ratio between distance travelled at offset `lateral` and the
    /// corresponding boundary arc length, `1 + κ·y`.
    pub fn metric(&self, station: f64, lateral: f64) -> f64 {
        1.0 + self.curvature_at(station) * lateral
    }

    /// Projects a world point onto the left boundary: `(station, lateral)`.
    pub fn project(&self, px: f64, py: f64) -> Result<(f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None; // (dist, station, lateral)
        for (i, seg) in self.segments.iter().enumerate() {
            let (s0, a) = self.starts[i];
            let cand = match *seg {
                Segment::Straight { length } => {
                    let (tx, ty) = (a.heading.cos(), a.heading.sin());
                    let (dx, dy) = (px - a.x, py - a.y);
                    let u = dx * tx + dy * ty;
                    let lat = dx * ty - dy * tx;
                    let uc = u.clamp(0.0, length);
                    let dist = norm(dx - uc * tx, dy - uc * ty);
                    (dist, s0 + uc, lat)
                }
                Segment::Arc { radius, sweep } => {
                    let sign = sweep.signum();
                    let (cx, cy) = (
                        a.x - a.heading.sin() * radius * sign,
                        a.y + a.heading.cos() * radius * sign,
                    );
                    let (rx, ry) = (px - cx, py - cy);
                    let rho = norm(rx, ry);
                    if rho < 1e-9 {
                        continue;
                    }
                    let phi_a = (a.y - cy).atan2(a.x - cx);
                    let phi_p = ry.atan2(rx);
                    let gap = TAU - sweep.abs();
                    let delta = ((phi_p - phi_a) * sign + gap / 2.0).rem_euclid(TAU) - gap / 2.0;
                    let lat = (rho - radius) * sign;
                    if (0.0..=sweep.abs()).contains(&delta) {
                        (lat.abs(), s0 + delta * radius, lat)
                    } else {
                        let dc = delta.clamp(0.0, sweep.abs());
                        let q = advance(a, seg, dc * radius);
                        let dist = norm(px - q.x, py - q.y);
                        let lat_q = (px - q.x) * q.heading.sin() - (py - q.y) * q.heading.cos();
                        (dist, s0 + dc * radius, lat_q)
                    }
                }
            };
            if best.map_or(true, |b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
        let (_, station, lateral) = best.ok_or(Error::EmptyTrack)?;
        let off_center = (lateral - self.width / 2.0).abs();
        if off_center >= self.min_radius {
            return Err(Error::ProjectionAmbiguous(off_center));
        }
        Ok((self.wrap_station(station), lateral))
    }

    pub fn to_road_aligned(&self, ego_station: f64, p: &CartesianState) -> Result<RaPoint> {
        let (station, lateral) = self.project(p.x, p.y)?;
        let f = self.frame_at(station);
        let (tx, ty) = f.tangent();
        let (nx, ny) = f.normal();
        let v_t = p.vx * tx + p.vy * ty;
        let v_n = p.vx * nx + p.vy * ny;
        Ok(RaPoint {
            x: self.wrap_delta(station - ego_station),
            y: lateral,
            x_dot: v_t / (1.0 + f.curvature * lateral),
            y_dot: v_n,
        })
    }

    /// Station and road-aligned state (relative to station 0) in one call.
    pub fn locate(&self, p: &CartesianState) -> Result<(f64, RaPoint)> {
        let ra = self.to_road_aligned(0.0, p)?;
        Ok((self.wrap_station(ra.x), ra))
    }

    pub fn to_cartesian(&self, ego_station: f64, q: &RaPoint) -> Result<CartesianState> {
        if !(0.0..=self.width).contains(&q.y) {
            return Err(Error::OffTrack {
                y: q.y,
                width: self.width,
            });
        }
        Ok(self.ra_to_cartesian(ego_station, q))
    }

    /// Same as [`TrackModel::to_cartesian`] without the on-track check.
    pub fn ra_to_cartesian(&self, ego_station: f64, q: &RaPoint) -> CartesianState {
        let f = self.frame_at(ego_station + q.x);
        let (tx, ty) = f.tangent();
        let (nx, ny) = f.normal();
        let v_t = q.x_dot * (1.0 + f.curvature * q.y);
        CartesianState {
            x: f.x + q.y * nx,
            y: f.y + q.y * ny,
            vx: v_t * tx + q.y_dot * nx,
            vy: v_t * ty + q.y_dot * ny,
        }
    }
}

fn advance(p: Pose, seg: &Segment, u: f64) -> Pose {
    match *seg {
        Segment::Straight { .. } => Pose {
            x: p.x + u * p.heading.cos(),
            y: p.y + u * p.heading.sin(),
            heading: p.heading,
        },
        Segment::Arc { .. } => {
            let k = seg.curvature();
            let h = p.heading + k * u;
            Pose {
                x: p.x + (h.sin() - p.heading.sin()) / k,
                y: p.y - (h.cos() - p.heading.cos()) / k,
                heading: h,
            }
        }
    }
}
