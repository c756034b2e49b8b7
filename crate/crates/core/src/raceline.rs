//! Offline race line: parametric out-in-out generation, the lateral-grip
//! speed profile, CSV persistence and station-indexed lookups.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::track::{RaPoint, Segment, TrackModel};
use crate::vehicle::LateralLimit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceLineSample {
    /// Arc length along the race line, m.
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaceLine {
    pub samples: Vec<RaceLineSample>,
    pub closed: bool,
}

/// Shape of the out-in-out line. Offsets are measured from the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RacelineParams {
    /// Shift towards the outside of the turns on the straights, m.
    pub outside_shift: f64,
    /// Shift towards the inside of a turn at its apex, m.
    pub apex_inset: f64,
    /// How far before the turn (as a fraction of the turn length) the line
    /// starts moving towards the apex.
    pub entry_fraction: f64,
    /// How far after the turn the line is back on the outside.
    pub exit_fraction: f64,
    /// Station spacing of the emitted samples along the left boundary, m.
    pub spacing: f64,
    /// Half of the vehicle width; the line keeps the body on the track.
    pub half_width: f64,
    pub v_max: f64,
}

impl Default for RacelineParams {
    fn default() -> Self {
        RacelineParams {
            outside_shift: 5.0,
            apex_inset: 5.0,
            entry_fraction: 0.25,
            exit_fraction: 0.25,
            spacing: 2.0,
            half_width: 1.0,
            v_max: 83.0,
        }
    }
}

struct Corner {
    apex: f64,
    entry: f64,
    exit: f64,
    apex_offset: f64,
}

impl Corner {
    /// Raised-cosine weight: 1 at the apex, 0 outside the entry/exit window.
    fn weight(&self, s: f64, lap: f64) -> f64 {
        [-lap, 0.0, lap]
            .iter()
            .map(|shift| {
                let d = s - (self.apex + shift);
                if d < 0.0 && d > -self.entry {
                    0.5 * (1.0 + (std::f64::consts::PI * d / self.entry).cos())
                } else if d >= 0.0 && d < self.exit {
                    0.5 * (1.0 + (std::f64::consts::PI * d / self.exit).cos())
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Lateral offset of the parametric line at a boundary station.
fn offset_at(corners: &[Corner], base: f64, lap: f64, s: f64) -> f64 {
    let mut keep = 1.0;
    let mut strongest = (0.0, base);
    for c in corners {
        let w = c.weight(s, lap);
        keep *= 1.0 - w;
        if w > strongest.0 {
            strongest = (w, c.apex_offset);
        }
    }
    base + (strongest.1 - base) * (1.0 - keep)
}

/// Curvature of the circle through three points (signed, left positive).
fn three_point_curvature(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (bcx, bcy) = (c.0 - b.0, c.1 - b.1);
    let (acx, acy) = (c.0 - a.0, c.1 - a.1);
    let cross = abx * bcy - aby * bcx;
    let denom = abx.hypot(aby) * bcx.hypot(bcy) * acx.hypot(acy);
    if denom < 1e-12 {
        0.0
    } else {
        2.0 * cross / denom
    }
}

/// Largest speed with `v²·|κ| ≤ a_lat_max(v)`, capped at `v_max`, by
/// fixed-point iteration.
pub fn curvature_speed_limit(kappa: f64, v_max: f64, lat: &dyn LateralLimit) -> f64 {
    let k = kappa.abs();
    if k < 1e-12 {
        return v_max;
    }
    let feasible = |v: f64| v * v * k <= lat.a_lat_max(v);
    let mut v = v_max;
    for _ in 0..10_000 {
        let next = v_max.min((lat.a_lat_max(v) / k).sqrt());
        let done = (next - v).abs() < 1e-6;
        v = next;
        if done {
            break;
        }
    }
    if feasible(v) {
        return v;
    }
    // The iteration approaches from above; settle on the feasible side.
    let (mut lo, mut hi) = ((v - 1e-3).max(0.0), v);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn generate_raceline(
    track: &TrackModel,
    params: &RacelineParams,
    lat: &dyn LateralLimit,
) -> Result<RaceLine> {
    let p = params;
    if p.spacing <= 0.0 || p.v_max <= 0.0 || p.half_width < 0.0 {
        return Err(Error::InvalidParameter(
            "spacing and v_max must be positive, half_width non-negative".into(),
        ));
    }
    if p.entry_fraction < 0.0 || p.exit_fraction < 0.0 || p.apex_inset < 0.0 || p.outside_shift < 0.0 {
        return Err(Error::InvalidParameter("race line shape parameters must be non-negative".into()));
    }
    let w = track.width();
    let center = w / 2.0;
    let lo = p.half_width;
    let hi = w - p.half_width;

    let total_sweep: f64 = track
        .segments()
        .iter()
        .map(|s| match *s {
            Segment::Arc { sweep, .. } => sweep,
            Segment::Straight { .. } => 0.0,
        })
        .sum();
    // Outside of a left turn is the high-y side.
    let base = center + total_sweep.signum() * p.outside_shift;
    let check = |y: f64, what: &str| -> Result<()> {
        if y < lo - 1e-9 || y > hi + 1e-9 {
            return Err(Error::InfeasibleInset(format!(
                "{what} offset {y:.2} m outside [{lo:.2}, {hi:.2}]"
            )));
        }
        Ok(())
    };
    check(base, "straight")?;

    let mut corners = Vec::new();
    for (s0, s1, seg) in track.segment_spans() {
        if let Segment::Arc { sweep, .. } = *seg {
            let len = s1 - s0;
            let apex_offset = center - sweep.signum() * p.apex_inset;
            check(apex_offset, "apex")?;
            corners.push(Corner {
                apex: 0.5 * (s0 + s1),
                entry: len / 2.0 + p.entry_fraction * len,
                exit: len / 2.0 + p.exit_fraction * len,
                apex_offset,
            });
        }
    }

    let lap = track.total_length();
    let n = (lap / p.spacing).round().max(3.0) as usize;
    let ds = lap / n as f64;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let st = i as f64 * ds;
            let y = offset_at(&corners, base, lap, st);
            let c = track.ra_to_cartesian(
                0.0,
                &RaPoint {
                    x: st,
                    y,
                    ..Default::default()
                },
            );
            (c.x, c.y)
        })
        .collect();

    let mut samples = Vec::with_capacity(n);
    let mut s = 0.0;
    for i in 0..n {
        if i > 0 {
            s += (pts[i].0 - pts[i - 1].0).hypot(pts[i].1 - pts[i - 1].1);
        }
        let k = three_point_curvature(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
        samples.push(RaceLineSample {
            s,
            x: pts[i].0,
            y: pts[i].1,
            v: curvature_speed_limit(k, p.v_max, lat),
        });
    }
    let line = RaceLine {
        samples,
        closed: true,
    };
    line.validate(Some((track, p.half_width)))?;
    Ok(line)
}

impl RaceLine {
    /// Signed curvature at every sample (closed lines wrap around).
    pub fn curvatures(&self) -> Vec<f64> {
        let n = self.samples.len();
        let pt = |i: usize| (self.samples[i].x, self.samples[i].y);
        (0..n)
            .map(|i| {
                if !self.closed && (i == 0 || i + 1 == n) {
                    return 0.0;
                }
                three_point_curvature(pt((i + n - 1) % n), pt(i), pt((i + 1) % n))
            })
            .collect()
    }

    fn median_spacing(&self) -> f64 {
        let mut d: Vec<f64> = self.samples.windows(2).map(|w| w[1].s - w[0].s).collect();
        if d.is_empty() {
            return 0.0;
        }
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite spacing"));
        d[d.len() / 2]
    }

    fn wrap_gap(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (a.x - b.x).hypot(a.y - b.y),
            _ => f64::INFINITY,
        }
    }

    /// Checks ordering, speeds and (optionally) that every sample keeps a
    /// body of the given half-width on the track.
    pub fn validate(&self, track: Option<(&TrackModel, f64)>) -> Result<()> {
        if self.samples.len() < 3 {
            return Err(Error::InvalidRaceLine("fewer than 3 samples".into()));
        }
        for (i, w) in self.samples.windows(2).enumerate() {
            if !(w[1].s > w[0].s) {
                return Err(Error::InvalidRaceLine(format!(
                    "s not strictly increasing at sample {}",
                    i + 1
                )));
            }
        }
        if let Some(i) = self.samples.iter().position(|p| !(p.v > 0.0)) {
            return Err(Error::InvalidRaceLine(format!(
                "non-positive speed {} at sample {i}",
                self.samples[i].v
            )));
        }
        if self.closed && self.wrap_gap() >= 2.0 * self.median_spacing() {
            return Err(Error::InvalidRaceLine("closed line has a wrap gap".into()));
        }
        if let Some((track, half_width)) = track {
            for (i, p) in self.samples.iter().enumerate() {
                let (_, lat) = track
                    .project(p.x, p.y)
                    .map_err(|e| Error::InvalidRaceLine(format!("sample {i}: {e}")))?;
                if lat < half_width - 1e-6 || lat > track.width() - half_width + 1e-6 {
                    return Err(Error::InvalidRaceLine(format!(
                        "sample {i} is off track (offset {lat:.3} m)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,x,y,v\n");
        for p in &self.samples {
            writeln!(out, "{},{},{},{}", p.s, p.x, p.y, p.v).expect("writing to a String");
        }
        out
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "s,x,y,v" => {}
            _ => return Err(err(1, "expected header `s,x,y,v`".into())),
        }
        let mut samples = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(idx + 1, format!("malformed row `{line}`: {e}")))?;
            if vals.len() != 4 {
                return Err(err(idx + 1, format!("expected 4 fields, got {}", vals.len())));
            }
            samples.push(RaceLineSample {
                s: vals[0],
                x: vals[1],
                y: vals[2],
                v: vals[3],
            });
        }
        let mut line = RaceLine {
            samples,
            closed: false,
        };
        if line.samples.len() >= 3 {
            line.closed = line.wrap_gap() < 2.0 * line.median_spacing();
        }
        Ok(line)
    }
}

pub fn save_raceline(line: &RaceLine, path: &Path) -> Result<()> {
    std::fs::write(path, line.to_csv())?;
    Ok(())
}

/// Reads and validates a race line CSV; with a track, samples must keep a body
/// of `half_width` on it.
pub fn load_raceline(path: &Path, track: Option<(&TrackModel, f64)>) -> Result<RaceLine> {
    let text = std::fs::read_to_string(path)?;
    let line = RaceLine::parse_csv(&text, path)?;
    line.validate(track)?;
    Ok(line)
}

/// Race line re-indexed by left-boundary station for the online planner.
#[derive(Debug, Clone)]
pub struct RacelineProfile {
    stations: Vec<f64>,
    lateral: Vec<f64>,
    speed: Vec<f64>,
    lap: f64,
}

impl RacelineProfile {
    pub fn new(track: &TrackModel, line: &RaceLine) -> Result<Self> {
        let mut rows = Vec::with_capacity(line.samples.len());
        for p in &line.samples {
            let (st, lat) = track.project(p.x, p.y)?;
            rows.push((st, lat, p.v));
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite station"));
        rows.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9);
        Ok(RacelineProfile {
            stations: rows.iter().map(|r| r.0).collect(),
            lateral: rows.iter().map(|r| r.1).collect(),
            speed: rows.iter().map(|r| r.2).collect(),
            lap: track.total_length(),
        })
    }

    fn interp(&self, values: &[f64], station: f64) -> f64 {
        let n = self.stations.len();
        let s = station.rem_euclid(self.lap);
        let i = self.stations.partition_point(|&x| x <= s);
        let (i0, i1) = if i == 0 || i == n { (n - 1, 0) } else { (i - 1, i) };
        let s0 = self.stations[i0];
        let mut s1 = self.stations[i1];
        let mut ss = s;
        if s1 <= s0 {
            s1 += self.lap;
            if ss < s0 {
                ss += self.lap;
            }
        }
        let f = if s1 > s0 { (ss - s0) / (s1 - s0) } else { 0.0 };
        values[i0] + f * (values[i1] - values[i0])
    }

    /// Race line offset from the left boundary at a station.
    pub fn lateral_at(&self, station: f64) -> f64 {
        self.interp(&self.lateral, station)
    }

    pub fn speed_at(&self, station: f64) -> f64 {
        self.interp(&self.speed, station)
    }

    /// `dy/dx` of the race line in road-aligned coordinates.
    pub fn slope_at(&self, station: f64) -> f64 {
        let h = 1.0;
        (self.lateral_at(station + h) - self.lateral_at(station - h)) / (2.0 * h)
    }
}
