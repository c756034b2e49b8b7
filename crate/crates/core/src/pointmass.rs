//! Closed-form point-to-point trajectory of a point mass moving at constant
//! longitudinal speed with a single-switch bang-bang lateral force.

use crate::error::{Error, Result};

const STRAIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EndPoint {
    pub x: f64,
    pub y: f64,
    pub x_dot: f64,
    pub y_dot: f64,
}

impl EndPoint {
    pub fn new(x: f64, y: f64, x_dot: f64, y_dot: f64) -> Self {
        EndPoint { x, y, x_dot, y_dot }
    }
}

/// Lateral force law of one segment: `+force` until `switch_time`, then
/// `-force` until `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLaw {
    pub force: f64,
    pub switch_time: f64,
    pub duration: f64,
    pub mass: f64,
    pub start: EndPoint,
}

impl SegmentLaw {
    pub fn lateral_accel(&self) -> f64 {
        self.force / self.mass
    }

    /// State at `t`, clamped into `[0, duration]`.
    pub fn at(&self, t: f64) -> EndPoint {
        let t = t.clamp(0.0, self.duration);
        let a = self.lateral_accel();
        let p = &self.start;
        let ts = self.switch_time;
        let (y, y_dot) = if t <= ts {
            (p.y + p.y_dot * t + 0.5 * a * t * t, p.y_dot + a * t)
        } else {
            let y_s = p.y + p.y_dot * ts + 0.5 * a * ts * ts;
            let v_s = p.y_dot + a * ts;
            let dt = t - ts;
            (y_s + v_s * dt - 0.5 * a * dt * dt, p.y_dot + a * (2.0 * ts - t))
        };
        EndPoint {
            x: p.x + p.x_dot * t,
            y,
            x_dot: p.x_dot,
            y_dot,
        }
    }

    pub fn goal(&self) -> EndPoint {
        self.at(self.duration)
    }
}

/// Plans the minimum-force single-switch lateral law between two end points
/// sharing the same longitudinal speed.
pub fn plan_segment(ps: &EndPoint, pg: &EndPoint, mass: f64) -> Result<SegmentLaw> {
    if !(ps.x_dot > 0.0) {
        return Err(Error::InvalidEndPoints(format!("start x_dot {} must be positive", ps.x_dot)));
    }
    if !(pg.x > ps.x) {
        return Err(Error::InvalidEndPoints(format!("goal x {} not ahead of start x {}", pg.x, ps.x)));
    }
    if (pg.x_dot - ps.x_dot).abs() > 1e-9 * ps.x_dot.max(1.0) {
        return Err(Error::InvalidEndPoints(format!(
            "longitudinal speed must be constant ({} vs {})",
            ps.x_dot, pg.x_dot
        )));
    }
    if !(mass > 0.0) {
        return Err(Error::InvalidEndPoints(format!("mass {mass} must be positive")));
    }

    let duration = (pg.x - ps.x) / ps.x_dot;
    let dy = pg.y - ps.y;
    let (v0, vg) = (ps.y_dot, pg.y_dot);
    let law = |accel: f64, switch_time: f64| SegmentLaw {
        force: accel * mass,
        switch_time,
        duration,
        mass,
        start: *ps,
    };

    if dy.abs() <= STRAIGHT_TOL && v0.abs() <= STRAIGHT_TOL && vg.abs() <= STRAIGHT_TOL {
        return Ok(law(0.0, duration / 2.0));
    }

    let t = duration;
    let sum = vg + v0;
    let a_disc = t * t * (v0 * v0 + vg * vg) - 2.0 * t * dy * sum + 2.0 * dy * dy;
    if a_disc < -1e-12 * (1.0 + dy * dy) {
        return Err(Error::NoRealSolution(a_disc));
    }
    let root = (2.0 * a_disc.max(0.0)).sqrt();
    let tol = 1e-6 * (1.0 + dy.abs());

    let mut best: Option<SegmentLaw> = None;
    for sign in [-1.0, 1.0] {
        let accel = (sign * root - t * sum + 2.0 * dy) / (t * t);
        if accel.abs() < 1e-12 {
            continue;
        }
        let ts = ((vg - v0) / accel + t) / 2.0;
        if ts < -1e-12 || ts > t + 1e-12 {
            continue;
        }
        let cand = law(accel, ts.clamp(0.0, t));
        let end = cand.goal();
        if (end.y - pg.y).abs() > tol || (end.y_dot - vg).abs() > tol {
            continue;
        }
        best = match best {
            None => Some(cand),
            Some(b) => {
                let (ab, ac) = (b.force.abs(), cand.force.abs());
                if ac < ab - 1e-12 * ab.max(1.0) {
                    Some(cand)
                } else if (ac - ab).abs() <= 1e-12 * ab.max(1.0) && cand.force.signum() == dy.signum() {
                    Some(cand)
                } else {
                    Some(b)
                }
            }
        };
    }
    if let Some(b) = best {
        return Ok(b);
    }
    // Constant lateral velocity already meets the goal.
    if (vg - v0).abs() <= STRAIGHT_TOL && (dy - v0 * t).abs() <= tol {
        return Ok(law(0.0, t / 2.0));
    }
    Err(Error::InfeasibleBoundary)
}

pub fn sample_segment(law: &SegmentLaw, t: f64) -> Result<EndPoint> {
    let eps = 1e-9 * law.duration.max(1.0);
    if t < -eps || t > law.duration + eps || t.is_nan() {
        return Err(Error::TimeOutOfRange {
            t,
            total: law.duration,
        });
    }
    Ok(law.at(t))
}
