//! Opponent trajectory prediction: constant-curvature extrapolation, bent
//! into a boundary-parallel path wherever it would leave the track.

use crate::error::{Error, Result};
use crate::maneuver::{connect_points, replan_velocity, Maneuver, ManeuverKind};
use crate::pointmass::EndPoint;
use crate::track::{CartesianState, RaPoint, TrackModel};
use crate::vehicle::AccelModel;

/// Opponent state in the ego's road-aligned frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpponentState {
    pub x: f64,
    pub y: f64,
    pub x_dot: f64,
    pub y_dot: f64,
    pub omega: f64,
}

impl OpponentState {
    fn ra(&self) -> RaPoint {
        RaPoint {
            x: self.x,
            y: self.y,
            x_dot: self.x_dot,
            y_dot: self.y_dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionParams {
    /// Prediction horizon, s.
    pub t_max: f64,
    /// Distance kept from either boundary, m.
    pub d_min: f64,
    /// Stretch applied to the boundary-reach distance.
    pub k: f64,
    pub dt: f64,
    pub mass: f64,
}

impl Default for PredictionParams {
    fn default() -> Self {
        PredictionParams {
            t_max: 3.0,
            d_min: 1.0,
            k: 1.5,
            dt: 0.04,
            mass: 750.0,
        }
    }
}

impl PredictionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.d_min >= 0.0 && self.k >= 1.0 && self.dt > 0.0 && self.mass > 0.0) {
            return Err(Error::InvalidParameter(format!("prediction parameters {self:?}")));
        }
        Ok(())
    }
}

/// Path curvature approximated from yaw rate and speed.
pub fn estimate_curvature(s: &OpponentState) -> Result<f64> {
    let v = s.x_dot.hypot(s.y_dot);
    if !(v > 0.0) {
        return Err(Error::ZeroSpeed);
    }
    Ok(s.omega / v)
}

/// Constant-speed, constant-curvature arc from the opponent's current state,
/// built in the world frame and expressed in the ego's road-aligned frame.
/// Samples where the arc can no longer be projected onto the track end the
/// prediction early.
pub fn extrapolate_constant_curvature(
    track: &TrackModel,
    ego_station: f64,
    s: &OpponentState,
    params: &PredictionParams,
) -> Result<Maneuver> {
    params.validate()?;
    if !(s.x_dot.hypot(s.y_dot) > 0.0) {
        return Err(Error::ZeroSpeed);
    }
    let start = track.ra_to_cartesian(ego_station, &s.ra());
    let speed = start.vx.hypot(start.vy);
    if !(speed > 0.0) {
        return Err(Error::ZeroSpeed);
    }
    let kappa = s.omega / speed;
    let heading0 = start.vy.atan2(start.vx);
    let n = (params.t_max / params.dt + 1e-9).floor() as usize;
    let mut states = vec![s.ra()];
    let mut prev_x = s.x;
    for i in 1..=n {
        let t = (i as f64 * params.dt).min(params.t_max);
        let arc = speed * t;
        let heading = heading0 + kappa * arc;
        let (dx, dy) = if kappa.abs() < 1e-12 {
            (arc * heading0.cos(), arc * heading0.sin())
        } else {
            (
                (heading.sin() - heading0.sin()) / kappa,
                (heading0.cos() - heading.cos()) / kappa,
            )
        };
        let p = CartesianState {
            x: start.x + dx,
            y: start.y + dy,
            vx: speed * heading.cos(),
            vy: speed * heading.sin(),
        };
        let Ok(mut q) = track.to_road_aligned(ego_station, &p) else {
            break;
        };
        // Keep x continuous across the wrap of the ego-relative frame.
        q.x = prev_x + track.wrap_delta(q.x - prev_x);
        prev_x = q.x;
        states.push(q);
    }
    let mut m = Maneuver::from_states(&states, params.dt, ManeuverKind::Predicted);
    m.set_metric(|x, y| track.metric(ego_station + x, y));
    Ok(m)
}

/// Predicted opponent trajectory over the horizon.
pub fn predict(
    track: &TrackModel,
    ego_station: f64,
    s: &OpponentState,
    params: &PredictionParams,
    accel: &dyn AccelModel,
) -> Result<Maneuver> {
    let w = track.width();
    if !(0.0..=w).contains(&s.y) {
        return Err(Error::OffTrack { y: s.y, width: w });
    }
    let arc = extrapolate_constant_curvature(track, ego_station, s, params)?;
    let (lo, hi) = (params.d_min, w - params.d_min);
    let outside = |y: f64| y < lo || y > hi;

    let degenerate = outside(s.y) && ((s.y < lo && s.y_dot < 0.0) || (s.y > hi && s.y_dot > 0.0));
    let crossing = if degenerate {
        None
    } else {
        let states: Vec<RaPoint> = arc.samples.iter().map(|p| p.state).collect();
        // Skip an initial stretch inside the band when the opponent is already
        // leaving it.
        let first_inside = states.iter().position(|p| !outside(p.y));
        match first_inside {
            None => return Ok(arc),
            Some(f) => states
                .iter()
                .enumerate()
                .skip(f + 1)
                .find(|(_, p)| outside(p.y))
                .map(|(i, p)| {
                    let a = &states[i - 1];
                    let target = if p.y < lo { lo } else { hi };
                    let frac = (target - a.y) / (p.y - a.y);
                    (a.x + frac * (p.x - a.x), target)
                }),
        }
    };
    if !degenerate && crossing.is_none() {
        return Ok(arc);
    }
    if !(s.x_dot > 0.0) {
        return Ok(arc);
    }

    let p0 = EndPoint::new(s.x, s.y, s.x_dot, s.y_dot);
    let speed = arc.speed_profile[0];
    // Long enough to cover the horizon even after accelerating to top speed.
    let stretch = (accel.v_max() / speed.max(1.0)).max(1.0);
    let horizon = s.x_dot * params.t_max * stretch;
    let build = |p1_x: f64, y_hat: f64| -> Result<Maneuver> {
        let p2_x = (s.x + horizon).max(p1_x + 10.0);
        let points = [
            p0,
            EndPoint::new(p1_x, y_hat, s.x_dot, 0.0),
            EndPoint::new(p2_x, y_hat, s.x_dot, 0.0),
        ];
        let mut m = connect_points(&points, params.mass, params.dt)?;
        m.set_metric(|x, y| track.metric(ego_station + x, y));
        Ok(m)
    };
    let in_band = |m: &Maneuver| m.path_xy().all(|(_, y)| y >= lo - BAND_TOL && y <= hi + BAND_TOL);

    let shaped = match crossing {
        None => Some(build(s.x + s.x_dot * params.dt, s.y)?),
        Some((x_hat, y_hat)) => {
            let reach = x_hat - s.x;
            let toward = (y_hat - s.y) * s.y_dot > 0.0;
            // A reach shorter than twice the constant-lateral-speed distance
            // overshoots the target line.
            let no_overshoot = if toward {
                2.0 * (y_hat - s.y).abs() / s.y_dot.abs() * s.x_dot
            } else {
                0.0
            };
            // Nothing past the horizon matters, and a near-zero lateral speed
            // would otherwise push the merge arbitrarily far.
            let first = (params.k * reach).max(no_overshoot).min(horizon.max(reach));
            // Shorter reaches (never below the crossing itself) when a lateral
            // reversal would dip through the opposite side of the band.
            let mut found = None;
            for f in 0..=REACH_STEPS {
                let r = first - (first - reach) * f as f64 / REACH_STEPS as f64;
                let m = build(s.x + r.max(s.x_dot * params.dt), y_hat)?;
                if in_band(&m) {
                    found = Some(m);
                    break;
                }
            }
            found
        }
    };
    let mut m = match shaped {
        Some(m) => replan_velocity(&m, speed, accel)?,
        None => follow_then_hold(&arc, crossing.expect("degenerate case always shapes"), params),
    };
    m.truncate(params.t_max);
    Ok(m)
}

const BAND_TOL: f64 = 1e-4;
const REACH_STEPS: usize = 10;

/// Constant-curvature path up to the band crossing, then parallel to the
/// boundary at the same progress rate.
fn follow_then_hold(arc: &Maneuver, (x_hat, y_hat): (f64, f64), params: &PredictionParams) -> Maneuver {
    let mut states: Vec<RaPoint> = arc
        .samples
        .iter()
        .map(|p| p.state)
        .take_while(|p| p.x < x_hat)
        .collect();
    let last = *states.last().expect("first sample precedes the crossing");
    let rate = last.x_dot.max(1.0);
    let n = (params.t_max / params.dt + 1e-9).floor() as usize;
    let mut x = last.x;
    while states.len() <= n {
        x += rate * params.dt;
        states.push(RaPoint {
            x,
            y: y_hat,
            x_dot: rate,
            y_dot: 0.0,
        });
    }
    let mut m = Maneuver::from_states(&states, params.dt, ManeuverKind::Predicted);
    m.speed_profile = arc.speed_profile.clone();
    m.speed_profile.resize(m.samples.len(), *arc.speed_profile.last().unwrap_or(&rate));
    m
}
