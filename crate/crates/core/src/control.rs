//! Tracking control: pure pursuit for the desired yaw rate, a proportional
//! yaw-rate loop for steering and a following-aware speed loop.

use crate::error::{Error, Result};
use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    /// Look-ahead time; the look-ahead distance is `k_t·v`.
    pub k_t: f64,
    pub k_omega: f64,
    pub k_v: f64,
    pub k_f: f64,
    /// Desired following distance, m.
    pub follow_distance: f64,
    pub min_look_ahead: f64,
    /// Following engages below this multiple of the following distance.
    pub follow_envelope: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            k_t: 0.5,
            k_omega: 1.2,
            k_v: 0.15,
            k_f: 0.25,
            follow_distance: 15.0,
            min_look_ahead: 5.0,
            follow_envelope: 1.5,
        }
    }
}

impl ControlGains {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k_t,
            self.k_omega,
            self.k_v,
            self.k_f,
            self.follow_distance,
            self.min_look_ahead,
            self.follow_envelope,
        ];
        if all.iter().all(|g| *g > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("control gains {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Commands {
    /// Normalised steering, positive to the left.
    pub steering: f64,
    /// Positive throttle, negative brake.
    pub throttle_brake: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pursuit {
    pub omega_d: f64,
    pub target: (f64, f64),
    /// The path ended before the look-ahead distance; its last point was used.
    pub degraded: bool,
}

/// Desired yaw rate toward the path point one look-ahead distance away.
pub fn pure_pursuit(pos: (f64, f64), vel: (f64, f64), path: &[(f64, f64)], gains: &ControlGains) -> Result<Pursuit> {
    let v = vel.0.hypot(vel.1);
    if !(v > 0.0) {
        return Err(Error::ZeroSpeed);
    }
    let Some(&last) = path.last() else {
        return Err(Error::InvalidParameter("empty path".into()));
    };
    let look = (gains.k_t * v).max(gains.min_look_ahead);
    let dist = |p: (f64, f64)| (p.0 - pos.0).hypot(p.1 - pos.1);

    let mut found = None;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        if dist(a) < look && dist(b) >= look {
            // Point on the segment at exactly `look` from the vehicle.
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let (fx, fy) = (a.0 - pos.0, a.1 - pos.1);
            let qa = dx * dx + dy * dy;
            let qb = 2.0 * (fx * dx + fy * dy);
            let qc = fx * fx + fy * fy - look * look;
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            let u = ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0);
            found = Some((a.0 + u * dx, a.1 + u * dy));
            break;
        }
    }
    let (target, degraded, l) = match found {
        Some(t) => (t, false, look),
        None => (last, true, dist(last).max(1e-6)),
    };
    let (tx, ty) = (target.0 - pos.0, target.1 - pos.1);
    let alpha = (vel.0 * ty - vel.1 * tx).atan2(vel.0 * tx + vel.1 * ty);
    Ok(Pursuit {
        omega_d: 2.0 * v * alpha.sin() / l,
        target,
        degraded,
    })
}

/// Proportional yaw-rate loop.
pub fn steering(omega_d: f64, omega: f64, k_omega: f64) -> f64 {
    (k_omega * (omega_d - omega)).clamp(-1.0, 1.0)
}

/// Steering that would produce `omega_d` in steady state on the vehicle's
/// kinematic steering map.
pub fn steering_feedforward(omega_d: f64, v: f64, vehicle: &VehicleParams) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    (omega_d * vehicle.wheelbase / v).atan() / vehicle.max_steer
}

/// Feedforward plus the proportional yaw-rate correction, clamped.
pub fn steer_command(omega_d: f64, omega: f64, v: f64, gains: &ControlGains, vehicle: &VehicleParams) -> f64 {
    (steering_feedforward(omega_d, v, vehicle) + gains.k_omega * (omega_d - omega)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Following {
    pub leader_speed: f64,
    /// Centre-to-centre distance to the leader along the track, m.
    pub gap: f64,
}

/// Whether a leader at `gap` ahead, overlapping laterally, is close enough to
/// follow.
pub fn following_engaged(gap: f64, lateral_overlap: bool, gains: &ControlGains) -> bool {
    lateral_overlap && gap > 0.0 && gap < gains.follow_envelope * gains.follow_distance
}

pub fn desired_speed(profile_speed: f64, following: Option<Following>, gains: &ControlGains) -> f64 {
    match following {
        Some(f) => f.leader_speed - gains.k_f * (gains.follow_distance - f.gap),
        None => profile_speed,
    }
}

/// Proportional speed loop.
pub fn throttle_brake(v_d: f64, v: f64, k_v: f64) -> f64 {
    (k_v * (v_d - v)).clamp(-1.0, 1.0)
}

/// Command fraction that yields acceleration `accel` at speed `v` against
/// drag: positive as a share of full drive force, negative of full braking.
pub fn speed_feedforward(accel: f64, v: f64, vehicle: &VehicleParams) -> f64 {
    let force = vehicle.mass * accel + vehicle.drag(v);
    if force >= 0.0 {
        force / vehicle.drive_force(v)
    } else {
        force / vehicle.brake_force
    }
}

pub fn speed_command(v_d: f64, v: f64, accel: f64, gains: &ControlGains, vehicle: &VehicleParams) -> f64 {
    (speed_feedforward(accel, v, vehicle) + gains.k_v * (v_d - v)).clamp(-1.0, 1.0)
}
