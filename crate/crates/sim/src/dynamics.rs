//! Simplified vehicle dynamics: power- and grip-limited longitudinal motion,
//! a lagged kinematic yaw response and drafting.

use racing_core::control::Commands;
use racing_core::vehicle::{LateralLimit, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub omega: f64,
}

impl VehicleState {
    pub fn velocity(&self) -> (f64, f64) {
        (self.v * self.heading.cos(), self.v * self.heading.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: VehicleState,
    /// The yaw rate was clipped by the lateral grip limit.
    pub saturated: bool,
}

/// Yaw rate the steering command asks for at speed `v`.
pub fn commanded_yaw_rate(steering: f64, v: f64, params: &VehicleParams) -> f64 {
    v * (steering.clamp(-1.0, 1.0) * params.max_steer).tan() / params.wheelbase
}

/// Net longitudinal force for command `u` while the tyres also carry the
/// lateral acceleration `a_lat`.
pub fn longitudinal_force(u: f64, v: f64, a_lat: f64, params: &VehicleParams, slip_factor: f64) -> f64 {
    let grip = params.grip_force(v);
    let lateral = params.mass * a_lat.abs();
    let spare = (grip * grip - lateral * lateral).max(0.0).sqrt();
    let drive = (params.power / v.max(1.0)).min(spare);
    let u = u.clamp(-1.0, 1.0);
    u.max(0.0) * drive - (-u).max(0.0) * params.brake_force - slip_factor * params.drag(v)
}

/// Advances one vehicle by `dt`.
pub fn step_vehicle(
    s: &VehicleState,
    cmd: &Commands,
    params: &VehicleParams,
    slip_factor: f64,
    dt: f64,
) -> StepResult {
    let target = commanded_yaw_rate(cmd.steering, s.v, params);
    let blend = 1.0 - (-dt / params.yaw_time_constant).exp();
    let mut omega = s.omega + (target - s.omega) * blend;
    let a_max = params.a_lat_max(s.v);
    let mut saturated = false;
    if s.v > 0.0 && (s.v * omega).abs() > a_max {
        omega = omega.signum() * a_max / s.v;
        saturated = true;
    }

    let force = longitudinal_force(cmd.throttle_brake, s.v, s.v * omega, params, slip_factor);
    let v = (s.v + force / params.mass * dt).max(0.0);

    let heading_mid = s.heading + 0.5 * omega * dt;
    let v_mid = 0.5 * (s.v + v);
    StepResult {
        state: VehicleState {
            x: s.x + v_mid * heading_mid.cos() * dt,
            y: s.y + v_mid * heading_mid.sin() * dt,
            heading: s.heading + omega * dt,
            v,
            omega,
        },
        saturated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipstreamParams {
    /// Largest drag reduction.
    pub max_reduction: f64,
    /// Gap at which the effect vanishes, m.
    pub range: f64,
    /// Lateral offset at which the effect vanishes, m.
    pub lateral_range: f64,
}

impl Default for SlipstreamParams {
    fn default() -> Self {
        SlipstreamParams {
            max_reduction: 0.25,
            range: 30.0,
            lateral_range: 2.0,
        }
    }
}

/// Drag multiplier for a vehicle with leaders at the given
/// `(gap ahead, lateral offset)` pairs.
pub fn slipstream_factor(leaders: impl IntoIterator<Item = (f64, f64)>, params: &SlipstreamParams) -> f64 {
    let best = leaders
        .into_iter()
        .filter(|&(gap, _)| gap >= 0.0)
        .map(|(gap, lat)| {
            let along = (1.0 - gap / params.range).max(0.0);
            let across = (1.0 - lat.abs() / params.lateral_range).max(0.0);
            along * across
        })
        .fold(0.0, f64::max);
    1.0 - params.max_reduction * best
}
