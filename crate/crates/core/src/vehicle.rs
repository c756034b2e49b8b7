//! Vehicle parameters and the longitudinal / lateral capability models
//! shared by the planner and the simulator.

use crate::G;

/// Longitudinal acceleration capability used for velocity re-planning.
pub trait AccelModel {
    /// Acceleration available at speed `v` with full throttle on a straight.
    fn accel(&self, v: f64) -> f64;
    /// Speed at which `accel` reaches zero.
    fn v_max(&self) -> f64;
    /// Deceleration magnitude under full braking at speed `v`.
    fn brake_decel(&self, _v: f64) -> f64 {
        1.6 * G
    }
}

/// Speed-dependent lateral acceleration limit (g-g envelope radius).
pub trait LateralLimit {
    fn a_lat_max(&self, v: f64) -> f64;
}

/// Uniform acceleration up to a cap.
#[derive(Debug, Clone, Copy)]
pub struct ConstantAccel {
    pub accel: f64,
    pub v_max: f64,
    pub brake: f64,
}

impl AccelModel for ConstantAccel {
    fn accel(&self, v: f64) -> f64 {
        if v < self.v_max {
            self.accel
        } else {
            0.0
        }
    }

    fn v_max(&self) -> f64 {
        self.v_max
    }

    fn brake_decel(&self, _v: f64) -> f64 {
        self.brake
    }
}

/// Speed-independent lateral limit.
#[derive(Debug, Clone, Copy)]
pub struct ConstantLateral(pub f64);

impl LateralLimit for ConstantLateral {
    fn a_lat_max(&self, _v: f64) -> f64 {
        self.0
    }
}

/// Simplified open-wheel oval racer: power-limited drive, quadratic drag and
/// downforce, a friction-circle grip limit and a kinematic steering map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub mass: f64,
    pub length: f64,
    pub width: f64,
    /// Engine power, W.
    pub power: f64,
    /// `C_drag·A·ρ/2`, N/(m/s)².
    pub drag_coeff: f64,
    /// `C_down·A·ρ/2`, N/(m/s)².
    pub downforce_coeff: f64,
    pub mu: f64,
    /// Maximum braking force, N.
    pub brake_force: f64,
    pub wheelbase: f64,
    /// Road-wheel angle at full steering command, rad.
    pub max_steer: f64,
    /// First-order lag between commanded and actual yaw rate, s.
    pub yaw_time_constant: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let mass = 750.0;
        let power = 480e3;
        let mu = 1.2;
        let top_speed: f64 = 83.0;
        let a_lat_80 = 2.6 * G;
        VehicleParams {
            mass,
            length: 5.0,
            width: 2.0,
            power,
            drag_coeff: power / top_speed.powi(3),
            downforce_coeff: (a_lat_80 / mu - G) * mass / (80.0 * 80.0),
            mu,
            brake_force: 1.6 * G * mass,
            wheelbase: 3.0,
            max_steer: 0.1,
            yaw_time_constant: 0.15,
        }
    }
}

impl VehicleParams {
    pub fn drag(&self, v: f64) -> f64 {
        self.drag_coeff * v * v
    }

    /// Total tyre force available (friction circle radius), N.
    pub fn grip_force(&self, v: f64) -> f64 {
        self.mu * (self.mass * G + self.downforce_coeff * v * v)
    }

    /// Engine force at full throttle, limited by grip when nothing else is
    /// using it.
    pub fn drive_force(&self, v: f64) -> f64 {
        (self.power / v.max(1.0)).min(self.grip_force(v))
    }

    /// Drag-balance top speed; bisection on the full-throttle net force.
    pub fn top_speed(&self) -> f64 {
        let net = |v: f64| self.drive_force(v) - self.drag(v);
        let (mut lo, mut hi) = (1.0, 1000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if net(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl AccelModel for VehicleParams {
    fn accel(&self, v: f64) -> f64 {
        (self.drive_force(v) - self.drag(v)) / self.mass
    }

    fn v_max(&self) -> f64 {
        self.top_speed()
    }

    fn brake_decel(&self, v: f64) -> f64 {
        (self.brake_force.min(self.grip_force(v)) + self.drag(v)) / self.mass
    }
}

impl LateralLimit for VehicleParams {
    fn a_lat_max(&self, v: f64) -> f64 {
        self.grip_force(v) / self.mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_regime() {
        let p = VehicleParams::default();
        assert!((p.top_speed() - 83.0).abs() < 1e-6);
        assert!(p.a_lat_max(80.0) >= 2.5 * G);
        assert!((p.a_lat_max(80.0) - 2.6 * G).abs() < 1e-9);
        assert!(p.accel(p.top_speed() - 1.0) > 0.0);
        assert!(p.accel(p.top_speed() + 1.0) < 0.0);
    }
}
