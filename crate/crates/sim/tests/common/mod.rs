//! Tracking laws closed around the simulated vehicle at the race rates.

#![allow(dead_code)]

use racing_core::control::{desired_speed, pure_pursuit, speed_command, steer_command, Commands, Following};
use racing_sim::dynamics::{step_vehicle, VehicleState};
use racing_sim::Config;

pub struct Loop {
    pub cfg: Config,
    pub state: VehicleState,
    cmd: Commands,
    tick: u64,
}

impl Loop {
    pub fn new(state: VehicleState) -> Self {
        Loop {
            cfg: Config::default(),
            state,
            cmd: Commands::default(),
            tick: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.tick as f64 * self.cfg.sim.physics_dt
    }

    /// One physics tick; `control` runs on control ticks only.
    pub fn step(&mut self, mut control: impl FnMut(&VehicleState, &Config) -> Commands) {
        if self.tick % self.cfg.sim.control_every as u64 == 0 {
            self.cmd = control(&self.state, &self.cfg);
        }
        self.state = step_vehicle(&self.state, &self.cmd, &self.cfg.vehicle, 1.0, self.cfg.sim.physics_dt).state;
        self.tick += 1;
    }
}

fn track_path(path: &[(f64, f64)], v_d: f64, s: &VehicleState, cfg: &Config) -> Commands {
    let p = pure_pursuit((s.x, s.y), s.velocity(), path, &cfg.control).unwrap();
    Commands {
        steering: steer_command(p.omega_d, s.omega, s.v, &cfg.control, &cfg.vehicle),
        throttle_brake: speed_command(v_d, s.v, 0.0, &cfg.control, &cfg.vehicle),
    }
}

/// Time after which a 2 m offset from a straight reference stays below
/// 0.2 m, over a 6 s run at speed `v`.
pub fn offset_settle_time(v: f64) -> Option<f64> {
    let path: Vec<(f64, f64)> = (0..2000).map(|i| (i as f64 * 2.0 - 50.0, 0.0)).collect();
    let mut l = Loop::new(VehicleState {
        y: 2.0,
        v,
        ..Default::default()
    });
    let mut settled_at = None;
    while l.t() < 6.0 {
        l.step(|s, cfg| track_path(&path, v, s, cfg));
        match (l.state.y.abs() < 0.2, settled_at) {
            (true, None) => settled_at = Some(l.t()),
            (false, Some(_)) => settled_at = None,
            _ => {}
        }
    }
    settled_at
}

/// Largest relative error of the yaw rate against `v/R` over the last 4 s
/// of a 12 s run around a circle.
pub fn steady_turn_error(radius: f64, v: f64) -> f64 {
    // Counterclockwise circle centred at (0, radius), starting at the origin.
    let path: Vec<(f64, f64)> = (0..=3600)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 720.0;
            (radius * a.sin(), radius * (1.0 - a.cos()))
        })
        .collect();
    let mut l = Loop::new(VehicleState {
        v,
        omega: v / radius,
        ..Default::default()
    });
    let mut worst: f64 = 0.0;
    while l.t() < 12.0 {
        l.step(|s, cfg| track_path(&path, v, s, cfg));
        if l.t() > 8.0 {
            let expected = l.state.v / radius;
            worst = worst.max((l.state.omega - expected).abs() / expected);
        }
    }
    worst
}

/// Gap to a constant-speed leader after 30 s of following from `start_gap`.
pub fn following_gap(leader_speed: f64, start_gap: f64) -> f64 {
    let path: Vec<(f64, f64)> = (0..4000).map(|i| (i as f64 * 2.0, 0.0)).collect();
    let leader_x = |t: f64| start_gap + leader_speed * t;
    let mut l = Loop::new(VehicleState {
        v: leader_speed,
        ..Default::default()
    });
    while l.t() < 30.0 {
        let t = l.t();
        l.step(|s, cfg| {
            let f = Following {
                leader_speed,
                gap: leader_x(t) - s.x,
            };
            let v_d = desired_speed(f64::INFINITY, Some(f), &cfg.control);
            track_path(&path, v_d, s, cfg)
        });
    }
    leader_x(l.t()) - l.state.x
}
