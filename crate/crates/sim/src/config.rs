//! Layered `key = value` configuration covering every tunable of a run.
//!
//! Layers apply in order: built-in defaults, an optional file, then
//! individual overrides. [`Config::to_text`] writes the effective values back
//! in the same format, so a manifest can be fed straight back in.

use racing_core::collision::SafetyBound;
use racing_core::control::ControlGains;
use racing_core::planner::PlannerConfig;
use racing_core::raceline::RacelineParams;
use racing_core::vehicle::VehicleParams;

use crate::dynamics::SlipstreamParams;
use crate::error::{Result, SimError};

/// Timing, grid and termination settings of the simulator itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub physics_dt: f64,
    /// Physics ticks per control cycle.
    pub control_every: usize,
    /// Rolling-start speed, m/s.
    pub start_speed: f64,
    /// Station of the first grid slot, m.
    pub grid_station: f64,
    /// Along-track spacing between grid slots, m.
    pub grid_spacing: f64,
    /// Largest seeded perturbation of each grid slot, m.
    pub grid_jitter: f64,
    /// Once the leader finishes, the others get this long to cross the line, s.
    pub finish_grace: f64,
    /// Hard cap on simulated time per lap, s.
    pub max_lap_time: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            physics_dt: 0.01,
            control_every: 4,
            start_speed: 100.0 / 3.6,
            grid_station: 150.0,
            grid_spacing: 20.0,
            grid_jitter: 0.5,
            finish_grace: 30.0,
            max_lap_time: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sim: SimSettings,
    pub vehicle: VehicleParams,
    pub control: ControlGains,
    /// The safety bound is rebuilt from the vehicle body and these factors.
    pub planner: PlannerConfig,
    pub bound_length_factor: f64,
    pub bound_width_factor: f64,
    pub slipstream_enabled: bool,
    pub slipstream: SlipstreamParams,
    pub raceline: RacelineParams,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sim: SimSettings::default(),
            vehicle: VehicleParams::default(),
            control: ControlGains::default(),
            planner: PlannerConfig::default(),
            bound_length_factor: 0.3,
            bound_width_factor: 0.5,
            slipstream_enabled: true,
            slipstream: SlipstreamParams::default(),
            raceline: RacelineParams::default(),
        }
    }
}

enum Slot<'a> {
    F64(&'a mut f64),
    Usize(&'a mut usize),
    Bool(&'a mut bool),
}

impl Slot<'_> {
    fn render(&self) -> String {
        match self {
            Slot::F64(v) => format!("{v:?}"),
            Slot::Usize(v) => v.to_string(),
            Slot::Bool(v) => v.to_string(),
        }
    }

    fn assign(&mut self, text: &str) -> std::result::Result<(), String> {
        match self {
            Slot::F64(v) => {
                let x: f64 = text.parse().map_err(|_| format!("expected a number, got {text:?}"))?;
                if !x.is_finite() {
                    return Err(format!("expected a finite number, got {text:?}"));
                }
                **v = x;
            }
            Slot::Usize(v) => **v = text.parse().map_err(|_| format!("expected a non-negative integer, got {text:?}"))?,
            Slot::Bool(v) => **v = text.parse().map_err(|_| format!("expected true or false, got {text:?}"))?,
        }
        Ok(())
    }
}

impl Config {
    fn slots(&mut self) -> Vec<(&'static str, Slot<'_>)> {
        use Slot::*;
        let s = &mut self.sim;
        let v = &mut self.vehicle;
        let c = &mut self.control;
        let p = &mut self.planner;
        let pr = &mut p.prediction;
        let sl = &mut self.slipstream;
        let r = &mut self.raceline;
        vec![
            ("sim.physics_dt", F64(&mut s.physics_dt)),
            ("sim.control_every", Usize(&mut s.control_every)),
            ("sim.start_speed", F64(&mut s.start_speed)),
            ("sim.grid_station", F64(&mut s.grid_station)),
            ("sim.grid_spacing", F64(&mut s.grid_spacing)),
            ("sim.grid_jitter", F64(&mut s.grid_jitter)),
            ("sim.finish_grace", F64(&mut s.finish_grace)),
            ("sim.max_lap_time", F64(&mut s.max_lap_time)),
            ("vehicle.mass", F64(&mut v.mass)),
            ("vehicle.length", F64(&mut v.length)),
            ("vehicle.width", F64(&mut v.width)),
            ("vehicle.power", F64(&mut v.power)),
            ("vehicle.drag_coeff", F64(&mut v.drag_coeff)),
            ("vehicle.downforce_coeff", F64(&mut v.downforce_coeff)),
            ("vehicle.mu", F64(&mut v.mu)),
            ("vehicle.brake_force", F64(&mut v.brake_force)),
            ("vehicle.wheelbase", F64(&mut v.wheelbase)),
            ("vehicle.max_steer", F64(&mut v.max_steer)),
            ("vehicle.yaw_time_constant", F64(&mut v.yaw_time_constant)),
            ("control.k_t", F64(&mut c.k_t)),
            ("control.k_omega", F64(&mut c.k_omega)),
            ("control.k_v", F64(&mut c.k_v)),
            ("control.k_f", F64(&mut c.k_f)),
            ("control.follow_distance", F64(&mut c.follow_distance)),
            ("control.min_look_ahead", F64(&mut c.min_look_ahead)),
            ("control.follow_envelope", F64(&mut c.follow_envelope)),
            ("planner.targets", Usize(&mut p.targets)),
            ("planner.d_min", F64(&mut p.d_min)),
            ("planner.shift_slope", F64(&mut p.shift_slope)),
            ("planner.shift_offset", F64(&mut p.shift_offset)),
            ("planner.merge_slope", F64(&mut p.merge_slope)),
            ("planner.merge_offset", F64(&mut p.merge_offset)),
            ("planner.horizon", F64(&mut p.horizon)),
            ("planner.max_shift_fraction", F64(&mut p.max_shift_fraction)),
            ("planner.race_line_reward", F64(&mut p.race_line_reward)),
            ("planner.continuity_reward", F64(&mut p.continuity_reward)),
            ("planner.continuity_decay", F64(&mut p.continuity_decay)),
            ("planner.dt", F64(&mut p.dt)),
            ("planner.sensor_range", F64(&mut p.sensor_range)),
            ("planner.grip_fraction", F64(&mut p.grip_fraction)),
            ("prediction.t_max", F64(&mut pr.t_max)),
            ("prediction.d_min", F64(&mut pr.d_min)),
            ("prediction.k", F64(&mut pr.k)),
            ("bound.length_factor", F64(&mut self.bound_length_factor)),
            ("bound.width_factor", F64(&mut self.bound_width_factor)),
            ("slipstream.enabled", Bool(&mut self.slipstream_enabled)),
            ("slipstream.max_reduction", F64(&mut sl.max_reduction)),
            ("slipstream.range", F64(&mut sl.range)),
            ("slipstream.lateral_range", F64(&mut sl.lateral_range)),
            ("raceline.outside_shift", F64(&mut r.outside_shift)),
            ("raceline.apex_inset", F64(&mut r.apex_inset)),
            ("raceline.entry_fraction", F64(&mut r.entry_fraction)),
            ("raceline.exit_fraction", F64(&mut r.exit_fraction)),
            ("raceline.spacing", F64(&mut r.spacing)),
        ]
    }

    pub fn keys() -> Vec<&'static str> {
        Config::default().slots().into_iter().map(|(k, _)| k).collect()
    }

    /// Sets one value by key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let mut slots = self.slots();
        let Some((_, slot)) = slots.iter_mut().find(|(k, _)| *k == key) else {
            return Err(format!("unknown key {key:?}"));
        };
        slot.assign(value.trim()).map_err(|e| format!("{key}: {e}"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let mut copy = self.clone();
        let slots = copy.slots();
        slots.iter().find(|(k, _)| *k == key).map(|(_, s)| s.render())
    }

    /// Applies every `key = value` line of `text`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SimError::Config {
                origin: origin.to_string(),
                line: i + 1,
                msg,
            };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            self.set(key.trim(), value).map_err(err)?;
        }
        Ok(())
    }

    /// Applies a `key=value` override given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        self.apply_text(assignment, "--set")
    }

    pub fn to_text(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        for (key, slot) in copy.slots() {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&slot.render());
            out.push('\n');
        }
        out
    }

    pub fn control_period(&self) -> f64 {
        self.sim.physics_dt * self.sim.control_every as f64
    }

    /// Planner settings with the derived fields filled in.
    pub fn planner_config(&self) -> Result<PlannerConfig> {
        let mut p = self.planner.clone();
        p.bound = SafetyBound::from_vehicle(
            self.vehicle.length,
            self.vehicle.width,
            self.bound_length_factor,
            self.bound_width_factor,
        )?;
        p.period = self.control_period();
        p.prediction.dt = p.dt;
        p.prediction.mass = self.vehicle.mass;
        Ok(p)
    }

    pub fn raceline_params(&self) -> RacelineParams {
        RacelineParams {
            half_width: self.vehicle.width / 2.0,
            v_max: self.top_speed(),
            ..self.raceline
        }
    }

    pub fn top_speed(&self) -> f64 {
        self.vehicle.top_speed()
    }

    pub fn validate(&self, track_width: f64) -> Result<()> {
        let s = &self.sim;
        let v = &self.vehicle;
        let sl = &self.slipstream;
        let checks = [
            (s.physics_dt > 0.0, "sim.physics_dt must be positive"),
            (s.control_every >= 1, "sim.control_every must be at least 1"),
            (s.start_speed > 0.0, "sim.start_speed must be positive"),
            (s.grid_spacing > 0.0, "sim.grid_spacing must be positive"),
            (s.grid_jitter >= 0.0, "sim.grid_jitter must be non-negative"),
            (s.finish_grace >= 0.0, "sim.finish_grace must be non-negative"),
            (s.max_lap_time > 0.0, "sim.max_lap_time must be positive"),
            (
                [v.mass, v.length, v.width, v.power, v.drag_coeff, v.mu, v.brake_force, v.wheelbase, v.max_steer, v.yaw_time_constant]
                    .iter()
                    .all(|x| *x > 0.0)
                    && v.downforce_coeff >= 0.0,
                "vehicle parameters must be positive",
            ),
            (
                (0.0..1.0).contains(&sl.max_reduction) && sl.range > 0.0 && sl.lateral_range > 0.0,
                "slipstream parameters out of range",
            ),
            (
                self.bound_length_factor >= 0.0 && self.bound_width_factor >= 0.0,
                "bound factors must be non-negative",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(SimError::Invalid(msg.to_string()));
            }
        }
        self.control.validate()?;
        let p = self.planner_config()?;
        p.validate(track_width)?;
        if (p.dt - self.control_period()).abs() > 1e-12 {
            return Err(SimError::Invalid(format!(
                "planner.dt ({}) must equal the control period ({})",
                p.dt,
                self.control_period()
            )));
        }
        Ok(())
    }
}
