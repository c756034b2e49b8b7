//! Fixed-step race loop: 100 Hz physics, 25 Hz sensing and control.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use racing_core::collision::{bounds_overlap, BoundPose, SafetyBound};
use racing_core::control::Commands;
use racing_core::planner::PlanContext;
use racing_core::prediction::OpponentState;
use racing_core::raceline::{generate_raceline, RaceLine, RacelineProfile};
use racing_core::track::{CartesianState, RaPoint, TrackConfig, TrackModel};

use crate::config::Config;
use crate::controller::{ControlEnv, ControlOutput, Controller, EgoView, OpponentView, SensorSnapshot};
use crate::dynamics::{slipstream_factor, step_vehicle, SlipstreamParams, VehicleState};
use crate::error::{Result, SimError};
use crate::log::{Event, EventKind, RaceLog, TickRow};
use crate::metrics;

/// What the world knows about one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Car {
    pub state: VehicleState,
    pub station: f64,
    /// Road-aligned state at `station`.
    pub ra: RaPoint,
    /// Start/finish crossings; negative while a car starts behind the line.
    pub laps: i64,
    pub last_crossing: Option<f64>,
    pub cmd: Commands,
    pub slip_factor: f64,
    saturated: bool,
    off_track: bool,
    crossed: bool,
}

#[derive(Debug, Clone)]
pub struct RaceOptions {
    pub vehicles: usize,
    pub laps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RaceResult {
    pub log: RaceLog,
    pub sim_time: f64,
    /// Every vehicle completed the requested laps before the time cap.
    pub finished: bool,
    pub plan_failures: Vec<usize>,
}

/// Starting grid: single file behind `grid_station`, on the race line,
/// with seeded jitter, rolling at the start speed.
pub fn starting_grid(track: &TrackModel, raceline: &RacelineProfile, cfg: &Config, vehicles: usize, seed: u64) -> Vec<Car> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = &cfg.sim;
    let w = track.width();
    let half = cfg.vehicle.width / 2.0 + 1.0;
    (0..vehicles)
        .map(|i| {
            let (js, jy) = if s.grid_jitter > 0.0 {
                (
                    rng.gen_range(-s.grid_jitter..=s.grid_jitter),
                    rng.gen_range(-s.grid_jitter..=s.grid_jitter),
                )
            } else {
                (0.0, 0.0)
            };
            let raw = s.grid_station - i as f64 * s.grid_spacing + js;
            let station = track.wrap_station(raw);
            let y = (raceline.lateral_at(station) + jy).clamp(half, w - half);
            let k = track.curvature_at(station);
            let ra = RaPoint {
                x: 0.0,
                y,
                x_dot: s.start_speed / (1.0 + k * y),
                y_dot: 0.0,
            };
            let c = track.ra_to_cartesian(station, &ra);
            Car {
                state: VehicleState {
                    x: c.x,
                    y: c.y,
                    heading: c.vy.atan2(c.vx),
                    v: s.start_speed,
                    omega: s.start_speed * k / (1.0 + k * y),
                },
                station,
                ra,
                laps: if raw < 0.0 { -1 } else { 0 },
                last_crossing: None,
                cmd: Commands::default(),
                slip_factor: 1.0,
                saturated: false,
                off_track: false,
                crossed: false,
            }
        })
        .collect()
}

/// Every vehicle's snapshot, all taken from the same world instant.
pub fn snapshots(track: &TrackModel, cars: &[Car], t: f64, sensor_range: f64) -> Vec<SensorSnapshot> {
    cars.iter()
        .enumerate()
        .map(|(i, ego)| SensorSnapshot {
            t,
            ego: EgoView {
                station: ego.station,
                ra: RaPoint { x: 0.0, ..ego.ra },
                state: ego.state,
            },
            opponents: cars
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .filter_map(|(j, o)| {
                    let x = track.wrap_delta(o.station - ego.station);
                    (x.abs() <= sensor_range).then_some(OpponentView {
                        id: j,
                        ra: OpponentState {
                            x,
                            y: o.ra.y,
                            x_dot: o.ra.x_dot,
                            y_dot: o.ra.y_dot,
                            omega: o.state.omega,
                        },
                        speed: o.state.v,
                    })
                })
                .collect(),
        })
        .collect()
}

/// Runs every controller on its own snapshot. Results come back in vehicle
/// order whatever order the evaluations ran in.
pub fn control_cycle(controllers: &mut [Controller], snaps: &[SensorSnapshot], env: &ControlEnv) -> Vec<ControlOutput> {
    controllers
        .par_iter_mut()
        .zip(snaps.par_iter())
        .map(|(c, s)| c.step(s, env))
        .collect()
}

/// Drag multipliers of every car from the positions of the others.
pub fn slip_factors(track: &TrackModel, cars: &[Car], params: &SlipstreamParams, enabled: bool) -> Vec<f64> {
    cars.iter()
        .enumerate()
        .map(|(i, me)| {
            if !enabled {
                return 1.0;
            }
            let leaders = cars
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, o)| (track.wrap_delta(o.station - me.station), o.ra.y - me.ra.y));
            slipstream_factor(leaders, params)
        })
        .collect()
}

struct PairState {
    body: bool,
    safety: bool,
}

pub fn run_race(track: &TrackModel, raceline: &RacelineProfile, cfg: &Config, opts: &RaceOptions) -> Result<RaceResult> {
    if opts.vehicles == 0 {
        return Err(SimError::Invalid("at least one vehicle is required".into()));
    }
    if opts.laps == 0 {
        return Err(SimError::Invalid("at least one lap is required".into()));
    }
    cfg.validate(track.width())?;
    let planner = cfg.planner_config()?;
    let env = ControlEnv {
        ctx: PlanContext::new(track, raceline, &cfg.vehicle, planner.grip_fraction),
        planner,
        gains: cfg.control,
        vehicle: cfg.vehicle,
        period: cfg.control_period(),
        slipstream: cfg.slipstream_enabled.then_some(cfg.slipstream),
    };
    let safety = env.planner.bound;
    let body = safety.body();
    let reach = 2.0 * circumradius(&safety);

    let dt = cfg.sim.physics_dt;
    let every = cfg.sim.control_every as u64;
    let target = opts.laps as i64 + 1;
    let cap = cfg.sim.max_lap_time * (opts.laps as f64 + 1.0);
    let length = track.total_length();
    let w = track.width();

    let mut cars = starting_grid(track, raceline, cfg, opts.vehicles, opts.seed);
    let mut controllers = vec![Controller::new(); opts.vehicles];
    let mut pairs: Vec<PairState> = (0..opts.vehicles * opts.vehicles)
        .map(|_| PairState { body: false, safety: false })
        .collect();
    let mut log = RaceLog::default();
    let mut leader_done: Option<f64> = None;
    let mut tick: u64 = 0;

    let finished = loop {
        let t = tick as f64 * dt;
        if tick % every == 0 {
            let snaps = snapshots(track, &cars, t, env.planner.sensor_range);
            let outs = control_cycle(&mut controllers, &snaps, &env);
            for (i, (car, out)) in cars.iter_mut().zip(&outs).enumerate() {
                car.cmd = out.commands;
                log.ticks.push(
                    TickRow {
                        t,
                        vehicle_id: i,
                        x: car.state.x,
                        y: car.state.y,
                        heading: car.state.heading,
                        v: car.state.v,
                        omega: car.state.omega,
                        s: car.station,
                        lap: car.laps,
                        u: car.cmd.throttle_brake,
                        steer: car.cmd.steering,
                        slip_factor: car.slip_factor,
                    }
                    .quantized(),
                );
            }
        }

        if cars.iter().all(|c| c.laps >= target) {
            break true;
        }
        if let Some(t_done) = leader_done {
            if t - t_done >= cfg.sim.finish_grace {
                break false;
            }
        }
        if t >= cap {
            break false;
        }

        let slips = slip_factors(track, &cars, &cfg.slipstream, cfg.slipstream_enabled);
        tick += 1;
        let t_next = tick as f64 * dt;
        for (i, car) in cars.iter_mut().enumerate() {
            car.slip_factor = slips[i];
            let step = step_vehicle(&car.state, &car.cmd, &cfg.vehicle, slips[i], dt);
            if step.saturated && !car.saturated {
                log.events.push(Event::new(
                    t_next,
                    EventKind::LatSat,
                    vec![i],
                    json!({"v": step.state.v, "omega": step.state.omega}),
                ));
            }
            car.saturated = step.saturated;
            car.state = step.state;
            update_position(track, car, dt);
            if car.ra.y < 0.0 || car.ra.y > w {
                if !car.off_track {
                    log.events.push(Event::new(t_next, EventKind::Boundary, vec![i], json!({"lateral": car.ra.y})));
                }
                car.off_track = true;
            } else {
                car.off_track = false;
            }
        }
        for (i, car) in cars.iter_mut().enumerate() {
            if let Some(lap_time) = car.take_crossing(t_next) {
                log.events.push(Event::new(
                    t_next,
                    EventKind::Lap,
                    vec![i],
                    json!({"lap": car.laps, "lap_time": lap_time.map(|x| (x * 1e6).round() / 1e6)}),
                ));
                if car.laps >= target && leader_done.is_none() {
                    leader_done = Some(t_next);
                }
            }
        }
        check_contacts(&cars, &mut pairs, &safety, &body, reach, t_next, &mut log.events);
    };

    let sim_time = tick as f64 * dt;
    let mut overtakes = metrics::overtakes(&log, length);
    log.events.append(&mut overtakes);
    log.events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(RaceResult {
        log,
        sim_time,
        finished,
        plan_failures: controllers.iter().map(|c| c.plan_failures).collect(),
    })
}

impl Car {
    /// Lap time of a start/finish crossing that happened this tick. The
    /// outer option says whether one happened; the inner is `None` on a
    /// car's first crossing.
    fn take_crossing(&mut self, t: f64) -> Option<Option<f64>> {
        if !self.crossed {
            return None;
        }
        self.crossed = false;
        let lap = self.last_crossing.map(|prev| t - prev);
        self.last_crossing = Some(t);
        Some(lap)
    }
}

fn update_position(track: &TrackModel, car: &mut Car, dt: f64) {
    let (vx, vy) = car.state.velocity();
    let cart = CartesianState {
        x: car.state.x,
        y: car.state.y,
        vx,
        vy,
    };
    let old = car.station;
    let new = match track.locate(&cart) {
        Ok((station, ra)) => {
            car.ra = RaPoint { x: 0.0, ..ra };
            station
        }
        // Too far off the track to project; carry the station forward.
        Err(_) => track.wrap_station(old + car.state.v * dt),
    };
    let moved = track.wrap_delta(new - old);
    if moved > 0.0 && new < old {
        car.laps += 1;
        car.crossed = true;
    } else if moved < 0.0 && new > old {
        car.laps -= 1;
    }
    car.station = new;
}

fn circumradius(b: &SafetyBound) -> f64 {
    let offset = 0.5 * (b.front_margin - b.rear_margin);
    (b.half_length - offset + offset.abs()).hypot(b.half_width)
}

fn check_contacts(
    cars: &[Car],
    pairs: &mut [PairState],
    safety: &SafetyBound,
    body: &SafetyBound,
    reach: f64,
    t: f64,
    events: &mut Vec<Event>,
) {
    let n = cars.len();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&cars[i].state, &cars[j].state);
            let d = (a.x - b.x).hypot(a.y - b.y);
            let pair = &mut pairs[i * n + j];
            let (mut hit_safety, mut hit_body) = (false, false);
            if d < reach {
                let pa = BoundPose::new(a.x, a.y, a.heading);
                let pb = BoundPose::new(b.x, b.y, b.heading);
                hit_safety = bounds_overlap(&pa, safety, &pb, safety);
                hit_body = hit_safety && bounds_overlap(&pa, body, &pb, body);
            }
            for (now, was, kind) in [(hit_body, &mut pair.body, "body"), (hit_safety, &mut pair.safety, "safety_bound")] {
                if now && !*was {
                    events.push(Event::new(t, EventKind::Collision, vec![i, j], json!({"kind": kind, "distance": d})));
                }
                *was = now;
            }
        }
    }
}

/// Track, race line and the race line indexed by station, ready to race on.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub track: TrackModel,
    pub raceline: RaceLine,
    pub profile: RacelineProfile,
}

impl Scenario {
    /// Builds the track and, unless one is given, generates the race line
    /// from the configured shape and the vehicle's grip.
    pub fn new(track: &TrackConfig, raceline: Option<RaceLine>, cfg: &Config) -> Result<Self> {
        let track = TrackModel::build(track)?;
        let raceline = match raceline {
            Some(line) => {
                line.validate(Some((&track, cfg.vehicle.width / 2.0)))?;
                line
            }
            None => generate_raceline(&track, &cfg.raceline_params(), &cfg.vehicle)?,
        };
        let profile = RacelineProfile::new(&track, &raceline)?;
        Ok(Scenario { track, raceline, profile })
    }

    pub fn run(&self, cfg: &Config, opts: &RaceOptions) -> Result<RaceResult> {
        run_race(&self.track, &self.profile, cfg, opts)
    }
}
