//! One vehicle's planning and tracking stack. A controller sees only its own
//! sensor snapshot and its own private state.

use racing_core::control::{
    following_engaged, pure_pursuit, speed_command, steer_command, ControlGains, Commands, Following,
};
use racing_core::maneuver::Maneuver;
use racing_core::planner::{plan, CandidateId, EgoState, PlanContext, PlannerConfig, PlannerState};
use racing_core::prediction::OpponentState;
use racing_core::track::{CartesianState, RaPoint};
use racing_core::vehicle::VehicleParams;

use crate::dynamics::{slipstream_factor, SlipstreamParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoView {
    pub station: f64,
    /// Road-aligned state at `station`; `x` is zero.
    pub ra: RaPoint,
    pub state: VehicleState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpponentView {
    pub id: usize,
    /// Relative to the ego station.
    pub ra: OpponentState,
    pub speed: f64,
}

/// What one vehicle perceives at a control instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSnapshot {
    pub t: f64,
    pub ego: EgoView,
    pub opponents: Vec<OpponentView>,
}

/// Read-only inputs shared by every controller.
pub struct ControlEnv<'a> {
    pub ctx: PlanContext<'a>,
    pub planner: PlannerConfig,
    pub gains: ControlGains,
    pub vehicle: VehicleParams,
    /// Time until the next control cycle, s.
    pub period: f64,
    /// Drafting model the ego expects to benefit from, if any.
    pub slipstream: Option<SlipstreamParams>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub commands: Commands,
    pub selected: Option<CandidateId>,
    pub following: bool,
    /// The look-ahead point fell beyond the end of the planned path.
    pub degraded: bool,
    /// Planning failed and the race line was tracked instead.
    pub plan_failed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Controller {
    planner_state: PlannerState,
    /// Opponent speeds seen in the previous snapshot, by id.
    last_speeds: Vec<(usize, f64)>,
    pub plan_failures: usize,
}

impl Controller {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&mut self, snap: &SensorSnapshot, env: &ControlEnv) -> ControlOutput {
        let ego = &snap.ego;
        let speed = ego.state.v;
        let opponents: Vec<(usize, OpponentState)> = snap.opponents.iter().map(|o| (o.id, o.ra)).collect();
        let ego_state = EgoState {
            station: ego.station,
            state: RaPoint { x: 0.0, ..ego.ra },
            speed,
        };

        let vehicle = drafted_vehicle(snap, env);
        let ctx = env.ctx.with_ego_vehicle(&vehicle);
        let planned = plan(&ego_state, &opponents, &ctx, &env.planner, &self.planner_state);
        let (path, profile_speed, accel, selected, blocked, plan_failed) = match planned {
            Ok((out, next)) => {
                self.planner_state = next;
                let sel = out.selected();
                let m = &sel.maneuver;
                (
                    self.pursuit_path(m, ego, env),
                    m.speed_at(env.period),
                    m.accel_at(0.5 * env.period),
                    Some(sel.id),
                    sel.speed_reduced || !sel.free,
                    false,
                )
            }
            Err(_) => {
                self.plan_failures += 1;
                self.planner_state = PlannerState::default();
                let v = env.ctx.raceline.speed_at(ego.station);
                (race_line_path(ego, env), v.min(speed + 1.0), 0.0, None, true, true)
            }
        };

        // A free, unreduced plan already keeps clear of every prediction, so the
        // follow law only takes over once the planner has had to give way.
        let following = nearest_leader(snap, env)
            .filter(|(_, f)| blocked && following_engaged(f.gap, true, &env.gains));
        let (v_d, a_d) = match following {
            Some((id, f)) => {
                let follow = f.leader_speed - env.gains.k_f * (env.gains.follow_distance - f.gap);
                if follow < profile_speed {
                    (follow, self.leader_accel(id, f.leader_speed, env.period).min(accel))
                } else {
                    (profile_speed, accel)
                }
            }
            None => (profile_speed, accel),
        };
        self.last_speeds.clear();
        self.last_speeds.extend(snap.opponents.iter().map(|o| (o.id, o.speed)));

        let vel = ego.state.velocity();
        let (steering, degraded) = match pure_pursuit((ego.state.x, ego.state.y), vel, &path, &env.gains) {
            Ok(p) => (steer_command(p.omega_d, ego.state.omega, speed, &env.gains, &vehicle), p.degraded),
            Err(_) => (0.0, true),
        };
        ControlOutput {
            commands: Commands {
                steering,
                throttle_brake: speed_command(v_d, speed, a_d, &env.gains, &vehicle),
            },
            selected,
            following: following.is_some(),
            degraded,
            plan_failed,
        }
    }

    /// Leader acceleration estimated from the speed change since the last
    /// cycle; zero when the leader was not seen then.
    fn leader_accel(&self, id: usize, speed: f64, period: f64) -> f64 {
        self.last_speeds
            .iter()
            .find(|(i, _)| *i == id)
            .map_or(0.0, |(_, last)| (speed - last) / period)
    }

    /// World-frame points of the planned path out to a little beyond the
    /// look-ahead distance.
    fn pursuit_path(&self, m: &Maneuver, ego: &EgoView, env: &ControlEnv) -> Vec<(f64, f64)> {
        let reach = look_ahead(ego.state.v, &env.gains) + 20.0;
        let track = env.ctx.track;
        let mut pts = Vec::new();
        for (x, y) in m.path_xy() {
            let c = track.ra_to_cartesian(ego.station, &RaPoint { x, y, x_dot: 0.0, y_dot: 0.0 });
            pts.push((c.x, c.y));
            if x > reach {
                break;
            }
        }
        pts
    }
}

/// The ego's vehicle model with drag lowered by the slipstream it expects
/// from the cars it can see ahead.
fn drafted_vehicle(snap: &SensorSnapshot, env: &ControlEnv) -> VehicleParams {
    let mut v = env.vehicle;
    if let Some(params) = &env.slipstream {
        let y = snap.ego.ra.y;
        v.drag_coeff *= slipstream_factor(snap.opponents.iter().map(|o| (o.ra.x, o.ra.y - y)), params);
    }
    v
}

fn look_ahead(v: f64, gains: &ControlGains) -> f64 {
    (gains.k_t * v).max(gains.min_look_ahead)
}

fn race_line_path(ego: &EgoView, env: &ControlEnv) -> Vec<(f64, f64)> {
    let reach = look_ahead(ego.state.v, &env.gains) + 20.0;
    let n = (reach / 2.0).ceil() as usize;
    (0..=n)
        .map(|i| {
            let x = i as f64 * 2.0;
            let y = env.ctx.raceline.lateral_at(ego.station + x);
            let c: CartesianState = env.ctx.track.ra_to_cartesian(ego.station, &RaPoint { x, y, x_dot: 0.0, y_dot: 0.0 });
            (c.x, c.y)
        })
        .collect()
}

/// Closest vehicle ahead whose safety bound overlaps the ego's laterally.
fn nearest_leader(snap: &SensorSnapshot, env: &ControlEnv) -> Option<(usize, Following)> {
    let lane = 2.0 * env.planner.bound.half_width;
    snap.opponents
        .iter()
        .filter(|o| o.ra.x > 0.0 && (o.ra.y - snap.ego.ra.y).abs() < lane)
        .min_by(|a, b| a.ra.x.total_cmp(&b.ra.x))
        .map(|o| {
            (
                o.id,
                Following {
                    leader_speed: o.speed,
                    gap: o.ra.x,
                },
            )
        })
}
