//! Candidate maneuver generation, scoring and selection.

use std::sync::Arc;

use crate::collision::{
    is_fully_blocked_behind, reduce_speed_sampled, sampled_collide, CollisionReport, SafetyBound, SampledTrajectory,
};
use crate::error::{Error, Result};
use crate::maneuver::{connect_points, replan_velocity_capped, Maneuver, ManeuverKind};
use crate::pointmass::EndPoint;
use crate::prediction::{predict, OpponentState, PredictionParams};
use crate::raceline::{curvature_speed_limit, RacelineProfile};
use crate::track::{RaPoint, TrackModel};
use crate::vehicle::{AccelModel, LateralLimit, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Number of lateral-shift targets.
    pub targets: usize,
    pub d_min: f64,
    /// Look-ahead per metre of lateral shift, and the fixed part of it.
    pub shift_slope: f64,
    pub shift_offset: f64,
    pub merge_slope: f64,
    pub merge_offset: f64,
    /// Planning horizon ahead of the ego, m.
    pub horizon: f64,
    /// Lateral shifts finish no later than this fraction of the horizon.
    pub max_shift_fraction: f64,
    pub race_line_reward: f64,
    pub continuity_reward: f64,
    pub continuity_decay: f64,
    pub dt: f64,
    /// Time between successive plans, s.
    pub period: f64,
    pub sensor_range: f64,
    /// Fraction of the lateral grip the speed cap may use.
    pub grip_fraction: f64,
    pub bound: SafetyBound,
    pub prediction: PredictionParams,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            targets: 7,
            d_min: 1.0,
            shift_slope: 25.0,
            shift_offset: 50.0,
            merge_slope: 25.0,
            merge_offset: 50.0,
            horizon: 200.0,
            max_shift_fraction: 0.9,
            race_line_reward: 0.03,
            continuity_reward: 0.03,
            continuity_decay: 0.05,
            dt: 0.04,
            period: 0.04,
            sensor_range: 200.0,
            grip_fraction: 0.95,
            bound: SafetyBound::default(),
            prediction: PredictionParams::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self, track_width: f64) -> Result<()> {
        let ok = self.targets >= 2
            && self.horizon > track_width
            && self.race_line_reward >= 0.0
            && self.continuity_reward >= 0.0
            && self.continuity_decay > 0.0
            && self.dt > 0.0
            && self.period > 0.0
            && self.shift_slope >= 0.0
            && self.shift_offset > 0.0
            && self.merge_slope >= 0.0
            && self.merge_offset > 0.0
            && self.max_shift_fraction > 0.0
            && self.max_shift_fraction < 1.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("planner configuration {self:?}")));
        }
        self.prediction.validate()
    }
}

/// Identity of a candidate across planning cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidateId {
    Shift(usize),
    Merge,
}

#[derive(Debug, Clone)]
pub struct ScoredCandidate {
    pub id: CandidateId,
    pub maneuver: Maneuver,
    pub free: bool,
    pub travel_time: f64,
    pub nearness_reward: f64,
    pub continuity_reward: f64,
    pub cost: f64,
    /// Mean lateral distance to the race line over the horizon, m.
    pub race_line_deviation: f64,
    pub collision: Option<CollisionReport>,
    /// The speed profile was lowered to stay clear of an opponent.
    pub speed_reduced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlannerState {
    pub last_selected: Option<CandidateId>,
    pub time_since_switch: f64,
}

#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub candidates: Vec<ScoredCandidate>,
    pub selected: usize,
}

impl PlanOutput {
    pub fn selected(&self) -> &ScoredCandidate {
        &self.candidates[self.selected]
    }
}

/// Ego state for one planning cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    /// Station of the ego on the left boundary.
    pub station: f64,
    /// Road-aligned state; `x` is zero by construction.
    pub state: RaPoint,
    /// Ground speed, m/s.
    pub speed: f64,
}

/// Everything the planner reads but never changes.
pub struct PlanContext<'a> {
    pub track: &'a TrackModel,
    pub raceline: &'a RacelineProfile,
    /// Model assumed for opponents.
    pub vehicle: &'a VehicleParams,
    /// Model for the ego's own speed profiles; differs from `vehicle` when
    /// the ego expects less drag, e.g. in a slipstream.
    pub ego_vehicle: &'a VehicleParams,
    lanes: Arc<LaneSpeedTable>,
    grip_fraction: f64,
}

impl<'a> PlanContext<'a> {
    pub fn new(
        track: &'a TrackModel,
        raceline: &'a RacelineProfile,
        vehicle: &'a VehicleParams,
        grip_fraction: f64,
    ) -> Self {
        PlanContext {
            track,
            raceline,
            vehicle,
            ego_vehicle: vehicle,
            lanes: Arc::new(LaneSpeedTable::new(track, vehicle, grip_fraction)),
            grip_fraction,
        }
    }

    /// The same context with a different model for the ego.
    pub fn with_ego_vehicle<'b>(&'b self, ego_vehicle: &'b VehicleParams) -> PlanContext<'b> {
        PlanContext {
            track: self.track,
            raceline: self.raceline,
            vehicle: self.vehicle,
            ego_vehicle,
            lanes: Arc::clone(&self.lanes),
            grip_fraction: self.grip_fraction,
        }
    }

    /// Cornering speed limit for a vehicle holding lateral offset `y` at
    /// `station`.
    pub fn lane_speed_limit(&self, station: f64, y: f64) -> f64 {
        self.lanes.limit(self.track.curvature_at(station), y)
    }
}

/// Lane speed limits tabulated over the lateral offset for every distinct
/// boundary curvature of the track.
struct LaneSpeedTable {
    v_max: f64,
    step: f64,
    rows: Vec<(f64, Vec<f64>)>,
}

impl LaneSpeedTable {
    const STEP: f64 = 0.05;

    fn new(track: &TrackModel, vehicle: &VehicleParams, grip_fraction: f64) -> Self {
        let lat = ScaledGrip {
            inner: vehicle,
            fraction: grip_fraction,
        };
        let v_max = vehicle.v_max();
        let n = (track.width() / Self::STEP).ceil() as usize + 1;
        let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
        for seg in track.segments() {
            let k = seg.curvature();
            if k == 0.0 || rows.iter().any(|r| r.0 == k) {
                continue;
            }
            let row = (0..=n)
                .map(|i| {
                    let y = i as f64 * Self::STEP;
                    curvature_speed_limit(k / (1.0 + k * y), v_max, &lat)
                })
                .collect();
            rows.push((k, row));
        }
        LaneSpeedTable {
            v_max,
            step: Self::STEP,
            rows,
        }
    }

    fn limit(&self, k: f64, y: f64) -> f64 {
        if k == 0.0 {
            return self.v_max;
        }
        let Some((_, row)) = self.rows.iter().find(|r| r.0 == k) else {
            return self.v_max;
        };
        let f = (y / self.step).clamp(0.0, (row.len() - 1) as f64);
        let i = (f.floor() as usize).min(row.len() - 2);
        let u = f - i as f64;
        row[i] + u * (row[i + 1] - row[i])
    }
}

pub fn lateral_shift_targets(width: f64, count: usize, d_min: f64) -> Result<Vec<f64>> {
    if !(width > 2.0 * d_min) || count < 2 || d_min < 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "width {width} with {count} targets and boundary distance {d_min}"
        )));
    }
    let step = (width - 2.0 * d_min) / (count - 1) as f64;
    Ok((0..count).map(|i| d_min + i as f64 * step).collect())
}

fn ego_point(ego: &RaPoint) -> EndPoint {
    EndPoint::new(ego.x, ego.y, ego.x_dot, ego.y_dot)
}

/// Geometry of a lateral shift to `target`; the speed profile is the constant
/// longitudinal speed until re-planned.
pub fn build_lateral_shift(ego: &EndPoint, target: f64, cfg: &PlannerConfig) -> Result<Maneuver> {
    let q1_x = ego.x + (target - ego.y).abs() * cfg.shift_slope + cfg.shift_offset;
    let end = ego.x + cfg.horizon;
    if q1_x >= end {
        return Err(Error::BeyondHorizon { q1_x, x_max: end });
    }
    shift_through(ego, q1_x, target, end, cfg)
}

fn shift_through(ego: &EndPoint, q1_x: f64, target: f64, end: f64, cfg: &PlannerConfig) -> Result<Maneuver> {
    let points = [
        *ego,
        EndPoint::new(q1_x, target, ego.x_dot, 0.0),
        EndPoint::new(end, target, ego.x_dot, 0.0),
    ];
    let mut m = connect_points(&points, cfg.prediction.mass, cfg.dt)?;
    m.kind = ManeuverKind::LateralShift { target };
    Ok(m)
}

/// Lateral shift whose reach point is pulled inside the horizon when the
/// shift law would place it beyond.
fn clamped_lateral_shift(ego: &EndPoint, target: f64, cfg: &PlannerConfig) -> Result<Maneuver> {
    let reach = ((target - ego.y).abs() * cfg.shift_slope + cfg.shift_offset).min(cfg.max_shift_fraction * cfg.horizon);
    shift_through(ego, ego.x + reach, target, ego.x + cfg.horizon, cfg)
}

/// Spacing of race-line points after the merge point.
const MERGE_SPACING: f64 = 25.0;

/// Where the merge law `|y_rl(x) − y_e|·b̃ + c̃ = x` is met, by bisection.
/// `None` when it has no root inside the horizon.
pub fn merge_distance(ego: &EndPoint, raceline: &RacelineProfile, station: f64, cfg: &PlannerConfig) -> Option<f64> {
    let g = |x: f64| (raceline.lateral_at(station + x) - ego.y).abs() * cfg.merge_slope + cfg.merge_offset - x;
    let (mut lo, mut hi) = (ego.x + cfg.merge_offset, ego.x + cfg.horizon);
    if g(lo) <= 0.0 {
        return Some(lo);
    }
    if g(hi) > 0.0 {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Maneuver that joins the race line and follows it to the horizon.
pub fn build_raceline_merge(
    ego: &EndPoint,
    raceline: &RacelineProfile,
    cfg: &PlannerConfig,
    station: f64,
) -> Result<Maneuver> {
    let end = ego.x + cfg.horizon;
    let merge_x = merge_distance(ego, raceline, station, cfg).unwrap_or(ego.x + 0.5 * cfg.horizon);
    let on_line = |x: f64| {
        EndPoint::new(
            x,
            raceline.lateral_at(station + x),
            ego.x_dot,
            ego.x_dot * raceline.slope_at(station + x),
        )
    };
    let mut points = vec![*ego, on_line(merge_x)];
    let gap = end - merge_x;
    let steps = (gap / MERGE_SPACING).ceil().max(1.0) as usize;
    for i in 1..=steps {
        points.push(on_line(merge_x + gap * i as f64 / steps as f64));
    }
    let mut m = connect_points(&points, cfg.prediction.mass, cfg.dt)?;
    m.kind = ManeuverKind::RacelineMerge;
    Ok(m)
}

struct ScaledGrip<'a> {
    inner: &'a VehicleParams,
    fraction: f64,
}

impl LateralLimit for ScaledGrip<'_> {
    fn a_lat_max(&self, v: f64) -> f64 {
        self.fraction * self.inner.a_lat_max(v)
    }
}

fn finish(
    mut m: Maneuver,
    ego: &EgoState,
    ctx: &PlanContext,
    follow_line_speed: bool,
) -> Result<Maneuver> {
    let station = ego.station;
    m.set_metric(|x, y| ctx.track.metric(station + x, y));
    let cap = |x: f64, y: f64| {
        let lane = ctx.lane_speed_limit(station + x, y);
        if follow_line_speed {
            lane.min(ctx.raceline.speed_at(station + x))
        } else {
            lane
        }
    };
    replan_velocity_capped(&m, ego.speed.max(0.1), ctx.ego_vehicle, cap)
}

fn race_line_deviation(m: &Maneuver, ctx: &PlanContext, station: f64, horizon: f64) -> f64 {
    let n = 40;
    let total: f64 = (0..=n)
        .map(|i| {
            let x = horizon * i as f64 / n as f64;
            (m.y_at_x(x) - ctx.raceline.lateral_at(station + x)).abs()
        })
        .sum();
    total / (n + 1) as f64
}

/// Candidate free of every prediction, after slowing down behind blockers
/// where that helps. Returns the final maneuver and, if it is still not
/// free, the report of its earliest collision.
fn resolve_collisions(
    mut m: Maneuver,
    preds: &[(usize, &Maneuver, SampledTrajectory)],
    cfg: &PlannerConfig,
    decel: f64,
) -> Result<(Maneuver, Option<CollisionReport>, bool)> {
    const PASSES: usize = 3;
    let mut own = SampledTrajectory::of(&m);
    let mut reduced = false;
    for _ in 0..PASSES {
        let mut changed = false;
        for (_, p, ps) in preds {
            if m.infeasible {
                break;
            }
            if sampled_collide(&own, ps, &cfg.bound)?.collides {
                m = reduce_speed_sampled(&m, p, ps, &cfg.bound, decel)?;
                own = SampledTrajectory::of(&m);
                changed = true;
                reduced = true;
            }
        }
        if !changed || m.infeasible {
            break;
        }
    }
    let mut worst: Option<CollisionReport> = None;
    let mut min_clearance = f64::MAX;
    for (id, _, ps) in preds {
        let mut r = sampled_collide(&own, ps, &cfg.bound)?;
        r.opponent_id = Some(*id);
        min_clearance = min_clearance.min(r.min_clearance);
        if r.collides && worst.is_none_or(|w| r.first_time < w.first_time) {
            worst = Some(r);
        }
    }
    if let Some(w) = worst.as_mut() {
        w.min_clearance = min_clearance;
    }
    if m.infeasible && worst.is_none() {
        // Marked infeasible yet clear of all predictions at the final check:
        // treat it as colliding at the horizon end.
        worst = Some(CollisionReport {
            collides: true,
            first_time: Some(m.duration()),
            opponent_id: None,
            min_clearance,
        });
    }
    Ok((m, worst, reduced))
}

/// Opponents the planner reacts to, with their predictions.
pub fn predictions(
    ego: &EgoState,
    opponents: &[(usize, OpponentState)],
    ctx: &PlanContext,
    cfg: &PlannerConfig,
) -> Vec<(usize, Maneuver)> {
    opponents
        .iter()
        .filter(|(_, o)| o.x.abs() <= cfg.sensor_range)
        .filter(|(_, o)| {
            let opp = RaPoint {
                x: o.x,
                y: o.y,
                x_dot: o.x_dot,
                y_dot: o.y_dot,
            };
            !is_fully_blocked_behind(&ego.state, &opp, &cfg.bound)
        })
        .filter_map(|(id, o)| {
            predict(ctx.track, ego.station, o, &cfg.prediction, ctx.vehicle)
                .ok()
                .map(|p| (*id, p))
        })
        .collect()
}

pub fn plan(
    ego: &EgoState,
    opponents: &[(usize, OpponentState)],
    ctx: &PlanContext,
    cfg: &PlannerConfig,
    state: &PlannerState,
) -> Result<(PlanOutput, PlannerState)> {
    let preds = predictions(ego, opponents, ctx, cfg);
    plan_with_predictions(ego, &preds, ctx, cfg, state)
}

/// [`plan`] with the opponent predictions already made.
pub fn plan_with_predictions(
    ego: &EgoState,
    preds: &[(usize, Maneuver)],
    ctx: &PlanContext,
    cfg: &PlannerConfig,
    state: &PlannerState,
) -> Result<(PlanOutput, PlannerState)> {
    let start = EndPoint {
        x_dot: ego.state.x_dot.max(0.1),
        ..ego_point(&ego.state)
    };
    let targets = lateral_shift_targets(ctx.track.width(), cfg.targets, cfg.d_min)?;
    let decel = ctx.ego_vehicle.brake_decel(ego.speed);

    let mut built: Vec<(CandidateId, Maneuver)> = Vec::with_capacity(targets.len() + 1);
    for (i, &y) in targets.iter().enumerate() {
        let m = clamped_lateral_shift(&start, y, cfg)?;
        built.push((CandidateId::Shift(i), finish(m, ego, ctx, false)?));
    }
    let merge = build_raceline_merge(&start, ctx.raceline, cfg, ego.station)?;
    built.push((CandidateId::Merge, finish(merge, ego, ctx, true)?));

    for (_, p) in preds {
        if (p.dt - cfg.dt).abs() > 1e-12 {
            return Err(Error::MismatchedGrids(cfg.dt, p.dt));
        }
    }
    let sampled: Vec<(usize, &Maneuver, SampledTrajectory)> = preds
        .iter()
        .map(|(id, p)| (*id, p, SampledTrajectory::of(p)))
        .collect();
    let mut candidates = Vec::with_capacity(built.len());
    for (id, m) in built {
        let (m, collision, speed_reduced) = resolve_collisions(m, &sampled, cfg, decel)?;
        candidates.push(ScoredCandidate {
            id,
            free: collision.is_none(),
            travel_time: m.duration(),
            nearness_reward: 0.0,
            continuity_reward: 0.0,
            cost: 0.0,
            race_line_deviation: race_line_deviation(&m, ctx, ego.station, cfg.horizon),
            collision,
            speed_reduced,
            maneuver: m,
        });
    }
    let (selected, next) = score_and_select(&mut candidates, cfg, state);
    Ok((PlanOutput { candidates, selected }, next))
}

/// Fills in rewards and cost of every candidate, picks one, and advances
/// the planner state.
pub fn score_and_select(
    candidates: &mut [ScoredCandidate],
    cfg: &PlannerConfig,
    state: &PlannerState,
) -> (usize, PlannerState) {
    let nearest = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.free)
        .min_by(|a, b| a.1.race_line_deviation.total_cmp(&b.1.race_line_deviation))
        .map(|(i, _)| i);
    for (i, c) in candidates.iter_mut().enumerate() {
        c.nearness_reward = if Some(i) == nearest { cfg.race_line_reward } else { 0.0 };
        c.continuity_reward = if state.last_selected == Some(c.id) {
            (cfg.continuity_reward - cfg.continuity_decay * state.time_since_switch).max(0.0)
        } else {
            0.0
        };
        c.cost = c.travel_time - c.nearness_reward - c.continuity_reward;
    }

    let selected = if candidates.iter().any(|c| c.free) {
        select_free(candidates, state.last_selected)
    } else {
        select_safest(candidates)
    };
    let id = candidates[selected].id;
    let next = if state.last_selected == Some(id) {
        PlannerState {
            last_selected: Some(id),
            time_since_switch: state.time_since_switch + cfg.period,
        }
    } else {
        PlannerState {
            last_selected: Some(id),
            time_since_switch: 0.0,
        }
    };
    (selected, next)
}

const TIE: f64 = 1e-9;

fn select_free(candidates: &[ScoredCandidate], last: Option<CandidateId>) -> usize {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate().filter(|(_, c)| c.free) {
        let Some(b) = best else {
            best = Some(i);
            continue;
        };
        let cur = &candidates[b];
        let better = if c.cost < cur.cost - TIE {
            true
        } else if c.cost > cur.cost + TIE {
            false
        } else if (Some(c.id) == last) != (Some(cur.id) == last) {
            Some(c.id) == last
        } else {
            c.race_line_deviation < cur.race_line_deviation
        };
        if better {
            best = Some(i);
        }
    }
    best.expect("at least one free candidate")
}

fn select_safest(candidates: &[ScoredCandidate]) -> usize {
    let key = |c: &ScoredCandidate| {
        let r = c.collision.expect("colliding candidates carry a report");
        (r.first_time.unwrap_or(f64::INFINITY), r.min_clearance)
    };
    let mut best = 0;
    for i in 1..candidates.len() {
        let (t, d) = key(&candidates[i]);
        let (bt, bd) = key(&candidates[best]);
        if t > bt + TIE || ((t - bt).abs() <= TIE && d > bd) {
            best = i;
        }
    }
    best
}
