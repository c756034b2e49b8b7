//! Multi-point maneuvers built from bang-bang segments, and their velocity
//! re-planning.
//!
//! A maneuver keeps two views of the same motion. The *path* is a dense list
//! of nodes taken from the segment laws; it fixes the geometry. The *samples*
//! are the road-aligned states on a fixed time grid (`0, dt, 2dt, ...` plus a
//! final sample at the end time), and they change whenever a new speed
//! profile is applied to the path.

use crate::error::{Error, Result};
use crate::norm;
use crate::pointmass::{plan_segment, EndPoint, SegmentLaw};
use crate::track::RaPoint;
use crate::vehicle::AccelModel;

/// Path nodes per sample interval.
const NODES_PER_DT: usize = 2;
const MIN_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManeuverKind {
    LateralShift { target: f64 },
    RacelineMerge,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPoint {
    pub t: f64,
    pub state: RaPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PathNode {
    x: f64,
    y: f64,
    /// Law velocity, used for the direction of motion.
    x_dot: f64,
    y_dot: f64,
    /// Ratio of travelled distance to boundary arc length at this node.
    metric: f64,
    /// Distance travelled from the first node.
    s: f64,
}

impl PathNode {
    fn law_speed(&self) -> f64 {
        norm(self.metric * self.x_dot, self.y_dot)
    }
}

#[derive(Debug, Clone)]
pub struct Maneuver {
    pub kind: ManeuverKind,
    pub segments: Vec<SegmentLaw>,
    pub dt: f64,
    pub samples: Vec<TimedPoint>,
    /// Speed (distance per second) at every sample.
    pub speed_profile: Vec<f64>,
    /// Set when no speed profile avoids a collision.
    pub infeasible: bool,
    path: Vec<PathNode>,
    node_speed: Vec<f64>,
    node_time: Vec<f64>,
}

pub fn connect_points(points: &[EndPoint], mass: f64, dt: f64) -> Result<Maneuver> {
    Maneuver::connect(points, mass, dt, ManeuverKind::Predicted)
}

impl Maneuver {
    pub fn connect(points: &[EndPoint], mass: f64, dt: f64, kind: ManeuverKind) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidEndPoints("need at least two points".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt {dt} must be positive")));
        }
        let segments = points
            .windows(2)
            .map(|w| plan_segment(&w[0], &w[1], mass))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_segments(segments, dt, kind))
    }

    /// Builds a maneuver directly from a list of timed states (used for
    /// paths that do not come from bang-bang laws).
    pub fn from_states(states: &[RaPoint], dt: f64, kind: ManeuverKind) -> Self {
        let mut path = Vec::with_capacity(states.len());
        let mut node_time = Vec::with_capacity(states.len());
        for (i, p) in states.iter().enumerate() {
            path.push(PathNode {
                x: p.x,
                y: p.y,
                x_dot: p.x_dot,
                y_dot: p.y_dot,
                metric: 1.0,
                s: 0.0,
            });
            node_time.push(i as f64 * dt);
        }
        let mut m = Maneuver {
            kind,
            segments: Vec::new(),
            dt,
            samples: Vec::new(),
            speed_profile: Vec::new(),
            infeasible: false,
            path,
            node_speed: Vec::new(),
            node_time,
        };
        m.refresh_arc_length();
        m.node_speed = m.path.iter().map(PathNode::law_speed).collect();
        m.samples = states
            .iter()
            .enumerate()
            .map(|(i, p)| TimedPoint {
                t: i as f64 * dt,
                state: *p,
            })
            .collect();
        m.speed_profile = m.node_speed.clone();
        m
    }

    fn from_segments(segments: Vec<SegmentLaw>, dt: f64, kind: ManeuverKind) -> Self {
        let step = dt / NODES_PER_DT as f64;
        let mut path = Vec::new();
        let mut node_time = Vec::new();
        let mut t0 = 0.0;
        for (i, law) in segments.iter().enumerate() {
            let n = ((law.duration / step).ceil() as usize).max(1);
            let first = if i == 0 { 0 } else { 1 };
            for j in first..=n {
                let t = law.duration * j as f64 / n as f64;
                let p = law.at(t);
                path.push(PathNode {
                    x: p.x,
                    y: p.y,
                    x_dot: p.x_dot,
                    y_dot: p.y_dot,
                    metric: 1.0,
                    s: 0.0,
                });
                node_time.push(t0 + t);
            }
            t0 += law.duration;
        }
        let total = t0;
        let samples = grid_times(total, dt)
            .map(|t| TimedPoint {
                t,
                state: to_ra(&law_state(&segments, t)),
            })
            .collect::<Vec<_>>();
        let mut m = Maneuver {
            kind,
            segments,
            dt,
            samples,
            speed_profile: Vec::new(),
            infeasible: false,
            path,
            node_speed: Vec::new(),
            node_time,
        };
        m.refresh_arc_length();
        m.node_speed = m.path.iter().map(PathNode::law_speed).collect();
        m.speed_profile = m.samples.iter().map(|s| s.state.x_dot.hypot(s.state.y_dot)).collect();
        m
    }

    fn refresh_arc_length(&mut self) {
        let mut s = 0.0;
        for i in 0..self.path.len() {
            if i > 0 {
                let (a, b) = (&self.path[i - 1], &self.path[i]);
                let h = 0.5 * (a.metric + b.metric);
                s += norm(h * (b.x - a.x), b.y - a.y);
            }
            self.path[i].s = s;
        }
    }

    /// Sets the distance metric `1 + κ·y` of the underlying road frame so that
    /// speeds and travel times refer to physical distance. Call before
    /// re-planning the velocity.
    pub fn set_metric(&mut self, metric: impl Fn(f64, f64) -> f64) {
        for n in &mut self.path {
            n.metric = metric(n.x, n.y);
        }
        self.refresh_arc_length();
        self.node_speed = self.path.iter().map(PathNode::law_speed).collect();
        let speeds: Vec<f64> = self
            .samples
            .iter()
            .map(|s| {
                let i = self.node_index_at_x(s.state.x);
                norm(self.path[i].metric * s.state.x_dot, s.state.y_dot)
            })
            .collect();
        self.speed_profile = speeds;
    }

    fn node_index_at_x(&self, x: f64) -> usize {
        self.path.partition_point(|n| n.x < x).min(self.path.len() - 1)
    }

    /// Total duration of the current speed profile.
    pub fn duration(&self) -> f64 {
        *self.node_time.last().unwrap_or(&0.0)
    }

    /// Total travelled distance along the path.
    pub fn length(&self) -> f64 {
        self.path.last().map_or(0.0, |n| n.s)
    }

    pub fn end_x(&self) -> f64 {
        self.path.last().map_or(0.0, |n| n.x)
    }

    /// Largest `|F_y|/m` over the segments.
    pub fn peak_lateral_accel(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.lateral_accel().abs())
            .fold(0.0, f64::max)
    }

    /// Road-aligned path geometry as `(x, y)` pairs.
    pub fn path_xy(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.path.iter().map(|n| (n.x, n.y))
    }

    /// Lateral offset of the path at a longitudinal position (clamped to the
    /// path's extent).
    pub fn y_at_x(&self, x: f64) -> f64 {
        let i = self.path.partition_point(|n| n.x < x);
        if i == 0 {
            return self.path[0].y;
        }
        if i >= self.path.len() {
            return self.path[self.path.len() - 1].y;
        }
        let (a, b) = (&self.path[i - 1], &self.path[i]);
        let f = if b.x > a.x { (x - a.x) / (b.x - a.x) } else { 0.0 };
        a.y + f * (b.y - a.y)
    }

    /// Speed at time `t` (held after the end).
    pub fn speed_at(&self, t: f64) -> f64 {
        let (i, f) = self.time_bracket(t);
        if f == 0.0 {
            return self.node_speed[i];
        }
        self.node_speed[i] + f * (self.node_speed[i + 1] - self.node_speed[i])
    }

    /// Acceleration of the speed profile at time `t`.
    pub fn accel_at(&self, t: f64) -> f64 {
        let (i, _) = self.time_bracket(t);
        let j = (i + 1).min(self.node_time.len() - 1);
        let i = if j == i { i.saturating_sub(1) } else { i };
        let dt = self.node_time[j] - self.node_time[i];
        if dt > 0.0 {
            (self.node_speed[j] - self.node_speed[i]) / dt
        } else {
            0.0
        }
    }

    fn time_bracket(&self, t: f64) -> (usize, f64) {
        bracket(&self.node_time, t)
    }

    /// Road-aligned state at time `t` on the current profile.
    pub fn state_at(&self, t: f64) -> RaPoint {
        self.state_on(&self.node_speed, &self.node_time, t)
    }

    /// Road-aligned state at time `t` for an alternative speed profile over
    /// the same path, given by node speeds and the matching node times.
    pub(crate) fn state_on(&self, speeds: &[f64], times: &[f64], t: f64) -> RaPoint {
        let (i, f) = bracket(times, t);
        self.state_in(speeds, i, f)
    }

    /// State a fraction `f` of the way from node `i` to node `i + 1`.
    fn state_in(&self, speeds: &[f64], i: usize, f: f64) -> RaPoint {
        let a = &self.path[i];
        let (x, y, dir_i) = if f == 0.0 {
            (a.x, a.y, i)
        } else {
            let b = &self.path[i + 1];
            (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), if f < 0.5 { i } else { i + 1 })
        };
        let v = if f == 0.0 {
            speeds[i]
        } else {
            speeds[i] + f * (speeds[i + 1] - speeds[i])
        };
        let d = &self.path[dir_i];
        let law = d.law_speed();
        let (xd, yd) = if law > 0.0 {
            (v * d.x_dot / law, v * d.y_dot / law)
        } else {
            (0.0, 0.0)
        };
        RaPoint {
            x,
            y,
            x_dot: xd,
            y_dot: yd,
        }
    }

    /// Arrival time at every node for the given node speeds.
    pub(crate) fn node_times_for(&self, speeds: &[f64]) -> Vec<f64> {
        let mut t = 0.0;
        let mut times = Vec::with_capacity(speeds.len());
        for i in 0..speeds.len() {
            if i > 0 {
                let ds = self.path[i].s - self.path[i - 1].s;
                let v = 0.5 * (speeds[i] + speeds[i - 1]);
                t += ds / v.max(MIN_SPEED);
            }
            times.push(t);
        }
        times
    }

    /// Applies a new speed for every path node and re-derives timing and
    /// samples over the same path.
    fn apply_node_speeds(&mut self, speeds: Vec<f64>) {
        debug_assert_eq!(speeds.len(), self.path.len());
        let times = self.node_times_for(&speeds);
        self.node_speed = speeds;
        self.node_time = times;
        let total = self.duration();
        let mut walk = Walker::current(self);
        let samples: Vec<TimedPoint> = grid_times(total, self.dt)
            .map(|t| TimedPoint {
                t,
                state: walk.state(t),
            })
            .collect();
        self.speed_profile = samples.iter().map(|s| self.speed_at(s.t)).collect();
        self.samples = samples;
    }

    /// Truncates the samples to `t_max` (the path is kept).
    pub fn truncate(&mut self, t_max: f64) {
        if self.duration() <= t_max {
            return;
        }
        let keep = grid_times(t_max, self.dt).count();
        self.samples.truncate(keep);
        self.speed_profile.truncate(keep);
        let last_t = self.samples.last().map_or(0.0, |s| s.t);
        if (last_t - t_max).abs() > 1e-12 {
            let st = self.state_at(t_max);
            self.samples.push(TimedPoint { t: t_max, state: st });
            self.speed_profile.push(self.speed_at(t_max));
        }
    }
}

/// `0, dt, 2dt, ...` up to `total`, with a final sample at `total` when it is
/// not on the grid.
fn grid_times(total: f64, dt: f64) -> impl Iterator<Item = f64> {
    let n = (total / dt + 1e-9).floor() as usize;
    let last_on_grid = (total - n as f64 * dt).abs() <= 1e-9 * dt.max(1.0);
    let extra = if last_on_grid { None } else { Some(total) };
    (0..=n)
        .map(move |k| if k == n && last_on_grid { total } else { k as f64 * dt })
        .chain(extra)
}

/// Evaluates a speed profile at non-decreasing times, walking the nodes
/// instead of searching for each time afresh.
pub(crate) struct Walker<'a> {
    m: &'a Maneuver,
    speeds: &'a [f64],
    times: &'a [f64],
    i: usize,
}

impl<'a> Walker<'a> {
    pub(crate) fn new(m: &'a Maneuver, speeds: &'a [f64], times: &'a [f64]) -> Self {
        Walker { m, speeds, times, i: 0 }
    }

    pub(crate) fn current(m: &'a Maneuver) -> Self {
        Self::new(m, &m.node_speed, &m.node_time)
    }

    /// Same result as [`Maneuver::state_on`]; `t` must not decrease between
    /// calls.
    pub(crate) fn state(&mut self, t: f64) -> RaPoint {
        let times = self.times;
        let n = times.len();
        if t <= times[0] {
            return self.m.state_in(self.speeds, 0, 0.0);
        }
        while self.i + 1 < n && times[self.i + 1] <= t {
            self.i += 1;
        }
        let i = self.i;
        if i + 1 == n {
            return self.m.state_in(self.speeds, n - 1, 0.0);
        }
        let span = times[i + 1] - times[i];
        let f = if span > 0.0 { (t - times[i]) / span } else { 0.0 };
        self.m.state_in(self.speeds, i, f)
    }
}

/// Interval index and fraction for time `t` in ascending `times`; `f == 0`
/// at and past the ends.
fn bracket(times: &[f64], t: f64) -> (usize, f64) {
    let n = times.len();
    if t <= times[0] {
        return (0, 0.0);
    }
    if t >= times[n - 1] {
        return (n - 1, 0.0);
    }
    let j = times.partition_point(|&x| x <= t);
    let i = j - 1;
    let span = times[j] - times[i];
    (i, if span > 0.0 { (t - times[i]) / span } else { 0.0 })
}

fn law_state(segments: &[SegmentLaw], t: f64) -> EndPoint {
    let mut t0 = 0.0;
    for (i, law) in segments.iter().enumerate() {
        if t <= t0 + law.duration || i + 1 == segments.len() {
            return law.at(t - t0);
        }
        t0 += law.duration;
    }
    unreachable!("at least one segment")
}

fn to_ra(p: &EndPoint) -> RaPoint {
    RaPoint {
        x: p.x,
        y: p.y,
        x_dot: p.x_dot,
        y_dot: p.y_dot,
    }
}

/// Velocity re-planning: accelerate along the maneuver from `v0` with the
/// given model until its top speed.
pub fn replan_velocity(man: &Maneuver, v0: f64, accel: &dyn AccelModel) -> Result<Maneuver> {
    replan_velocity_capped(man, v0, accel, |_, _| f64::INFINITY)
}

/// As [`replan_velocity`], additionally bounded by a speed cap. The cap sees
/// the road-aligned position of each path node; drops in it are met by
/// braking at the model's rate.
pub fn replan_velocity_capped(
    man: &Maneuver,
    v0: f64,
    accel: &dyn AccelModel,
    cap: impl Fn(f64, f64) -> f64,
) -> Result<Maneuver> {
    if !(v0 > 0.0) {
        return Err(Error::InvalidParameter(format!("initial speed {v0} must be positive")));
    }
    let v_top = accel.v_max().max(v0);
    let n = man.path.len();
    let mut v = Vec::with_capacity(n);
    v.push(v0);
    let dvds = |v: f64| accel.accel(v) / v.max(MIN_SPEED);
    for i in 1..n {
        let h = man.path[i].s - man.path[i - 1].s;
        let vi = v[i - 1];
        // RK4 on dv/ds = a(v)/v.
        let k1 = dvds(vi);
        let k2 = dvds(vi + 0.5 * h * k1);
        let k3 = dvds(vi + 0.5 * h * k2);
        let k4 = dvds(vi + h * k3);
        let next = (vi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).min(v_top);
        let node = &man.path[i];
        v.push(next.min(cap(node.x, node.y)).max(MIN_SPEED));
    }
    for i in (1..n - 1).rev() {
        let h = man.path[i + 1].s - man.path[i].s;
        let b = accel.brake_decel(v[i]);
        v[i] = v[i].min((v[i + 1] * v[i + 1] + 2.0 * b * h).sqrt());
    }
    let mut out = man.clone();
    out.apply_node_speeds(v);
    Ok(out)
}

/// Reshapes the profile so that from travelled distance `brake_from` on the
/// vehicle brakes at `decel` down to `target` and holds it; the original
/// profile stays an upper bound everywhere.
pub fn brake_to_speed(man: &Maneuver, brake_from: f64, decel: f64, target: f64) -> Maneuver {
    let (speeds, _) = man.braked_profile(brake_from, decel, target);
    let mut out = man.clone();
    out.apply_node_speeds(speeds);
    out
}

impl Maneuver {
    /// Node speeds and times of [`brake_to_speed`] without building the
    /// maneuver. Nodes before `brake_from` keep their speeds and times.
    pub(crate) fn braked_profile(&self, brake_from: f64, decel: f64, target: f64) -> (Vec<f64>, Vec<f64>) {
        let first = self.path.partition_point(|n| n.s < brake_from);
        let mut speeds = self.node_speed.clone();
        let mut times = self.node_time.clone();
        if first == self.path.len() {
            return (speeds, times);
        }
        let v0 = speeds[first];
        for i in first..speeds.len() {
            let env = (v0 * v0 - 2.0 * decel * (self.path[i].s - brake_from)).max(target * target).sqrt();
            speeds[i] = speeds[i].min(env).max(MIN_SPEED);
        }
        for i in first.max(1)..speeds.len() {
            let ds = self.path[i].s - self.path[i - 1].s;
            let v = 0.5 * (speeds[i] + speeds[i - 1]);
            times[i] = times[i - 1] + ds / v.max(MIN_SPEED);
        }
        (speeds, times)
    }

    /// Time at which travelled distance `s` is reached on the current profile.
    pub(crate) fn time_at_distance(&self, s: f64) -> f64 {
        let i = self.path.partition_point(|n| n.s < s);
        if i == 0 {
            return self.node_time[0];
        }
        if i >= self.path.len() {
            return self.duration();
        }
        let (a, b) = (&self.path[i - 1], &self.path[i]);
        let f = if b.s > a.s { (s - a.s) / (b.s - a.s) } else { 0.0 };
        self.node_time[i - 1] + f * (self.node_time[i] - self.node_time[i - 1])
    }

    /// Travelled distance at time `t` on the current profile.
    pub(crate) fn distance_at(&self, t: f64) -> f64 {
        let (i, f) = self.time_bracket(t);
        if f == 0.0 {
            return self.path[i].s;
        }
        self.path[i].s + f * (self.path[i + 1].s - self.path[i].s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointmass::sample_segment;
    use crate::vehicle::ConstantAccel;
    use approx::assert_abs_diff_eq;

    fn straight(len: f64, v: f64) -> Maneuver {
        connect_points(
            &[EndPoint::new(0.0, 5.0, v, 0.0), EndPoint::new(len, 5.0, v, 0.0)],
            750.0,
            0.04,
        )
        .unwrap()
    }

    #[test]
    fn two_points_match_single_segment() {
        let a = EndPoint::new(0.0, 3.0, 80.0, 0.5);
        let b = EndPoint::new(150.0, 7.0, 80.0, 0.0);
        let m = connect_points(&[a, b], 750.0, 0.04).unwrap();
        let law = plan_segment(&a, &b, 750.0).unwrap();
        assert_eq!(m.segments, vec![law]);
        for s in &m.samples {
            let p = sample_segment(&law, s.t).unwrap();
            assert_abs_diff_eq!(s.state.y, p.y, epsilon = 1e-12);
            assert_abs_diff_eq!(s.state.y_dot, p.y_dot, epsilon = 1e-12);
        }
        let last = m.samples.last().unwrap();
        assert_abs_diff_eq!(last.t, law.duration, epsilon = 1e-12);
    }

    #[test]
    fn collinear_points_have_no_force() {
        let pts = [
            EndPoint::new(0.0, 4.0, 60.0, 0.0),
            EndPoint::new(50.0, 4.0, 60.0, 0.0),
            EndPoint::new(120.0, 4.0, 60.0, 0.0),
        ];
        let m = connect_points(&pts, 750.0, 0.04).unwrap();
        assert!(m.segments.iter().all(|s| s.force == 0.0));
    }

    #[test]
    fn joints_are_continuous() {
        let pts = [
            EndPoint::new(0.0, 7.0, 80.0, 1.0),
            EndPoint::new(90.0, 3.0, 80.0, 0.0),
            EndPoint::new(200.0, 3.0, 80.0, 0.0),
        ];
        let m = connect_points(&pts, 750.0, 0.04).unwrap();
        let end = m.segments[0].goal();
        let start = m.segments[1].start;
        assert_abs_diff_eq!(end.y, start.y, epsilon = 1e-6);
        assert_abs_diff_eq!(end.y_dot, start.y_dot, epsilon = 1e-6);
        assert_abs_diff_eq!(end.x, start.x, epsilon = 1e-9);
    }

    #[test]
    fn grid_covers_duration_exactly() {
        let m = straight(101.0, 80.0);
        let n = m.samples.len();
        for k in 0..n - 1 {
            assert_abs_diff_eq!(m.samples[k].t, k as f64 * 0.04, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(m.samples[n - 1].t, 101.0 / 80.0, epsilon = 1e-12);
    }

    #[test]
    fn replan_at_top_speed_keeps_timing() {
        let m = straight(200.0, 80.0);
        let model = ConstantAccel {
            accel: 3.0,
            v_max: 80.0,
            brake: 10.0,
        };
        let r = replan_velocity(&m, 80.0, &model).unwrap();
        assert!(r.speed_profile.iter().all(|&v| (v - 80.0).abs() < 1e-12));
        assert_abs_diff_eq!(r.duration(), 2.5, epsilon = 1e-9);
        assert_eq!(r.samples.len(), m.samples.len());
    }

    #[test]
    fn replan_uniform_acceleration() {
        let m = straight(200.0, 80.0);
        let model = ConstantAccel {
            accel: 3.0,
            v_max: 80.0,
            brake: 10.0,
        };
        let r = replan_velocity(&m, 40.0, &model).unwrap();
        for (i, n) in r.path.iter().enumerate() {
            let expect = (40.0f64 * 40.0 + 2.0 * 3.0 * n.s).sqrt().min(80.0);
            assert_abs_diff_eq!(r.node_speed[i], expect, epsilon = 1e-6);
        }
        assert!(r.speed_profile.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn non_positive_start_speed_rejected() {
        let m = straight(200.0, 80.0);
        let model = ConstantAccel {
            accel: 3.0,
            v_max: 80.0,
            brake: 10.0,
        };
        assert!(replan_velocity(&m, 0.0, &model).is_err());
    }

    #[test]
    fn brake_profile_holds_target() {
        let m = straight(200.0, 80.0);
        let b = brake_to_speed(&m, 0.0, 10.0, 60.0);
        let last = *b.speed_profile.last().unwrap();
        assert_abs_diff_eq!(last, 60.0, epsilon = 1e-9);
        assert!(b.speed_profile.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(b.duration() > m.duration());
    }

    #[test]
    fn aero_model_matches_fine_euler() {
        let params = crate::vehicle::VehicleParams::default();
        let m = straight(250.0, 80.0);
        let r = replan_velocity(&m, 70.0, &params).unwrap();
        // 1 ms Euler in time, recording speed against distance.
        let (mut t, mut s, mut v) = (0.0, 0.0, 70.0);
        let mut trace = vec![(0.0, 70.0)];
        while s < 260.0 && t < 10.0 {
            let a = params.accel(v);
            s += v * 1e-3;
            v = (v + a * 1e-3).min(params.v_max());
            t += 1e-3;
            trace.push((s, v));
        }
        for (node, &vn) in r.path.iter().zip(&r.node_speed) {
            let k = trace.partition_point(|p| p.0 < node.s).max(1);
            let (a, b) = (trace[k - 1], trace[k]);
            let ve = a.1 + (node.s - a.0) / (b.0 - a.0) * (b.1 - a.1);
            assert!((vn - ve).abs() < 0.05, "s {} v {} vs {}", node.s, vn, ve);
        }
    }

    #[test]
    fn three_point_prediction_shape_matches_integration() {
        let pts = [
            EndPoint::new(0.0, 7.0, 75.0, 2.0),
            EndPoint::new(60.0, 13.0, 75.0, 0.0),
            EndPoint::new(225.0, 13.0, 75.0, 0.0),
        ];
        let m = connect_points(&pts, 750.0, 0.04).unwrap();
        // Euler-free oracle: integrate the piecewise force with small steps.
        let (mut y, mut v) = (7.0, 2.0);
        let h = 1e-5;
        let mut t = 0.0;
        let total = m.duration();
        let mut k = 0;
        let mut t0 = 0.0;
        while t < total - 1e-12 {
            while k + 1 < m.segments.len() && t >= t0 + m.segments[k].duration {
                t0 += m.segments[k].duration;
                k += 1;
            }
            let law = &m.segments[k];
            let local = t - t0 + 0.5 * h;
            let a = if local < law.switch_time { law.lateral_accel() } else { -law.lateral_accel() };
            let step = h.min(total - t);
            y += v * step + 0.5 * a * step * step;
            v += a * step;
            t += step;
        }
        let last = m.samples.last().unwrap().state;
        assert_abs_diff_eq!(y, last.y, epsilon = 1e-3);
        assert_abs_diff_eq!(v, last.y_dot, epsilon = 1e-3);
        assert_abs_diff_eq!(last.y, 13.0, epsilon = 1e-6);
    }
}
