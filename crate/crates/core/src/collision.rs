//! Rectangular safety bounds and time-synchronised collision checks between
//! sampled trajectories.

use crate::error::{Error, Result};
use crate::maneuver::{brake_to_speed, Maneuver, Walker};
use crate::track::RaPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyBound {
    pub half_length: f64,
    pub half_width: f64,
    pub front_margin: f64,
    pub rear_margin: f64,
    pub side_margin: f64,
}

impl SafetyBound {
    /// Body of `length` × `width` inflated by `length_factor·length` at the
    /// front and rear and `width_factor·width` on each side.
    pub fn from_vehicle(length: f64, width: f64, length_factor: f64, width_factor: f64) -> Result<Self> {
        let front = length_factor * length;
        let side = width_factor * width;
        Self::with_margins(length, width, front, front, side)
    }

    pub fn with_margins(length: f64, width: f64, front: f64, rear: f64, side: f64) -> Result<Self> {
        if !(length > 0.0 && width > 0.0 && front >= 0.0 && rear >= 0.0 && side >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "safety bound {length}x{width} with margins {front}/{rear}/{side}"
            )));
        }
        Ok(SafetyBound {
            half_length: length / 2.0 + front,
            half_width: width / 2.0 + side,
            front_margin: front,
            rear_margin: rear,
            side_margin: side,
        })
    }

    /// The same body with every margin removed.
    pub fn body(&self) -> Self {
        let length = 2.0 * (self.half_length - self.front_margin);
        let width = 2.0 * (self.half_width - self.side_margin);
        SafetyBound {
            half_length: length / 2.0,
            half_width: width / 2.0,
            front_margin: 0.0,
            rear_margin: 0.0,
            side_margin: 0.0,
        }
    }

    fn long_extent(&self) -> f64 {
        self.half_length - 0.5 * (self.front_margin - self.rear_margin)
    }

    /// Offset of the rectangle centre ahead of the vehicle centre.
    fn centre_offset(&self) -> f64 {
        0.5 * (self.front_margin - self.rear_margin)
    }

    /// Radius around the vehicle point that contains the whole rectangle.
    fn circumradius(&self) -> f64 {
        (self.long_extent() + self.centre_offset().abs()).hypot(self.half_width)
    }
}

impl Default for SafetyBound {
    fn default() -> Self {
        SafetyBound::from_vehicle(5.0, 2.0, 0.3, 0.5).expect("positive defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl BoundPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        BoundPose { x, y, heading }
    }

    /// Pose of a sampled state; heading from its velocity.
    pub fn from_state(p: &RaPoint) -> Self {
        let heading = if p.x_dot == 0.0 && p.y_dot == 0.0 {
            0.0
        } else {
            p.y_dot.atan2(p.x_dot)
        };
        BoundPose::new(p.x, p.y, heading)
    }
}

struct Rect {
    cx: f64,
    cy: f64,
    axes: [(f64, f64); 2],
    half: [f64; 2],
}

impl Rect {
    fn new(p: &BoundPose, b: &SafetyBound) -> Self {
        let (s, c) = p.heading.sin_cos();
        let off = b.centre_offset();
        Rect {
            cx: p.x + off * c,
            cy: p.y + off * s,
            axes: [(c, s), (-s, c)],
            half: [b.long_extent(), b.half_width],
        }
    }

    fn radius_on(&self, (ax, ay): (f64, f64)) -> f64 {
        self.half[0] * (self.axes[0].0 * ax + self.axes[0].1 * ay).abs()
            + self.half[1] * (self.axes[1].0 * ax + self.axes[1].1 * ay).abs()
    }
}

/// Largest gap between the two rectangles' projections over the four
/// separating axes. Positive means separated by at least that much along
/// some axis; zero means touching; negative is the smallest penetration.
pub fn signed_separation(a: &BoundPose, ab: &SafetyBound, b: &BoundPose, bb: &SafetyBound) -> f64 {
    let (ra, rb) = (Rect::new(a, ab), Rect::new(b, bb));
    let (dx, dy) = (rb.cx - ra.cx, rb.cy - ra.cy);
    ra.axes
        .iter()
        .chain(rb.axes.iter())
        .map(|&axis| {
            let dist = (dx * axis.0 + dy * axis.1).abs();
            dist - ra.radius_on(axis) - rb.radius_on(axis)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True iff the two rectangles share interior area. Touching edges do not
/// count as overlap.
pub fn bounds_overlap(a: &BoundPose, ab: &SafetyBound, b: &BoundPose, bb: &SafetyBound) -> bool {
    let reach = ab.circumradius() + bb.circumradius();
    let (ca, cb) = (Rect::new(a, ab), Rect::new(b, bb));
    if (cb.cx - ca.cx).hypot(cb.cy - ca.cy) >= reach {
        return false;
    }
    signed_separation(a, ab, b, bb) < -OVERLAP_EPS
}

const OVERLAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionReport {
    pub collides: bool,
    pub first_time: Option<f64>,
    pub opponent_id: Option<usize>,
    /// Smallest signed separation over the checked times.
    pub min_clearance: f64,
}

impl CollisionReport {
    pub fn clear() -> Self {
        CollisionReport {
            collides: false,
            first_time: None,
            opponent_id: None,
            min_clearance: f64::INFINITY,
        }
    }
}

/// States of a maneuver at every half step `k·dt/2` of its time grid, up to
/// the last grid point within its duration.
#[derive(Debug, Clone)]
pub struct SampledTrajectory {
    pub dt: f64,
    pub states: Vec<RaPoint>,
}

impl SampledTrajectory {
    pub fn of(m: &Maneuver) -> Self {
        let steps = grid_steps(m.duration(), m.dt);
        SampledTrajectory {
            dt: m.dt,
            states: {
                let mut walk = Walker::current(m);
                (0..=2 * steps).map(|k| walk.state(half_step(k, m.dt))).collect()
            },
        }
    }
}

fn grid_steps(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize
}

fn half_step(k: usize, dt: f64) -> f64 {
    0.5 * k as f64 * dt
}

/// Separation of two states: the exact rectangle separation when they are
/// close enough to touch, otherwise a lower bound from the centre distance.
fn separation(a: &RaPoint, b: &RaPoint, bound: &SafetyBound, reach: f64) -> f64 {
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    let d = (dx * dx + dy * dy).sqrt();
    if d >= reach {
        d - reach
    } else {
        signed_separation(&BoundPose::from_state(a), bound, &BoundPose::from_state(b), bound)
    }
}

fn check_grids(dt1: f64, dt2: f64, dt: f64) -> Result<()> {
    let tol = 1e-12;
    if (dt1 - dt).abs() > tol || (dt2 - dt).abs() > tol {
        return Err(Error::MismatchedGrids(dt1, dt2));
    }
    Ok(())
}

/// Checks both trajectories at the same times: every grid point `k·dt`
/// within their common span and the midpoint of every interval.
pub fn trajectories_collide(c1: &Maneuver, c2: &Maneuver, bound: &SafetyBound, dt: f64) -> Result<CollisionReport> {
    check_grids(c1.dt, c2.dt, dt)?;
    sampled_collide(&SampledTrajectory::of(c1), &SampledTrajectory::of(c2), bound)
}

/// [`trajectories_collide`] on trajectories sampled beforehand.
pub fn sampled_collide(a: &SampledTrajectory, b: &SampledTrajectory, bound: &SafetyBound) -> Result<CollisionReport> {
    check_grids(a.dt, b.dt, a.dt)?;
    let reach = 2.0 * bound.circumradius();
    let mut report = CollisionReport::clear();
    for (k, (sa, sb)) in a.states.iter().zip(&b.states).enumerate() {
        let sep = separation(sa, sb, bound, reach);
        report.min_clearance = report.min_clearance.min(sep);
        if !report.collides && sep < -OVERLAP_EPS {
            report.collides = true;
            report.first_time = Some(half_step(k, a.dt));
        }
    }
    if report.min_clearance.is_infinite() {
        report.min_clearance = f64::MAX;
    }
    Ok(report)
}

/// Slows `cand` so it falls in behind `pred` instead of running into it.
///
/// Braking starts as late as possible, at deceleration `decel`, and settles at
/// the blocker's predicted speed at the first collision. If even braking from
/// the start collides, the fully braked maneuver is returned marked
/// infeasible.
pub fn reduce_speed_to_avoid(cand: &Maneuver, pred: &Maneuver, bound: &SafetyBound, decel: f64) -> Result<Maneuver> {
    check_grids(cand.dt, pred.dt, cand.dt)?;
    reduce_speed_sampled(cand, pred, &SampledTrajectory::of(pred), bound, decel)
}

/// [`reduce_speed_to_avoid`] with the blocker already sampled.
pub fn reduce_speed_sampled(
    cand: &Maneuver,
    pred: &Maneuver,
    pred_samples: &SampledTrajectory,
    bound: &SafetyBound,
    decel: f64,
) -> Result<Maneuver> {
    check_grids(cand.dt, pred_samples.dt, cand.dt)?;
    let report = sampled_collide(&SampledTrajectory::of(cand), pred_samples, bound)?;
    let Some(t_hit) = report.first_time else {
        return Ok(cand.clone());
    };
    let target = pred.speed_at(t_hit).max(0.0);
    let reach = 2.0 * bound.circumradius();
    let dt = cand.dt;
    // Whether braking from travelled distance `s_b` still hits the blocker;
    // stops at the first overlap. Up to the brake point the motion is the
    // original one, which is clear before `t_hit`.
    let collides_from = |s_b: f64| -> bool {
        let t_b = cand.time_at_distance(s_b);
        if t_b >= t_hit {
            return true;
        }
        let (speeds, times) = cand.braked_profile(s_b, decel, target);
        let duration = *times.last().unwrap_or(&0.0);
        let n = (2 * grid_steps(duration, dt) + 1).min(pred_samples.states.len());
        let k0 = ((t_b / (0.5 * dt)).floor() as usize).min(n);
        let mut walk = Walker::new(cand, &speeds, &times);
        (k0..n).any(|k| {
            let s = walk.state(half_step(k, dt));
            separation(&s, &pred_samples.states[k], bound, reach) < -OVERLAP_EPS
        })
    };
    if collides_from(0.0) {
        let mut m = brake_to_speed(cand, 0.0, decel, target);
        m.infeasible = true;
        return Ok(m);
    }
    let (mut lo, mut hi) = (0.0, cand.distance_at(t_hit));
    for _ in 0..40 {
        if hi - lo < 0.05 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if collides_from(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(brake_to_speed(cand, lo, decel, target))
}

/// An opponent directly behind the ego, whose body lies wholly within the
/// ego's bound laterally, is left to avoid the ego.
pub fn is_fully_blocked_behind(ego: &RaPoint, opp: &RaPoint, bound: &SafetyBound) -> bool {
    opp.x < ego.x && (opp.y - ego.y).abs() <= bound.side_margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maneuver::{Maneuver, ManeuverKind};
    use proptest::prelude::*;

    fn pose(x: f64, y: f64) -> BoundPose {
        BoundPose::new(x, y, 0.0)
    }

    /// Constant-velocity straight line sampled at 0.04 s for `n` steps.
    fn line(x0: f64, y0: f64, vx: f64, vy: f64, n: usize) -> Maneuver {
        let states: Vec<RaPoint> = (0..=n)
            .map(|k| {
                let t = k as f64 * 0.04;
                RaPoint {
                    x: x0 + vx * t,
                    y: y0 + vy * t,
                    x_dot: vx,
                    y_dot: vy,
                }
            })
            .collect();
        Maneuver::from_states(&states, 0.04, ManeuverKind::Predicted)
    }

    #[test]
    fn default_bound_dimensions() {
        let b = SafetyBound::default();
        assert_eq!(b.half_length, 4.0);
        assert_eq!(b.half_width, 2.0);
        assert_eq!(b.front_margin, 1.5);
        assert_eq!(b.side_margin, 1.0);
        assert!(SafetyBound::from_vehicle(0.0, 2.0, 0.3, 0.5).is_err());
    }

    #[test]
    fn overlap_interval_cases() {
        let b = SafetyBound::default();
        assert!(bounds_overlap(&pose(3.0, 4.0), &b, &pose(3.0, 4.0), &b));
        assert!(!bounds_overlap(&pose(0.0, 5.0), &b, &pose(8.1, 5.0), &b));
        assert!(!bounds_overlap(&pose(0.0, 5.0), &b, &pose(8.0, 5.0), &b));
        assert!(bounds_overlap(&pose(0.0, 5.0), &b, &pose(7.9, 5.0), &b));
        assert!(bounds_overlap(&pose(0.0, 5.0), &b, &pose(0.0, 8.9), &b));
        assert!(!bounds_overlap(&pose(0.0, 5.0), &b, &pose(0.0, 9.1), &b));
        let sep = signed_separation(&pose(0.0, 5.0), &b, &pose(8.1, 5.0), &b);
        assert!((sep - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rotated_rectangles() {
        let b = SafetyBound::default();
        // A bound turned 90° is 4 long and 8 wide; a lateral gap of 5.9 between
        // centres overlaps (2 + 4 = 6), 6.1 does not.
        let a = pose(0.0, 0.0);
        assert!(bounds_overlap(&a, &b, &BoundPose::new(0.0, 5.9, std::f64::consts::FRAC_PI_2), &b));
        assert!(!bounds_overlap(&a, &b, &BoundPose::new(0.0, 6.1, std::f64::consts::FRAC_PI_2), &b));
    }

    #[test]
    fn parallel_paths_do_not_collide() {
        let b = SafetyBound::default();
        let r = trajectories_collide(&line(0.0, 3.0, 80.0, 0.0, 60), &line(0.0, 7.1, 80.0, 0.0, 60), &b, 0.04).unwrap();
        assert!(!r.collides);
        assert!((r.min_clearance - 0.1).abs() < 1e-9);
    }

    #[test]
    fn crossing_paths_collide_only_when_synchronised() {
        let b = SafetyBound::default();
        // One vehicle runs along y = 7, the other crosses it at right angles;
        // both reach (50, 7) at t = 2.5 s.
        let along = line(0.0, 7.0, 20.0, 0.0, 250);
        let across = line(50.0, -43.0, 0.0, 20.0, 250);
        let r = trajectories_collide(&along, &across, &b, 0.04).unwrap();
        assert!(r.collides);
        // Corner contact starts once the centres are within 6 m on both axes
        // (4 + 2): 20·(2.5 - t) < 6, so t > 2.2.
        let t = r.first_time.unwrap();
        assert!(t > 2.2 && t <= 2.24, "t = {t}");

        // Crossing 5 s later: the intersection is long clear by then.
        let late = line(50.0, -143.0, 0.0, 20.0, 250);
        let r = trajectories_collide(&along, &late, &b, 0.04).unwrap();
        assert!(!r.collides);
        assert!(r.min_clearance > 0.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let b = SafetyBound::default();
        let a = line(0.0, 3.0, 80.0, 0.0, 10);
        let states = vec![RaPoint::default(); 3];
        let other = Maneuver::from_states(&states, 0.1, ManeuverKind::Predicted);
        assert!(matches!(trajectories_collide(&a, &other, &b, 0.04), Err(Error::MismatchedGrids(..))));
    }

    #[test]
    fn braking_falls_in_behind_slower_leader() {
        let b = SafetyBound::default();
        let ego = line(0.0, 7.0, 80.0, 0.0, 75);
        let lead = line(40.0, 7.0, 60.0, 0.0, 75);
        assert!(trajectories_collide(&ego, &lead, &b, 0.04).unwrap().collides);
        let slowed = reduce_speed_to_avoid(&ego, &lead, &b, 1.6 * crate::G).unwrap();
        assert!(!slowed.infeasible);
        assert!(!trajectories_collide(&slowed, &lead, &b, 0.04).unwrap().collides);
        let last = *slowed.speed_profile.last().unwrap();
        assert!((last - 60.0).abs() < 1e-6, "settles at {last}");
        assert!(slowed.speed_profile[0] == 80.0);
    }

    #[test]
    fn nothing_ahead_leaves_profile_alone() {
        let b = SafetyBound::default();
        let ego = line(0.0, 3.0, 80.0, 0.0, 60);
        let other = line(0.0, 11.0, 60.0, 0.0, 60);
        let out = reduce_speed_to_avoid(&ego, &other, &b, 15.0).unwrap();
        assert_eq!(out.speed_profile, ego.speed_profile);
        assert!(!out.infeasible);
    }

    #[test]
    fn braking_feasibility_matches_stopping_distance() {
        // Leader at constant v2; the ego at v1 braking at `a` from t = 0 keeps
        // the bounds apart iff gap0 - 8 >= (v1 - v2)² / (2a).
        let b = SafetyBound::default();
        let (v1, v2, a) = (80.0, 40.0, 15.0);
        let need = 8.0 + (v1 - v2) * (v1 - v2) / (2.0 * a);
        let ego = line(0.0, 7.0, v1, 0.0, 75);
        let far = reduce_speed_to_avoid(&ego, &line(need + 1.0, 7.0, v2, 0.0, 75), &b, a).unwrap();
        assert!(!far.infeasible);
        let near = reduce_speed_to_avoid(&ego, &line(need - 1.0, 7.0, v2, 0.0, 75), &b, a).unwrap();
        assert!(near.infeasible);
    }

    #[test]
    fn blocked_behind_rule() {
        let b = SafetyBound::default();
        let ego = RaPoint {
            x: 0.0,
            y: 7.0,
            x_dot: 80.0,
            y_dot: 0.0,
        };
        let at = |x: f64, y: f64| RaPoint { x, y, ..ego };
        assert!(is_fully_blocked_behind(&ego, &at(-10.0, 7.0), &b));
        assert!(!is_fully_blocked_behind(&ego, &at(-10.0, 10.0), &b));
        assert!(!is_fully_blocked_behind(&ego, &at(10.0, 7.0), &b));
    }

    /// Dense point-sampling overlap oracle: does any grid point of `a` lie
    /// inside `b` (or vice versa) with bounds grown by `grow`?
    fn sampled_overlap(a: &BoundPose, b: &BoundPose, bound: &SafetyBound, grow: f64) -> bool {
        let inside = |p: (f64, f64), r: &BoundPose| {
            let (s, c) = r.heading.sin_cos();
            let (dx, dy) = (p.0 - r.x, p.1 - r.y);
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            u.abs() < bound.half_length + grow && v.abs() < bound.half_width + grow
        };
        let pts = |r: &BoundPose| -> Vec<(f64, f64)> {
            let (s, c) = r.heading.sin_cos();
            let n = 80;
            let (hl, hw) = (bound.half_length + grow, bound.half_width + grow);
            let mut out = Vec::new();
            for i in 0..=n {
                for j in 0..=n / 2 {
                    let u = -hl + 2.0 * hl * i as f64 / n as f64;
                    let v = -hw + 2.0 * hw * j as f64 / (n / 2) as f64;
                    out.push((r.x + u * c - v * s, r.y + u * s + v * c));
                }
            }
            out
        };
        pts(a).into_iter().any(|p| inside(p, b)) || pts(b).into_iter().any(|p| inside(p, a))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn sat_agrees_with_sampling(
            x in -14.0..14.0f64, y in -10.0..10.0f64,
            ha in -3.2..3.2f64, hb in -3.2..3.2f64,
        ) {
            let bound = SafetyBound::default();
            let a = BoundPose::new(0.0, 0.0, ha);
            let b = BoundPose::new(x, y, hb);
            let sat = bounds_overlap(&a, &bound, &b, &bound);
            // Grid spacing is 0.2 m; compare only outside that resolution.
            let res = 0.25;
            if sampled_overlap(&a, &b, &bound, -res) {
                prop_assert!(sat);
            }
            if !sampled_overlap(&a, &b, &bound, res) {
                prop_assert!(!sat);
            }
            prop_assert_eq!(sat, bounds_overlap(&b, &bound, &a, &bound));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn trajectory_check_is_symmetric_and_monotone(
            y1 in 1.0..13.0f64, y2 in 1.0..13.0f64,
            x2 in -40.0..60.0f64, v1 in 40.0..80.0f64, v2 in 40.0..80.0f64,
            vy in -3.0..3.0f64,
        ) {
            let b = SafetyBound::default();
            let c1 = line(0.0, y1, v1, vy, 60);
            let c2 = line(x2, y2, v2, 0.0, 60);
            let r12 = trajectories_collide(&c1, &c2, &b, 0.04).unwrap();
            let r21 = trajectories_collide(&c2, &c1, &b, 0.04).unwrap();
            prop_assert_eq!(r12.collides, r21.collides);
            if !r12.collides {
                prop_assert!(r12.min_clearance >= 0.0);
                let body = trajectories_collide(&c1, &c2, &b.body(), 0.04).unwrap();
                prop_assert!(!body.collides);
            }
        }

        #[test]
        fn reduced_speed_is_collision_free(
            gap in 10.0..120.0f64, v1 in 50.0..83.0f64, v2 in 20.0..80.0f64, dy in -3.0..3.0f64,
        ) {
            let b = SafetyBound::default();
            let ego = line(0.0, 7.0, v1, 0.0, 70);
            let lead = line(gap, 7.0 + dy, v2, 0.0, 70);
            let out = reduce_speed_to_avoid(&ego, &lead, &b, 15.0).unwrap();
            if !out.infeasible {
                prop_assert!(!trajectories_collide(&out, &lead, &b, 0.04).unwrap().collides);
            }
        }
    }
}
