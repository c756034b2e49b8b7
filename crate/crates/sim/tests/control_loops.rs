mod common;

use racing_sim::Config;

#[test]
fn lateral_offset_on_a_straight_dies_out() {
    for v in [30.0, 60.0, 80.0] {
        let t = common::offset_settle_time(v).expect("offset never settled");
        assert!(t < 4.0, "v {v}: settled below 0.2 m only after {t:.2} s");
    }
}

#[test]
fn steady_turn_yaw_rate_matches_the_circle() {
    for (radius, v) in [(256.0, 60.0), (256.0, 75.0), (120.0, 40.0)] {
        let err = common::steady_turn_error(radius, v);
        assert!(err < 0.05, "R {radius} v {v}: relative error {err:.4}");
    }
}

#[test]
fn follower_settles_at_the_following_distance() {
    let target = Config::default().control.follow_distance;
    for start_gap in [21.0, 15.0, 9.0] {
        let gap = common::following_gap(70.0, start_gap);
        assert!((gap - target).abs() < 1.0, "start {start_gap}: gap {gap:.2} vs {target}");
    }
}
