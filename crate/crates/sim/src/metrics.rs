//! Race metrics computed from a [`RaceLog`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use racing_core::track::{Segment, TrackModel};
use racing_core::G;

use crate::error::{Result, SimError};
use crate::log::{Event, EventKind, RaceLog, TickRow};

/// A pairwise order change must hold this long to count as an overtake, s.
pub const OVERTAKE_DEBOUNCE: f64 = 2.0;

/// Completed lap times per vehicle; the run-up to the first crossing and a
/// lap cut short by the end of the log are not laps.
pub fn lap_times(log: &RaceLog) -> Vec<Vec<f64>> {
    let n = log
        .events
        .iter()
        .flat_map(|e| e.vehicles.iter().map(|v| v + 1))
        .max()
        .unwrap_or(0)
        .max(log.vehicle_count());
    let mut out = vec![Vec::new(); n];
    for e in log.events.iter().filter(|e| e.kind == EventKind::Lap) {
        if let (Some(&id), Some(t)) = (e.vehicles.first(), e.data.get("lap_time").and_then(|v| v.as_f64())) {
            out[id].push(t);
        }
    }
    out
}

/// Rows grouped by control instant.
fn instants(log: &RaceLog) -> Vec<&[TickRow]> {
    log.ticks.chunk_by(|a, b| a.t == b.t).collect()
}

fn progress(r: &TickRow, length: f64) -> f64 {
    r.lap as f64 * length + r.s
}

/// `(t, leader progress − last-place progress)` at every control instant.
pub fn gap_first_to_last(log: &RaceLog, length: f64) -> Vec<(f64, f64)> {
    instants(log)
        .into_iter()
        .filter(|rows| rows.len() > 1)
        .map(|rows| {
            let (lo, hi) = rows.iter().map(|r| progress(r, length)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
            (rows[0].t, hi - lo)
        })
        .collect()
}

/// Debounced changes of running order between every pair of vehicles.
///
/// An event is stamped at the first instant of the new order and names the
/// passing vehicle first.
pub fn overtakes(log: &RaceLog, length: f64) -> Vec<Event> {
    let n = log.vehicle_count();
    if n < 2 {
        return Vec::new();
    }
    let series: Vec<(f64, Vec<f64>)> = instants(log)
        .into_iter()
        .filter(|rows| rows.len() == n)
        .map(|rows| {
            let mut p = vec![0.0; n];
            for r in rows {
                p[r.vehicle_id] = progress(r, length);
            }
            (rows[0].t, p)
        })
        .collect();

    let mut events = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            // Confirmed sign of p_a − p_b and a pending change (start time, gap).
            let mut confirmed = 0.0f64;
            let mut pending: Option<(f64, f64)> = None;
            for (t, p) in &series {
                let d = p[a] - p[b];
                if d == 0.0 {
                    continue;
                }
                let sign = d.signum();
                if confirmed == 0.0 {
                    confirmed = sign;
                    continue;
                }
                if sign == confirmed {
                    pending = None;
                    continue;
                }
                let (start, gap) = *pending.get_or_insert((*t, d));
                if t - start >= OVERTAKE_DEBOUNCE - 1e-9 {
                    let (passer, passed) = if sign > 0.0 { (a, b) } else { (b, a) };
                    events.push(Event::new(
                        start,
                        EventKind::Overtake,
                        vec![passer, passed],
                        json!({"progress_gap": gap.abs()}),
                    ));
                    confirmed = sign;
                    pending = None;
                }
            }
        }
    }
    events.sort_by(|x, y| x.t.total_cmp(&y.t));
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SafetyReport {
    pub body_collisions: usize,
    pub safety_bound_overlaps: usize,
    pub boundary_violations: usize,
    pub lateral_saturations: usize,
}

pub fn safety_report(log: &RaceLog) -> SafetyReport {
    let mut r = SafetyReport::default();
    for e in &log.events {
        match e.kind {
            EventKind::Collision => match e.collision_kind() {
                Some("safety_bound") => r.safety_bound_overlaps += 1,
                _ => r.body_collisions += 1,
            },
            EventKind::Boundary => r.boundary_violations += 1,
            EventKind::LatSat => r.lateral_saturations += 1,
            EventKind::Overtake | EventKind::Lap => {}
        }
    }
    r
}

/// Speeds and cornering load over completed laps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedRegime {
    /// Highest speed on a straight, m/s.
    pub straight_top: f64,
    /// Lowest speed in a turn, m/s.
    pub corner_min: f64,
    /// Mean speed over completed laps, m/s.
    pub mean_speed: f64,
    /// Largest `|v·ω|`, in g.
    pub peak_lateral_g: f64,
}

/// Speed regime of one vehicle, from its first start/finish crossing on.
pub fn speed_regime(log: &RaceLog, track: &TrackModel, vehicle: usize) -> Option<SpeedRegime> {
    let spans: Vec<(f64, f64, bool)> = track
        .segment_spans()
        .map(|(a, b, seg)| (a, b, matches!(seg, Segment::Arc { .. })))
        .collect();
    let in_turn = |s: f64| spans.iter().any(|&(a, b, arc)| arc && s >= a && s < b);
    let rows: Vec<&TickRow> = log.ticks.iter().filter(|r| r.vehicle_id == vehicle && r.lap >= 1).collect();
    if rows.is_empty() {
        return None;
    }
    let mut straight_top = 0.0f64;
    let mut corner_min = f64::INFINITY;
    let mut peak = 0.0f64;
    let mut sum = 0.0;
    for r in &rows {
        if in_turn(r.s) {
            corner_min = corner_min.min(r.v);
        } else {
            straight_top = straight_top.max(r.v);
        }
        peak = peak.max((r.v * r.omega).abs());
        sum += r.v;
    }
    Some(SpeedRegime {
        straight_top,
        corner_min,
        mean_speed: sum / rows.len() as f64,
        peak_lateral_g: peak / G,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub vehicles: usize,
    pub lap_times: Vec<Vec<f64>>,
    pub mean_lap_times: Vec<Option<f64>>,
    /// Slowest over fastest per-vehicle mean lap time, minus one.
    pub lap_time_spread: Option<f64>,
    pub mean_gap: Option<f64>,
    pub max_gap: Option<f64>,
    /// Gap statistics while the leader runs its final five laps.
    pub final_mean_gap: Option<f64>,
    pub final_max_gap: Option<f64>,
    pub overtakes: usize,
    pub passes_made: Vec<usize>,
    pub passes_suffered: Vec<usize>,
    pub safety: SafetyReport,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Time at which the leading vehicle completed its last logged lap, and the
/// time its final five laps began.
fn leader_window(log: &RaceLog) -> Option<(f64, f64)> {
    let mut per: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for e in log.events.iter().filter(|e| e.kind == EventKind::Lap) {
        if let Some(&id) = e.vehicles.first() {
            per.entry(id).or_default().push(e.t);
        }
    }
    // The leader is whoever got to the most crossings first.
    let (_, crossings) = per.into_iter().max_by(|a, b| {
        a.1.len()
            .cmp(&b.1.len())
            .then_with(|| b.1.last().unwrap_or(&0.0).total_cmp(a.1.last().unwrap_or(&0.0)))
    })?;
    let end = *crossings.last()?;
    let start = crossings[crossings.len().saturating_sub(6)];
    Some((start, end))
}

pub fn summarize(log: &RaceLog, length: f64) -> Summary {
    let laps = lap_times(log);
    let n = laps.len().max(log.vehicle_count());
    let means: Vec<Option<f64>> = laps.iter().map(|l| mean(l.iter().copied())).collect();
    let known: Vec<f64> = means.iter().flatten().copied().collect();
    let spread = if known.len() == n && n > 0 {
        let lo = known.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = known.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(hi / lo - 1.0)
    } else {
        None
    };

    let window = leader_window(log);
    let gaps: Vec<(f64, f64)> = gap_first_to_last(log, length)
        .into_iter()
        .filter(|(t, _)| window.map_or(true, |(_, end)| *t <= end))
        .collect();
    let finals: Vec<f64> = match window {
        Some((start, end)) => gaps.iter().filter(|(t, _)| *t >= start && *t <= end).map(|g| g.1).collect(),
        None => Vec::new(),
    };

    let passes: Vec<&Event> = log.events.iter().filter(|e| e.kind == EventKind::Overtake).collect();
    let mut made = vec![0; n];
    let mut suffered = vec![0; n];
    for e in &passes {
        if let [a, b] = e.vehicles[..] {
            made[a] += 1;
            suffered[b] += 1;
        }
    }
    Summary {
        vehicles: n,
        mean_lap_times: means,
        lap_time_spread: spread,
        lap_times: laps,
        mean_gap: mean(gaps.iter().map(|g| g.1)),
        max_gap: gaps.iter().map(|g| g.1).reduce(f64::max),
        final_mean_gap: mean(finals.iter().copied()),
        final_max_gap: finals.iter().copied().reduce(f64::max),
        overtakes: passes.len(),
        passes_made: made,
        passes_suffered: suffered,
        safety: safety_report(log),
    }
}

fn histogram(values: impl IntoIterator<Item = f64>, width: f64) -> String {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for v in values {
        *bins.entry((v / width).floor() as i64).or_default() += 1;
    }
    let mut out = String::from("bin_start,bin_end,count\n");
    for (b, c) in bins {
        let lo = b as f64 * width;
        writeln!(out, "{:.3},{:.3},{}", lo, lo + width, c).expect("writing to a String");
    }
    out
}

pub const SUMMARY_FILE: &str = "metrics.json";

/// Writes the summary JSON and the per-figure CSVs into `dir`.
pub fn write_outputs(dir: &Path, log: &RaceLog, length: f64, summary: &Summary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| SimError::io(&p, e))
    };
    let mut json = serde_json::to_string_pretty(summary).expect("summary serialises");
    json.push('\n');
    write(SUMMARY_FILE, json)?;
    write("lap_time_histogram.csv", histogram(summary.lap_times.iter().flatten().copied(), 0.5))?;
    let gaps = gap_first_to_last(log, length);
    write("gap_distribution.csv", histogram(gaps.iter().map(|g| g.1), 10.0))?;
    let mut series = String::from("t,gap\n");
    for (t, g) in &gaps {
        writeln!(series, "{t:.2},{g:.3}").expect("writing to a String");
    }
    write("gap_vs_time.csv", series)?;
    let mut prog = String::from("t,vehicle_id,progress\n");
    for r in &log.ticks {
        writeln!(prog, "{:.2},{},{:.3}", r.t, r.vehicle_id, progress(r, length)).expect("writing to a String");
    }
    write("progress.csv", prog)?;
    Ok(())
}
