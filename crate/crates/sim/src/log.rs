//! Race log formats.
//!
//! `ticks.csv` holds one row per vehicle per control cycle:
//!
//! | column        | meaning                                               |
//! |---------------|-------------------------------------------------------|
//! | `t`           | simulation time, s                                    |
//! | `vehicle_id`  | index on the starting grid, 0 = pole                  |
//! | `x`, `y`      | world position of the vehicle centre, m               |
//! | `heading`     | world heading, rad                                    |
//! | `v`           | speed, m/s                                            |
//! | `omega`       | yaw rate, rad/s                                       |
//! | `s`           | station along the track (left boundary), m            |
//! | `lap`         | start/finish crossings so far                         |
//! | `u`           | throttle (+) / brake (−) command held until next row  |
//! | `steer`       | normalised steering command held until next row       |
//! | `slip_factor` | drag multiplier from drafting, 1 = clean air          |
//!
//! `events.jsonl` holds one JSON object per line with `t`, `type`,
//! `vehicles` and a type-specific `data` object:
//!
//! | type        | vehicles            | data                                  |
//! |-------------|---------------------|---------------------------------------|
//! | `lap`       | `[id]`              | `lap` crossing count, `lap_time` (s, null on the first crossing) |
//! | `collision` | `[a, b]`            | `kind`: `body` or `safety_bound`, `distance` between centres |
//! | `boundary`  | `[id]`              | `lateral` offset of the centre, m     |
//! | `lat_sat`   | `[id]`              | `v`, requested `omega`                |
//! | `overtake`  | `[passer, passed]`  | `progress_gap` at detection, m        |
//!
//! Events are logged when a condition starts, not for every tick it lasts.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const TICKS_FILE: &str = "ticks.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const TICK_HEADER: &str = "t,vehicle_id,x,y,heading,v,omega,s,lap,u,steer,slip_factor";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRow {
    pub t: f64,
    pub vehicle_id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub omega: f64,
    pub s: f64,
    pub lap: i64,
    pub u: f64,
    pub steer: f64,
    pub slip_factor: f64,
}

fn round_to(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    let r = (x * scale).round() / scale;
    // Avoid printing "-0.000".
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl TickRow {
    /// Rounds every field to the precision it is written with, so a row read
    /// back from disk equals the row in memory.
    pub fn quantized(self) -> Self {
        TickRow {
            t: round_to(self.t, 2),
            x: round_to(self.x, 3),
            y: round_to(self.y, 3),
            heading: round_to(self.heading, 6),
            v: round_to(self.v, 4),
            omega: round_to(self.omega, 6),
            s: round_to(self.s, 3),
            u: round_to(self.u, 4),
            steer: round_to(self.steer, 4),
            slip_factor: round_to(self.slip_factor, 4),
            ..self
        }
    }

    pub fn write_csv(&self, out: &mut String) {
        writeln!(
            out,
            "{:.2},{},{:.3},{:.3},{:.6},{:.4},{:.6},{:.3},{},{:.4},{:.4},{:.4}",
            self.t,
            self.vehicle_id,
            self.x,
            self.y,
            self.heading,
            self.v,
            self.omega,
            self.s,
            self.lap,
            self.u,
            self.steer,
            self.slip_factor
        )
        .expect("writing to a String");
    }

    pub fn parse_csv(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(format!("expected 12 fields, got {}", f.len()));
        }
        let num = |i: usize| -> std::result::Result<f64, String> {
            let v: f64 = f[i]
                .parse()
                .map_err(|_| format!("column {} is not a number: {:?}", i + 1, f[i]))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("column {} is not finite", i + 1))
            }
        };
        Ok(TickRow {
            t: num(0)?,
            vehicle_id: f[1].parse().map_err(|_| format!("bad vehicle id {:?}", f[1]))?,
            x: num(2)?,
            y: num(3)?,
            heading: num(4)?,
            v: num(5)?,
            omega: num(6)?,
            s: num(7)?,
            lap: f[8].parse().map_err(|_| format!("bad lap count {:?}", f[8]))?,
            u: num(9)?,
            steer: num(10)?,
            slip_factor: num(11)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Collision,
    Boundary,
    LatSat,
    Overtake,
    Lap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub vehicles: Vec<usize>,
    pub data: serde_json::Value,
}

impl Event {
    pub fn new(t: f64, kind: EventKind, vehicles: Vec<usize>, data: serde_json::Value) -> Self {
        Event {
            t: round_to(t, 6),
            kind,
            vehicles,
            data,
        }
    }

    /// `data.kind` of a collision event.
    pub fn collision_kind(&self) -> Option<&str> {
        self.data.get("kind").and_then(|k| k.as_str())
    }
}

/// Tick rows and events of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RaceLog {
    pub ticks: Vec<TickRow>,
    pub events: Vec<Event>,
}

impl RaceLog {
    pub fn vehicle_count(&self) -> usize {
        self.ticks.iter().map(|r| r.vehicle_id + 1).max().unwrap_or(0)
    }

    pub fn ticks_csv(&self) -> String {
        let mut out = String::with_capacity(100 * (self.ticks.len() + 1));
        out.push_str(TICK_HEADER);
        out.push('\n');
        for r in &self.ticks {
            r.write_csv(&mut out);
        }
        out
    }

    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialise"));
            out.push('\n');
        }
        out
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        let ticks = dir.join(TICKS_FILE);
        std::fs::write(&ticks, self.ticks_csv()).map_err(|e| SimError::io(&ticks, e))?;
        let events = dir.join(EVENTS_FILE);
        std::fs::write(&events, self.events_jsonl()).map_err(|e| SimError::io(&events, e))?;
        Ok(())
    }

    pub fn parse(ticks_csv: &str, events_jsonl: &str, dir: &Path) -> Result<Self> {
        let ticks_path = dir.join(TICKS_FILE);
        let events_path = dir.join(EVENTS_FILE);
        let mut lines = ticks_csv.lines();
        match lines.next() {
            Some(h) if h.trim_end() == TICK_HEADER => {}
            _ => {
                return Err(SimError::Log {
                    path: ticks_path,
                    line: 1,
                    msg: format!("expected header `{TICK_HEADER}`"),
                })
            }
        }
        let mut ticks = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = TickRow::parse_csv(line.trim_end()).map_err(|msg| SimError::Log {
                path: ticks_path.clone(),
                line: i + 2,
                msg,
            })?;
            ticks.push(row);
        }
        let mut events = Vec::new();
        for (i, line) in events_jsonl.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Event = serde_json::from_str(line).map_err(|err| SimError::Log {
                path: events_path.clone(),
                line: i + 1,
                msg: err.to_string(),
            })?;
            events.push(e);
        }
        Ok(RaceLog { ticks, events })
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| SimError::io(&p, e))
        };
        let ticks = read(TICKS_FILE)?;
        let events = read(EVENTS_FILE)?;
        Self::parse(&ticks, &events, dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn row(t: f64, id: usize) -> TickRow {
        TickRow {
            t,
            vehicle_id: id,
            x: 1.23456789,
            y: -0.00001,
            heading: 3.14159265,
            v: 80.123456,
            omega: 0.0123456789,
            s: 4000.0005,
            lap: 3,
            u: -0.5,
            steer: 0.12345,
            slip_factor: 0.875,
        }
        .quantized()
    }

    #[test]
    fn rows_survive_the_file_format() {
        let log = RaceLog {
            ticks: vec![row(0.04, 0), row(0.04, 1), row(12.0 / 3.0, 0)],
            events: vec![
                Event::new(1.0 / 3.0, EventKind::Lap, vec![0], json!({"lap": 1, "lap_time": null})),
                Event::new(2.0, EventKind::Collision, vec![0, 1], json!({"kind": "body", "distance": 3.2})),
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        log.write_dir(dir.path()).unwrap();
        let back = RaceLog::read_dir(dir.path()).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.ticks_csv(), log.ticks_csv());
        assert!(!log.ticks_csv().contains("-0.000"));
        assert_eq!(back.events[1].collision_kind(), Some("body"));
        assert_eq!(log.vehicle_count(), 2);
    }

    #[test]
    fn event_line_shape() {
        let e = Event::new(0.5, EventKind::LatSat, vec![2], json!({"v": 80.0}));
        let line = serde_json::to_string(&e).unwrap();
        assert_eq!(line, r#"{"t":0.5,"type":"lat_sat","vehicles":[2],"data":{"v":80.0}}"#);
    }

    #[test]
    fn damaged_rows_are_reported_by_line() {
        let mut csv = format!("{TICK_HEADER}\n");
        row(0.0, 0).write_csv(&mut csv);
        csv.push_str("0.04,0,1.0,2.0,oops,1,1,1,1,1,1,1\n");
        let err = RaceLog::parse(&csv, "", Path::new("d")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ticks.csv:3"), "{msg}");
        assert!(msg.contains("column 5"), "{msg}");
        assert!(RaceLog::parse("t,x\n", "", Path::new("d")).is_err());
        let err = RaceLog::parse(TICK_HEADER, "{\"t\":1}\n", Path::new("d")).unwrap_err();
        assert!(err.to_string().contains("events.jsonl:1"));
    }

    proptest::proptest! {
        #[test]
        fn any_quantized_row_reads_back_unchanged(
            t in 0.0..2000.0f64, id in 0usize..12, x in -2000.0..2000.0f64, y in -2000.0..2000.0f64,
            heading in -50.0..50.0f64, v in 0.0..95.0f64, omega in -1.0..1.0f64, s in 0.0..4100.0f64,
            lap in -1i64..40, u in -1.0..1.0f64, steer in -1.0..1.0f64, slip in 0.75..1.0f64,
        ) {
            let r = TickRow { t, vehicle_id: id, x, y, heading, v, omega, s, lap, u, steer, slip_factor: slip }.quantized();
            let mut line = String::new();
            r.write_csv(&mut line);
            let back = TickRow::parse_csv(line.trim_end()).unwrap();
            proptest::prop_assert_eq!(back, r);
        }
    }
}
