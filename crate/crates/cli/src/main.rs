//! `racesim`: solo laps, races, race-line generation and metrics from logs.
//!
//! Exit status is 0 on success, 1 when a run fails, 2 for usage or
//! configuration errors.

mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use racing_core::raceline::{generate_raceline, RaceLine};
use racing_core::track::{TrackConfig, TrackModel};
use racing_sim::log::RaceLog;
use racing_sim::metrics::{self, Summary};
use racing_sim::race::{RaceOptions, Scenario};
use racing_sim::{Config, SimError};

use manifest::{Manifest, Setup, MANIFEST_FILE};

#[derive(Parser)]
#[command(name = "racesim", version, about = "Multi-vehicle oval racing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One car from a rolling start.
    Solo {
        #[command(flatten)]
        setup: SetupArgs,
        /// Timed laps [default: 1].
        #[arg(long)]
        laps: Option<usize>,
        /// Directory for logs, metrics and the manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Several identical cars from a staggered rolling start.
    Race {
        #[command(flatten)]
        setup: SetupArgs,
        /// Number of cars [default: 6].
        #[arg(long)]
        vehicles: Option<usize>,
        /// Timed laps [default: 10].
        #[arg(long)]
        laps: Option<usize>,
        /// Seed for the grid placement jitter [default: 1].
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the race line and write it as CSV.
    Raceline {
        #[command(flatten)]
        layers: ConfigArgs,
        #[arg(long)]
        track: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics from the logs in a run directory.
    Metrics {
        /// Directory holding ticks.csv and events.jsonl.
        dir: PathBuf,
        /// Where to write metric files [default: DIR].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Track the logs were recorded on; otherwise taken from the run's
        /// manifest, or the built-in oval.
        #[arg(long)]
        track: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// File of `key = value` lines layered over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// A single `key=value` override, applied after the file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SetupArgs {
    #[command(flatten)]
    layers: ConfigArgs,
    /// Track description; the built-in IMS-like oval when omitted.
    #[arg(long)]
    track: Option<PathBuf>,
    /// Race line CSV; generated from the configuration when omitted.
    #[arg(long)]
    raceline: Option<PathBuf>,
    /// Repeat the run recorded in a manifest. Counts given on the command
    /// line still take precedence.
    #[arg(long, conflicts_with_all = ["config", "overrides", "track", "raceline"])]
    manifest: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Run(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Run(m) => f.write_str(m),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

impl From<racing_core::Error> for Failure {
    fn from(e: racing_core::Error) -> Self {
        SimError::from(e).into()
    }
}

type Outcome<T> = Result<T, Failure>;

fn read_input(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_config(args: &ConfigArgs) -> Outcome<Config> {
    let mut cfg = Config::default();
    if let Some(path) = &args.config {
        cfg.apply_text(&read_input(path)?, &path.display().to_string())?;
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn load_track(path: Option<&Path>) -> Outcome<TrackConfig> {
    match path {
        Some(p) => Ok(TrackConfig::parse(&read_input(p)?, p)?),
        None => Ok(TrackConfig::ims_like()),
    }
}

/// Resolved setup plus the manifest it came from, if any.
fn resolve(args: &SetupArgs) -> Outcome<(Setup, Option<Manifest>)> {
    if let Some(path) = &args.manifest {
        let m = Manifest::parse(&read_input(path)?, path).map_err(Failure::Usage)?;
        let setup = m.setup(path).map_err(Failure::Usage)?;
        return Ok((setup, Some(m)));
    }
    let config = load_config(&args.layers)?;
    let track = load_track(args.track.as_deref())?;
    let raceline = match &args.raceline {
        Some(p) => Some(RaceLine::parse_csv(&read_input(p)?, p)?),
        None => None,
    };
    Ok((Setup { config, track, raceline }, None))
}

fn write_file(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

/// Runs the race, writes every output into `out` and returns the summary.
fn run_and_record(command: &str, setup: Setup, opts: RaceOptions, out: &Path) -> Outcome<Summary> {
    if opts.laps == 0 {
        return Err(Failure::Usage("--laps must be at least 1".into()));
    }
    let manifest = Manifest::new(command, opts.vehicles, opts.laps, opts.seed, &setup);
    let scenario = Scenario::new(&setup.track, setup.raceline, &setup.config)?;
    let result = scenario.run(&setup.config, &opts)?;
    result.log.write_dir(out)?;
    write_file(&out.join(MANIFEST_FILE), &manifest.to_json())?;
    let length = scenario.track.total_length();
    let summary = metrics::summarize(&result.log, length);
    metrics::write_outputs(out, &result.log, length, &summary)?;

    let failures: usize = result.plan_failures.iter().sum();
    if failures > 0 {
        eprintln!("warning: {failures} planning cycles fell back to the race line");
    }
    if !result.finished {
        return Err(Failure::Run(format!(
            "time cap reached at t = {:.1} s before every car finished; logs are in {}",
            result.sim_time,
            out.display()
        )));
    }
    Ok(summary)
}

fn print_laps(summary: &Summary) {
    for (id, laps) in summary.lap_times.iter().enumerate() {
        let times: Vec<String> = laps.iter().map(|t| format!("{t:.2}")).collect();
        let mean = summary.mean_lap_times[id].map_or("-".into(), |m| format!("{m:.3}"));
        println!("car {id}: mean {mean} s  laps [{}]", times.join(", "));
    }
}

fn print_race(summary: &Summary) {
    print_laps(summary);
    let opt = |x: Option<f64>, scale: f64| x.map_or("-".into(), |v| format!("{:.2}", v * scale));
    println!("lap time spread: {} %", opt(summary.lap_time_spread, 100.0));
    println!(
        "first-to-last gap: mean {} m, max {} m; final five laps mean {} m, max {} m",
        opt(summary.mean_gap, 1.0),
        opt(summary.max_gap, 1.0),
        opt(summary.final_mean_gap, 1.0),
        opt(summary.final_max_gap, 1.0)
    );
    println!("overtakes: {}", summary.overtakes);
    let s = &summary.safety;
    println!(
        "safety: {} body collisions, {} safety-bound overlaps, {} boundary violations, {} lateral saturations",
        s.body_collisions, s.safety_bound_overlaps, s.boundary_violations, s.lateral_saturations
    );
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Solo { setup, laps, out } => {
            let (setup_v, m) = resolve(&setup)?;
            let opts = RaceOptions {
                vehicles: 1,
                laps: laps.or(m.as_ref().map(|m| m.laps)).unwrap_or(1),
                seed: m.as_ref().map_or(0, |m| m.seed),
            };
            let summary = run_and_record("solo", setup_v, opts, &out)?;
            print_laps(&summary);
        }
        Command::Race {
            setup,
            vehicles,
            laps,
            seed,
            out,
        } => {
            let (setup_v, m) = resolve(&setup)?;
            let opts = RaceOptions {
                vehicles: vehicles.or(m.as_ref().map(|m| m.vehicles)).unwrap_or(6),
                laps: laps.or(m.as_ref().map(|m| m.laps)).unwrap_or(10),
                seed: seed.or(m.as_ref().map(|m| m.seed)).unwrap_or(1),
            };
            if opts.vehicles < 2 {
                return Err(Failure::Usage("--vehicles must be at least 2; use `solo` for one car".into()));
            }
            let summary = run_and_record("race", setup_v, opts, &out)?;
            print_race(&summary);
        }
        Command::Raceline { layers, track, out } => {
            let cfg = load_config(&layers)?;
            let track_cfg = load_track(track.as_deref())?;
            let model = TrackModel::build(&track_cfg)?;
            let line = generate_raceline(&model, &cfg.raceline_params(), &cfg.vehicle)?;
            write_file(&out, &line.to_csv())?;
            println!("{} samples written to {}", line.samples.len(), out.display());
        }
        Command::Metrics { dir, out, track } => {
            let log = RaceLog::read_dir(&dir).map_err(|e| Failure::Usage(e.to_string()))?;
            if log.ticks.is_empty() {
                return Err(Failure::Usage(format!("{}: no tick rows", dir.display())));
            }
            let track_cfg = match track {
                Some(p) => load_track(Some(&p))?,
                None => {
                    let mpath = dir.join(MANIFEST_FILE);
                    if mpath.exists() {
                        let m = Manifest::parse(&read_input(&mpath)?, &mpath).map_err(Failure::Usage)?;
                        m.setup(&mpath).map_err(Failure::Usage)?.track
                    } else {
                        TrackConfig::ims_like()
                    }
                }
            };
            let length = TrackModel::build(&track_cfg)?.total_length();
            let summary = metrics::summarize(&log, length);
            let out = out.unwrap_or(dir);
            std::fs::create_dir_all(&out).map_err(|e| Failure::Run(format!("{}: {e}", out.display())))?;
            metrics::write_outputs(&out, &log, length, &summary)?;
            print_race(&summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
