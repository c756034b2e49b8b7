//! Run manifest: everything needed to repeat a run bit for bit.

use std::path::Path;

use racing_core::raceline::RaceLine;
use racing_core::track::TrackConfig;
use racing_sim::Config;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: String,
    pub vehicles: usize,
    pub laps: usize,
    pub seed: u64,
    /// Effective configuration in the `key = value` file format.
    pub config: String,
    /// Track description in the track file format.
    pub track: String,
    /// Race line CSV when one was supplied; otherwise it is regenerated from
    /// `config` and `track`.
    pub raceline: Option<String>,
}

/// A fully resolved run setup.
pub struct Setup {
    pub config: Config,
    pub track: TrackConfig,
    pub raceline: Option<RaceLine>,
}

impl Manifest {
    pub fn new(command: &str, vehicles: usize, laps: usize, seed: u64, setup: &Setup) -> Self {
        Manifest {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            vehicles,
            laps,
            seed,
            config: setup.config.to_text(),
            track: setup.track.to_text(),
            raceline: setup.raceline.as_ref().map(RaceLine::to_csv),
        }
    }

    /// Rebuilds the setup; `origin` names the manifest in diagnostics.
    pub fn setup(&self, origin: &Path) -> Result<Setup, String> {
        let mut config = Config::default();
        config
            .apply_text(&self.config, &origin.display().to_string())
            .map_err(|e| e.to_string())?;
        let track = TrackConfig::parse(&self.track, origin).map_err(|e| e.to_string())?;
        let raceline = match &self.raceline {
            Some(csv) => Some(RaceLine::parse_csv(csv, origin).map_err(|e| e.to_string())?),
            None => None,
        };
        Ok(Setup { config, track, raceline })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("{}: {e}", origin.display()))
    }
}
