//! Scenario configuration files (TOML).
//!
//! ```toml
//! name = "two-station"
//! frame_duration_ms = 5.0
//! total_frames = 12000
//! seed = 1
//! scheduler = "hedf"          # rr | wrr | edf | ssbpf_edf | hedf
//! ewma_alpha = 0.1            # (0, 1]
//! drop_on_miss = false
//!
//! [class_deadlines_ms]        # optional; these are the defaults
//! UGS = 10.0
//! ertPS = 15.0
//! rtPS = 20.0
//! nrtPS = 200.0
//! BE = 1000.0
//!
//! [[cells]]
//! id = 0
//! base_station_capacity = 1600   # bits per frame
//! station_ids = [0, 1]
//!
//! [[stations]]
//! id = 0
//! cell_id = 0
//! capacity_c = 1600              # bits per frame
//! historical_throughput = 0.0    # optional
//! wrr_weight = 2                 # optional
//!
//! [[stations.traffic]]
//! class = "rtPS"
//! pattern = "constant_rate"      # or "poisson"
//! rate_bits_per_s = 64000.0
//! packet_size_bits = 800
//! start_time_ms = 0.0
//! stop_time_ms = 60000.0         # optional, defaults to the run horizon
//! random_phase = true            # optional
//! ```
//!
//! Omitted optional keys take the defaults shown. `canonical` and
//! `starvation` name built-in scenarios.

use std::fs;
use std::path::Path;

use uplinksim_core::{canonical_scenario, starvation_scenario, Scenario};

use crate::error::CliError;

pub const BUILTINS: [&str; 2] = ["canonical", "starvation"];

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "canonical" => Some(canonical_scenario()),
        "starvation" => Some(starvation_scenario()),
        _ => None,
    }
}

pub fn parse(text: &str) -> Result<Scenario, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn to_toml(scenario: &Scenario) -> String {
    toml::to_string(scenario).expect("scenario serializes to TOML")
}

/// Loads a built-in by name, otherwise reads and parses the file at `spec`.
/// Does not validate.
pub fn load(spec: &str) -> Result<Scenario, CliError> {
    if let Some(s) = builtin(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "scenario `{spec}` is neither a built-in ({}) nor a readable file",
            BUILTINS.join(", ")
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{spec}: {e}")))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{spec}: {msg}")),
        other => other,
    })
}

/// Loads and validates, reporting every violation.
pub fn load_valid(spec: &str) -> Result<Scenario, CliError> {
    let s = load(spec)?;
    s.validate().map_err(|errs| CliError::Invalid(errs.iter().map(ToString::to_string).collect()))?;
    Ok(s)
}
