//! TOML and JSON config files.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::sim::SimConfig;

use super::SweepSpec;

/// Parses by extension: `.json` as JSON, anything else as TOML.
pub fn parse_config<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

pub fn load_sim_config(path: &Path) -> Result<SimConfig> {
    let cfg: SimConfig = parse_config(&std::fs::read_to_string(path)?, path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sweep_spec(path: &Path) -> Result<SweepSpec> {
    let spec: SweepSpec = parse_config(&std::fs::read_to_string(path)?, path)?;
    spec.validate()?;
    Ok(spec)
}
