//! TOML configuration files.
//!
//! A cell file holds top-level cell fields plus `[[bwp]]`, `[[coreset]]`,
//! `[[search_space]]` and `[[tci_state]]` tables and a `[dci_sizes]` table.
//! A scenario file nests the cell under `[cell]` and adds `[[ue]]` and
//! `[[traffic]]` tables.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::CellConfig;
use crate::sim::Scenario;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_cell(text: &str) -> Result<CellConfig, ConfigError> {
    Ok(toml::from_str(text)?)
}

pub fn load_cell(path: impl AsRef<Path>) -> Result<CellConfig, ConfigError> {
    parse_cell(&read(path.as_ref())?)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    Ok(toml::from_str(text)?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    parse_scenario(&read(path.as_ref())?)
}
