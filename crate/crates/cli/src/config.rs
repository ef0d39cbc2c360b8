use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cellbench::eatm::SweepSpec;
use cellbench::io::DatasetLayout;
use cellbench::synthgen::ColonyParams;
use cellbench::trackers::TrackerConfig;
use cellbench::transform::ExperimentSpec;
use cellbench::Weights;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Values read from `--config`. Every section is optional; flags override
/// whatever is set here, and built-in defaults fill the rest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub colony: Option<ColonyParams>,
    pub experiment: Option<ExperimentSpec>,
    pub tracker: Option<TrackerConfig>,
    pub weights: Option<Weights>,
    pub sweep: Option<SweepSpec>,
    pub layout: Option<DatasetLayout>,
    pub smoothing: Option<f64>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Invalid)?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid JSON in {}", path.display()))
        .map_err(Failure::Invalid)
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, Failure> {
    path.map_or(Ok(FileConfig::default()), read_json)
}

pub fn existing_dir(path: Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    let p =
        path.ok_or_else(|| Failure::invalid(format!("no {what} given (flag or TOIAM_DATA_DIR)")))?;
    if !p.is_dir() {
        return Err(Failure::invalid(format!(
            "{what} {} is not a directory",
            p.display()
        )));
    }
    Ok(p)
}

pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}
