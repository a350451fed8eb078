//! JSON documents: scenarios, configs and fitted HMMs.

use std::fs;
use std::path::Path;

use rssi_cell_core::postprocess::Hmm;
use rssi_cell_core::synth::Scenario;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

/// Reads a JSON document; parse and schema errors are config errors.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::config(path, format!("schema error: {e}")))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::Internal(format!("json encode: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_bytes(value)?).map_err(|e| Error::io(path, e))
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let scenario: Scenario = read_json(path)?;
    scenario.validate().map_err(|e| Error::config(path, format!("invalid scenario: {e}")))?;
    Ok(scenario)
}

/// Loads a saved HMM; stochasticity is checked on the way in.
pub fn load_hmm(path: &Path) -> Result<Hmm> {
    read_json(path)
}
