//! File helpers and per-cell random streams.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{BenchError, Result};

/// Generator for one experiment cell. `seed` selects the key and `stream` the
/// independent ChaCha stream under that key, so cells never share draws.
pub fn cell_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output documents always serialise");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| BenchError::Json { path: path.to_path_buf(), source })
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let file = fs::File::create(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
    Ok(csv::Writer::from_writer(file))
}

pub fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

pub fn create_file(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::File::create(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}
