//! File helpers shared by the subcommands.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use slidewin::io::read_jsonl;
use slidewin::TrackerConfig;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Replaces `path` with `contents` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e| CliError::output(path, e);
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::output(path, e))
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    read_jsonl(BufReader::new(file)).map_err(|e| CliError::input(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(path, e))
}

/// Config file (or defaults) with command-line overrides applied on top.
pub fn load_config(path: Option<&Path>, overrides: &ConfigOverrides) -> CliResult<TrackerConfig> {
    let mut config = match path {
        Some(p) => TrackerConfig::from_toml_str(&read_text(p)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => TrackerConfig::default(),
    };
    if let Some(t) = overrides.window {
        config.window_length_frames = t;
    }
    if let Some(m) = overrides.max_hypotheses {
        config.max_hypotheses = m;
    }
    if overrides.exclude_coasted {
        config.emit_coasted = false;
    }
    slidewin::validate_config(config).map_err(|v| CliError::from(slidewin::Error::InvalidConfig(v)))
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigOverrides {
    /// Window length T in frames; overrides the config file.
    #[arg(long)]
    pub window: Option<usize>,
    /// Hypotheses kept per family; overrides the config file.
    #[arg(long)]
    pub max_hypotheses: Option<usize>,
    /// Do not emit coasted (prediction-only) track records.
    #[arg(long)]
    pub exclude_coasted: bool,
}
