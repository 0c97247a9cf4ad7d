//! Analysis configuration with three-level precedence: CLI flags beat the
//! per-song metadata file, which beats the built-in defaults. The resolved
//! values are echoed into every report for reproducibility.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::CsvColumns;
use crate::meter::{GridError, MeterGroupings};

pub const DEFAULT_BUFFER_FRACTION: f64 = 0.5;
pub const DEFAULT_KEYWORD_RATIO: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config file {path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Grouping(#[from] GridError),
}

/// Fully resolved analysis settings, echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisConfig {
    pub buffer_fraction: f64,
    pub keyword_ratio: f64,
    pub syllable_mismatch_tolerance: usize,
    pub exclude_rest_beats: bool,
    pub meter_groupings: Vec<String>,
    pub csv_start_column: String,
    pub csv_end_column: String,
    pub csv_label_column: String,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let columns = CsvColumns::default();
        AnalysisConfig {
            buffer_fraction: DEFAULT_BUFFER_FRACTION,
            keyword_ratio: DEFAULT_KEYWORD_RATIO,
            syllable_mismatch_tolerance: 0,
            exclude_rest_beats: false,
            meter_groupings: Vec::new(),
            csv_start_column: columns.start,
            csv_end_column: columns.end,
            csv_label_column: columns.label,
        }
    }
}

impl AnalysisConfig {
    /// Apply defaults, then the per-song overlay, then the CLI overlay.
    pub fn resolve(cli: &ConfigOverlay, song: Option<&ConfigOverlay>) -> Self {
        let mut config = AnalysisConfig::default();
        if let Some(song) = song {
            config.apply(song);
        }
        config.apply(cli);
        config
    }

    fn apply(&mut self, overlay: &ConfigOverlay) {
        if let Some(v) = overlay.buffer_fraction {
            self.buffer_fraction = v;
        }
        if let Some(v) = overlay.keyword_ratio {
            self.keyword_ratio = v;
        }
        if let Some(v) = overlay.syllable_mismatch_tolerance {
            self.syllable_mismatch_tolerance = v;
        }
        if let Some(v) = overlay.exclude_rest_beats {
            self.exclude_rest_beats = v;
        }
        if let Some(specs) = &overlay.meter_grouping {
            for spec in specs.iter() {
                if !self.meter_groupings.contains(spec) {
                    self.meter_groupings.push(spec.clone());
                }
            }
        }
        if let Some(v) = &overlay.csv_start_column {
            self.csv_start_column = v.clone();
        }
        if let Some(v) = &overlay.csv_end_column {
            self.csv_end_column = v.clone();
        }
        if let Some(v) = &overlay.csv_label_column {
            self.csv_label_column = v.clone();
        }
    }

    pub fn csv_columns(&self) -> CsvColumns {
        CsvColumns {
            start: self.csv_start_column.clone(),
            end: self.csv_end_column.clone(),
            label: self.csv_label_column.clone(),
        }
    }

    /// Parse the configured `"N/D:g1+g2+..."` grouping specs.
    pub fn groupings(&self) -> Result<MeterGroupings, ConfigError> {
        let mut groupings = MeterGroupings::new();
        for spec in &self.meter_groupings {
            groupings.add_spec(spec)?;
        }
        Ok(groupings)
    }
}

/// A partial configuration: unset fields defer to the next level down.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    pub buffer_fraction: Option<f64>,
    pub keyword_ratio: Option<f64>,
    pub syllable_mismatch_tolerance: Option<usize>,
    pub exclude_rest_beats: Option<bool>,
    pub meter_grouping: Option<OneOrMany>,
    pub csv_start_column: Option<String>,
    pub csv_end_column: Option<String>,
    pub csv_label_column: Option<String>,
}

/// Accepts `meter_grouping = "7/8:2+2+3"` as well as a list of specs.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    pub fn iter(&self) -> impl Iterator<Item = &String> {
        match self {
            OneOrMany::One(s) => std::slice::from_ref(s).iter(),
            OneOrMany::Many(v) => v.iter(),
        }
    }
}

impl From<Vec<String>> for OneOrMany {
    fn from(specs: Vec<String>) -> Self {
        OneOrMany::Many(specs)
    }
}

/// Load a per-song `<id>.toml` overlay; `Ok(None)` when the file is absent.
pub fn load_song_overlay(path: &Path) -> Result<Option<ConfigOverlay>, ConfigError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let overlay = toml::from_str(&text).map_err(|source| ConfigError::Toml {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Some(overlay))
}
