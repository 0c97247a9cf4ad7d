//! Report serialization: one JSON document per song, plus the dataset-level
//! `songs.csv` and `histogram.csv` for external plotting.
//!
//! CSV output is byte-deterministic: rows sort by song id and floats use a
//! fixed six-decimal format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::AnalysisConfig;
use crate::metrics::{DatasetSummary, MatchStats};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-pattern 0/1 sequences included in the song report.
#[derive(Debug, Clone, Serialize)]
pub struct PatternDump {
    pub sp: Vec<u8>,
    pub psp: Vec<u8>,
    pub wpsp: Vec<u8>,
    pub kp: Vec<u8>,
    pub sssp: Vec<u8>,
    pub stress: Vec<u8>,
}

/// Everything recorded about one analyzed song.
#[derive(Debug, Clone, Serialize)]
pub struct SongReport {
    pub song_id: String,
    pub config: AnalysisConfig,
    pub tokens: Vec<String>,
    pub located_beats: Vec<usize>,
    pub interpolated: Vec<bool>,
    pub patterns: PatternDump,
    pub stats: MatchStats,
    pub warnings: Vec<String>,
}

impl SongReport {
    /// Compact flag string for the dataset CSV, e.g. `interp=2;delta=+1`.
    pub fn flags(&self) -> String {
        let mut flags = Vec::new();
        let interpolated = self.interpolated.iter().filter(|&&f| f).count();
        if interpolated > 0 {
            flags.push(format!("interp={interpolated}"));
        }
        for warning in &self.warnings {
            if let Some(delta) = warning.strip_prefix("syllable mismatch delta ") {
                flags.push(format!("delta={delta}"));
            }
        }
        if self.stats.cos_wpsp_kp.is_none() {
            flags.push("no_kp_cosine".into());
        }
        if self.stats.cos_psp_stress.is_none() {
            flags.push("no_stress_cosine".into());
        }
        flags.join(";")
    }
}

/// A song that could not be analyzed, kept in the batch summary.
#[derive(Debug, Clone, Serialize)]
pub struct SongFailure {
    pub song_id: String,
    pub stage: String,
    pub message: String,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `<out_dir>/<song_id>.report.json`.
pub fn write_song_report(out_dir: &Path, report: &SongReport) -> Result<PathBuf, ReportError> {
    let path = out_dir.join(format!("{}.report.json", report.song_id));
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_file(&path, &json)?;
    Ok(path)
}

fn format_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Write the dataset-level `songs.csv`, sorted by song id.
pub fn write_dataset_csv(out_dir: &Path, reports: &[SongReport]) -> Result<PathBuf, ReportError> {
    let mut rows: Vec<&SongReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.song_id.cmp(&b.song_id));

    let mut out = String::new();
    out.push_str(
        "song_id,p_kw_sb,p_stress_sb,cos_wpsp_kp,cos_psp_stress,n_beats,n_strong,n_words,n_pronunables,flags\n",
    );
    for report in rows {
        let s = &report.stats;
        out.push_str(&format!(
            "{},{:.6},{:.6},{},{},{},{},{},{},{}\n",
            report.song_id,
            s.p_keyword_given_strong,
            s.p_stress_given_strong,
            format_opt(s.cos_wpsp_kp),
            format_opt(s.cos_psp_stress),
            s.counts.total_beats,
            s.counts.strong_beats,
            s.counts.words,
            s.counts.pronunables,
            report.flags(),
        ));
    }
    let path = out_dir.join("songs.csv");
    write_file(&path, out.as_bytes())?;
    Ok(path)
}

/// Write `histogram.csv` with one row per probability bin.
pub fn write_histogram_csv(
    out_dir: &Path,
    summary: &DatasetSummary,
) -> Result<PathBuf, ReportError> {
    let mut out = String::new();
    out.push_str("bin_lo,bin_hi,count_kw,count_stress\n");
    for bin in &summary.histogram.bins {
        out.push_str(&format!(
            "{:.2},{:.2},{},{}\n",
            bin.lo, bin.hi, bin.count_keyword, bin.count_stress
        ));
    }
    let path = out_dir.join("histogram.csv");
    write_file(&path, out.as_bytes())?;
    Ok(path)
}

/// The dataset summary plus per-song failures, written as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary<'a> {
    pub summary: &'a DatasetSummary,
    pub failures: &'a [SongFailure],
}

pub fn write_batch_summary(
    out_dir: &Path,
    summary: &DatasetSummary,
    failures: &[SongFailure],
) -> Result<PathBuf, ReportError> {
    let path = out_dir.join("summary.json");
    let mut json = serde_json::to_vec_pretty(&BatchSummary { summary, failures })?;
    json.push(b'\n');
    write_file(&path, &json)?;
    Ok(path)
}

/// Render a short human-readable digest of per-song stats for the console.
pub fn console_line(song_id: &str, stats: &MatchStats) -> String {
    format!(
        "{song_id}: p_kw|sb={:.3} p_stress|sb={:.3} cos(wpsp,kp)={} cos(psp,stress)={} beats={} strong={}",
        stats.p_keyword_given_strong,
        stats.p_stress_given_strong,
        format_opt(stats.cos_wpsp_kp),
        format_opt(stats.cos_psp_stress),
        stats.counts.total_beats,
        stats.counts.strong_beats,
    )
}
