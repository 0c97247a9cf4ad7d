//! Single-song and batch workflows: parse, grid, align, locate, stress,
//! keywords, patterns, metrics, reports.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::align::{
    align_vocal_to_music, buffer_with_fraction, locate_pronunables, PronunableTrack, VocalBeats,
};
use crate::config::{load_song_overlay, AnalysisConfig, ConfigOverlay};
use crate::lyrics::{
    extract_keywords, preprocess_lyrics, stress_patterns, PronouncingDictionary, Stopwords,
};
use crate::meter::build_beat_grid_with;
use crate::metrics::{
    analyze_song, summarize_dataset, BandConfig, DatasetSummary, MetricsOptions,
};
use crate::midi::parse_smf;
use crate::pattern::match_pronunables_to_syllables;
use crate::pattern::build_song_patterns;
use crate::report::{
    write_batch_summary, write_dataset_csv, write_histogram_csv, write_song_report, PatternDump,
    ReportError, SongFailure, SongReport,
};

/// Pipeline stage names, surfaced in error diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    BeatGrid,
    Alignment,
    Lyrics,
    Patterning,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::BeatGrid => "beatgrid",
            Stage::Alignment => "alignment",
            Stage::Lyrics => "lyrics",
            Stage::Patterning => "patterning",
            Stage::Metrics => "metrics",
        };
        f.write_str(name)
    }
}

/// A song that failed somewhere in the pipeline, with the stage and cause.
#[derive(Debug, Error)]
#[error("song {song_id} failed at stage {stage}: {message}")]
pub struct SongError {
    pub song_id: String,
    pub stage: Stage,
    pub message: String,
}

impl SongError {
    fn new(song_id: &str, stage: Stage, message: impl fmt::Display) -> Self {
        SongError {
            song_id: song_id.to_string(),
            stage,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Song(#[from] SongError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("cannot create output directory {path}: {source}")]
    OutDir { path: PathBuf, source: io::Error },
    #[error("cannot scan {path}: {source}")]
    Scan { path: PathBuf, source: io::Error },
    #[error("no song bundles found under {0} (expected <id>.mid, <id>.beats.txt, <id>.pronunables.csv, <id>.lyrics.txt)")]
    NoBundles(PathBuf),
}

/// Paths of one song's input files, discovered by naming convention around
/// `<id>.mid`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SongBundle {
    pub song_id: String,
    pub midi_path: PathBuf,
    pub vocal_beats_path: PathBuf,
    pub pronunable_csv_path: PathBuf,
    pub lyrics_path: PathBuf,
    /// Optional per-song configuration overlay; may not exist.
    pub config_path: PathBuf,
}

impl SongBundle {
    /// Derive the sibling file paths from a `.mid` path.
    pub fn from_midi_path(midi_path: &Path) -> Self {
        let song_id = midi_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let dir = midi_path.parent().unwrap_or_else(|| Path::new("."));
        SongBundle {
            midi_path: midi_path.to_path_buf(),
            vocal_beats_path: dir.join(format!("{song_id}.beats.txt")),
            pronunable_csv_path: dir.join(format!("{song_id}.pronunables.csv")),
            lyrics_path: dir.join(format!("{song_id}.lyrics.txt")),
            config_path: dir.join(format!("{song_id}.toml")),
            song_id,
        }
    }

    /// Scan a directory for `<id>.mid` bundles, sorted by song id.
    pub fn discover(root: &Path) -> Result<Vec<SongBundle>, RunError> {
        let entries = fs::read_dir(root).map_err(|source| RunError::Scan {
            path: root.to_path_buf(),
            source,
        })?;
        let mut bundles: Vec<SongBundle> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().map_or(false, |ext| ext == "mid"))
            .map(|p| SongBundle::from_midi_path(&p))
            .collect();
        bundles.sort_by(|a, b| a.song_id.cmp(&b.song_id));
        Ok(bundles)
    }
}

/// Shared read-only inputs loaded once per run.
#[derive(Debug, Clone)]
pub struct Resources {
    pub dict: PronouncingDictionary,
    pub stopwords: Stopwords,
}

impl Resources {
    /// The bundled dictionary and stopword list.
    pub fn builtin() -> Self {
        Resources {
            dict: PronouncingDictionary::builtin(),
            stopwords: Stopwords::builtin(),
        }
    }

    /// Load from the given paths, falling back to the bundled assets.
    pub fn load(
        dict_path: Option<&Path>,
        stopwords_path: Option<&Path>,
    ) -> Result<Self, RunError> {
        let read = |path: &Path| {
            fs::read_to_string(path).map_err(|source| RunError::Scan {
                path: path.to_path_buf(),
                source,
            })
        };
        let dict = match dict_path {
            Some(path) => PronouncingDictionary::parse(&read(path)?).map_err(|e| {
                SongError::new("-", Stage::Ingest, format!("{}: {e}", path.display()))
            })?,
            None => PronouncingDictionary::builtin(),
        };
        let stopwords = match stopwords_path {
            Some(path) => Stopwords::parse(&read(path)?),
            None => Stopwords::builtin(),
        };
        Ok(Resources { dict, stopwords })
    }
}

fn read_bytes(song_id: &str, path: &Path) -> Result<Vec<u8>, SongError> {
    fs::read(path)
        .map_err(|e| SongError::new(song_id, Stage::Ingest, format!("{}: {e}", path.display())))
}

fn read_text(song_id: &str, path: &Path) -> Result<String, SongError> {
    fs::read_to_string(path)
        .map_err(|e| SongError::new(song_id, Stage::Ingest, format!("{}: {e}", path.display())))
}

/// Run the full pipeline for one bundle without touching the output
/// directory.
pub fn analyze_bundle(
    bundle: &SongBundle,
    cli_overlay: &ConfigOverlay,
    resources: &Resources,
) -> Result<SongReport, SongError> {
    let id = bundle.song_id.as_str();
    let stage = |stage: Stage| move |e: &dyn fmt::Display| SongError::new(id, stage, e);

    let song_overlay = load_song_overlay(&bundle.config_path)
        .map_err(|e| stage(Stage::Ingest)(&e))?;
    let config = AnalysisConfig::resolve(cli_overlay, song_overlay.as_ref());
    let groupings = config.groupings().map_err(|e| stage(Stage::Ingest)(&e))?;

    let midi_bytes = read_bytes(id, &bundle.midi_path)?;
    let song = parse_smf(&midi_bytes).map_err(|e| stage(Stage::Ingest)(&e))?;
    let vocal = VocalBeats::parse(&read_text(id, &bundle.vocal_beats_path)?)
        .map_err(|e| stage(Stage::Ingest)(&e))?;
    let csv_bytes = read_bytes(id, &bundle.pronunable_csv_path)?;
    let track = PronunableTrack::from_csv(csv_bytes.as_slice(), &config.csv_columns())
        .map_err(|e| stage(Stage::Ingest)(&e))?;
    let lyrics_text = read_text(id, &bundle.lyrics_path)?;
    if track.is_empty() {
        return Err(SongError::new(id, Stage::Ingest, "no pronunable events"));
    }

    let grid = build_beat_grid_with(&song, &groupings).map_err(|e| stage(Stage::BeatGrid)(&e))?;
    let buffer = buffer_with_fraction(&grid, config.buffer_fraction)
        .map_err(|e| stage(Stage::Alignment)(&e))?;
    let vocal_to_music =
        align_vocal_to_music(&vocal, &grid, buffer).map_err(|e| stage(Stage::Alignment)(&e))?;
    let located = locate_pronunables(&track, &vocal, &vocal_to_music, buffer, &grid)
        .map_err(|e| stage(Stage::Alignment)(&e))?;

    let tokens = preprocess_lyrics(&lyrics_text);
    if tokens.is_empty() {
        return Err(SongError::new(id, Stage::Lyrics, "no lyric tokens"));
    }
    let stress = stress_patterns(&tokens, &resources.dict);
    let kp = extract_keywords(&tokens, &resources.stopwords, config.keyword_ratio)
        .map_err(|e| stage(Stage::Lyrics)(&e))?;

    let matched =
        match_pronunables_to_syllables(track.len(), &stress, config.syllable_mismatch_tolerance)
            .map_err(|e| stage(Stage::Patterning)(&e))?;
    let mut warnings: Vec<String> = stress.warnings().to_vec();
    if let Some(mismatch) = &matched.mismatch {
        warnings.push(format!("syllable mismatch delta {:+}", mismatch.delta));
    }
    let patterns = build_song_patterns(&located, &grid.sp, &stress, kp, matched)
        .map_err(|e| stage(Stage::Patterning)(&e))?;

    let options = MetricsOptions {
        exclude_rest_beats: config.exclude_rest_beats,
    };
    let stats =
        analyze_song(&grid, &located, &patterns, options).map_err(|e| stage(Stage::Metrics)(&e))?;

    Ok(SongReport {
        song_id: bundle.song_id.clone(),
        config,
        tokens: tokens.into_iter().map(|t| t.text).collect(),
        located_beats: located.indices.clone(),
        interpolated: located.interpolated.clone(),
        patterns: PatternDump {
            sp: grid.sp.bits(),
            psp: patterns.psp.bits(),
            wpsp: patterns.wpsp.bits(),
            kp: patterns.kp.bits(),
            sssp: patterns.sssp.bits(),
            stress: patterns.stress.bits(),
        },
        stats,
        warnings,
    })
}

fn ensure_out_dir(out_dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::OutDir {
        path: out_dir.to_path_buf(),
        source,
    })
}

/// Analyze one song and write `<out>/<id>.report.json`.
pub fn run_single(
    bundle: &SongBundle,
    cli_overlay: &ConfigOverlay,
    resources: &Resources,
    out_dir: &Path,
) -> Result<(SongReport, PathBuf), RunError> {
    let report = analyze_bundle(bundle, cli_overlay, resources)?;
    ensure_out_dir(out_dir)?;
    let path = write_song_report(out_dir, &report)?;
    Ok((report, path))
}

/// Outcome of a batch run; unanalyzable songs are listed, not fatal.
#[derive(Debug)]
pub struct BatchResult {
    pub reports: Vec<SongReport>,
    pub failures: Vec<SongFailure>,
    pub summary: Option<DatasetSummary>,
}

impl BatchResult {
    /// True when at least one song failed but the run produced output.
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Analyze every bundle under `root` (optionally in parallel) and write the
/// per-song reports plus `songs.csv`, `histogram.csv`, and `summary.json`.
///
/// Aggregation happens after all songs finish and is independent of
/// processing order; rerunning on identical inputs produces byte-identical
/// CSVs.
pub fn run_batch(
    root: &Path,
    cli_overlay: &ConfigOverlay,
    resources: &Resources,
    out_dir: &Path,
    jobs: Option<usize>,
    bands: &BandConfig,
) -> Result<BatchResult, RunError> {
    let bundles = SongBundle::discover(root)?;
    if bundles.is_empty() {
        return Err(RunError::NoBundles(root.to_path_buf()));
    }
    ensure_out_dir(out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .expect("thread pool construction cannot fail with these options");
    let results: Vec<Result<SongReport, SongError>> = pool.install(|| {
        bundles
            .par_iter()
            .map(|bundle| analyze_bundle(bundle, cli_overlay, resources))
            .collect()
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(report) => reports.push(report),
            Err(e) => failures.push(SongFailure {
                song_id: e.song_id.clone(),
                stage: e.stage.to_string(),
                message: e.message.clone(),
            }),
        }
    }
    reports.sort_by(|a, b| a.song_id.cmp(&b.song_id));
    failures.sort_by(|a, b| a.song_id.cmp(&b.song_id));

    for report in &reports {
        write_song_report(out_dir, report)?;
    }
    write_dataset_csv(out_dir, &reports)?;

    let stats: Vec<_> = reports.iter().map(|r| r.stats.clone()).collect();
    let summary = match summarize_dataset(&stats, bands) {
        Ok(summary) => {
            write_histogram_csv(out_dir, &summary)?;
            write_batch_summary(out_dir, &summary, &failures)?;
            Some(summary)
        }
        Err(_) => None, // every song failed; failures carry the diagnostics
    };

    Ok(BatchResult {
        reports,
        failures,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_paths_derive_from_midi_path() {
        let bundle = SongBundle::from_midi_path(Path::new("/data/en001a.mid"));
        assert_eq!(bundle.song_id, "en001a");
        assert_eq!(bundle.vocal_beats_path, Path::new("/data/en001a.beats.txt"));
        assert_eq!(
            bundle.pronunable_csv_path,
            Path::new("/data/en001a.pronunables.csv")
        );
        assert_eq!(bundle.lyrics_path, Path::new("/data/en001a.lyrics.txt"));
        assert_eq!(bundle.config_path, Path::new("/data/en001a.toml"));
    }

    #[test]
    fn discovery_sorts_by_song_id() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["b2", "a1", "c3"] {
            fs::write(dir.path().join(format!("{id}.mid")), b"x").unwrap();
        }
        fs::write(dir.path().join("notes.txt"), b"x").unwrap();
        let bundles = SongBundle::discover(dir.path()).unwrap();
        let ids: Vec<&str> = bundles.iter().map(|b| b.song_id.as_str()).collect();
        assert_eq!(ids, vec!["a1", "b2", "c3"]);
    }
}
