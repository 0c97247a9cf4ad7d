//! Lyrics-rhythm matching: quantify how a song's lyrical keywords and
//! stressed syllables land on its musical strong beats.
//!
//! The pipeline ingests a Standard MIDI File plus tracked vocal beats,
//! pronunable annotations (timestamped changes in sung pronunciation), and
//! the lyric text. It aligns the vocal events to the MIDI beat grid, builds
//! binary patterns (strong beats, pronunable landings, keywords, syllable
//! stress), and scores the match with conditional probability and cosine
//! similarity.
//!
//! ```no_run
//! use lyrics_rhythm::config::ConfigOverlay;
//! use lyrics_rhythm::pipeline::{run_single, Resources, SongBundle};
//!
//! let bundle = SongBundle::from_midi_path("song.mid".as_ref());
//! let resources = Resources::builtin();
//! let (report, path) = run_single(&bundle, &ConfigOverlay::default(), &resources, "out".as_ref())?;
//! println!("p(keyword | strong beat) = {}", report.stats.p_keyword_given_strong);
//! # Ok::<(), lyrics_rhythm::pipeline::RunError>(())
//! ```
//!
//! See the `examples/` directory for one runnable example per capability and
//! the `lyrics-rhythm` binary for single-song and batch runs.

pub mod align;
pub mod config;
pub mod lyrics;
pub mod meter;
pub mod metrics;
pub mod midi;
pub mod pattern;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use align::{
    align_vocal_to_music, default_buffer, locate_pronunables, manhattan_distance,
    AlignmentIndexMap, PronunableTrack, TimeBuffer, VocalBeats,
};
pub use config::{AnalysisConfig, ConfigOverlay};
pub use lyrics::{
    count_syllables, extract_keywords, preprocess_lyrics, stress_patterns,
    PronouncingDictionary, Stopwords, StressPatternList,
};
pub use meter::{build_beat_grid, strong_beat_positions, BeatGrid, MeterGroupings, TimeSignature};
pub use metrics::{
    analyze_song, conditional_probability, cosine_similarity, summarize_dataset, DatasetSummary,
    MatchStats,
};
pub use midi::{parse_smf, MidiSong};
pub use pattern::{
    build_psp, build_sssp, match_pronunables_to_syllables, psp_to_wpsp, BinaryPattern,
    PatternKind, WordSpan,
};
pub use pipeline::{run_batch, run_single, Resources, SongBundle};
