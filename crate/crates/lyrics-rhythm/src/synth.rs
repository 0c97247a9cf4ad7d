//! Synthetic song bundles with known ground truth, for tests, benchmarks,
//! and the runnable examples.
//!
//! A fixture places one pronunable per beat starting at beat 0, with
//! optional uniform jitter, and writes the four bundle files a real song
//! would have. The emitted MIDI stays internal to fixture generation; this
//! is not a general-purpose MIDI writer.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lyrics::{preprocess_lyrics, stress_patterns, PronouncingDictionary};
use crate::pipeline::SongBundle;

/// Monosyllabic content words known to the bundled dictionary.
pub const CONTENT_WORDS: [&str; 12] = [
    "bird", "sun", "moon", "star", "light", "rain", "tree", "sky", "song", "bell", "wind", "snow",
];

/// Monosyllabic filler words from the bundled stopword list.
pub const FILLER_WORDS: [&str; 8] = ["the", "a", "and", "of", "to", "in", "on", "my"];

/// Parameters of a synthetic song.
#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub song_id: String,
    pub bpm: u32,
    pub numerator: u8,
    pub denominator: u16,
    pub words: Vec<String>,
    /// Pronunable onset jitter as a fraction of the beat interval.
    pub jitter_frac: f64,
    pub seed: u64,
    /// Extra silent measures appended after the sung beats.
    pub trailing_rest_measures: u32,
    /// Contents of the optional `<id>.toml` per-song config overlay.
    pub config_toml: Option<String>,
}

impl FixtureSpec {
    pub fn new(song_id: &str, bpm: u32, numerator: u8, denominator: u16) -> Self {
        FixtureSpec {
            song_id: song_id.to_string(),
            bpm,
            numerator,
            denominator,
            words: CONTENT_WORDS.iter().map(|w| w.to_string()).collect(),
            jitter_frac: 0.0,
            seed: 1,
            trailing_rest_measures: 0,
            config_toml: None,
        }
    }

    /// A 4/4 fixture where keywords land exactly on the strong beats:
    /// content and filler words alternate one-per-beat, so with
    /// `keyword_ratio = 1.0` (shipped in the per-song config) KP equals WPSP
    /// by construction and every strong beat carries a keyword.
    pub fn perfect_keyword(song_id: &str, pairs: usize) -> Self {
        let mut words = Vec::with_capacity(pairs * 2);
        for i in 0..pairs {
            words.push(CONTENT_WORDS[i % CONTENT_WORDS.len()].to_string());
            words.push(FILLER_WORDS[i % FILLER_WORDS.len()].to_string());
        }
        FixtureSpec {
            words,
            config_toml: Some("keyword_ratio = 1.0\n".to_string()),
            ..FixtureSpec::new(song_id, 120, 4, 4)
        }
    }

    /// Generate the bundle contents.
    pub fn build(&self) -> Fixture {
        let dict = PronouncingDictionary::builtin();
        let lyrics_text = self.words.join(" ");
        let tokens = preprocess_lyrics(&lyrics_text);
        let patterns = stress_patterns(&tokens, &dict);
        let pronunable_count: usize = patterns.patterns().iter().map(String::len).sum();

        let tempo_us = (60_000_000.0 / f64::from(self.bpm)).round() as u32;
        let interval = f64::from(tempo_us) / 1e6 * 4.0 / f64::from(self.denominator);
        let total_beats = pronunable_count
            + self.trailing_rest_measures as usize * usize::from(self.numerator);

        let beat_times: Vec<f64> = (0..total_beats).map(|i| i as f64 * interval).collect();
        let vocal_beats_text = beat_times
            .iter()
            .map(|t| format!("{t}\n"))
            .collect::<String>();

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut pronunables_csv = String::from("start,end,label\n");
        let pronunable_beats: Vec<usize> = (0..pronunable_count).collect();
        for &beat in &pronunable_beats {
            let jitter = if self.jitter_frac > 0.0 {
                rng.gen_range(-self.jitter_frac..self.jitter_frac) * interval
            } else {
                0.0
            };
            let start = beat_times[beat] + jitter;
            let end = start + 0.4 * interval;
            pronunables_csv.push_str(&format!("{start},{end},s{beat}\n"));
        }

        Fixture {
            song_id: self.song_id.clone(),
            midi_bytes: self.midi_bytes(tempo_us, total_beats),
            vocal_beats_text,
            pronunables_csv,
            lyrics_text,
            config_toml: self.config_toml.clone(),
            beat_interval: interval,
            pronunable_beats,
            total_beats,
        }
    }

    fn midi_bytes(&self, tempo_us: u32, total_beats: usize) -> Vec<u8> {
        let ticks_per_quarter: u32 = 480;
        let beat_ticks = ticks_per_quarter * 4 / u32::from(self.denominator);
        let duration_ticks = beat_ticks * total_beats as u32;

        let mut track = Vec::new();
        // time signature: numerator, log2(denominator), 24 clocks, 8 32nds
        track.extend_from_slice(&[
            0x00,
            0xFF,
            0x58,
            0x04,
            self.numerator,
            self.denominator.trailing_zeros() as u8,
            24,
            8,
        ]);
        track.extend_from_slice(&[0x00, 0xFF, 0x51, 0x03]);
        track.extend_from_slice(&tempo_us.to_be_bytes()[1..]);

        // one pulse note per downbeat
        let measure_ticks = beat_ticks * u32::from(self.numerator);
        let mut at: u32 = 0;
        let mut cursor: u32 = 0;
        while at < duration_ticks {
            push_vlq(&mut track, at - cursor);
            track.extend_from_slice(&[0x90, 60, 96]);
            push_vlq(&mut track, beat_ticks);
            track.extend_from_slice(&[0x80, 60, 0]);
            cursor = at + beat_ticks;
            at += measure_ticks;
        }
        push_vlq(&mut track, duration_ticks.saturating_sub(cursor));
        track.extend_from_slice(&[0xFF, 0x2F, 0x00]);

        let mut bytes = Vec::with_capacity(track.len() + 22);
        bytes.extend_from_slice(b"MThd");
        bytes.extend_from_slice(&6u32.to_be_bytes());
        bytes.extend_from_slice(&0u16.to_be_bytes());
        bytes.extend_from_slice(&1u16.to_be_bytes());
        bytes.extend_from_slice(&(ticks_per_quarter as u16).to_be_bytes());
        bytes.extend_from_slice(b"MTrk");
        bytes.extend_from_slice(&(track.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&track);
        bytes
    }
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut stack = [0u8; 4];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7F) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let mut byte = stack[i];
        if i > 0 {
            byte |= 0x80;
        }
        out.push(byte);
    }
}

/// Generated bundle contents plus the ground truth used by tests.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub song_id: String,
    pub midi_bytes: Vec<u8>,
    pub vocal_beats_text: String,
    pub pronunables_csv: String,
    pub lyrics_text: String,
    pub config_toml: Option<String>,
    pub beat_interval: f64,
    /// Ground-truth music-beat index per pronunable.
    pub pronunable_beats: Vec<usize>,
    pub total_beats: usize,
}

impl Fixture {
    /// Write the bundle files into `dir` and return the discovered bundle.
    pub fn write_bundle(&self, dir: &Path) -> io::Result<SongBundle> {
        let id = &self.song_id;
        fs::write(dir.join(format!("{id}.mid")), &self.midi_bytes)?;
        fs::write(
            dir.join(format!("{id}.beats.txt")),
            &self.vocal_beats_text,
        )?;
        fs::write(
            dir.join(format!("{id}.pronunables.csv")),
            &self.pronunables_csv,
        )?;
        fs::write(dir.join(format!("{id}.lyrics.txt")), &self.lyrics_text)?;
        if let Some(toml) = &self.config_toml {
            fs::write(dir.join(format!("{id}.toml")), toml)?;
        }
        Ok(SongBundle::from_midi_path(&dir.join(format!("{id}.mid"))))
    }
}
