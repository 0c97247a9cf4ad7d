//! Beat grid generation and strong-beat patterning.
//!
//! The beat unit is the denominator note value of the active time signature
//! (each eighth note in 6/8 is a beat), so the strong-beat pattern stays
//! indexable by tracked beats. Strong positions within a measure are deduced
//! from the time signature; asymmetric meters take an explicit grouping, with
//! defaults shipped for 5/8 (3+2) and 7/8 (2+2+3).

use std::collections::HashMap;

use thiserror::Error;

use crate::midi::{MidiSong, TempoMap};
use crate::pattern::{BinaryPattern, PatternKind};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid time signature {numerator}/{denominator}")]
    InvalidTimeSignature { numerator: u8, denominator: u16 },
    #[error("invalid meter grouping: {0}")]
    InvalidGrouping(String),
    #[error("malformed meter grouping spec {spec:?}, expected \"N/D:g1+g2+...\"")]
    BadGroupingSpec { spec: String },
}

/// A time signature, optionally with an explicit beat grouping for
/// asymmetric meters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSignature {
    numerator: u8,
    denominator: u16,
    grouping: Option<Vec<u8>>,
}

impl TimeSignature {
    pub fn new(numerator: u8, denominator: u16) -> Result<Self, GridError> {
        Self::with_grouping(numerator, denominator, None)
    }

    pub fn with_grouping(
        numerator: u8,
        denominator: u16,
        grouping: Option<Vec<u8>>,
    ) -> Result<Self, GridError> {
        if numerator == 0 || !matches!(denominator, 1 | 2 | 4 | 8 | 16 | 32) {
            return Err(GridError::InvalidTimeSignature {
                numerator,
                denominator,
            });
        }
        if let Some(groups) = &grouping {
            validate_grouping(groups, numerator)?;
        }
        Ok(TimeSignature {
            numerator,
            denominator,
            grouping,
        })
    }

    pub fn numerator(&self) -> u8 {
        self.numerator
    }

    pub fn denominator(&self) -> u16 {
        self.denominator
    }

    pub fn grouping(&self) -> Option<&[u8]> {
        self.grouping.as_deref()
    }
}

fn validate_grouping(groups: &[u8], numerator: u8) -> Result<(), GridError> {
    if groups.is_empty() {
        return Err(GridError::InvalidGrouping("empty grouping".into()));
    }
    let sum: u32 = groups.iter().map(|&g| u32::from(g)).sum();
    if sum != u32::from(numerator) {
        return Err(GridError::InvalidGrouping(format!(
            "grouping sums to {sum}, expected {numerator}"
        )));
    }
    for (i, &g) in groups.iter().enumerate() {
        let last = i == groups.len() - 1;
        if g == 0 || (!last && g < 2) {
            return Err(GridError::InvalidGrouping(format!(
                "group {g} at position {i} must be at least 2 (last group may be 1)"
            )));
        }
    }
    Ok(())
}

/// 0-based strong-beat positions within one measure.
///
/// Position 0 (the downbeat) is always strong. With an explicit grouping the
/// strong beats fall on the cumulative group starts. Otherwise: duple and
/// triple meters carry the downbeat only, compound meters (numerator a
/// multiple of 3 above 3) are strong every 3 beats, larger even numerators
/// add the half-measure beat (beat 3 in 4/4), and the shipped defaults cover
/// 5 (3+2) and 7 (2+2+3). Anything else falls back to the downbeat.
pub fn strong_beat_positions(ts: &TimeSignature) -> Vec<usize> {
    if let Some(groups) = ts.grouping() {
        return group_starts(groups);
    }
    let n = usize::from(ts.numerator());
    if n <= 3 {
        vec![0]
    } else if n % 3 == 0 {
        (0..n).step_by(3).collect()
    } else if n % 2 == 0 {
        vec![0, n / 2]
    } else if n == 5 {
        group_starts(&[3, 2])
    } else if n == 7 {
        group_starts(&[2, 2, 3])
    } else {
        vec![0]
    }
}

fn group_starts(groups: &[u8]) -> Vec<usize> {
    let mut positions = Vec::with_capacity(groups.len());
    let mut at = 0usize;
    for &g in groups {
        positions.push(at);
        at += usize::from(g);
    }
    positions
}

/// Grouping overrides keyed by meter, parsed from `"N/D:g1+g2+..."` specs.
#[derive(Debug, Clone, Default)]
pub struct MeterGroupings {
    map: HashMap<(u8, u16), Vec<u8>>,
}

impl MeterGroupings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, numerator: u8, denominator: u16, groups: Vec<u8>) {
        self.map.insert((numerator, denominator), groups);
    }

    /// Parse a spec like `"7/8:2+2+3"` and register it.
    pub fn add_spec(&mut self, spec: &str) -> Result<(), GridError> {
        let bad = || GridError::BadGroupingSpec { spec: spec.into() };
        let (meter, groups) = spec.split_once(':').ok_or_else(bad)?;
        let (num, den) = meter.split_once('/').ok_or_else(bad)?;
        let numerator: u8 = num.trim().parse().map_err(|_| bad())?;
        let denominator: u16 = den.trim().parse().map_err(|_| bad())?;
        let groups: Vec<u8> = groups
            .split('+')
            .map(|g| g.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        validate_grouping(&groups, numerator)?;
        self.insert(numerator, denominator, groups);
        Ok(())
    }

    pub fn get(&self, numerator: u8, denominator: u16) -> Option<&[u8]> {
        self.map.get(&(numerator, denominator)).map(Vec::as_slice)
    }
}

/// The timestamped music beat series with its strong-beat pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatGrid {
    /// Strictly increasing beat timestamps in seconds, spanning the song
    /// duration including rest periods.
    pub beat_times: Vec<f64>,
    /// Beats per measure of the opening time signature.
    pub beats_per_measure: u8,
    /// Strong-beat flag per beat.
    pub sp: BinaryPattern,
    /// Beat indices that start a measure.
    pub measure_offsets: Vec<usize>,
}

impl BeatGrid {
    pub fn len(&self) -> usize {
        self.beat_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beat_times.is_empty()
    }

    /// Median inter-beat interval in seconds; `None` with fewer than 2 beats.
    pub fn median_interval(&self) -> Option<f64> {
        if self.beat_times.len() < 2 {
            return None;
        }
        let mut intervals: Vec<f64> = self.beat_times.windows(2).map(|w| w[1] - w[0]).collect();
        intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = intervals.len() / 2;
        Some(if intervals.len() % 2 == 1 {
            intervals[mid]
        } else {
            (intervals[mid - 1] + intervals[mid]) / 2.0
        })
    }
}

/// Build the beat grid for a song using default meter groupings.
pub fn build_beat_grid(song: &MidiSong) -> Result<BeatGrid, GridError> {
    build_beat_grid_with(song, &MeterGroupings::default())
}

/// Build the beat grid, honoring grouping overrides for asymmetric meters.
///
/// One beat is emitted per denominator-unit pulse from time 0 to the song
/// duration, covering rest periods. Measure boundaries and strong positions
/// reset at every meter change; a trailing partial measure keeps the strong
/// flags for the positions that exist. A zero-duration song yields an empty
/// grid.
pub fn build_beat_grid_with(
    song: &MidiSong,
    groupings: &MeterGroupings,
) -> Result<BeatGrid, GridError> {
    let map = TempoMap::new(song);
    let end_tick = map.seconds_to_ticks(song.duration_seconds);
    let tpq = f64::from(song.ticks_per_quarter);

    let mut beat_times = Vec::new();
    let mut sp_flags = Vec::new();
    let mut measure_offsets = Vec::new();
    let mut beats_per_measure = 4u8;

    for (i, event) in song.time_signature_events.iter().enumerate() {
        let grouping = groupings
            .get(event.numerator, event.denominator)
            .map(<[u8]>::to_vec);
        let ts = TimeSignature::with_grouping(event.numerator, event.denominator, grouping)?;
        if i == 0 {
            beats_per_measure = ts.numerator();
        }
        let strong: Vec<usize> = strong_beat_positions(&ts);
        let numerator = usize::from(ts.numerator());

        let seg_start = event.tick as f64;
        let seg_end = song
            .time_signature_events
            .get(i + 1)
            .map_or(end_tick, |next| next.tick as f64)
            .min(end_tick);
        let beat_ticks = tpq * 4.0 / f64::from(ts.denominator());

        let mut k = 0usize;
        loop {
            let tick = seg_start + k as f64 * beat_ticks;
            if tick >= seg_end - 1e-6 {
                break;
            }
            let position = k % numerator;
            if position == 0 {
                measure_offsets.push(beat_times.len());
            }
            beat_times.push(map.ticks_to_seconds(tick));
            sp_flags.push(strong.binary_search(&position).is_ok());
            k += 1;
        }
    }

    Ok(BeatGrid {
        beat_times,
        beats_per_measure,
        sp: BinaryPattern::new(PatternKind::StrongBeat, sp_flags),
        measure_offsets,
    })
}
