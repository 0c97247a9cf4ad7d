//! Rhythm alignment: vocal beats onto the music beat grid, then pronunables
//! onto music beats through the vocal series.
//!
//! Both passes share the same mechanics: candidates within a time buffer are
//! collected by binary search, the minimum-distance candidate wins (ties go
//! to the earlier beat), and events with no candidate get a linearly
//! interpolated index from their resolved neighbors.

use std::io::Read;

use thiserror::Error;

use crate::meter::BeatGrid;

/// Default buffer as a fraction of the median inter-beat interval. Half a
/// beat is the widest window that keeps nearest-beat assignment unambiguous.
pub const DEFAULT_BUFFER_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("beat grid has {0} beat(s), need at least 2 to derive a time buffer")]
    BufferUndefined(usize),
    #[error("time buffer must be positive, got {0}")]
    InvalidBuffer(f64),
    #[error("empty {0} series")]
    EmptyInput(&'static str),
    #[error("no event matched any beat within a ±{dt} s window")]
    AllUnmatched { dt: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("bad vocal beat at line {line}: {reason}")]
    BadVocalBeat { line: usize, reason: String },
    #[error("bad pronunable row {row}: {reason}")]
    BadPronunable { row: usize, reason: String },
    #[error("pronunable CSV is missing column {0:?}")]
    MissingColumn(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The tolerance window around an event time when searching candidate beats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBuffer {
    dt: f64,
}

impl TimeBuffer {
    pub fn from_seconds(dt: f64) -> Result<Self, AlignError> {
        if dt > 0.0 && dt.is_finite() {
            Ok(TimeBuffer { dt })
        } else {
            Err(AlignError::InvalidBuffer(dt))
        }
    }

    pub fn seconds(&self) -> f64 {
        self.dt
    }
}

/// Buffer set from tempo and time signature: the default fraction of the
/// grid's median inter-beat interval.
pub fn default_buffer(grid: &BeatGrid) -> Result<TimeBuffer, AlignError> {
    buffer_with_fraction(grid, DEFAULT_BUFFER_FRACTION)
}

pub fn buffer_with_fraction(grid: &BeatGrid, fraction: f64) -> Result<TimeBuffer, AlignError> {
    let interval = grid
        .median_interval()
        .ok_or_else(|| AlignError::BufferUndefined(grid.len()))?;
    TimeBuffer::from_seconds(fraction * interval)
}

/// The tracked vocal beat series: strictly increasing onset timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct VocalBeats {
    times: Vec<f64>,
}

impl VocalBeats {
    pub fn new(times: Vec<f64>) -> Result<Self, AlignError> {
        for (i, window) in times.windows(2).enumerate() {
            if window[1] <= window[0] {
                return Err(AlignError::BadVocalBeat {
                    line: i + 2,
                    reason: format!("{} does not increase past {}", window[1], window[0]),
                });
            }
        }
        if times.first().map_or(false, |&t| t < 0.0) {
            return Err(AlignError::BadVocalBeat {
                line: 1,
                reason: "negative timestamp".into(),
            });
        }
        Ok(VocalBeats { times })
    }

    /// Parse the one-timestamp-per-line text format.
    pub fn parse(text: &str) -> Result<Self, AlignError> {
        let mut times = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let t: f64 = line.parse().map_err(|_| AlignError::BadVocalBeat {
                line: i + 1,
                reason: format!("not a number: {line:?}"),
            })?;
            times.push(t);
        }
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// One sung change in pronunciation with its location in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PronunableEvent {
    pub start_seconds: f64,
    pub end_seconds: f64,
    pub label: String,
}

/// Ordered pronunable events; event start times supply the series that gets
/// located on music beats.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PronunableTrack {
    events: Vec<PronunableEvent>,
}

/// Column names for the pronunable annotation CSV, adjustable when a dataset
/// uses a different header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvColumns {
    pub start: String,
    pub end: String,
    pub label: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns {
            start: "start".into(),
            end: "end".into(),
            label: "label".into(),
        }
    }
}

impl PronunableTrack {
    pub fn new(events: Vec<PronunableEvent>) -> Result<Self, AlignError> {
        for (i, window) in events.windows(2).enumerate() {
            if window[1].start_seconds < window[0].start_seconds {
                return Err(AlignError::BadPronunable {
                    row: i + 2,
                    reason: "start times must be non-decreasing".into(),
                });
            }
        }
        for (i, event) in events.iter().enumerate() {
            if event.end_seconds < event.start_seconds {
                return Err(AlignError::BadPronunable {
                    row: i + 1,
                    reason: format!("end {} before start {}", event.end_seconds, event.start_seconds),
                });
            }
        }
        Ok(PronunableTrack { events })
    }

    /// Read the `start,end,label` CSV format.
    pub fn from_csv(reader: impl Read, columns: &CsvColumns) -> Result<Self, AlignError> {
        let mut csv_reader = csv::Reader::from_reader(reader);
        let headers = csv_reader.headers()?.clone();
        let index_of = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| AlignError::MissingColumn(name.to_string()))
        };
        let start_idx = index_of(&columns.start)?;
        let end_idx = index_of(&columns.end)?;
        let label_idx = index_of(&columns.label)?;

        let mut events = Vec::new();
        for (row, record) in csv_reader.records().enumerate() {
            let record = record?;
            let field = |idx: usize| {
                record.get(idx).ok_or_else(|| AlignError::BadPronunable {
                    row: row + 1,
                    reason: format!("missing field {idx}"),
                })
            };
            let number = |idx: usize| -> Result<f64, AlignError> {
                let raw = field(idx)?.trim();
                raw.parse().map_err(|_| AlignError::BadPronunable {
                    row: row + 1,
                    reason: format!("not a number: {raw:?}"),
                })
            };
            events.push(PronunableEvent {
                start_seconds: number(start_idx)?,
                end_seconds: number(end_idx)?,
                label: field(label_idx)?.to_string(),
            });
        }
        Self::new(events)
    }

    pub fn events(&self) -> &[PronunableEvent] {
        &self.events
    }

    pub fn start_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.start_seconds).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// One target-beat index per source event, with interpolation marks for
/// events that had no candidate beat inside the buffer window.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlignmentIndexMap {
    pub indices: Vec<usize>,
    pub interpolated: Vec<bool>,
}

impl AlignmentIndexMap {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn interpolated_count(&self) -> usize {
        self.interpolated.iter().filter(|&&f| f).count()
    }
}

/// Manhattan distance between two points of equal dimensionality.
pub fn manhattan_distance(a: &[f64], b: &[f64]) -> Result<f64, AlignError> {
    if a.len() != b.len() {
        return Err(AlignError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Index of the nearest time within ±dt of `t`, or `None`. Exact distance
/// ties resolve to the earlier candidate.
fn nearest_within(times: &[f64], t: f64, dt: f64) -> Option<usize> {
    let lo = times.partition_point(|&x| x < t - dt);
    let hi = times.partition_point(|&x| x <= t + dt);
    let mut best: Option<(usize, f64)> = None;
    for (idx, &candidate) in times[lo..hi].iter().enumerate() {
        let d = (candidate - t).abs();
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((lo + idx, d));
        }
    }
    best.map(|(idx, _)| idx)
}

/// Fill unresolved positions by linear interpolation between the nearest
/// resolved neighbors (by event position, rounded half away from zero,
/// clamped at the edges), then repair monotonicity so indices never regress.
fn interpolate_and_repair(
    resolved: &[Option<usize>],
    dt: f64,
) -> Result<AlignmentIndexMap, AlignError> {
    if resolved.is_empty() {
        return Ok(AlignmentIndexMap::default());
    }
    if resolved.iter().all(Option::is_none) {
        return Err(AlignError::AllUnmatched { dt });
    }

    let known: Vec<(usize, usize)> = resolved
        .iter()
        .enumerate()
        .filter_map(|(pos, idx)| idx.map(|i| (pos, i)))
        .collect();

    let mut indices = Vec::with_capacity(resolved.len());
    let mut interpolated = Vec::with_capacity(resolved.len());
    for (pos, slot) in resolved.iter().enumerate() {
        match slot {
            Some(idx) => {
                indices.push(*idx);
                interpolated.push(false);
            }
            None => {
                let after = known.partition_point(|&(p, _)| p < pos);
                let value = match (after.checked_sub(1).map(|i| known[i]), known.get(after)) {
                    (Some((p0, i0)), Some(&(p1, i1))) => {
                        let frac = (pos - p0) as f64 / (p1 - p0) as f64;
                        (i0 as f64 + (i1 as f64 - i0 as f64) * frac).round() as usize
                    }
                    (Some((_, i0)), None) => i0,
                    (None, Some(&(_, i1))) => i1,
                    (None, None) => unreachable!("at least one resolved index exists"),
                };
                indices.push(value);
                interpolated.push(true);
            }
        }
    }

    let mut floor = 0;
    for idx in &mut indices {
        if *idx < floor {
            *idx = floor;
        }
        floor = *idx;
    }

    Ok(AlignmentIndexMap {
        indices,
        interpolated,
    })
}

/// Align the vocal beat series with the music beat grid.
///
/// Each vocal beat maps to the nearest music beat within ±dt; beats with no
/// candidate get an interpolated index. Errors when every vocal beat is
/// unmatched (the song cannot be analyzed).
pub fn align_vocal_to_music(
    vocal: &VocalBeats,
    grid: &BeatGrid,
    buf: TimeBuffer,
) -> Result<AlignmentIndexMap, AlignError> {
    if vocal.is_empty() {
        return Err(AlignError::EmptyInput("vocal beat"));
    }
    if grid.is_empty() {
        return Err(AlignError::EmptyInput("music beat"));
    }
    let resolved: Vec<Option<usize>> = vocal
        .times()
        .iter()
        .map(|&t| nearest_within(&grid.beat_times, t, buf.seconds()))
        .collect();
    interpolate_and_repair(&resolved, buf.seconds())
}

/// Locate each pronunable on a music beat.
///
/// For each pronunable start time, the vocal beats inside the buffer window
/// are found by binary search, the Manhattan-nearest candidate is picked,
/// and its vocal index is mapped through the vocal-to-music alignment. A
/// pronunable with no candidate (or one mapping outside the alignment)
/// receives a linearly interpolated music-beat index.
pub fn locate_pronunables(
    pronunables: &PronunableTrack,
    vocal: &VocalBeats,
    vocal_to_music: &AlignmentIndexMap,
    buf: TimeBuffer,
    grid: &BeatGrid,
) -> Result<AlignmentIndexMap, AlignError> {
    if pronunables.is_empty() {
        return Ok(AlignmentIndexMap::default());
    }
    if vocal.is_empty() {
        return Err(AlignError::EmptyInput("vocal beat"));
    }
    if grid.is_empty() {
        return Err(AlignError::EmptyInput("music beat"));
    }

    let resolved: Vec<Option<usize>> = pronunables
        .events()
        .iter()
        .map(|event| {
            nearest_within(vocal.times(), event.start_seconds, buf.seconds())
                .and_then(|vocal_idx| vocal_to_music.indices.get(vocal_idx).copied())
        })
        .collect();
    interpolate_and_repair(&resolved, buf.seconds())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{BinaryPattern, PatternKind};

    fn grid_from(times: Vec<f64>) -> BeatGrid {
        let n = times.len();
        BeatGrid {
            beat_times: times,
            beats_per_measure: 4,
            sp: BinaryPattern::new(PatternKind::StrongBeat, vec![false; n]),
            measure_offsets: vec![],
        }
    }

    fn identity_map(n: usize) -> AlignmentIndexMap {
        AlignmentIndexMap {
            indices: (0..n).collect(),
            interpolated: vec![false; n],
        }
    }

    #[test]
    fn default_buffer_is_half_median_interval() {
        let grid = grid_from(vec![0.0, 0.5, 1.0, 1.5]);
        let buf = default_buffer(&grid).unwrap();
        assert!((buf.seconds() - 0.25).abs() < 1e-12);
        let quarter = buffer_with_fraction(&grid, 0.25).unwrap();
        assert!((quarter.seconds() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn buffer_needs_two_beats() {
        let grid = grid_from(vec![0.0]);
        assert!(matches!(
            default_buffer(&grid),
            Err(AlignError::BufferUndefined(1))
        ));
    }

    #[test]
    fn identity_alignment_has_no_interpolation() {
        let grid = grid_from(vec![0.0, 0.5, 1.0, 1.5]);
        let vocal = VocalBeats::new(grid.beat_times.clone()).unwrap();
        let map =
            align_vocal_to_music(&vocal, &grid, TimeBuffer::from_seconds(0.25).unwrap()).unwrap();
        assert_eq!(map.indices, vec![0, 1, 2, 3]);
        assert_eq!(map.interpolated_count(), 0);
    }

    #[test]
    fn nearest_beat_wins_brute_force_case() {
        // Brute-force nearest-beat search over all beats gives [0, 1, 2].
        let grid = grid_from(vec![0.0, 0.5, 1.0]);
        let vocal = VocalBeats::new(vec![0.03, 0.52, 0.98]).unwrap();
        let map =
            align_vocal_to_music(&vocal, &grid, TimeBuffer::from_seconds(0.25).unwrap()).unwrap();
        assert_eq!(map.indices, vec![0, 1, 2]);
    }

    #[test]
    fn exact_midpoint_tie_breaks_to_earlier_beat() {
        let grid = grid_from(vec![0.0, 0.5, 1.0, 1.5]);
        let vocal = VocalBeats::new(vec![0.0, 0.75, 1.5]).unwrap();
        let map =
            align_vocal_to_music(&vocal, &grid, TimeBuffer::from_seconds(0.25).unwrap()).unwrap();
        assert_eq!(map.indices, vec![0, 1, 3]);
    }

    #[test]
    fn all_unmatched_is_an_error() {
        let grid = grid_from(vec![0.0, 0.5, 1.0]);
        let vocal = VocalBeats::new(vec![5.0, 6.0]).unwrap();
        let result = align_vocal_to_music(&vocal, &grid, TimeBuffer::from_seconds(0.1).unwrap());
        assert!(matches!(result, Err(AlignError::AllUnmatched { .. })));
    }

    #[test]
    fn locate_maps_through_vocal_alignment() {
        let grid = grid_from(vec![0.0, 0.5, 1.0]);
        let vocal = VocalBeats::new(vec![0.0, 0.5, 1.0]).unwrap();
        let track = PronunableTrack::new(vec![
            event(0.02, "a"),
            event(0.49, "b"),
            event(1.03, "c"),
        ])
        .unwrap();
        let map = locate_pronunables(
            &track,
            &vocal,
            &identity_map(3),
            TimeBuffer::from_seconds(0.1).unwrap(),
            &grid,
        )
        .unwrap();
        assert_eq!(map.indices, vec![0, 1, 2]);
        assert_eq!(map.interpolated_count(), 0);
    }

    fn event(start: f64, label: &str) -> PronunableEvent {
        PronunableEvent {
            start_seconds: start,
            end_seconds: start + 0.1,
            label: label.into(),
        }
    }

    #[test]
    fn unmatched_pronunable_interpolates_between_neighbors() {
        let grid = grid_from(vec![0.0, 0.5, 1.0]);
        let vocal = VocalBeats::new(vec![0.0, 0.5]).unwrap();
        let track =
            PronunableTrack::new(vec![event(0.0, "a"), event(0.30, "b"), event(0.52, "c")])
                .unwrap();
        let map = locate_pronunables(
            &track,
            &vocal,
            &identity_map(2),
            TimeBuffer::from_seconds(0.1).unwrap(),
            &grid,
        )
        .unwrap();
        assert_eq!(map.interpolated, vec![false, true, false]);
        // interpolated value stays within its resolved neighbors
        assert!(map.indices[1] >= map.indices[0] && map.indices[1] <= map.indices[2]);
        assert_eq!(map.indices, vec![0, 1, 1]);
    }

    #[test]
    fn leading_and_trailing_gaps_clamp_to_nearest_resolved() {
        let grid = grid_from(vec![0.0, 0.5, 1.0]);
        let vocal = VocalBeats::new(vec![0.5]).unwrap();
        let track =
            PronunableTrack::new(vec![event(0.2, "a"), event(0.5, "b"), event(0.8, "c")]).unwrap();
        let map = locate_pronunables(
            &track,
            &vocal,
            &AlignmentIndexMap {
                indices: vec![1],
                interpolated: vec![false],
            },
            TimeBuffer::from_seconds(0.05).unwrap(),
            &grid,
        )
        .unwrap();
        assert_eq!(map.indices, vec![1, 1, 1]);
        assert_eq!(map.interpolated, vec![true, false, true]);
    }

    #[test]
    fn empty_pronunable_track_gives_empty_map() {
        let grid = grid_from(vec![0.0, 0.5]);
        let vocal = VocalBeats::new(vec![0.0, 0.5]).unwrap();
        let map = locate_pronunables(
            &PronunableTrack::default(),
            &vocal,
            &identity_map(2),
            TimeBuffer::from_seconds(0.25).unwrap(),
            &grid,
        )
        .unwrap();
        assert!(map.is_empty());
    }

    #[test]
    fn manhattan_distance_matches_hand_values() {
        assert!((manhattan_distance(&[1.2], &[1.5]).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(manhattan_distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(
            (manhattan_distance(&[1.0, 2.0, 3.0], &[4.0, 0.0, 3.0]).unwrap() - 5.0).abs() < 1e-12
        );
        assert!(matches!(
            manhattan_distance(&[1.0], &[1.0, 2.0]),
            Err(AlignError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn vocal_beats_parse_and_validate() {
        let beats = VocalBeats::parse("0.0\n0.5\n\n1.0\n").unwrap();
        assert_eq!(beats.times(), &[0.0, 0.5, 1.0]);
        assert!(VocalBeats::parse("0.5\n0.5\n").is_err());
        assert!(VocalBeats::parse("0.5\nx\n").is_err());
    }

    #[test]
    fn pronunable_csv_honors_column_mapping() {
        let csv = "onset,offset,syl\n0.0,0.2,la\n0.5,0.7,da\n";
        let columns = CsvColumns {
            start: "onset".into(),
            end: "offset".into(),
            label: "syl".into(),
        };
        let track = PronunableTrack::from_csv(csv.as_bytes(), &columns).unwrap();
        assert_eq!(track.len(), 2);
        assert_eq!(track.events()[1].label, "da");

        let missing = PronunableTrack::from_csv(csv.as_bytes(), &CsvColumns::default());
        assert!(matches!(missing, Err(AlignError::MissingColumn(_))));
    }

    #[test]
    fn pronunable_csv_default_header() {
        let csv = "start,end,label\n0.0,0.2,twin\n0.25,0.45,kle\n";
        let track = PronunableTrack::from_csv(csv.as_bytes(), &CsvColumns::default()).unwrap();
        assert_eq!(track.start_times(), vec![0.0, 0.25]);
    }

    #[test]
    fn jitter_within_four_tenths_of_interval_recovers_every_beat() {
        let times: Vec<f64> = (0..32).map(|i| i as f64 * 0.5).collect();
        let grid = grid_from(times.clone());
        let vocal = VocalBeats::new(times.clone()).unwrap();
        let buf = default_buffer(&grid).unwrap();
        let la = align_vocal_to_music(&vocal, &grid, buf).unwrap();
        // deterministic pseudo-jitter in (-0.4, 0.4) * interval
        let events: Vec<PronunableEvent> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let jitter = (((i * 2654435761) % 799) as f64 / 999.0 - 0.4) * 0.5;
                event(t + jitter, "x")
            })
            .collect();
        let track = PronunableTrack::new(events).unwrap();
        let located = locate_pronunables(&track, &vocal, &la, buf, &grid).unwrap();
        assert_eq!(located.indices, (0..32).collect::<Vec<_>>());
        assert_eq!(located.interpolated_count(), 0);
    }
}
