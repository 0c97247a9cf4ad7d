//! Standard MIDI File parsing: tempo map, time signatures, and note events.
//!
//! Only the metadata needed to build a beat grid is kept. Channel semantics,
//! controllers, and playback are out of scope; notes are retained for
//! diagnostics and report output.

use std::collections::HashMap;

use thiserror::Error;

/// Microseconds per quarter note when a file carries no tempo event (120 BPM).
pub const DEFAULT_TEMPO: u32 = 500_000;

/// Errors produced while parsing a Standard MIDI File.
#[derive(Debug, Error)]
pub enum MidiError {
    #[error("not a standard MIDI file: bad header chunk at byte {offset}")]
    BadHeader { offset: usize },
    #[error("unexpected end of data at byte {offset}")]
    Truncated { offset: usize },
    #[error("unsupported SMF format {0}, only formats 0 and 1 are supported")]
    UnsupportedFormat(u16),
    #[error("SMPTE time division is not supported")]
    SmpteTiming,
    #[error("invalid event data at byte {offset}: {reason}")]
    InvalidEvent { offset: usize, reason: String },
}

/// A tempo change: from `tick` onward one quarter note lasts
/// `microseconds_per_quarter` µs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TempoEvent {
    pub tick: u64,
    pub microseconds_per_quarter: u32,
}

impl TempoEvent {
    /// Tempo in beats (quarter notes) per minute.
    pub fn bpm(&self) -> f64 {
        60_000_000.0 / self.microseconds_per_quarter as f64
    }
}

/// A meter change: from `tick` onward the meter is `numerator`/`denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSignatureEvent {
    pub tick: u64,
    pub numerator: u8,
    pub denominator: u16,
}

/// A note with tick positions resolved to seconds through the tempo map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Note {
    pub pitch: u8,
    pub start_seconds: f64,
    pub end_seconds: f64,
}

/// Parsed contents of a format-0 or format-1 Standard MIDI File.
///
/// `tempo_events` and `time_signature_events` are sorted by tick with
/// strictly increasing ticks; when a file places several events of one kind
/// on the same tick, the last one wins. Both lists are guaranteed non-empty:
/// a 120 BPM / 4-4 default is injected at tick 0 when the file has none.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiSong {
    pub ticks_per_quarter: u16,
    pub tempo_events: Vec<TempoEvent>,
    pub time_signature_events: Vec<TimeSignatureEvent>,
    pub notes: Vec<Note>,
    pub duration_seconds: f64,
}

impl MidiSong {
    /// Convert an absolute tick to seconds through the tempo map.
    pub fn ticks_to_seconds(&self, tick: u64) -> f64 {
        TempoMap::new(self).ticks_to_seconds(tick as f64)
    }
}

/// Piecewise-linear tick/second conversion derived from the tempo events.
///
/// Ticks beyond the last tempo event extrapolate with the last tempo.
#[derive(Debug, Clone)]
pub struct TempoMap {
    ticks_per_quarter: f64,
    /// (tick, µs per quarter, cumulative seconds at tick) per segment start.
    segments: Vec<(f64, f64, f64)>,
}

impl TempoMap {
    pub fn new(song: &MidiSong) -> Self {
        Self::from_events(song.ticks_per_quarter, &song.tempo_events)
    }

    fn from_events(ticks_per_quarter: u16, events: &[TempoEvent]) -> Self {
        let tpq = ticks_per_quarter as f64;
        let mut segments = Vec::with_capacity(events.len() + 1);
        // Ticks before the first event run at the SMF default tempo.
        if events.first().map_or(true, |e| e.tick > 0) {
            segments.push((0.0, DEFAULT_TEMPO as f64, 0.0));
        }
        for event in events {
            let (prev_tick, prev_us, prev_sec) =
                *segments.last().unwrap_or(&(0.0, DEFAULT_TEMPO as f64, 0.0));
            let tick = event.tick as f64;
            let sec = prev_sec + (tick - prev_tick) * prev_us / (tpq * 1e6);
            segments.push((tick, event.microseconds_per_quarter as f64, sec));
        }
        if segments.is_empty() {
            segments.push((0.0, DEFAULT_TEMPO as f64, 0.0));
        }
        TempoMap {
            ticks_per_quarter: tpq,
            segments,
        }
    }

    pub fn ticks_to_seconds(&self, tick: f64) -> f64 {
        let idx = match self
            .segments
            .binary_search_by(|seg| seg.0.partial_cmp(&tick).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let (seg_tick, us, seg_sec) = self.segments[idx];
        seg_sec + (tick - seg_tick) * us / (self.ticks_per_quarter * 1e6)
    }

    /// Inverse of [`ticks_to_seconds`](Self::ticks_to_seconds); used for beat
    /// placement. Exact as long as no tempo segment has zero length.
    pub fn seconds_to_ticks(&self, seconds: f64) -> f64 {
        let idx = match self
            .segments
            .binary_search_by(|seg| seg.2.partial_cmp(&seconds).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let (seg_tick, us, seg_sec) = self.segments[idx];
        seg_tick + (seconds - seg_sec) * self.ticks_per_quarter * 1e6 / us
    }
}

/// Parse a format-0 or format-1 Standard MIDI File.
///
/// Honors variable-length-quantity delta times, running status, and the
/// tempo (0x51) and time-signature (0x58) meta events; SysEx and all other
/// events are skipped. A note-on with velocity 0 is treated as a note-off.
pub fn parse_smf(bytes: &[u8]) -> Result<MidiSong, MidiError> {
    let mut reader = Reader::new(bytes);

    let magic = reader.take(4)?;
    if magic != b"MThd" {
        return Err(MidiError::BadHeader { offset: 0 });
    }
    let header_len = reader.u32()?;
    if header_len != 6 {
        return Err(MidiError::BadHeader { offset: 4 });
    }
    let format = reader.u16()?;
    if format > 1 {
        return Err(MidiError::UnsupportedFormat(format));
    }
    let track_count = reader.u16()?;
    let division = reader.u16()?;
    if division & 0x8000 != 0 {
        return Err(MidiError::SmpteTiming);
    }
    if division == 0 {
        return Err(MidiError::InvalidEvent {
            offset: 12,
            reason: "zero ticks per quarter note".into(),
        });
    }

    let mut tempo_events: Vec<TempoEvent> = Vec::new();
    let mut time_signature_events: Vec<TimeSignatureEvent> = Vec::new();
    let mut raw_notes: Vec<(u64, u64, u8)> = Vec::new(); // (start_tick, end_tick, pitch)
    let mut max_tick = 0u64;

    let mut tracks_read = 0;
    while tracks_read < track_count {
        let chunk_offset = reader.pos;
        let chunk_type = reader.take(4)?.to_vec();
        let chunk_len = reader.u32()? as usize;
        if reader.pos + chunk_len > bytes.len() {
            return Err(MidiError::Truncated {
                offset: chunk_offset,
            });
        }
        if &chunk_type != b"MTrk" {
            // Unknown chunks are skipped per the SMF spec.
            reader.skip(chunk_len)?;
            continue;
        }
        let track_end = reader.pos + chunk_len;
        parse_track(
            &mut reader,
            track_end,
            &mut tempo_events,
            &mut time_signature_events,
            &mut raw_notes,
            &mut max_tick,
        )?;
        reader.pos = track_end;
        tracks_read += 1;
    }

    dedup_last_wins(&mut tempo_events, |e| e.tick);
    dedup_last_wins(&mut time_signature_events, |e| e.tick);
    if tempo_events.first().map_or(true, |e| e.tick > 0) {
        tempo_events.insert(
            0,
            TempoEvent {
                tick: 0,
                microseconds_per_quarter: DEFAULT_TEMPO,
            },
        );
    }
    if time_signature_events.first().map_or(true, |e| e.tick > 0) {
        time_signature_events.insert(
            0,
            TimeSignatureEvent {
                tick: 0,
                numerator: 4,
                denominator: 4,
            },
        );
    }

    let map = TempoMap::from_events(division, &tempo_events);
    let mut notes: Vec<Note> = raw_notes
        .iter()
        .map(|&(start, end, pitch)| Note {
            pitch,
            start_seconds: map.ticks_to_seconds(start as f64),
            end_seconds: map.ticks_to_seconds(end as f64),
        })
        .collect();
    notes.sort_by(|a, b| {
        a.start_seconds
            .partial_cmp(&b.start_seconds)
            .unwrap()
            .then(a.pitch.cmp(&b.pitch))
    });

    Ok(MidiSong {
        ticks_per_quarter: division,
        tempo_events,
        time_signature_events,
        notes,
        duration_seconds: map.ticks_to_seconds(max_tick as f64),
    })
}

fn parse_track(
    reader: &mut Reader<'_>,
    track_end: usize,
    tempo_events: &mut Vec<TempoEvent>,
    time_signature_events: &mut Vec<TimeSignatureEvent>,
    notes: &mut Vec<(u64, u64, u8)>,
    max_tick: &mut u64,
) -> Result<(), MidiError> {
    let mut tick = 0u64;
    let mut running_status: Option<u8> = None;
    // Open note-ons per (channel, pitch), closed first-on-first-off.
    let mut open: HashMap<(u8, u8), Vec<u64>> = HashMap::new();

    while reader.pos < track_end {
        tick += reader.vlq(track_end)? as u64;
        *max_tick = (*max_tick).max(tick);

        let status_offset = reader.pos;
        let first = reader.u8(track_end)?;
        let status = if first & 0x80 != 0 {
            first
        } else {
            reader.pos -= 1; // data byte, reuse previous status
            running_status.ok_or_else(|| MidiError::InvalidEvent {
                offset: status_offset,
                reason: "data byte without running status".into(),
            })?
        };

        match status {
            0x80..=0xEF => {
                running_status = Some(status);
                let channel = status & 0x0F;
                match status & 0xF0 {
                    0x80 => {
                        let key = reader.u8(track_end)?;
                        let _vel = reader.u8(track_end)?;
                        close_note(&mut open, notes, channel, key, tick);
                    }
                    0x90 => {
                        let key = reader.u8(track_end)?;
                        let vel = reader.u8(track_end)?;
                        if vel == 0 {
                            close_note(&mut open, notes, channel, key, tick);
                        } else {
                            open.entry((channel, key)).or_default().push(tick);
                        }
                    }
                    0xC0 | 0xD0 => {
                        reader.u8(track_end)?;
                    }
                    _ => {
                        reader.u8(track_end)?;
                        reader.u8(track_end)?;
                    }
                }
            }
            0xF0 | 0xF7 => {
                running_status = None;
                let len = reader.vlq(track_end)? as usize;
                reader.skip_within(len, track_end)?;
            }
            0xFF => {
                running_status = None;
                let meta_type = reader.u8(track_end)?;
                let len = reader.vlq(track_end)? as usize;
                let data_offset = reader.pos;
                let data = reader.take_within(len, track_end)?;
                match meta_type {
                    0x51 => {
                        if data.len() != 3 {
                            return Err(MidiError::InvalidEvent {
                                offset: data_offset,
                                reason: format!("tempo meta event with length {}", data.len()),
                            });
                        }
                        let us =
                            u32::from(data[0]) << 16 | u32::from(data[1]) << 8 | u32::from(data[2]);
                        if us == 0 {
                            return Err(MidiError::InvalidEvent {
                                offset: data_offset,
                                reason: "zero microseconds per quarter note".into(),
                            });
                        }
                        tempo_events.push(TempoEvent {
                            tick,
                            microseconds_per_quarter: us,
                        });
                    }
                    0x58 => {
                        if data.len() < 2 {
                            return Err(MidiError::InvalidEvent {
                                offset: data_offset,
                                reason: format!(
                                    "time signature meta event with length {}",
                                    data.len()
                                ),
                            });
                        }
                        let (numerator, exponent) = (data[0], data[1]);
                        if numerator == 0 || exponent > 9 {
                            return Err(MidiError::InvalidEvent {
                                offset: data_offset,
                                reason: format!(
                                    "time signature {}/2^{} out of range",
                                    numerator, exponent
                                ),
                            });
                        }
                        time_signature_events.push(TimeSignatureEvent {
                            tick,
                            numerator,
                            denominator: 1u16 << exponent,
                        });
                    }
                    0x2F => break, // end of track
                    _ => {}
                }
            }
            _ => {
                return Err(MidiError::InvalidEvent {
                    offset: status_offset,
                    reason: format!("unexpected status byte 0x{status:02X}"),
                });
            }
        }
    }

    // Notes left open at end of track close at the final tick.
    for ((_, pitch), starts) in open {
        for start in starts {
            notes.push((start, tick.max(start), pitch));
        }
    }
    Ok(())
}

fn close_note(
    open: &mut HashMap<(u8, u8), Vec<u64>>,
    notes: &mut Vec<(u64, u64, u8)>,
    channel: u8,
    key: u8,
    tick: u64,
) {
    if let Some(starts) = open.get_mut(&(channel, key)) {
        if !starts.is_empty() {
            let start = starts.remove(0);
            notes.push((start, tick, key));
        }
    }
}

/// Sort by key (stable) and keep only the last element of each key run.
fn dedup_last_wins<T: Copy, K: Ord>(events: &mut Vec<T>, key: impl Fn(&T) -> K) {
    events.sort_by_key(|e| key(e));
    let mut kept: Vec<T> = Vec::with_capacity(events.len());
    for &event in events.iter() {
        if kept.last().map(|k| key(k) == key(&event)).unwrap_or(false) {
            *kept.last_mut().unwrap() = event;
        } else {
            kept.push(event);
        }
    }
    *events = kept;
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.pos + n > self.bytes.len() {
            return Err(MidiError::Truncated { offset: self.pos });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_within(&mut self, n: usize, end: usize) -> Result<&'a [u8], MidiError> {
        if self.pos + n > end {
            return Err(MidiError::Truncated { offset: self.pos });
        }
        self.take(n)
    }

    fn skip(&mut self, n: usize) -> Result<(), MidiError> {
        self.take(n).map(|_| ())
    }

    fn skip_within(&mut self, n: usize, end: usize) -> Result<(), MidiError> {
        self.take_within(n, end).map(|_| ())
    }

    fn u8(&mut self, end: usize) -> Result<u8, MidiError> {
        Ok(self.take_within(1, end)?[0])
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity: 7 bits per byte, high bit marks continuation.
    fn vlq(&mut self, end: usize) -> Result<u32, MidiError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let byte = self.u8(end)?;
            value = value << 7 | u32::from(byte & 0x7F);
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiError::InvalidEvent {
            offset: start,
            reason: "variable-length quantity longer than 4 bytes".into(),
        })
    }
}
