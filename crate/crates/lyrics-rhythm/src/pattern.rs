//! Binary pattern types and the patterning steps that bridge lyric tokens to
//! located beats: PSP, WPSP, SSSP, and pronunable-syllable matching.

use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::align::AlignmentIndexMap;
use crate::lyrics::StressPatternList;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pronunable {position} maps to beat {index}, outside the {len}-beat pattern")]
    IndexOutOfRange {
        position: usize,
        index: usize,
        len: usize,
    },
    #[error(
        "syllable/pronunable count mismatch: {} pronunables vs {} syllables (delta {:+})",
        .0.pronunable_count, .0.syllable_count, .0.delta
    )]
    SyllableMismatch(MismatchReport),
    #[error("word spans do not partition the pronunable range: {0}")]
    NonPartitioningSpans(String),
    #[error("pattern length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// What a 0/1 flag sequence of a [`BinaryPattern`] stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PatternKind {
    /// SP: strong flag per music beat.
    StrongBeat,
    /// PSP: strong-beat landing flag per pronunable.
    PronunableStrongBeat,
    /// WPSP: per word, any of its pronunables lands on a strong beat.
    WordStrongBeat,
    /// KP: keyword flag per word.
    Keyword,
    /// SSSP: stressed syllable landing on a strong beat, per syllable.
    StressedSyllableStrongBeat,
    /// Lexical stress flag per syllable (the second operand of the
    /// PSP-vs-stress similarity).
    SyllableStress,
}

impl PatternKind {
    pub fn code(&self) -> &'static str {
        match self {
            PatternKind::StrongBeat => "SP",
            PatternKind::PronunableStrongBeat => "PSP",
            PatternKind::WordStrongBeat => "WPSP",
            PatternKind::Keyword => "KP",
            PatternKind::StressedSyllableStrongBeat => "SSSP",
            PatternKind::SyllableStress => "STRESS",
        }
    }
}

/// A 0/1 flag sequence with a fixed kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryPattern {
    kind: PatternKind,
    flags: Vec<bool>,
}

impl BinaryPattern {
    pub fn new(kind: PatternKind, flags: Vec<bool>) -> Self {
        BinaryPattern { kind, flags }
    }

    pub fn from_bits(kind: PatternKind, bits: &[u8]) -> Self {
        BinaryPattern {
            kind,
            flags: bits.iter().map(|&b| b != 0).collect(),
        }
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn get(&self, index: usize) -> bool {
        self.flags[index]
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Flags as 0/1 integers, the form used in reports.
    pub fn bits(&self) -> Vec<u8> {
        self.flags.iter().map(|&f| u8::from(f)).collect()
    }
}

/// The contiguous run of pronunables assigned to one word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSpan {
    pub word_index: usize,
    pub pronunable_range: Range<usize>,
}

/// Diagnostic counts for a syllable/pronunable count mismatch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MismatchReport {
    pub pronunable_count: usize,
    pub syllable_count: usize,
    /// pronunables minus syllables
    pub delta: i64,
    pub per_word_syllables: Vec<usize>,
}

/// Word spans plus the mismatch report when counts disagreed within
/// tolerance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyllableMatch {
    pub spans: Vec<WordSpan>,
    pub mismatch: Option<MismatchReport>,
}

/// Match pronunables to lyrical syllables by comparing totals.
///
/// When the total syllable count equals the pronunable count, pronunables
/// are assigned to words in order, one per syllable. A mismatch within
/// `tolerance` truncates or pads at the tail (extra pronunables extend the
/// last word, missing ones leave trailing words empty) and reports the
/// delta; beyond tolerance the song is unanalyzable.
pub fn match_pronunables_to_syllables(
    pronunable_count: usize,
    patterns: &StressPatternList,
    tolerance: usize,
) -> Result<SyllableMatch, PatternError> {
    let per_word_syllables: Vec<usize> = patterns.patterns().iter().map(String::len).collect();
    let syllable_count: usize = per_word_syllables.iter().sum();
    let delta = pronunable_count as i64 - syllable_count as i64;

    if delta.unsigned_abs() as usize > tolerance {
        return Err(PatternError::SyllableMismatch(MismatchReport {
            pronunable_count,
            syllable_count,
            delta,
            per_word_syllables,
        }));
    }

    let mut spans = Vec::with_capacity(per_word_syllables.len());
    let mut next = 0usize;
    for (word_index, &syllables) in per_word_syllables.iter().enumerate() {
        let start = next.min(pronunable_count);
        let end = (next + syllables).min(pronunable_count);
        spans.push(WordSpan {
            word_index,
            pronunable_range: start..end,
        });
        next += syllables;
    }
    // extra pronunables at the tail belong to the last word
    if pronunable_count > syllable_count {
        if let Some(last) = spans.last_mut() {
            last.pronunable_range.end = pronunable_count;
        }
    }

    let mismatch = (delta != 0).then(|| MismatchReport {
        pronunable_count,
        syllable_count,
        delta,
        per_word_syllables,
    });
    Ok(SyllableMatch { spans, mismatch })
}

/// Build the Pronunable Strong-beat Pattern: `PSP[i] = sp[located[i]]`.
pub fn build_psp(
    located: &AlignmentIndexMap,
    sp: &BinaryPattern,
) -> Result<BinaryPattern, PatternError> {
    let flags = located
        .indices
        .iter()
        .enumerate()
        .map(|(position, &index)| {
            if index < sp.len() {
                Ok(sp.get(index))
            } else {
                Err(PatternError::IndexOutOfRange {
                    position,
                    index,
                    len: sp.len(),
                })
            }
        })
        .collect::<Result<Vec<bool>, _>>()?;
    Ok(BinaryPattern::new(PatternKind::PronunableStrongBeat, flags))
}

/// Convert the pronunable-based PSP to the word-based WPSP: a word is
/// flagged when at least one of its pronunables lands on a strong beat.
pub fn psp_to_wpsp(
    psp: &BinaryPattern,
    spans: &[WordSpan],
) -> Result<BinaryPattern, PatternError> {
    let mut covered = 0usize;
    for (i, span) in spans.iter().enumerate() {
        if span.word_index != i {
            return Err(PatternError::NonPartitioningSpans(format!(
                "span {i} carries word index {}",
                span.word_index
            )));
        }
        let range = &span.pronunable_range;
        if range.start > range.end {
            return Err(PatternError::NonPartitioningSpans(format!(
                "span {i} range {range:?} is malformed"
            )));
        }
        if range.is_empty() {
            continue; // truncated tail word, carries no pronunables
        }
        if range.start != covered {
            return Err(PatternError::NonPartitioningSpans(format!(
                "span {i} starts at {} but {covered} pronunables were covered",
                range.start
            )));
        }
        covered = range.end;
    }
    if covered != psp.len() {
        return Err(PatternError::NonPartitioningSpans(format!(
            "spans cover {covered} pronunables, pattern has {}",
            psp.len()
        )));
    }

    let flags = spans
        .iter()
        .map(|span| span.pronunable_range.clone().any(|i| psp.get(i)))
        .collect();
    Ok(BinaryPattern::new(PatternKind::WordStrongBeat, flags))
}

/// Build the Stressed Syllable Strong-beat Pattern: stress AND strong-beat
/// landing, per syllable.
pub fn build_sssp(
    psp: &BinaryPattern,
    stress_flat: &[bool],
) -> Result<BinaryPattern, PatternError> {
    if stress_flat.len() != psp.len() {
        return Err(PatternError::LengthMismatch(stress_flat.len(), psp.len()));
    }
    let flags = psp
        .flags()
        .iter()
        .zip(stress_flat)
        .map(|(&p, &s)| p && s)
        .collect();
    Ok(BinaryPattern::new(
        PatternKind::StressedSyllableStrongBeat,
        flags,
    ))
}

/// All per-song patterns needed by the matching metrics.
#[derive(Debug, Clone)]
pub struct SongPatterns {
    pub psp: BinaryPattern,
    pub wpsp: BinaryPattern,
    pub kp: BinaryPattern,
    pub sssp: BinaryPattern,
    pub stress: BinaryPattern,
    pub spans: Vec<WordSpan>,
    pub mismatch: Option<MismatchReport>,
}

/// Run the patterning steps for one song.
///
/// The flattened stress flags are aligned to the pronunable count: under a
/// tolerated mismatch, extra pronunables repeat the final syllable's flag
/// (melisma continuation) and missing ones truncate.
pub fn build_song_patterns(
    located: &AlignmentIndexMap,
    sp: &BinaryPattern,
    stress_list: &StressPatternList,
    kp: BinaryPattern,
    syllable_match: SyllableMatch,
) -> Result<SongPatterns, PatternError> {
    let psp = build_psp(located, sp)?;
    let wpsp = psp_to_wpsp(&psp, &syllable_match.spans)?;

    let mut stress_flat = stress_list.flatten();
    let last = stress_flat.last().copied().unwrap_or(false);
    stress_flat.resize(psp.len(), last);
    let sssp = build_sssp(&psp, &stress_flat)?;

    Ok(SongPatterns {
        psp,
        wpsp,
        kp,
        sssp,
        stress: BinaryPattern::new(PatternKind::SyllableStress, stress_flat),
        spans: syllable_match.spans,
        mismatch: syllable_match.mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index_map(indices: Vec<usize>) -> AlignmentIndexMap {
        let interpolated = vec![false; indices.len()];
        AlignmentIndexMap {
            indices,
            interpolated,
        }
    }

    fn pattern(kind: PatternKind, bits: &[u8]) -> BinaryPattern {
        BinaryPattern::from_bits(kind, bits)
    }

    fn spans_of(ranges: &[Range<usize>]) -> Vec<WordSpan> {
        ranges
            .iter()
            .enumerate()
            .map(|(word_index, range)| WordSpan {
                word_index,
                pronunable_range: range.clone(),
            })
            .collect()
    }

    #[test]
    fn psp_indexes_strong_pattern() {
        let sp = pattern(PatternKind::StrongBeat, &[1, 0, 1, 0]);
        let psp = build_psp(&index_map(vec![0, 2, 3]), &sp).unwrap();
        assert_eq!(psp.bits(), vec![1, 1, 0]);
    }

    #[test]
    fn empty_location_map_gives_empty_psp() {
        let sp = pattern(PatternKind::StrongBeat, &[1, 0]);
        let psp = build_psp(&index_map(vec![]), &sp).unwrap();
        assert!(psp.is_empty());
    }

    #[test]
    fn melisma_shares_one_beat() {
        let sp = pattern(PatternKind::StrongBeat, &[1, 0]);
        let psp = build_psp(&index_map(vec![0, 0]), &sp).unwrap();
        assert_eq!(psp.bits(), vec![1, 1]);
    }

    #[test]
    fn out_of_range_index_is_an_upstream_bug() {
        let sp = pattern(PatternKind::StrongBeat, &[1, 0]);
        let err = build_psp(&index_map(vec![0, 5]), &sp).unwrap_err();
        assert!(matches!(
            err,
            PatternError::IndexOutOfRange {
                position: 1,
                index: 5,
                len: 2
            }
        ));
    }

    #[test]
    fn exact_syllable_match_partitions_in_order() {
        let patterns = StressPatternList::from_strings(&["10", "10", "1"]);
        let matched = match_pronunables_to_syllables(5, &patterns, 0).unwrap();
        assert!(matched.mismatch.is_none());
        let ranges: Vec<Range<usize>> = matched
            .spans
            .iter()
            .map(|s| s.pronunable_range.clone())
            .collect();
        assert_eq!(ranges, vec![0..2, 2..4, 4..5]);
    }

    #[test]
    fn empty_song_matches_trivially() {
        let matched =
            match_pronunables_to_syllables(0, &StressPatternList::default(), 0).unwrap();
        assert!(matched.spans.is_empty());
        assert!(matched.mismatch.is_none());
    }

    #[test]
    fn mismatch_beyond_tolerance_is_unanalyzable() {
        let patterns = StressPatternList::from_strings(&["10", "10", "1"]);
        let err = match_pronunables_to_syllables(6, &patterns, 0).unwrap_err();
        match err {
            PatternError::SyllableMismatch(report) => {
                assert_eq!(report.delta, 1);
                assert_eq!(report.syllable_count, 5);
                assert_eq!(report.per_word_syllables, vec![2, 2, 1]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tolerated_padding_extends_last_word() {
        let patterns = StressPatternList::from_strings(&["10", "1"]);
        let matched = match_pronunables_to_syllables(5, &patterns, 2).unwrap();
        assert_eq!(matched.spans[1].pronunable_range, 2..5);
        assert_eq!(matched.mismatch.as_ref().unwrap().delta, 2);
    }

    #[test]
    fn tolerated_truncation_leaves_tail_words_empty() {
        let patterns = StressPatternList::from_strings(&["10", "1", "10"]);
        let matched = match_pronunables_to_syllables(3, &patterns, 2).unwrap();
        assert_eq!(matched.spans[0].pronunable_range, 0..2);
        assert_eq!(matched.spans[1].pronunable_range, 2..3);
        assert_eq!(matched.spans[2].pronunable_range, 3..3);
        assert_eq!(matched.mismatch.as_ref().unwrap().delta, -2);
    }

    #[test]
    fn wpsp_is_or_over_word_spans() {
        let psp = pattern(PatternKind::PronunableStrongBeat, &[0, 1, 0, 0, 1]);
        let wpsp = psp_to_wpsp(&psp, &spans_of(&[0..2, 2..4, 4..5])).unwrap();
        assert_eq!(wpsp.bits(), vec![1, 0, 1]);
    }

    #[test]
    fn wpsp_absorbing_and_identity_cases() {
        let zeros = pattern(PatternKind::PronunableStrongBeat, &[0, 0, 0]);
        let wpsp = psp_to_wpsp(&zeros, &spans_of(&[0..1, 1..2, 2..3])).unwrap();
        assert_eq!(wpsp.bits(), vec![0, 0, 0]);

        let psp = pattern(PatternKind::PronunableStrongBeat, &[1, 0, 1]);
        let wpsp = psp_to_wpsp(&psp, &spans_of(&[0..1, 1..2, 2..3])).unwrap();
        assert_eq!(wpsp.bits(), psp.bits());
    }

    #[test]
    fn non_partitioning_spans_error() {
        let psp = pattern(PatternKind::PronunableStrongBeat, &[1, 0, 1]);
        assert!(psp_to_wpsp(&psp, &spans_of(&[0..1, 2..3])).is_err());
        assert!(psp_to_wpsp(&psp, &spans_of(&[0..2])).is_err());
    }

    #[test]
    fn sssp_is_elementwise_and() {
        let psp = pattern(PatternKind::PronunableStrongBeat, &[1, 1, 0]);
        let sssp = build_sssp(&psp, &[true, false, true]).unwrap();
        assert_eq!(sssp.bits(), vec![1, 0, 0]);

        let all_strong = pattern(PatternKind::PronunableStrongBeat, &[1, 1, 1]);
        let sssp = build_sssp(&all_strong, &[true, false, true]).unwrap();
        assert_eq!(sssp.bits(), vec![1, 0, 1]);

        let sssp = build_sssp(&psp, &[false, false, false]).unwrap();
        assert_eq!(sssp.bits(), vec![0, 0, 0]);

        assert!(matches!(
            build_sssp(&psp, &[true]),
            Err(PatternError::LengthMismatch(1, 3))
        ));
    }

    #[test]
    fn song_patterns_pad_stress_for_tolerated_melisma() {
        let sp = pattern(PatternKind::StrongBeat, &[1, 0, 1, 0]);
        let located = index_map(vec![0, 1, 2, 2]);
        let stress_list = StressPatternList::from_strings(&["10", "1"]);
        let matched = match_pronunables_to_syllables(4, &stress_list, 1).unwrap();
        let kp = pattern(PatternKind::Keyword, &[1, 0]);
        let patterns =
            build_song_patterns(&located, &sp, &stress_list, kp, matched).unwrap();
        assert_eq!(patterns.psp.bits(), vec![1, 0, 1, 1]);
        assert_eq!(patterns.stress.bits(), vec![1, 0, 1, 1]); // last flag repeated
        assert_eq!(patterns.wpsp.bits(), vec![1, 1]);
        assert_eq!(patterns.sssp.bits(), vec![1, 0, 1, 1]);
        assert!(patterns.mismatch.is_some());
    }
}
