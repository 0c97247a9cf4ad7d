//! Matching statistics: conditional probability of keywords (and stressed
//! syllables) landing on strong beats, cosine similarity between patterns,
//! and dataset-level aggregation.

use serde::Serialize;
use thiserror::Error;

use crate::align::AlignmentIndexMap;
use crate::meter::BeatGrid;
use crate::pattern::{BinaryPattern, SongPatterns};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("conditional probability undefined: empty conditioning event set")]
    UndefinedProbability,
    #[error("joint count {joint} exceeds condition count {condition}")]
    InvalidCounts { joint: usize, condition: usize },
    #[error("cosine similarity undefined for an all-zero vector")]
    ZeroVector,
    #[error("pattern length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("pronunable {position} located on beat {index}, outside the {len}-beat grid")]
    BeatIndexOutOfRange {
        position: usize,
        index: usize,
        len: usize,
    },
    #[error("cannot summarize an empty dataset")]
    EmptyDataset,
}

/// Conditional probability from event counts: joint over condition.
pub fn conditional_probability(
    joint_count: usize,
    condition_count: usize,
) -> Result<f64, MetricsError> {
    if condition_count == 0 {
        return Err(MetricsError::UndefinedProbability);
    }
    if joint_count > condition_count {
        return Err(MetricsError::InvalidCounts {
            joint: joint_count,
            condition: condition_count,
        });
    }
    Ok(joint_count as f64 / condition_count as f64)
}

/// Cosine similarity between two binary patterns: dot product over the
/// product of Euclidean norms. Errors on length mismatch or an all-zero
/// operand (undefined angle).
pub fn cosine_similarity(a: &BinaryPattern, b: &BinaryPattern) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    let norm_a = a.popcount();
    let norm_b = b.popcount();
    if norm_a == 0 || norm_b == 0 {
        return Err(MetricsError::ZeroVector);
    }
    let dot = a
        .flags()
        .iter()
        .zip(b.flags())
        .filter(|(&x, &y)| x && y)
        .count();
    Ok(dot as f64 / ((norm_a as f64).sqrt() * (norm_b as f64).sqrt()))
}

/// Beat-level and pattern-level counts behind the per-song statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MatchCounts {
    pub total_beats: usize,
    pub strong_beats: usize,
    pub keyword_on_strong: usize,
    pub stress_on_strong: usize,
    pub words: usize,
    pub pronunables: usize,
}

/// Per-song matching statistics.
///
/// Cosines are `None` when one operand was all-zero; the song is excluded
/// from that metric with a warning instead of failing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchStats {
    pub p_keyword_given_strong: f64,
    pub p_stress_given_strong: f64,
    pub p_strong: f64,
    pub p_joint_keyword: f64,
    pub p_joint_stress: f64,
    pub cos_wpsp_kp: Option<f64>,
    pub cos_psp_stress: Option<f64>,
    pub cos_psp_sssp: Option<f64>,
    pub counts: MatchCounts,
    pub warnings: Vec<String>,
}

/// Options for the per-song metric computation.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsOptions {
    /// Restrict the event space to beats carrying at least one pronunable,
    /// leaving rest-period beats out of the denominators.
    pub exclude_rest_beats: bool,
}

/// Compute matching statistics for one song.
///
/// The event space is every music beat in the grid (strong beats include
/// rest periods unless `exclude_rest_beats` is set). A beat counts once per
/// event no matter how many pronunables it carries; the cosine metrics stay
/// pattern-level.
pub fn analyze_song(
    grid: &BeatGrid,
    located: &AlignmentIndexMap,
    patterns: &SongPatterns,
    options: MetricsOptions,
) -> Result<MatchStats, MetricsError> {
    let beats = grid.len();
    if located.len() != patterns.psp.len() {
        return Err(MetricsError::LengthMismatch(
            located.len(),
            patterns.psp.len(),
        ));
    }

    // keyword flag per pronunable, expanded from the word-level KP
    let mut keyword_pronunable = vec![false; located.len()];
    for span in &patterns.spans {
        if patterns.kp.get(span.word_index) {
            for i in span.pronunable_range.clone() {
                keyword_pronunable[i] = true;
            }
        }
    }

    let mut occupied = vec![false; beats];
    let mut keyword_beat = vec![false; beats];
    let mut stress_beat = vec![false; beats];
    for (position, &index) in located.indices.iter().enumerate() {
        if index >= beats {
            return Err(MetricsError::BeatIndexOutOfRange {
                position,
                index,
                len: beats,
            });
        }
        occupied[index] = true;
        keyword_beat[index] |= keyword_pronunable[position];
        stress_beat[index] |= patterns.stress.get(position);
    }

    let in_space = |beat: usize| !options.exclude_rest_beats || occupied[beat];
    let mut total_beats = 0;
    let mut strong_beats = 0;
    let mut keyword_on_strong = 0;
    let mut stress_on_strong = 0;
    for beat in 0..beats {
        if !in_space(beat) {
            continue;
        }
        total_beats += 1;
        if grid.sp.get(beat) {
            strong_beats += 1;
            keyword_on_strong += usize::from(keyword_beat[beat]);
            stress_on_strong += usize::from(stress_beat[beat]);
        }
    }

    let p_strong = conditional_probability(strong_beats, total_beats)?;
    let p_joint_keyword = conditional_probability(keyword_on_strong, total_beats)?;
    let p_joint_stress = conditional_probability(stress_on_strong, total_beats)?;
    let p_keyword_given_strong = conditional_probability(keyword_on_strong, strong_beats)?;
    let p_stress_given_strong = conditional_probability(stress_on_strong, strong_beats)?;

    let mut warnings = Vec::new();
    let mut cosine = |name: &str, a: &BinaryPattern, b: &BinaryPattern| {
        match cosine_similarity(a, b) {
            Ok(value) => Ok(Some(value)),
            Err(MetricsError::ZeroVector) => {
                warnings.push(format!("{name} undefined: all-zero pattern"));
                Ok(None)
            }
            Err(other) => Err(other),
        }
    };
    let cos_wpsp_kp = cosine("cos_wpsp_kp", &patterns.wpsp, &patterns.kp)?;
    let cos_psp_stress = cosine("cos_psp_stress", &patterns.psp, &patterns.stress)?;
    let cos_psp_sssp = cosine("cos_psp_sssp", &patterns.psp, &patterns.sssp)?;

    Ok(MatchStats {
        p_keyword_given_strong,
        p_stress_given_strong,
        p_strong,
        p_joint_keyword,
        p_joint_stress,
        cos_wpsp_kp,
        cos_psp_stress,
        cos_psp_sssp,
        counts: MatchCounts {
            total_beats,
            strong_beats,
            keyword_on_strong,
            stress_on_strong,
            words: patterns.kp.len(),
            pronunables: located.len(),
        },
        warnings,
    })
}

/// One probability band of the cluster summary, e.g. `>= 0.90`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub op: BandOp,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BandOp {
    Ge,
    Le,
    Lt,
}

impl Band {
    pub fn ge(threshold: f64) -> Self {
        Band {
            op: BandOp::Ge,
            threshold,
        }
    }

    pub fn le(threshold: f64) -> Self {
        Band {
            op: BandOp::Le,
            threshold,
        }
    }

    pub fn lt(threshold: f64) -> Self {
        Band {
            op: BandOp::Lt,
            threshold,
        }
    }

    pub fn label(&self) -> String {
        let symbol = match self.op {
            BandOp::Ge => ">=",
            BandOp::Le => "<=",
            BandOp::Lt => "<",
        };
        format!("{symbol}{:.2}", self.threshold)
    }

    fn contains(&self, value: f64) -> bool {
        match self.op {
            BandOp::Ge => value >= self.threshold,
            BandOp::Le => value <= self.threshold,
            BandOp::Lt => value < self.threshold,
        }
    }
}

/// Probability and similarity bands reported in the dataset summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandConfig {
    pub probability_bands: Vec<Band>,
    pub similarity_bands: Vec<Band>,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            probability_bands: vec![Band::ge(0.90), Band::lt(0.65)],
            similarity_bands: vec![Band::ge(0.80), Band::ge(0.70), Band::le(0.55)],
        }
    }
}

/// Fractions of songs falling in one band, for the keyword metric and the
/// stressed-syllable metric side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandFraction {
    pub band: String,
    pub keyword: f64,
    pub stress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count_keyword: usize,
    pub count_stress: usize,
}

/// Fixed-width histogram over [0, 1], right-closed bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.05;

fn bin_index(value: f64, bin_count: usize) -> usize {
    if value <= 0.0 {
        return 0;
    }
    let idx = (value / HISTOGRAM_BIN_WIDTH - 1e-9).ceil() as usize;
    idx.saturating_sub(1).min(bin_count - 1)
}

/// Dataset-level aggregation of per-song statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub songs: usize,
    pub avg_p_keyword: f64,
    pub avg_p_stress: f64,
    pub avg_cos_wpsp_kp: Option<f64>,
    pub avg_cos_psp_stress: Option<f64>,
    pub avg_cos_psp_sssp: Option<f64>,
    pub histogram: Histogram,
    pub probability_bands: Vec<BandFraction>,
    pub similarity_bands: Vec<BandFraction>,
}

/// Aggregate per-song statistics: averages, the probability histogram, and
/// band fractions for the keyword and stressed-syllable metrics.
///
/// Band fractions for similarities are taken over the songs where the
/// corresponding cosine is defined.
pub fn summarize_dataset(
    stats: &[MatchStats],
    bands: &BandConfig,
) -> Result<DatasetSummary, MetricsError> {
    if stats.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let songs = stats.len();

    let mean = |values: &mut dyn Iterator<Item = f64>| -> Option<f64> {
        let collected: Vec<f64> = values.collect();
        (!collected.is_empty())
            .then(|| collected.iter().sum::<f64>() / collected.len() as f64)
    };

    let avg_p_keyword =
        stats.iter().map(|s| s.p_keyword_given_strong).sum::<f64>() / songs as f64;
    let avg_p_stress = stats.iter().map(|s| s.p_stress_given_strong).sum::<f64>() / songs as f64;
    let avg_cos_wpsp_kp = mean(&mut stats.iter().filter_map(|s| s.cos_wpsp_kp));
    let avg_cos_psp_stress = mean(&mut stats.iter().filter_map(|s| s.cos_psp_stress));
    let avg_cos_psp_sssp = mean(&mut stats.iter().filter_map(|s| s.cos_psp_sssp));

    let bin_count = (1.0 / HISTOGRAM_BIN_WIDTH).round() as usize;
    let mut bins: Vec<HistogramBin> = (0..bin_count)
        .map(|i| HistogramBin {
            lo: i as f64 * HISTOGRAM_BIN_WIDTH,
            hi: (i + 1) as f64 * HISTOGRAM_BIN_WIDTH,
            count_keyword: 0,
            count_stress: 0,
        })
        .collect();
    for s in stats {
        bins[bin_index(s.p_keyword_given_strong, bin_count)].count_keyword += 1;
        bins[bin_index(s.p_stress_given_strong, bin_count)].count_stress += 1;
    }

    let probability_bands = bands
        .probability_bands
        .iter()
        .map(|band| BandFraction {
            band: band.label(),
            keyword: fraction(stats.iter().map(|s| Some(s.p_keyword_given_strong)), band),
            stress: fraction(stats.iter().map(|s| Some(s.p_stress_given_strong)), band),
        })
        .collect();
    let similarity_bands = bands
        .similarity_bands
        .iter()
        .map(|band| BandFraction {
            band: band.label(),
            keyword: fraction(stats.iter().map(|s| s.cos_wpsp_kp), band),
            stress: fraction(stats.iter().map(|s| s.cos_psp_stress), band),
        })
        .collect();

    Ok(DatasetSummary {
        songs,
        avg_p_keyword,
        avg_p_stress,
        avg_cos_wpsp_kp,
        avg_cos_psp_stress,
        avg_cos_psp_sssp,
        histogram: Histogram {
            bin_width: HISTOGRAM_BIN_WIDTH,
            bins,
        },
        probability_bands,
        similarity_bands,
    })
}

fn fraction(values: impl Iterator<Item = Option<f64>>, band: &Band) -> f64 {
    let mut defined = 0usize;
    let mut matching = 0usize;
    for value in values.flatten() {
        defined += 1;
        matching += usize::from(band.contains(value));
    }
    if defined == 0 {
        0.0
    } else {
        matching as f64 / defined as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::AlignmentIndexMap;
    use crate::pattern::{BinaryPattern, PatternKind, WordSpan};

    fn pattern(kind: PatternKind, bits: &[u8]) -> BinaryPattern {
        BinaryPattern::from_bits(kind, bits)
    }

    #[test]
    fn conditional_probability_by_counting() {
        assert_eq!(conditional_probability(9, 10).unwrap(), 0.9);
        assert_eq!(conditional_probability(0, 10).unwrap(), 0.0);
        assert_eq!(conditional_probability(10, 10).unwrap(), 1.0); // perfect landing
        assert!(matches!(
            conditional_probability(1, 0),
            Err(MetricsError::UndefinedProbability)
        ));
        assert!(matches!(
            conditional_probability(3, 2),
            Err(MetricsError::InvalidCounts { .. })
        ));
    }

    #[test]
    fn cosine_similarity_hand_values() {
        let a = pattern(PatternKind::Keyword, &[1, 1, 0]);
        let b = pattern(PatternKind::WordStrongBeat, &[1, 0, 1]);
        assert!((cosine_similarity(&a, &b).unwrap() - 0.5).abs() < 1e-15);

        let same = pattern(PatternKind::Keyword, &[1, 0, 1]);
        assert_eq!(cosine_similarity(&same, &same).unwrap(), 1.0);

        let x = pattern(PatternKind::Keyword, &[1, 0]);
        let y = pattern(PatternKind::Keyword, &[0, 1]);
        assert_eq!(cosine_similarity(&x, &y).unwrap(), 0.0);

        let zero = pattern(PatternKind::Keyword, &[0, 0]);
        assert!(matches!(
            cosine_similarity(&x, &zero),
            Err(MetricsError::ZeroVector)
        ));
        let short = pattern(PatternKind::Keyword, &[1]);
        assert!(matches!(
            cosine_similarity(&x, &short),
            Err(MetricsError::LengthMismatch(2, 1))
        ));
    }

    fn eight_beat_song() -> (BeatGrid, AlignmentIndexMap, SongPatterns) {
        let grid = BeatGrid {
            beat_times: (0..8).map(|i| i as f64 * 0.5).collect(),
            beats_per_measure: 2,
            sp: pattern(PatternKind::StrongBeat, &[1, 0, 1, 0, 1, 0, 1, 0]),
            measure_offsets: vec![0, 2, 4, 6],
        };
        let located = AlignmentIndexMap {
            indices: vec![0, 2, 4],
            interpolated: vec![false; 3],
        };
        let spans = vec![
            WordSpan {
                word_index: 0,
                pronunable_range: 0..1,
            },
            WordSpan {
                word_index: 1,
                pronunable_range: 1..2,
            },
            WordSpan {
                word_index: 2,
                pronunable_range: 2..3,
            },
        ];
        let patterns = SongPatterns {
            psp: pattern(PatternKind::PronunableStrongBeat, &[1, 1, 1]),
            wpsp: pattern(PatternKind::WordStrongBeat, &[1, 1, 1]),
            kp: pattern(PatternKind::Keyword, &[1, 1, 1]),
            sssp: pattern(PatternKind::StressedSyllableStrongBeat, &[1, 1, 1]),
            stress: pattern(PatternKind::SyllableStress, &[1, 1, 1]),
            spans,
            mismatch: None,
        };
        (grid, located, patterns)
    }

    #[test]
    fn analyze_song_counts_beat_level_events() {
        // sp [1,0,1,0,1,0,1,0], keyword pronunables on beats {0,2,4}:
        // joint 3/8, strong 4/8, conditional 0.75 by direct counting.
        let (grid, located, patterns) = eight_beat_song();
        let stats = analyze_song(&grid, &located, &patterns, MetricsOptions::default()).unwrap();
        assert!((stats.p_joint_keyword - 3.0 / 8.0).abs() < 1e-15);
        assert!((stats.p_strong - 0.5).abs() < 1e-15);
        assert!((stats.p_keyword_given_strong - 0.75).abs() < 1e-15);
        assert!(
            (stats.p_keyword_given_strong * stats.p_strong - stats.p_joint_keyword).abs() < 1e-12
        );
        assert_eq!(stats.counts.total_beats, 8);
        assert_eq!(stats.counts.strong_beats, 4);
        assert_eq!(stats.counts.keyword_on_strong, 3);
    }

    #[test]
    fn excluding_rest_beats_shrinks_the_event_space() {
        let (grid, located, patterns) = eight_beat_song();
        let stats = analyze_song(
            &grid,
            &located,
            &patterns,
            MetricsOptions {
                exclude_rest_beats: true,
            },
        )
        .unwrap();
        // only beats 0, 2, 4 are occupied; all strong, all keyword-carrying
        assert_eq!(stats.counts.total_beats, 3);
        assert_eq!(stats.counts.strong_beats, 3);
        assert_eq!(stats.p_keyword_given_strong, 1.0);
    }

    #[test]
    fn perfect_landing_yields_probability_one() {
        let (mut grid, located, patterns) = eight_beat_song();
        // shrink the grid so every strong beat carries a keyword
        grid.beat_times.truncate(6);
        grid.sp = pattern(PatternKind::StrongBeat, &[1, 0, 1, 0, 1, 0]);
        let stats = analyze_song(&grid, &located, &patterns, MetricsOptions::default()).unwrap();
        assert_eq!(stats.p_keyword_given_strong, 1.0);
        assert_eq!(stats.cos_wpsp_kp, Some(1.0));
    }

    #[test]
    fn no_keywords_zeroes_probability_and_drops_cosine() {
        let (grid, located, mut patterns) = eight_beat_song();
        patterns.kp = pattern(PatternKind::Keyword, &[0, 0, 0]);
        let stats = analyze_song(&grid, &located, &patterns, MetricsOptions::default()).unwrap();
        assert_eq!(stats.p_keyword_given_strong, 0.0);
        assert_eq!(stats.cos_wpsp_kp, None);
        assert_eq!(stats.warnings.len(), 1);
    }

    #[test]
    fn out_of_grid_location_is_an_error() {
        let (grid, mut located, patterns) = eight_beat_song();
        located.indices[2] = 99;
        assert!(matches!(
            analyze_song(&grid, &located, &patterns, MetricsOptions::default()),
            Err(MetricsError::BeatIndexOutOfRange { .. })
        ));
    }

    fn stats_with(p_kw: f64, p_stress: f64) -> MatchStats {
        MatchStats {
            p_keyword_given_strong: p_kw,
            p_stress_given_strong: p_stress,
            p_strong: 0.5,
            p_joint_keyword: p_kw * 0.5,
            p_joint_stress: p_stress * 0.5,
            cos_wpsp_kp: Some(p_kw),
            cos_psp_stress: Some(p_stress),
            cos_psp_sssp: None,
            counts: MatchCounts {
                total_beats: 8,
                strong_beats: 4,
                keyword_on_strong: 0,
                stress_on_strong: 0,
                words: 3,
                pronunables: 3,
            },
            warnings: vec![],
        }
    }

    #[test]
    fn summary_band_fractions_count_songs() {
        let stats = vec![
            stats_with(1.0, 0.9),
            stats_with(0.9, 0.6),
            stats_with(0.5, 0.4),
        ];
        let summary = summarize_dataset(&stats, &BandConfig::default()).unwrap();
        let ge90 = &summary.probability_bands[0];
        assert_eq!(ge90.band, ">=0.90");
        assert!((ge90.keyword - 2.0 / 3.0).abs() < 1e-15);
        assert!((ge90.stress - 1.0 / 3.0).abs() < 1e-15);
        assert!((summary.avg_p_keyword - 0.8).abs() < 1e-12);
    }

    #[test]
    fn single_song_average_is_identity() {
        let summary = summarize_dataset(&[stats_with(0.81, 0.77)], &BandConfig::default()).unwrap();
        assert!((summary.avg_p_keyword - 0.81).abs() < 1e-15);
        assert!((summary.avg_p_stress - 0.77).abs() < 1e-15);
    }

    #[test]
    fn empty_dataset_errors() {
        assert!(matches!(
            summarize_dataset(&[], &BandConfig::default()),
            Err(MetricsError::EmptyDataset)
        ));
    }

    #[test]
    fn histogram_bins_are_right_closed_and_total() {
        let stats = vec![
            stats_with(0.0, 1.0),
            stats_with(0.05, 0.051),
            stats_with(1.0, 0.5),
        ];
        let summary = summarize_dataset(&stats, &BandConfig::default()).unwrap();
        let bins = &summary.histogram.bins;
        assert_eq!(bins.len(), 20);
        assert_eq!(bins[0].count_keyword, 2); // 0.0 and 0.05 both in (0, 0.05]
        assert_eq!(bins[1].count_keyword, 0);
        assert_eq!(bins[19].count_keyword, 1);
        let kw_total: usize = bins.iter().map(|b| b.count_keyword).sum();
        let stress_total: usize = bins.iter().map(|b| b.count_stress).sum();
        assert_eq!(kw_total, stats.len());
        assert_eq!(stress_total, stats.len());
        assert_eq!(bins[1].count_stress, 1); // 0.051 falls in (0.05, 0.10]
    }

    #[test]
    fn band_fractions_are_permutation_invariant() {
        let mut stats = vec![
            stats_with(0.95, 0.2),
            stats_with(0.3, 0.8),
            stats_with(0.7, 0.7),
            stats_with(0.91, 0.64),
        ];
        let forward = summarize_dataset(&stats, &BandConfig::default()).unwrap();
        stats.reverse();
        let backward = summarize_dataset(&stats, &BandConfig::default()).unwrap();
        assert_eq!(forward.probability_bands, backward.probability_bands);
        assert_eq!(forward.similarity_bands, backward.similarity_bands);
    }
}
