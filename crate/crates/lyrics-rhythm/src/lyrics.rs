//! Lyric text processing: tokenization, syllabic stress patterns, and
//! keyword extraction.
//!
//! Stress patterns come from a pronouncing dictionary (first variant only,
//! secondary stress folded into primary). Words the dictionary does not know
//! are stemmed of non-syllabic endings and syllabified by vowel groups, with
//! the first syllable stressed.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::pattern::{BinaryPattern, PatternKind};

/// Contraction endings that contribute no syllable of their own; the part
/// before the apostrophe is what gets pronounced.
const CONTRACTION_SUFFIXES: [&str; 7] = ["re", "t", "ve", "ll", "d", "s", "m"];

#[derive(Debug, Error)]
pub enum LyricsError {
    #[error("dictionary line {line} is malformed: {reason}")]
    DictParse { line: usize, reason: String },
    #[error("keyword ratio must be in (0, 1], got {0}")]
    InvalidKeywordRatio(f64),
}

/// A lyric token: the surface form plus the head used for dictionary lookup
/// (contraction suffixes merged away, apostrophes stripped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub head: String,
}

impl Token {
    fn new(text: String) -> Self {
        let head = match text.rsplit_once('\'') {
            Some((stem, suffix))
                if !stem.is_empty() && CONTRACTION_SUFFIXES.contains(&suffix) =>
            {
                stem.replace('\'', "")
            }
            _ => text.replace('\'', ""),
        };
        Token { text, head }
    }
}

/// Tokenize lyric text: case-fold, drop punctuation, and merge contraction
/// suffixes into their head word so they contribute no syllable.
pub fn preprocess_lyrics(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() || ch == '\'' {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            push_token(&mut tokens, std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        push_token(&mut tokens, current);
    }
    tokens
}

fn push_token(tokens: &mut Vec<Token>, raw: String) {
    let trimmed = raw.trim_matches('\'');
    if !trimmed.is_empty() {
        tokens.push(Token::new(trimmed.to_string()));
    }
}

/// A pronouncing dictionary in the plain-text `WORD  PH1 PH2 ...` format.
///
/// Comment lines starting with `;;;` are ignored and alternate
/// pronunciations (`WORD(2)`) are skipped: only the first variant of every
/// word is kept. Entries whose phonemes carry no stress digit are dropped
/// (counted in [`skipped_entries`](Self::skipped_entries)).
#[derive(Debug, Clone, Default)]
pub struct PronouncingDictionary {
    entries: HashMap<String, Vec<String>>,
    skipped_entries: usize,
}

impl PronouncingDictionary {
    /// The dictionary shipped with the crate: a starter set of common
    /// English words, overridable from the CLI with `--dict`.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../assets/en_core.dict"))
            .expect("bundled dictionary must parse")
    }

    pub fn parse(text: &str) -> Result<Self, LyricsError> {
        let mut entries = HashMap::new();
        let mut skipped_entries = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().ok_or_else(|| LyricsError::DictParse {
                line: i + 1,
                reason: "missing word".into(),
            })?;
            if word.contains('(') {
                continue; // alternate pronunciation
            }
            let phonemes: Vec<String> = fields.map(str::to_string).collect();
            if phonemes.is_empty() {
                return Err(LyricsError::DictParse {
                    line: i + 1,
                    reason: format!("no phonemes for {word}"),
                });
            }
            if !phonemes.iter().any(|p| p.ends_with(|c: char| c.is_ascii_digit())) {
                skipped_entries += 1;
                continue;
            }
            entries
                .entry(word.to_uppercase())
                .or_insert(phonemes);
        }
        Ok(PronouncingDictionary {
            entries,
            skipped_entries,
        })
    }

    pub fn lookup(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_uppercase()).map(Vec::as_slice)
    }

    /// Stress digits of the first variant, secondary stress (2) folded to 1.
    pub fn stress_pattern(&self, word: &str) -> Option<String> {
        self.lookup(word).map(|phonemes| {
            phonemes
                .iter()
                .filter_map(|p| p.chars().last().filter(char::is_ascii_digit))
                .map(|d| if d == '0' { '0' } else { '1' })
                .collect()
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn skipped_entries(&self) -> usize {
        self.skipped_entries
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// A stopword set, one word per line.
#[derive(Debug, Clone, Default)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// The general-text stop list shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../assets/stopwords_en.txt"))
    }

    pub fn parse(text: &str) -> Self {
        Stopwords {
            words: text
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        }
    }

    /// A token is a stopword when its surface or its head is listed.
    pub fn matches(&self, token: &Token) -> bool {
        self.words.contains(&token.text) || self.words.contains(&token.head)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Per-token stress strings over {0, 1}, aligned 1:1 with the token list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StressPatternList {
    patterns: Vec<String>,
    warnings: Vec<String>,
}

impl StressPatternList {
    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// One flag per syllable across all tokens, in order.
    pub fn flatten(&self) -> Vec<bool> {
        self.patterns
            .iter()
            .flat_map(|p| p.chars().map(|c| c == '1'))
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn from_strings(patterns: &[&str]) -> Self {
        StressPatternList {
            patterns: patterns.iter().map(|s| s.to_string()).collect(),
            warnings: vec![],
        }
    }
}

/// Identify the syllabic stress pattern of every token.
///
/// Dictionary hits emit the first variant's stress digits (2 mapped to 1).
/// Unknown words are stemmed of non-syllabic endings and syllabified by
/// vowel groups with the first syllable stressed. Single-syllable patterns
/// normalize to "1". A token with no vowels at all gets "1" and a warning.
pub fn stress_patterns(tokens: &[Token], dict: &PronouncingDictionary) -> StressPatternList {
    let mut patterns = Vec::with_capacity(tokens.len());
    let mut warnings = Vec::new();
    for token in tokens {
        let mut pattern = match dict.stress_pattern(&token.head) {
            Some(p) if !p.is_empty() => p,
            _ => {
                let stem = strip_non_syllabic_suffix(&token.head);
                let syllables = vowel_group_count(stem);
                if syllables == 0 {
                    warnings.push(format!(
                        "no vowels and no dictionary entry for {:?}, assuming one syllable",
                        token.text
                    ));
                    "1".to_string()
                } else {
                    let mut p = String::with_capacity(syllables);
                    p.push('1');
                    p.extend(std::iter::repeat('0').take(syllables - 1));
                    p
                }
            }
        };
        if pattern.len() == 1 {
            pattern = "1".to_string();
        }
        patterns.push(pattern);
    }
    StressPatternList { patterns, warnings }
}

/// Total lyrical syllables: the sum of all stress-pattern lengths.
pub fn count_syllables(patterns: &StressPatternList) -> usize {
    patterns.patterns().iter().map(String::len).sum()
}

/// Strip a trailing suffix that carries no syllable of its own: "ed" after a
/// consonant other than t/d, "es" after a consonant that is not sibilant-ish,
/// and a plain plural "s". "ing" always sounds, so it is never stripped.
fn strip_non_syllabic_suffix(word: &str) -> &str {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n > 2 && word.ends_with("ed") {
        let prev = chars[n - 3];
        if !is_plain_vowel(prev) && prev != 't' && prev != 'd' {
            return &word[..word.len() - 2];
        }
    } else if n > 2 && word.ends_with("es") {
        let prev = chars[n - 3];
        if !is_plain_vowel(prev) && !matches!(prev, 's' | 'x' | 'z' | 'c' | 'g' | 'h') {
            return &word[..word.len() - 2];
        }
    } else if n > 1 && word.ends_with('s') && !word.ends_with("ss") {
        return &word[..word.len() - 1];
    }
    word
}

fn is_plain_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Count syllables as maximal vowel groups. `y` is vocalic only between
/// consonants or word-final; a word-final silent "e" after a consonant is
/// not its own syllable (except in a consonant + "le" ending).
fn vowel_group_count(word: &str) -> usize {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let vocalic: Vec<bool> = chars
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if is_plain_vowel(c) {
                true
            } else if c == 'y' {
                let prev_consonant = i > 0 && !is_plain_vowel(chars[i - 1]);
                let next_consonant = i + 1 >= n || !is_plain_vowel(chars[i + 1]);
                (i + 1 == n || (prev_consonant && next_consonant)) && i > 0 || (n == 1)
            } else {
                false
            }
        })
        .collect();

    let mut groups = 0;
    for i in 0..n {
        if vocalic[i] && (i == 0 || !vocalic[i - 1]) {
            groups += 1;
        }
    }

    // word-final silent e
    if groups > 1 && n >= 2 && chars[n - 1] == 'e' && !vocalic[n - 2] {
        let consonant_le = n >= 3 && chars[n - 2] == 'l' && !vocalic[n - 3];
        if !consonant_le {
            groups -= 1;
        }
    }
    groups
}

/// Extract lyrical keywords into the word-level Keyword Pattern.
///
/// Scoring is deterministic: stopwords are out, remaining types rank by
/// term frequency with ties broken by earlier first occurrence, and the top
/// `ceil(k_ratio * types)` types are flagged at every occurrence.
pub fn extract_keywords(
    tokens: &[Token],
    stopwords: &Stopwords,
    k_ratio: f64,
) -> Result<BinaryPattern, LyricsError> {
    if !(k_ratio > 0.0 && k_ratio <= 1.0) {
        return Err(LyricsError::InvalidKeywordRatio(k_ratio));
    }

    let mut order: Vec<&str> = Vec::new();
    let mut candidates: HashMap<&str, (usize, usize)> = HashMap::new(); // type -> (tf, first)
    for (i, token) in tokens.iter().enumerate() {
        if stopwords.matches(token) {
            continue;
        }
        let entry = candidates.entry(token.text.as_str()).or_insert_with(|| {
            order.push(token.text.as_str());
            (0, i)
        });
        entry.0 += 1;
    }

    let mut ranked: Vec<&str> = order.clone();
    ranked.sort_by(|a, b| {
        let (tf_a, first_a) = candidates[a];
        let (tf_b, first_b) = candidates[b];
        tf_b.cmp(&tf_a).then(first_a.cmp(&first_b))
    });
    let keep = (k_ratio * ranked.len() as f64).ceil() as usize;
    let selected: HashSet<&str> = ranked.into_iter().take(keep).collect();

    let flags = tokens
        .iter()
        .map(|t| selected.contains(t.text.as_str()))
        .collect();
    Ok(BinaryPattern::new(PatternKind::Keyword, flags))
}
