//! Dictionary-based polarity and subjectivity scoring.
//!
//! A document's polarity is the mean effective polarity of its matched
//! terms, where each match is adjusted by an immediately preceding
//! intensifier and by a negator occurring within the two tokens before
//! the term (or before its intensifier). Scoring expects tokens that were
//! cleaned but not stopword-filtered and not stemmed: negators and
//! intensifiers are stopwords in most lists, and lexicon terms are
//! surface forms.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::ReviewRecord;
use crate::textprep::{normalize, tokenize};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot open {path}: {source}")]
    MissingFile { path: PathBuf, source: io::Error },
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
}

/// How a term participates in scoring. A term is exactly one of these,
/// so it can never be both a negator and an intensifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TermRole {
    Sentiment,
    Negator,
    Intensifier { factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconEntry {
    pub term: String,
    pub polarity: f64,
    pub subjectivity: f64,
    pub role: TermRole,
}

impl LexiconEntry {
    pub fn is_negator(&self) -> bool {
        self.role == TermRole::Negator
    }

    pub fn is_intensifier(&self) -> bool {
        matches!(self.role, TermRole::Intensifier { .. })
    }

    fn validate(&self) -> Result<(), String> {
        if self.term.is_empty() {
            return Err("empty term".into());
        }
        if !(self.polarity.is_finite() && (-1.0..=1.0).contains(&self.polarity)) {
            return Err(format!("polarity {} outside [-1, 1]", self.polarity));
        }
        if !(self.subjectivity.is_finite() && (0.0..=1.0).contains(&self.subjectivity)) {
            return Err(format!("subjectivity {} outside [0, 1]", self.subjectivity));
        }
        if let TermRole::Intensifier { factor } = self.role {
            // the cap keeps any sum of boosted polarities finite; real
            // intensifiers sit in the 1.1 to 3 range anyway
            if !(factor.is_finite() && factor > 0.0 && factor <= 100.0) {
                return Err(format!(
                    "intensifier factor {factor} must be in (0, 100]"
                ));
            }
        }
        Ok(())
    }
}

/// Immutable term table; safe to share across scoring threads.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

impl Lexicon {
    pub fn get(&self, term: &str) -> Option<&LexiconEntry> {
        self.entries.get(term)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A lexicon row that failed validation and was dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the source file.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct LexiconLoad {
    pub lexicon: Lexicon,
    pub rejected: Vec<RejectedRow>,
}

/// Parse one `term,polarity,subjectivity[,negator|intensifier:<factor>]`
/// line. Returns None for blanks and '#' comments.
fn parse_line(line: &str) -> Result<Option<LexiconEntry>, String> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = trimmed.split(',').collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(format!("expected 3 or 4 fields, found {}", fields.len()));
    }
    let term = fields[0].trim().to_lowercase();
    let polarity: f64 = fields[1]
        .trim()
        .parse()
        .map_err(|_| format!("polarity {:?} is not a number", fields[1].trim()))?;
    let subjectivity: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| format!("subjectivity {:?} is not a number", fields[2].trim()))?;
    let role = match fields.get(3).map(|f| f.trim()) {
        None => TermRole::Sentiment,
        Some("negator") => TermRole::Negator,
        Some(field) => match field.strip_prefix("intensifier:") {
            Some(raw) => {
                let factor: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| format!("intensifier factor {:?} is not a number", raw.trim()))?;
                TermRole::Intensifier { factor }
            }
            None => return Err(format!("unknown role {field:?}")),
        },
    };
    let entry = LexiconEntry {
        term,
        polarity,
        subjectivity,
        role,
    };
    entry.validate()?;
    Ok(Some(entry))
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<LexiconLoad, LexiconError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| LexiconError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    load_lexicon_from_reader(file)
}

/// Read a lexicon, dropping invalid rows individually rather than failing
/// the whole load. A duplicated term keeps its last definition.
pub fn load_lexicon_from_reader(reader: impl Read) -> Result<LexiconLoad, LexiconError> {
    let mut lexicon = Lexicon::default();
    let mut rejected = Vec::new();
    for (index, line) in BufReader::new(reader).lines().enumerate() {
        let line_number = index + 1;
        match parse_line(&line?) {
            Ok(None) => {}
            Ok(Some(entry)) => {
                if lexicon.entries.contains_key(&entry.term) {
                    log::warn!(
                        "lexicon line {line_number}: duplicate term {:?}, keeping this later definition",
                        entry.term
                    );
                }
                lexicon.entries.insert(entry.term.clone(), entry);
            }
            Err(reason) => {
                log::warn!("lexicon line {line_number}: {reason}, row dropped");
                rejected.push(RejectedRow {
                    line: line_number,
                    reason,
                });
            }
        }
    }
    Ok(LexiconLoad { lexicon, rejected })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SentimentScore {
    pub polarity: f64,
    pub subjectivity: f64,
    pub orientation: Orientation,
}

impl SentimentScore {
    pub const NEUTRAL: SentimentScore = SentimentScore {
        polarity: 0.0,
        subjectivity: 0.0,
        orientation: Orientation::Neutral,
    };

    /// Clamp aggregated means into range and derive the orientation from
    /// the sign of the clamped polarity.
    fn from_means(polarity: f64, subjectivity: f64) -> Self {
        let polarity = polarity.clamp(-1.0, 1.0);
        let subjectivity = subjectivity.clamp(0.0, 1.0);
        let orientation = if polarity > 0.0 {
            Orientation::Positive
        } else if polarity < 0.0 {
            Orientation::Negative
        } else {
            Orientation::Neutral
        };
        SentimentScore {
            polarity,
            subjectivity,
            orientation,
        }
    }
}

/// Score an ordered token list. Tokens must not be stopword-filtered or
/// stemmed; see the module docs.
pub fn score(tokens: &[String], lexicon: &Lexicon) -> SentimentScore {
    let mut polarity_sum = 0.0;
    let mut subjectivity_sum = 0.0;
    let mut matched = 0u64;
    for (i, token) in tokens.iter().enumerate() {
        let Some(entry) = lexicon.get(token) else {
            continue;
        };
        if entry.role != TermRole::Sentiment {
            continue;
        }
        let mut effective = entry.polarity;
        // The negator window sits before the term itself, unless an
        // intensifier is attached, in which case it sits before that.
        let mut anchor = i;
        if i >= 1 {
            if let Some(TermRole::Intensifier { factor }) =
                lexicon.get(&tokens[i - 1]).map(|e| e.role)
            {
                effective *= factor;
                anchor = i - 1;
            }
        }
        let window = &tokens[anchor.saturating_sub(2)..anchor];
        if window
            .iter()
            .any(|t| lexicon.get(t).is_some_and(LexiconEntry::is_negator))
        {
            effective *= -0.5;
        }
        polarity_sum += effective;
        subjectivity_sum += entry.subjectivity;
        matched += 1;
    }
    if matched == 0 {
        return SentimentScore::NEUTRAL;
    }
    SentimentScore::from_means(
        polarity_sum / matched as f64,
        subjectivity_sum / matched as f64,
    )
}

/// Score each record's raw text (cleaned and split, nothing removed).
pub fn score_corpus(
    records: &[ReviewRecord],
    lexicon: &Lexicon,
) -> Vec<(ReviewRecord, SentimentScore)> {
    records
        .iter()
        .map(|record| {
            let tokens = tokenize(&normalize(&record.raw_text));
            (record.clone(), score(&tokens, lexicon))
        })
        .collect()
}
