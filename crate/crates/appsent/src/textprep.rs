//! Text cleaning: normalization, tokenization, stopword filtering, stemming.
//!
//! The pipeline turns raw review text into lowercase ASCII tokens in four
//! stages, applied in a fixed order:
//!
//! 1. [`normalize`]: lowercase, strip URLs and markup tags, drop every
//!    character outside `[a-z ]`, collapse whitespace.
//! 2. [`tokenize`]: split on spaces.
//! 3. [`remove_stopwords`]: order-preserving filter against a word list.
//! 4. [`stem`]: Porter suffix stripping per token.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

mod porter;

pub use porter::stem;

/// Word list shipped with the crate and used when no custom list is given.
const DEFAULT_STOPWORDS: &str = include_str!("../fixtures/stopwords.txt");

#[derive(Debug, Error)]
pub enum StopwordError {
    #[error("failed to read stopword list: {0}")]
    Io(#[from] io::Error),
    #[error("invalid stopword {word:?} on line {line}: entries must match [a-z]+")]
    InvalidWord { line: usize, word: String },
}

/// A set of words to drop during preprocessing.
///
/// File format: one lowercase word per line; `#` starts a comment; blank
/// lines are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordSet {
    words: BTreeSet<String>,
}

impl StopwordSet {
    /// The list shipped with the crate (English, negations excluded).
    pub fn builtin() -> Self {
        Self::from_reader(DEFAULT_STOPWORDS.as_bytes())
            .expect("embedded stopword list is well-formed")
    }

    /// An empty set; [`remove_stopwords`] becomes the identity.
    pub fn empty() -> Self {
        StopwordSet {
            words: BTreeSet::new(),
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, StopwordError> {
        Self::from_reader(File::open(path)?)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, StopwordError> {
        let mut words = BTreeSet::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let entry = match line.split_once('#') {
                Some((before, _)) => before.trim(),
                None => line.trim(),
            };
            if entry.is_empty() {
                continue;
            }
            if !entry.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(StopwordError::InvalidWord {
                    line: idx + 1,
                    word: entry.to_string(),
                });
            }
            words.insert(entry.to_string());
        }
        Ok(StopwordSet { words })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

impl Default for StopwordSet {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Stage toggles for [`preprocess`]. Everything is on by default.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: StopwordSet,
    pub filter_stopwords: bool,
    pub stem: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: StopwordSet::builtin(),
            filter_stopwords: true,
            stem: true,
        }
    }
}

/// A fully cleaned document: ordered tokens plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub doc_id: usize,
    pub tokens: Vec<String>,
    /// Character count of the raw text before any cleaning.
    pub original_length: usize,
}

impl fmt::Display for TokenizedDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}: {}", self.doc_id, self.tokens.join(" "))
    }
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Scheme-prefixed or www.-prefixed, consuming up to the next whitespace.
    // Runs on already-lowercased text.
    RE.get_or_init(|| Regex::new(r"(?:[a-z][a-z0-9+.-]*://|www\.)\S*").unwrap())
}

fn tag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[^>]*>").unwrap())
}

/// Lowercase and strip everything that is not an ASCII letter or space.
///
/// URLs (`scheme://...` or `www....`) and markup tags (`<...>`) are removed
/// as units before character filtering so their letter content does not leak
/// into the output. Whitespace runs collapse to single spaces; the result is
/// trimmed. Total function: any input produces a (possibly empty) string
/// over `[a-z ]`.
pub fn normalize(raw_text: &str) -> String {
    let lower = raw_text.to_lowercase();
    let no_urls = url_regex().replace_all(&lower, " ");
    let no_tags = tag_regex().replace_all(&no_urls, " ");
    let mut out = String::with_capacity(no_tags.len());
    let mut pending_space = false;
    for c in no_tags.chars() {
        if c.is_ascii_lowercase() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else if c.is_whitespace() {
            pending_space = true;
        }
        // every other character (digit, punctuation, emoji) is dropped
    }
    out
}

/// Split normalized text on whitespace. Never yields empty strings.
pub fn tokenize(normalized: &str) -> Vec<String> {
    normalized.split_whitespace().map(str::to_string).collect()
}

/// Order-preserving stopword filter.
pub fn remove_stopwords(tokens: Vec<String>, stopwords: &StopwordSet) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Run the full cleaning chain on one document.
pub fn preprocess(doc_id: usize, raw_text: &str, config: &PreprocessConfig) -> TokenizedDocument {
    let original_length = raw_text.chars().count();
    let mut tokens = tokenize(&normalize(raw_text));
    if config.filter_stopwords {
        tokens = remove_stopwords(tokens, &config.stopwords);
    }
    if config.stem {
        for token in &mut tokens {
            *token = stem(token);
        }
    }
    TokenizedDocument {
        doc_id,
        tokens,
        original_length,
    }
}
