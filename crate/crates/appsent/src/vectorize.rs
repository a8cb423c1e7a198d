//! N-gram vocabulary fitting and TF-IDF feature extraction.
//!
//! Weights follow tf(w, d) * ln(C / df(w)): raw in-document term count times
//! the natural-log inverse document frequency. Rows are L2-normalized by
//! default; the raw weighting is available with `normalize` off. The n-gram
//! range is cumulative, so `(1, 3)` means unigrams, bigrams, and trigrams
//! together; an exact-n featurization is just the degenerate range `(n, n)`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::textprep::TokenizedDocument;

#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("fitted vocabulary is empty (all terms filtered out)")]
    EmptyVocabulary,
    #[error("invalid n-gram range ({0}, {1}): need 1 <= low <= high")]
    InvalidNgramRange(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("vocabulary file is invalid: {0}")]
    InvalidSerialization(String),
    #[error("unsupported vocabulary format version {0}")]
    UnsupportedVersion(u32),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Fitting and weighting options. `Default` gives the configuration used
/// throughout the benchmark: unigrams, min_df 1, 20k max features, raw TF,
/// plain ln(C/df) IDF, L2-normalized rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizeConfig {
    /// Inclusive n-gram window sizes; (1, 2) emits unigrams and bigrams.
    pub ngram_range: (usize, usize),
    /// Keep only terms appearing in at least this many documents.
    pub min_df: u64,
    /// Keep the top terms by total corpus occurrence count, ties broken
    /// toward the lexicographically smaller term. `None` keeps everything.
    pub max_features: Option<usize>,
    /// L2-normalize each document vector after weighting.
    pub normalize: bool,
    /// Use ln((1+C)/(1+df)) + 1 instead of ln(C/df).
    pub smooth_idf: bool,
    /// Use 1 + ln(tf) instead of raw counts for nonzero tf.
    pub sublinear_tf: bool,
    /// Return an empty vocabulary instead of erroring when every term is
    /// filtered out.
    pub allow_empty_vocabulary: bool,
}

impl Default for VectorizeConfig {
    fn default() -> Self {
        VectorizeConfig {
            ngram_range: (1, 1),
            min_df: 1,
            max_features: Some(20_000),
            normalize: true,
            smooth_idf: false,
            sublinear_tf: false,
            allow_empty_vocabulary: false,
        }
    }
}

impl VectorizeConfig {
    pub fn with_ngram_range(low: usize, high: usize) -> Self {
        VectorizeConfig {
            ngram_range: (low, high),
            ..VectorizeConfig::default()
        }
    }

    fn validate_range(&self) -> Result<(), VectorizeError> {
        let (low, high) = self.ngram_range;
        if low < 1 || high < low {
            return Err(VectorizeError::InvalidNgramRange(low, high));
        }
        Ok(())
    }
}

/// Fitted term table: term -> dense column index, plus document frequencies
/// and the corpus size C that the IDF formula needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    term_to_index: BTreeMap<String, usize>,
    /// df(w) for each column index.
    doc_frequency: Vec<u64>,
    /// Number of documents the vocabulary was fitted on.
    corpus_size: u64,
    pub ngram_range: (usize, usize),
    pub max_features: Option<usize>,
    pub min_df: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.term_to_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.term_to_index.is_empty()
    }

    pub fn corpus_size(&self) -> u64 {
        self.corpus_size
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn doc_frequency_of(&self, term: &str) -> Option<u64> {
        self.index_of(term).map(|i| self.doc_frequency[i])
    }

    /// Terms in index order.
    pub fn terms(&self) -> Vec<&str> {
        let mut out = vec![""; self.term_to_index.len()];
        for (term, &idx) in &self.term_to_index {
            out[idx] = term.as_str();
        }
        out
    }

    fn check_consistent(&self) -> Result<(), VectorizeError> {
        if self.doc_frequency.len() != self.term_to_index.len() {
            return Err(VectorizeError::DimensionMismatch(format!(
                "{} terms but {} df entries",
                self.term_to_index.len(),
                self.doc_frequency.len()
            )));
        }
        Ok(())
    }

    fn idf(&self, index: usize, smooth: bool) -> f64 {
        let df = self.doc_frequency[index] as f64;
        let c = self.corpus_size as f64;
        if smooth {
            ((1.0 + c) / (1.0 + df)).ln() + 1.0
        } else {
            (c / df).ln()
        }
    }
}

const VOCABULARY_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    version: u32,
    corpus_size: u64,
    ngram_range: (usize, usize),
    max_features: Option<usize>,
    min_df: u64,
    /// (term, index, df) triples.
    terms: Vec<(String, usize, u64)>,
}

impl Vocabulary {
    /// Serialize to the versioned JSON vocabulary format.
    pub fn to_writer(&self, writer: impl Write) -> Result<(), VectorizeError> {
        let file = VocabularyFile {
            version: VOCABULARY_FORMAT_VERSION,
            corpus_size: self.corpus_size,
            ngram_range: self.ngram_range,
            max_features: self.max_features,
            min_df: self.min_df,
            terms: self
                .term_to_index
                .iter()
                .map(|(t, &i)| (t.clone(), i, self.doc_frequency[i]))
                .collect(),
        };
        serde_json::to_writer_pretty(writer, &file)?;
        Ok(())
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<(), VectorizeError> {
        self.to_writer(File::create(path)?)
    }

    /// Parse and validate the JSON vocabulary format. Rejects anything that
    /// would violate the vocabulary invariants: non-dense indices, df of 0,
    /// df exceeding the corpus size, or a duplicate term.
    pub fn from_reader(reader: impl Read) -> Result<Self, VectorizeError> {
        let file: VocabularyFile = serde_json::from_reader(reader)?;
        if file.version != VOCABULARY_FORMAT_VERSION {
            return Err(VectorizeError::UnsupportedVersion(file.version));
        }
        let n = file.terms.len();
        let mut term_to_index = BTreeMap::new();
        let mut doc_frequency = vec![0u64; n];
        let mut index_seen = vec![false; n];
        for (term, index, df) in file.terms {
            if index >= n {
                return Err(VectorizeError::InvalidSerialization(format!(
                    "index {index} out of range for {n} terms"
                )));
            }
            if index_seen[index] {
                return Err(VectorizeError::InvalidSerialization(format!(
                    "duplicate index {index}"
                )));
            }
            index_seen[index] = true;
            if df == 0 || df > file.corpus_size {
                return Err(VectorizeError::InvalidSerialization(format!(
                    "df {df} for {term:?} outside [1, {}]",
                    file.corpus_size
                )));
            }
            doc_frequency[index] = df;
            if term_to_index.insert(term.clone(), index).is_some() {
                return Err(VectorizeError::InvalidSerialization(format!(
                    "duplicate term {term:?}"
                )));
            }
        }
        let vocab = Vocabulary {
            term_to_index,
            doc_frequency,
            corpus_size: file.corpus_size,
            ngram_range: file.ngram_range,
            max_features: file.max_features,
            min_df: file.min_df,
        };
        if vocab.ngram_range.0 < 1 || vocab.ngram_range.1 < vocab.ngram_range.0 {
            return Err(VectorizeError::InvalidSerialization(format!(
                "bad ngram range {:?}",
                vocab.ngram_range
            )));
        }
        Ok(vocab)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, VectorizeError> {
        Self::from_reader(File::open(path)?)
    }
}

/// Sorted sparse row vector. Zero weights are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dimension: usize,
    /// (column index, weight), strictly increasing by index.
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zero(dimension: usize) -> Self {
        SparseVector {
            dimension,
            entries: Vec::new(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, w)| w * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Sparse-sparse dot product via a merge walk.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.entries.len() && j < other.entries.len() {
            let (ia, wa) = self.entries[i];
            let (ib, wb) = other.entries[j];
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Dot product against a dense weight slice of the same dimension.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * dense[i]).sum()
    }

    /// The weight at one index (0.0 when the index is not stored).
    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by(|(i, _)| i.cmp(&index)) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for &(i, w) in &self.entries {
            out[i] = w;
        }
        out
    }

    fn normalize_in_place(&mut self) {
        let norm = self.l2_norm();
        if norm > 0.0 {
            for entry in &mut self.entries {
                entry.1 /= norm;
            }
        }
    }
}

/// Everything needed to train: one sparse row per document plus labels and
/// the fitted vocabulary.
#[derive(Debug, Clone)]
pub struct VectorizedDataset {
    pub matrix: Vec<SparseVector>,
    pub labels: Vec<Label>,
    pub vocabulary: Vocabulary,
}

/// Enumerate space-joined token windows for each n in the range, smallest n
/// first, left to right within each n. Window sizes of 0 and ranges with
/// high < low yield nothing.
pub fn extract_ngrams(tokens: &[String], ngram_range: (usize, usize)) -> Vec<String> {
    let (low, high) = ngram_range;
    let mut out = Vec::new();
    for n in low.max(1)..=high {
        if n > tokens.len() {
            break;
        }
        for window in tokens.windows(n) {
            out.push(window.join(" "));
        }
    }
    out
}

/// Count distinct-document and total occurrences for every n-gram.
fn count_terms(
    corpus: &[TokenizedDocument],
    ngram_range: (usize, usize),
) -> BTreeMap<String, (u64, u64)> {
    // term -> (document frequency, total corpus frequency)
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for doc in corpus {
        let mut seen_here: BTreeMap<String, u64> = BTreeMap::new();
        for gram in extract_ngrams(&doc.tokens, ngram_range) {
            *seen_here.entry(gram).or_insert(0) += 1;
        }
        for (gram, n) in seen_here {
            let slot = counts.entry(gram).or_insert((0, 0));
            slot.0 += 1;
            slot.1 += n;
        }
    }
    counts
}

/// Build the term table from a corpus: every n-gram with df >= min_df,
/// optionally capped to the most frequent max_features terms. Column
/// indices follow sorted term order, so fitting is insensitive to document
/// order.
pub fn fit_vocabulary(
    corpus: &[TokenizedDocument],
    config: &VectorizeConfig,
) -> Result<Vocabulary, VectorizeError> {
    config.validate_range()?;
    if corpus.is_empty() {
        return Err(VectorizeError::EmptyCorpus);
    }
    let counts = count_terms(corpus, config.ngram_range);

    let mut kept: Vec<(String, u64, u64)> = counts
        .into_iter()
        .filter(|&(_, (df, _))| df >= config.min_df)
        .map(|(term, (df, cf))| (term, df, cf))
        .collect();

    if let Some(cap) = config.max_features {
        if kept.len() > cap {
            // highest corpus frequency first; lexicographic tie-break comes
            // free because the BTreeMap iteration above was sorted and the
            // sort below is stable
            kept.sort_by_key(|e| std::cmp::Reverse(e.2));
            kept.truncate(cap);
            kept.sort_by(|a, b| a.0.cmp(&b.0));
        }
    }

    if kept.is_empty() && !config.allow_empty_vocabulary {
        return Err(VectorizeError::EmptyVocabulary);
    }

    let mut term_to_index = BTreeMap::new();
    let mut doc_frequency = Vec::with_capacity(kept.len());
    for (idx, (term, df, _)) in kept.into_iter().enumerate() {
        term_to_index.insert(term, idx);
        doc_frequency.push(df);
    }

    Ok(Vocabulary {
        term_to_index,
        doc_frequency,
        corpus_size: corpus.len() as u64,
        ngram_range: config.ngram_range,
        max_features: config.max_features,
        min_df: config.min_df,
    })
}

/// Weight one document against a fitted vocabulary.
pub fn transform(
    doc: &TokenizedDocument,
    vocab: &Vocabulary,
    config: &VectorizeConfig,
) -> Result<SparseVector, VectorizeError> {
    vocab.check_consistent()?;
    let mut tf: BTreeMap<usize, u64> = BTreeMap::new();
    for gram in extract_ngrams(&doc.tokens, vocab.ngram_range) {
        if let Some(idx) = vocab.index_of(&gram) {
            *tf.entry(idx).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(tf.len());
    for (idx, count) in tf {
        let tf_value = if config.sublinear_tf {
            1.0 + (count as f64).ln()
        } else {
            count as f64
        };
        let weight = tf_value * vocab.idf(idx, config.smooth_idf);
        if weight != 0.0 {
            entries.push((idx, weight));
        }
    }
    let mut vector = SparseVector {
        dimension: vocab.len(),
        entries,
    };
    if config.normalize {
        vector.normalize_in_place();
    }
    Ok(vector)
}

/// Fit a vocabulary and transform every document in one call.
pub fn fit_transform(
    corpus: &[TokenizedDocument],
    labels: &[Label],
    config: &VectorizeConfig,
) -> Result<VectorizedDataset, VectorizeError> {
    if corpus.len() != labels.len() {
        return Err(VectorizeError::DimensionMismatch(format!(
            "{} documents but {} labels",
            corpus.len(),
            labels.len()
        )));
    }
    let vocabulary = fit_vocabulary(corpus, config)?;
    let matrix = corpus
        .iter()
        .map(|doc| transform(doc, &vocabulary, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VectorizedDataset {
        matrix,
        labels: labels.to_vec(),
        vocabulary,
    })
}
