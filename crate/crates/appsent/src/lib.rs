//! Sentiment classification pipeline for app-review corpora.
//!
//! The crate covers the full path from raw CSV input to benchmark tables:
//! corpus ingestion ([`corpus`]), text cleaning ([`textprep`]), TF-IDF
//! n-gram features ([`vectorize`]), five from-scratch classifiers
//! ([`classifiers`]), a bagging ensemble ([`ensemble`]), evaluation metrics
//! and the model-by-featurization benchmark ([`eval`]), a rule-based
//! lexicon scorer ([`lexicon`]), and exploratory corpus statistics
//! ([`analysis`]).
//!
//! Everything is deterministic: a master seed fixes all randomness, and
//! repeated runs produce byte-identical outputs regardless of thread count.

pub mod analysis;
pub mod classifiers;
pub mod cli;
pub mod corpus;
pub mod ensemble;
pub mod eval;
pub mod lexicon;
pub mod seed;
pub mod textprep;
pub mod vectorize;

pub use corpus::Label;
