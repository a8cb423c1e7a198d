//! Corpus ingestion: parse and validate app metadata, review files, and the
//! student survey into typed records with derived binary labels.
//!
//! Every loader comes in two flavors: a `*_from_reader` function that
//! consumes any byte stream (also the entry point for fuzzing) and a path
//! wrapper. Loaders never fail on bad rows; each rejected row is recorded
//! with its ordinal and a reason, and `records.len() + rejects.len()` always
//! equals the number of data rows seen.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Binary sentiment label. `Positive` is the positive class everywhere
/// (confusion matrices, precision/recall).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "Positive",
            Label::Negative => "Negative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AppType {
    Free,
    Paid,
}

impl fmt::Display for AppType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AppType::Free => "Free",
            AppType::Paid => "Paid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReviewSource {
    Google,
    Student,
}

/// One row of the 13-column app metadata file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppRecord {
    pub app_name: String,
    pub category: String,
    pub rating: Option<f64>,
    pub reviews_count: u64,
    pub size_bytes: Option<u64>,
    pub installs: u64,
    pub app_type: AppType,
    pub price: f64,
    pub content_rating: String,
    pub genres: String,
    pub last_updated: Option<NaiveDate>,
    pub current_version: String,
    pub android_version: String,
}

/// One labeled review, ready for classification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewRecord {
    pub source: ReviewSource,
    pub app_name: String,
    pub raw_text: String,
    pub rating: Option<f64>,
    pub label: Label,
}

/// One row of the student survey.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudentRecord {
    pub department: String,
    pub app_name: String,
    pub review_text: String,
    pub rating: f64,
    pub app_type: AppType,
}

impl StudentRecord {
    /// Reinterpret the survey row as a labeled review.
    pub fn to_review(&self) -> ReviewRecord {
        ReviewRecord {
            source: ReviewSource::Student,
            app_name: self.app_name.clone(),
            raw_text: self.review_text.clone(),
            rating: Some(self.rating),
            label: derive_label(self.rating).expect("validated on load"),
        }
    }
}

/// A review whose source label was Neutral: excluded from the binary task
/// but kept for lexicon scoring and exploratory analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeutralReview {
    pub app_name: String,
    pub raw_text: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot open {path}: {source}")]
    MissingFile { path: PathBuf, source: io::Error },
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: expected 13 columns, found {found}")]
    MalformedHeader { found: usize },
    #[error("no usable columns: {0}")]
    NoUsableColumns(String),
    #[error("rating {0} outside [1,5]")]
    OutOfRange(f64),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Why a data row was not turned into a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail")]
pub enum RejectReason {
    FieldCount { expected: usize, found: usize },
    EmptyField(String),
    UnparseableField { field: String, value: String },
    RatingOutOfRange(String),
    TypePriceMismatch { app_type: String, price: f64 },
    MissingLabel,
    NeutralLabel,
    LabelConflict { label: String, rating: f64 },
    Duplicate,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            RejectReason::EmptyField(name) => write!(f, "empty {name}"),
            RejectReason::UnparseableField { field, value } => {
                write!(f, "unparseable {field} value {value:?}")
            }
            RejectReason::RatingOutOfRange(v) => write!(f, "rating {v} outside [1,5]"),
            RejectReason::TypePriceMismatch { app_type, price } => {
                write!(f, "type {app_type} inconsistent with price {price}")
            }
            RejectReason::MissingLabel => f.write_str("no label and no rating"),
            RejectReason::NeutralLabel => f.write_str("neutral label"),
            RejectReason::LabelConflict { label, rating } => {
                write!(f, "label {label} conflicts with rating {rating}")
            }
            RejectReason::Duplicate => f.write_str("duplicate of an earlier row"),
        }
    }
}

/// One rejected row: 1-based data-row ordinal (header excluded) plus reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowReject {
    pub row: usize,
    pub reason: RejectReason,
}

/// Shared bookkeeping for every loader's result.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadStats {
    /// Number of data rows in the input (header excluded).
    pub input_rows: usize,
    /// Invalid UTF-8 sequences replaced during decoding.
    pub replaced_sequences: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AppMetadataLoad {
    pub records: Vec<AppRecord>,
    pub rejects: Vec<RowReject>,
    pub stats: LoadStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReviewCorpusLoad {
    pub records: Vec<ReviewRecord>,
    /// Rows whose label column said Neutral; not part of the binary task.
    pub neutral: Vec<NeutralReview>,
    pub rejects: Vec<RowReject>,
    pub stats: LoadStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudentSurveyLoad {
    pub records: Vec<StudentRecord>,
    pub rejects: Vec<RowReject>,
    pub stats: LoadStats,
}

/// Positive iff the rating is 3.0 or greater.
pub fn derive_label(rating: f64) -> Result<Label, CorpusError> {
    if !(1.0..=5.0).contains(&rating) {
        return Err(CorpusError::OutOfRange(rating));
    }
    Ok(if rating >= 3.0 {
        Label::Positive
    } else {
        Label::Negative
    })
}

/// Field-level parse failure; surfaces as a per-row reject, never a panic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable {field} value {value:?}")]
pub struct Unparseable {
    pub field: &'static str,
    pub value: String,
}

fn unparseable(field: &'static str, value: &str) -> Unparseable {
    Unparseable {
        field,
        value: value.to_string(),
    }
}

/// Missing-value sentinels used across the public corpus.
fn is_missing_cell(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("na")
}

/// "1,000,000+" -> 1000000. Commas and one trailing '+' are decoration.
pub fn parse_installs(text: &str) -> Result<u64, Unparseable> {
    let cleaned: String = text
        .trim()
        .trim_end_matches('+')
        .chars()
        .filter(|&c| c != ',')
        .collect();
    if cleaned.is_empty() {
        return Err(unparseable("installs", text));
    }
    cleaned.parse().map_err(|_| unparseable("installs", text))
}

/// "$4.99" -> 4.99; "0" -> 0.0. The result must be finite and nonnegative.
pub fn parse_price(text: &str) -> Result<f64, Unparseable> {
    let cleaned = text.trim().trim_start_matches('$');
    let value: f64 = cleaned.parse().map_err(|_| unparseable("price", text))?;
    if !value.is_finite() || value < 0.0 {
        return Err(unparseable("price", text));
    }
    Ok(value)
}

/// "19M" -> 19 * 2^20 bytes, "512k" -> 512 * 2^10; fractional sizes round
/// to the nearest byte. "Varies with device", empty, and NaN map to missing.
pub fn parse_size(text: &str) -> Result<Option<u64>, Unparseable> {
    let t = text.trim();
    if is_missing_cell(t) || t.eq_ignore_ascii_case("varies with device") {
        return Ok(None);
    }
    let digits: String = t.chars().filter(|&c| c != ',').collect();
    let (number_part, multiplier) = match digits.as_bytes().last() {
        Some(b'k' | b'K') => (&digits[..digits.len() - 1], 1024.0),
        Some(b'm' | b'M') => (&digits[..digits.len() - 1], 1024.0 * 1024.0),
        Some(b'g' | b'G') => (&digits[..digits.len() - 1], 1024.0 * 1024.0 * 1024.0),
        _ => (digits.as_str(), 1.0),
    };
    let value: f64 = number_part
        .parse()
        .map_err(|_| unparseable("size", text))?;
    if !value.is_finite() || value < 0.0 {
        return Err(unparseable("size", text));
    }
    let bytes = (value * multiplier).round();
    if bytes > u64::MAX as f64 {
        return Err(unparseable("size", text));
    }
    Ok(Some(bytes as u64))
}

fn parse_optional_rating(cell: &str) -> Result<Option<f64>, Unparseable> {
    if is_missing_cell(cell) {
        return Ok(None);
    }
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(unparseable("rating", cell)),
    }
}

fn parse_app_type(cell: &str) -> Option<AppType> {
    let t = cell.trim();
    if t.eq_ignore_ascii_case("free") {
        Some(AppType::Free)
    } else if t.eq_ignore_ascii_case("paid") {
        Some(AppType::Paid)
    } else {
        None
    }
}

fn parse_label_cell(cell: &str) -> Option<&'static str> {
    let t = cell.trim();
    if t.eq_ignore_ascii_case("positive") {
        Some("positive")
    } else if t.eq_ignore_ascii_case("negative") {
        Some("negative")
    } else if t.eq_ignore_ascii_case("neutral") {
        Some("neutral")
    } else {
        None
    }
}

/// Dates in the metadata file look like "January 7, 2018". Anything else
/// becomes missing rather than failing the row.
fn parse_last_updated(cell: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(cell.trim(), "%B %d, %Y").ok()
}

/// Decode bytes as UTF-8, replacing invalid sequences and counting them.
fn decode_lossy(bytes: &[u8]) -> (String, usize) {
    let mut out = String::with_capacity(bytes.len());
    let mut replaced = 0;
    let mut rest = bytes;
    loop {
        match std::str::from_utf8(rest) {
            Ok(tail) => {
                out.push_str(tail);
                break;
            }
            Err(e) => {
                let valid = e.valid_up_to();
                out.push_str(std::str::from_utf8(&rest[..valid]).expect("validated prefix"));
                out.push(char::REPLACEMENT_CHARACTER);
                replaced += 1;
                let skip = e.error_len().unwrap_or(rest.len() - valid);
                rest = &rest[valid + skip..];
                if rest.is_empty() {
                    break;
                }
            }
        }
    }
    (out, replaced)
}

fn read_decoded(mut reader: impl Read) -> Result<(String, usize), CorpusError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    Ok(decode_lossy(&bytes))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| CorpusError::MissingFile {
        path: path.to_path_buf(),
        source,
    })
}

const APP_METADATA_COLUMNS: usize = 13;

pub fn load_app_metadata(path: impl AsRef<Path>) -> Result<AppMetadataLoad, CorpusError> {
    load_app_metadata_from_reader(open(path.as_ref())?)
}

/// Parse the 13-column metadata schema: app, category, rating, reviews,
/// size, installs, type, price, content rating, genres, last updated,
/// current version, android version, in that order.
pub fn load_app_metadata_from_reader(reader: impl Read) -> Result<AppMetadataLoad, CorpusError> {
    let (text, replaced_sequences) = read_decoded(reader)?;
    let mut rdr = csv_reader(&text);
    let header_len = rdr.headers()?.len();
    if header_len != APP_METADATA_COLUMNS {
        return Err(CorpusError::MalformedHeader { found: header_len });
    }

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut input_rows = 0;
    for (idx, row) in rdr.records().enumerate() {
        input_rows += 1;
        let row_no = idx + 1;
        let reject = |reason: RejectReason| RowReject {
            row: row_no,
            reason,
        };
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                rejects.push(reject(RejectReason::UnparseableField {
                    field: "row".into(),
                    value: "invalid csv".into(),
                }));
                continue;
            }
        };
        if row.len() != APP_METADATA_COLUMNS {
            rejects.push(reject(RejectReason::FieldCount {
                expected: APP_METADATA_COLUMNS,
                found: row.len(),
            }));
            continue;
        }
        match parse_app_row(&row) {
            Ok(record) => records.push(record),
            Err(reason) => rejects.push(reject(reason)),
        }
    }
    Ok(AppMetadataLoad {
        records,
        rejects,
        stats: LoadStats {
            input_rows,
            replaced_sequences,
        },
    })
}

fn parse_app_row(row: &csv::StringRecord) -> Result<AppRecord, RejectReason> {
    let cell = |i: usize| row.get(i).unwrap_or("").trim();
    let app_name = cell(0);
    if app_name.is_empty() {
        return Err(RejectReason::EmptyField("app name".into()));
    }

    let rating = parse_optional_rating(cell(2)).map_err(reject_field)?;
    if let Some(r) = rating {
        if !(1.0..=5.0).contains(&r) {
            return Err(RejectReason::RatingOutOfRange(cell(2).to_string()));
        }
    }

    let reviews_count: u64 = {
        let c = cell(3);
        let digits: String = c.chars().filter(|&ch| ch != ',').collect();
        digits
            .parse()
            .map_err(|_| reject_field(unparseable("reviews", c)))?
    };
    let size_bytes = parse_size(cell(4)).map_err(reject_field)?;
    let installs = parse_installs(cell(5)).map_err(reject_field)?;
    let app_type = parse_app_type(cell(6)).ok_or_else(|| RejectReason::UnparseableField {
        field: "type".into(),
        value: cell(6).to_string(),
    })?;
    let price = parse_price(cell(7)).map_err(reject_field)?;

    let free = app_type == AppType::Free;
    if free != (price == 0.0) {
        return Err(RejectReason::TypePriceMismatch {
            app_type: app_type.to_string(),
            price,
        });
    }

    Ok(AppRecord {
        app_name: app_name.to_string(),
        category: cell(1).to_string(),
        rating,
        reviews_count,
        size_bytes,
        installs,
        app_type,
        price,
        content_rating: cell(8).to_string(),
        genres: cell(9).to_string(),
        last_updated: parse_last_updated(cell(10)),
        current_version: cell(11).to_string(),
        android_version: cell(12).to_string(),
    })
}

fn reject_field(e: Unparseable) -> RejectReason {
    RejectReason::UnparseableField {
        field: e.field.into(),
        value: e.value,
    }
}

/// Case-insensitive header lookup; spaces become underscores first.
fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| {
        let canon = h.trim().to_lowercase().replace(' ', "_");
        names.contains(&canon.as_str())
    })
}

const APP_COLUMN: &[&str] = &["app", "app_name", "appname", "application"];
const TEXT_COLUMN: &[&str] = &["review", "reviews", "review_text", "text", "translated_review"];
const LABEL_COLUMN: &[&str] = &["label", "sentiment", "class"];
const RATING_COLUMN: &[&str] = &["rating", "ratings", "stars", "score"];

pub fn load_review_corpus(path: impl AsRef<Path>) -> Result<ReviewCorpusLoad, CorpusError> {
    load_review_corpus_from_reader(open(path.as_ref())?)
}

/// Parse any file with a text column and a label and/or rating column.
///
/// Label handling: a Neutral label shunts the row into the `neutral` list;
/// a missing label with a usable rating falls back to [`derive_label`]; a
/// label that contradicts the row's rating rejects the row. Duplicate
/// (app_name, raw_text) pairs keep the first occurrence only.
pub fn load_review_corpus_from_reader(reader: impl Read) -> Result<ReviewCorpusLoad, CorpusError> {
    let (text, replaced_sequences) = read_decoded(reader)?;
    let mut rdr = csv_reader(&text);
    let headers = rdr.headers()?.clone();
    let text_col = find_column(&headers, TEXT_COLUMN);
    let label_col = find_column(&headers, LABEL_COLUMN);
    let rating_col = find_column(&headers, RATING_COLUMN);
    let app_col = find_column(&headers, APP_COLUMN);

    let Some(text_col) = text_col else {
        return Err(CorpusError::NoUsableColumns(
            "no review text column found".into(),
        ));
    };
    if label_col.is_none() && rating_col.is_none() {
        return Err(CorpusError::NoUsableColumns(
            "need a label or rating column".into(),
        ));
    }

    let mut records = Vec::new();
    let mut neutral = Vec::new();
    let mut rejects = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut input_rows = 0;

    for (idx, row) in rdr.records().enumerate() {
        input_rows += 1;
        let row_no = idx + 1;
        let reject = |reason: RejectReason| RowReject {
            row: row_no,
            reason,
        };
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                rejects.push(reject(RejectReason::UnparseableField {
                    field: "row".into(),
                    value: "invalid csv".into(),
                }));
                continue;
            }
        };
        let cell = |i: Option<usize>| i.and_then(|i| row.get(i)).unwrap_or("").trim();

        let raw_text = cell(Some(text_col));
        if is_missing_cell(raw_text) {
            rejects.push(reject(RejectReason::EmptyField("review text".into())));
            continue;
        }
        let app_name = cell(app_col).to_string();

        let rating = match cell(rating_col) {
            c if is_missing_cell(c) => None,
            c => match c.parse::<f64>() {
                Ok(v) if (1.0..=5.0).contains(&v) => Some(v),
                _ => {
                    rejects.push(reject(RejectReason::RatingOutOfRange(c.to_string())));
                    continue;
                }
            },
        };

        let label_text = cell(label_col);
        let label = if is_missing_cell(label_text) {
            match rating {
                Some(r) => derive_label(r).expect("range-checked above"),
                None => {
                    rejects.push(reject(RejectReason::MissingLabel));
                    continue;
                }
            }
        } else {
            match parse_label_cell(label_text) {
                Some("positive") => Label::Positive,
                Some("negative") => Label::Negative,
                Some("neutral") => {
                    neutral.push(NeutralReview {
                        app_name,
                        raw_text: raw_text.to_string(),
                    });
                    rejects.push(reject(RejectReason::NeutralLabel));
                    continue;
                }
                _ => {
                    rejects.push(reject(RejectReason::UnparseableField {
                        field: "label".into(),
                        value: label_text.to_string(),
                    }));
                    continue;
                }
            }
        };

        if let Some(r) = rating {
            if derive_label(r).expect("range-checked above") != label {
                rejects.push(reject(RejectReason::LabelConflict {
                    label: label.to_string(),
                    rating: r,
                }));
                continue;
            }
        }

        let key = (app_name.clone(), raw_text.to_string());
        if !seen.insert(key) {
            rejects.push(reject(RejectReason::Duplicate));
            continue;
        }

        records.push(ReviewRecord {
            source: ReviewSource::Google,
            app_name,
            raw_text: raw_text.to_string(),
            rating,
            label,
        });
    }

    Ok(ReviewCorpusLoad {
        records,
        neutral,
        rejects,
        stats: LoadStats {
            input_rows,
            replaced_sequences,
        },
    })
}

const DEPARTMENT_COLUMN: &[&str] = &["department", "dept"];
const TYPE_COLUMN: &[&str] = &["type", "app_type"];

pub fn load_student_survey(path: impl AsRef<Path>) -> Result<StudentSurveyLoad, CorpusError> {
    load_student_survey_from_reader(open(path.as_ref())?)
}

/// Parse the five-field survey schema (department, app, review, rating,
/// type). Extra columns are ignored; the source data carries an unused
/// sixth field.
pub fn load_student_survey_from_reader(
    reader: impl Read,
) -> Result<StudentSurveyLoad, CorpusError> {
    let (text, replaced_sequences) = read_decoded(reader)?;
    let mut rdr = csv_reader(&text);
    let headers = rdr.headers()?.clone();

    let mut missing = Vec::new();
    let lookup = |names: &[&str], what: &str, missing: &mut Vec<String>| {
        let found = find_column(&headers, names);
        if found.is_none() {
            missing.push(what.to_string());
        }
        found
    };
    let dept_col = lookup(DEPARTMENT_COLUMN, "department", &mut missing);
    let app_col = lookup(APP_COLUMN, "app", &mut missing);
    let text_col = lookup(TEXT_COLUMN, "review", &mut missing);
    let rating_col = lookup(RATING_COLUMN, "rating", &mut missing);
    let type_col = lookup(TYPE_COLUMN, "type", &mut missing);
    if !missing.is_empty() {
        return Err(CorpusError::NoUsableColumns(format!(
            "missing column(s): {}",
            missing.join(", ")
        )));
    }
    let (dept_col, app_col, text_col, rating_col, type_col) = (
        dept_col.unwrap(),
        app_col.unwrap(),
        text_col.unwrap(),
        rating_col.unwrap(),
        type_col.unwrap(),
    );

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut input_rows = 0;
    for (idx, row) in rdr.records().enumerate() {
        input_rows += 1;
        let row_no = idx + 1;
        let reject = |reason: RejectReason| RowReject {
            row: row_no,
            reason,
        };
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                rejects.push(reject(RejectReason::UnparseableField {
                    field: "row".into(),
                    value: "invalid csv".into(),
                }));
                continue;
            }
        };
        let cell = |i: usize| row.get(i).unwrap_or("").trim();

        let department = cell(dept_col);
        if department.is_empty() {
            rejects.push(reject(RejectReason::EmptyField("department".into())));
            continue;
        }
        let app_name = cell(app_col);
        if app_name.is_empty() {
            rejects.push(reject(RejectReason::EmptyField("app name".into())));
            continue;
        }
        let review_text = cell(text_col);
        if is_missing_cell(review_text) {
            rejects.push(reject(RejectReason::EmptyField("review text".into())));
            continue;
        }
        let rating = match cell(rating_col).parse::<f64>() {
            Ok(v) if (1.0..=5.0).contains(&v) => v,
            _ => {
                rejects.push(reject(RejectReason::RatingOutOfRange(
                    cell(rating_col).to_string(),
                )));
                continue;
            }
        };
        let Some(app_type) = parse_app_type(cell(type_col)) else {
            rejects.push(reject(RejectReason::UnparseableField {
                field: "type".into(),
                value: cell(type_col).to_string(),
            }));
            continue;
        };

        records.push(StudentRecord {
            department: department.to_string(),
            app_name: app_name.to_string(),
            review_text: review_text.to_string(),
            rating,
            app_type,
        });
    }

    Ok(StudentSurveyLoad {
        records,
        rejects,
        stats: LoadStats {
            input_rows,
            replaced_sequences,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derive_label_boundary() {
        assert_eq!(derive_label(3.0).unwrap(), Label::Positive);
        assert_eq!(derive_label(2.9).unwrap(), Label::Negative);
        assert_eq!(derive_label(5.0).unwrap(), Label::Positive);
        assert_eq!(derive_label(1.0).unwrap(), Label::Negative);
        assert!(matches!(
            derive_label(0.5),
            Err(CorpusError::OutOfRange(_))
        ));
        assert!(matches!(
            derive_label(5.1),
            Err(CorpusError::OutOfRange(_))
        ));
    }

    #[test]
    fn field_parsers_follow_stated_rules() {
        assert_eq!(parse_installs("1,000,000+").unwrap(), 1_000_000);
        assert_eq!(parse_installs("1,000+").unwrap(), 1000);
        assert_eq!(parse_installs("0").unwrap(), 0);
        assert!(parse_installs("Free").is_err());
        assert!(parse_installs("").is_err());

        assert_eq!(parse_price("$4.99").unwrap(), 4.99);
        assert_eq!(parse_price("0").unwrap(), 0.0);
        assert!(parse_price("Everyone").is_err());
        assert!(parse_price("-1").is_err());

        assert_eq!(parse_size("19M").unwrap(), Some(19 * (1 << 20)));
        assert_eq!(parse_size("512k").unwrap(), Some(512 * 1024));
        assert_eq!(parse_size("3.3M").unwrap(), Some(3_460_301));
        assert_eq!(parse_size("Varies with device").unwrap(), None);
        assert_eq!(parse_size("").unwrap(), None);
        assert_eq!(parse_size("NaN").unwrap(), None);
        assert!(parse_size("huge").is_err());
    }

    const APP_HEADER: &str = "App,Category,Rating,Reviews,Size,Installs,Type,Price,Content Rating,Genres,Last Updated,Current Ver,Android Ver\n";

    #[test]
    fn app_metadata_parses_good_rows() {
        let csv = format!(
            "{APP_HEADER}\
             Photo Editor,ART_AND_DESIGN,4.1,159,19M,\"10,000+\",Free,0,Everyone,Art & Design,\"January 7, 2018\",1.0.0,4.0.3 and up\n\
             Sketch It,ART_AND_DESIGN,4.5,967,14M,\"500,000+\",Paid,$2.99,Everyone,Art & Design,\"August 1, 2018\",2.0.0,4.2 and up\n"
        );
        let load = load_app_metadata_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(load.records.len(), 2);
        assert!(load.rejects.is_empty());
        let first = &load.records[0];
        assert_eq!(first.app_name, "Photo Editor");
        assert_eq!(first.rating, Some(4.1));
        assert_eq!(first.installs, 10_000);
        assert_eq!(first.size_bytes, Some(19 * (1 << 20)));
        assert_eq!(first.app_type, AppType::Free);
        assert_eq!(
            first.last_updated,
            Some(NaiveDate::from_ymd_opt(2018, 1, 7).unwrap())
        );
        assert_eq!(load.records[1].price, 2.99);
    }

    #[test]
    fn app_metadata_rejects_bad_rows() {
        let csv = format!(
            "{APP_HEADER}\
             Good App,TOOLS,4.0,10,5M,\"1,000+\",Free,0,Everyone,Tools,\"May 5, 2018\",1.0,4.0 and up\n\
             Shifted Row,4.3,19,whoops,1M,Free,0,Everyone,,\"Feb 11, 2018\",1.0.19,4.0 and up\n\
             Overrated,TOOLS,9.9,10,5M,\"1,000+\",Free,0,Everyone,Tools,\"May 5, 2018\",1.0,4.0 and up\n\
             Mismatch,TOOLS,4.0,10,5M,\"1,000+\",Free,$3.99,Everyone,Tools,\"May 5, 2018\",1.0,4.0 and up\n"
        );
        let load = load_app_metadata_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(load.records.len(), 1);
        assert_eq!(load.rejects.len(), 3);
        assert_eq!(load.stats.input_rows, 4);
        assert!(matches!(
            load.rejects[0].reason,
            RejectReason::FieldCount { found: 12, .. }
        ));
        assert!(matches!(
            load.rejects[1].reason,
            RejectReason::RatingOutOfRange(_)
        ));
        assert!(matches!(
            load.rejects[2].reason,
            RejectReason::TypePriceMismatch { .. }
        ));
    }

    #[test]
    fn app_metadata_header_must_have_13_columns() {
        let err = load_app_metadata_from_reader("App,Category,Rating\na,b,4.0\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, CorpusError::MalformedHeader { found: 3 }));
    }

    #[test]
    fn review_corpus_drops_and_counts() {
        let csv = "App,Translated_Review,Sentiment\n\
                   A,Great app works well,Positive\n\
                   A,,Positive\n\
                   B,nan,Negative\n\
                   B,Keeps crashing,Negative\n\
                   B,Keeps crashing,Negative\n\
                   C,Average at best,Neutral\n";
        let load = load_review_corpus_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(load.records.len(), 2);
        assert_eq!(load.rejects.len(), 4);
        assert_eq!(load.stats.input_rows, 6);
        assert_eq!(
            load.records.len() + load.rejects.len(),
            load.stats.input_rows
        );
        assert_eq!(load.neutral.len(), 1);
        assert_eq!(load.neutral[0].raw_text, "Average at best");
        let reasons: Vec<_> = load.rejects.iter().map(|r| &r.reason).collect();
        assert!(matches!(reasons[0], RejectReason::EmptyField(_)));
        assert!(matches!(reasons[1], RejectReason::EmptyField(_)));
        assert!(matches!(reasons[2], RejectReason::Duplicate));
        assert!(matches!(reasons[3], RejectReason::NeutralLabel));
    }

    #[test]
    fn review_corpus_derives_labels_from_ratings() {
        let csv = "app,text,rating\n\
                   A,Love it,5\n\
                   B,Terrible,1\n\
                   C,Fine I guess,3\n\
                   D,Busted,7\n";
        let load = load_review_corpus_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(load.records.len(), 3);
        let labels: Vec<_> = load.records.iter().map(|r| r.label).collect();
        assert_eq!(labels, vec![Label::Positive, Label::Negative, Label::Positive]);
        assert!(matches!(
            load.rejects[0].reason,
            RejectReason::RatingOutOfRange(_)
        ));
        for r in &load.records {
            if let Some(rating) = r.rating {
                assert_eq!(derive_label(rating).unwrap(), r.label);
            }
        }
    }

    #[test]
    fn review_corpus_rejects_label_rating_conflicts() {
        let csv = "app,text,label,rating\n\
                   A,Great,Positive,5\n\
                   B,Awful,Positive,1\n";
        let load = load_review_corpus_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(load.records.len(), 1);
        assert!(matches!(
            load.rejects[0].reason,
            RejectReason::LabelConflict { .. }
        ));
    }

    #[test]
    fn review_corpus_requires_usable_columns() {
        let err = load_review_corpus_from_reader("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::NoUsableColumns(_)));
        let err =
            load_review_corpus_from_reader("app,text\nA,hello\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::NoUsableColumns(_)));
    }

    #[test]
    fn student_survey_round_trips_to_reviews() {
        let csv = "Department,App,Review,Rating,Type\n\
                   Mathematics,WPS Office,Very well designed.,5,Free\n\
                   Physics,Old Notes,Clunky and slow,2,Paid\n\
                   Chemistry,Empty One,,4,Free\n";
        let load = load_student_survey_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(load.records.len(), 2);
        assert_eq!(load.rejects.len(), 1);
        let reviews: Vec<_> = load.records.iter().map(StudentRecord::to_review).collect();
        assert_eq!(reviews[0].label, Label::Positive);
        assert_eq!(reviews[0].source, ReviewSource::Student);
        assert_eq!(reviews[1].label, Label::Negative);
    }

    #[test]
    fn student_survey_ignores_extra_columns() {
        let csv = "Department,App,Review,Rating,Type,Timestamp\n\
                   CS,TestApp,Solid tool,4,Free,2020-01-01\n";
        let load = load_student_survey_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(load.records.len(), 1);
        assert_eq!(load.records[0].app_type, AppType::Free);
    }

    #[test]
    fn student_survey_reports_missing_columns() {
        let err =
            load_student_survey_from_reader("Department,App\nCS,X\n".as_bytes()).unwrap_err();
        match err {
            CorpusError::NoUsableColumns(msg) => {
                assert!(msg.contains("review") && msg.contains("rating") && msg.contains("type"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn undecodable_bytes_are_replaced_and_counted() {
        let mut bytes = b"app,text,label\nA,Great".to_vec();
        bytes.extend_from_slice(&[0xFF, 0xFE]);
        bytes.extend_from_slice(b" app,Positive\n");
        let load = load_review_corpus_from_reader(bytes.as_slice()).unwrap();
        assert_eq!(load.records.len(), 1);
        assert_eq!(load.stats.replaced_sequences, 2);
        assert!(load.records[0].raw_text.contains('\u{FFFD}'));
    }

    #[test]
    fn loading_twice_is_deterministic() {
        let csv = "app,text,rating\nA,Nice,4\nB,Bad,1\nA,Nice,4\n";
        let a = load_review_corpus_from_reader(csv.as_bytes()).unwrap();
        let b = load_review_corpus_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.rejects, b.rejects);
    }

    fn format_installs(n: u64) -> String {
        let digits = n.to_string();
        let mut grouped = String::new();
        for (i, c) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i).is_multiple_of(3) {
                grouped.push(',');
            }
            grouped.push(c);
        }
        format!("{grouped}+")
    }

    proptest! {
        #[test]
        fn parse_installs_inverts_formatting(n in 0u64..1_000_000_000) {
            prop_assert_eq!(parse_installs(&format_installs(n)).unwrap(), n);
        }

        #[test]
        fn review_loader_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
            if let Ok(load) = load_review_corpus_from_reader(bytes.as_slice()) {
                prop_assert_eq!(
                    load.records.len() + load.rejects.len(),
                    load.stats.input_rows
                );
                for r in &load.records {
                    if let Some(rating) = r.rating {
                        prop_assert_eq!(derive_label(rating).unwrap(), r.label);
                    }
                }
            }
        }
    }
}
