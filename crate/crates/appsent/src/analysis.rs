//! Exploratory statistics over the app metadata, the student survey, and
//! scored reviews, bundled as a six-section research report.
//!
//! Everything here emits plot-ready data rather than rendered figures:
//! grouped distributions, joint numeric pairs for scatter plots, pairwise
//! correlation matrices, and an optional model confusion section.
//!
//! `export_rq_report` writes one CSV per section plus a combined
//! `summary.json`:
//!
//! | file                     | columns                                      |
//! |--------------------------|----------------------------------------------|
//! | rq1_distributions.csv    | group_field,key,count,mean_rating,mean_price |
//! | rq2_size_vs_rating.csv   | size_bytes,rating                            |
//! | rq3_correlations.csv     | corpus,variable,<one column per variable>    |
//! | rq4_sentiment.csv        | polarity,subjectivity                        |
//! | rq5_price_vs_installs.csv| price,installs                               |
//! | rq6_confusion.csv        | tp,fp,fn,tn,accuracy (only with a model)     |

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::classifiers::{self, ClassifierError, FittedModel};
use crate::corpus::{AppRecord, Label, ReviewRecord, StudentRecord};
use crate::ensemble::{self, BaggedModel, EnsembleError};
use crate::eval::{confusion, ConfusionMatrix, EvalError};
use crate::lexicon::SentimentScore;
use crate::vectorize::{SparseVector, VectorizedDataset};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unknown field {field:?}; expected one of {allowed}")]
    UnknownField { field: String, allowed: String },
    #[error("series differ in length: {xs} vs {ys}")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("need at least 2 pairs, found {found}")]
    TooFewPairs { found: usize },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One group of a distribution: its count and the means of whichever
/// numeric companions were present on the grouped records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRow {
    pub key: String,
    pub count: u64,
    pub mean_rating: Option<f64>,
    pub mean_price: Option<f64>,
}

/// Counts per group, ordered by descending count and then by key. Records
/// without the group key are excluded from the rows and tallied in
/// `missing_keys`, so row counts always sum to the contributing records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTable {
    pub group_field: String,
    pub rows: Vec<DistributionRow>,
    pub missing_keys: u64,
}

impl DistributionTable {
    /// Number of records that carried the group key.
    pub fn contributing(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum()
    }
}

#[derive(Default)]
struct GroupAccumulator {
    count: u64,
    rating_sum: f64,
    rating_count: u64,
    price_sum: f64,
    price_count: u64,
}

fn build_table(
    group_field: &str,
    observations: impl Iterator<Item = (Option<String>, Option<f64>, Option<f64>)>,
) -> DistributionTable {
    let mut groups: BTreeMap<String, GroupAccumulator> = BTreeMap::new();
    let mut missing_keys = 0u64;
    for (key, rating, price) in observations {
        let Some(key) = key else {
            missing_keys += 1;
            continue;
        };
        let acc = groups.entry(key).or_default();
        acc.count += 1;
        if let Some(r) = rating {
            acc.rating_sum += r;
            acc.rating_count += 1;
        }
        if let Some(p) = price {
            acc.price_sum += p;
            acc.price_count += 1;
        }
    }
    let mut rows: Vec<DistributionRow> = groups
        .into_iter()
        .map(|(key, acc)| DistributionRow {
            key,
            count: acc.count,
            mean_rating: (acc.rating_count > 0).then(|| acc.rating_sum / acc.rating_count as f64),
            mean_price: (acc.price_count > 0).then(|| acc.price_sum / acc.price_count as f64),
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    DistributionTable {
        group_field: group_field.to_string(),
        rows,
        missing_keys,
    }
}

fn non_blank(text: &str) -> Option<String> {
    let trimmed = text.trim();
    (!trimmed.is_empty()).then(|| trimmed.to_string())
}

const APP_GROUP_FIELDS: &str = "category, rating, price, content_rating, type";

/// Group the app metadata by a field and tally counts with companion
/// means. Numeric group keys use their shortest decimal form.
pub fn distribution(
    records: &[AppRecord],
    group_by: &str,
) -> Result<DistributionTable, AnalysisError> {
    let key_of: fn(&AppRecord) -> Option<String> = match group_by {
        "category" => |r| non_blank(&r.category),
        "rating" => |r| r.rating.map(|v| v.to_string()),
        "price" => |r| Some(r.price.to_string()),
        "content_rating" => |r| non_blank(&r.content_rating),
        "type" => |r| Some(r.app_type.to_string()),
        _ => {
            return Err(AnalysisError::UnknownField {
                field: group_by.to_string(),
                allowed: APP_GROUP_FIELDS.to_string(),
            })
        }
    };
    Ok(build_table(
        group_by,
        records
            .iter()
            .map(|r| (key_of(r), r.rating, Some(r.price))),
    ))
}

const STUDENT_GROUP_FIELDS: &str = "department, app, type";

/// Group the student survey (which has no price data) by a field.
pub fn student_distribution(
    records: &[StudentRecord],
    group_by: &str,
) -> Result<DistributionTable, AnalysisError> {
    let key_of: fn(&StudentRecord) -> Option<String> = match group_by {
        "department" => |r| non_blank(&r.department),
        "app" => |r| non_blank(&r.app_name),
        "type" => |r| Some(r.app_type.to_string()),
        _ => {
            return Err(AnalysisError::UnknownField {
                field: group_by.to_string(),
                allowed: STUDENT_GROUP_FIELDS.to_string(),
            })
        }
    };
    Ok(build_table(
        group_by,
        records.iter().map(|r| (key_of(r), Some(r.rating), None)),
    ))
}

/// Variables that participate in joint exports and correlation matrices.
pub const NUMERIC_FIELDS: [&str; 5] =
    ["rating", "reviews_count", "size_bytes", "installs", "price"];

fn numeric_field(record: &AppRecord, field: &str) -> Result<Option<f64>, AnalysisError> {
    match field {
        "rating" => Ok(record.rating),
        "reviews_count" => Ok(Some(record.reviews_count as f64)),
        "size_bytes" => Ok(record.size_bytes.map(|v| v as f64)),
        "installs" => Ok(Some(record.installs as f64)),
        "price" => Ok(Some(record.price)),
        _ => Err(AnalysisError::UnknownField {
            field: field.to_string(),
            allowed: NUMERIC_FIELDS.join(", "),
        }),
    }
}

/// Mean of a numeric field over the records where it is present; None when
/// it is present nowhere.
pub fn mean_of(records: &[AppRecord], field: &str) -> Result<Option<f64>, AnalysisError> {
    let mut sum = 0.0;
    let mut count = 0u64;
    for record in records {
        if let Some(v) = numeric_field(record, field)? {
            sum += v;
            count += 1;
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Extract complete (x, y) pairs for two numeric fields, in record order.
/// A record missing either value contributes nothing.
pub fn joint_data(
    records: &[AppRecord],
    x_field: &str,
    y_field: &str,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut pairs = Vec::new();
    for record in records {
        let x = numeric_field(record, x_field)?;
        let y = numeric_field(record, y_field)?;
        if let (Some(x), Some(y)) = (x, y) {
            pairs.push((x, y));
        }
    }
    Ok(pairs)
}

/// (polarity, subjectivity) per scored review, in input order.
pub fn sentiment_scatter(scored: &[(ReviewRecord, SentimentScore)]) -> Vec<(f64, f64)> {
    scored
        .iter()
        .map(|(_, s)| (s.polarity, s.subjectivity))
        .collect()
}

/// Pearson product-moment coefficient over two complete series of equal
/// length. A constant series has no linear association to measure, so
/// either zero variance yields 0 with a warning.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(AnalysisError::TooFewPairs { found: xs.len() });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut covariance = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        covariance += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x) * (x - mean_x);
        var_y += (y - mean_y) * (y - mean_y);
    }
    if var_x == 0.0 || var_y == 0.0 {
        log::warn!("pearson over a zero-variance series, reporting 0");
        return Ok(0.0);
    }
    Ok((covariance / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise Pearson coefficients between the numeric app-metadata fields,
/// each pair computed over the records where both values are present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    /// Row-major square matrix aligned with `variables`.
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

/// Build the correlation matrix over `NUMERIC_FIELDS`. The diagonal is
/// exactly 1 and the matrix exactly symmetric by construction.
pub fn correlation_matrix(records: &[AppRecord]) -> Result<CorrelationMatrix, AnalysisError> {
    let variables: Vec<String> = NUMERIC_FIELDS.iter().map(|f| f.to_string()).collect();
    let k = variables.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let pairs = joint_data(records, &variables[i], &variables[j])?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = pearson(&xs, &ys)?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { variables, values })
}

/// Model quality on the held-out reviews.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSection {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

/// Either classifier flavor can fill the model section.
#[derive(Debug, Clone, Copy)]
pub enum ReportModel<'a> {
    Single(&'a FittedModel),
    Bagged(&'a BaggedModel),
}

impl ReportModel<'_> {
    fn predict_all(&self, matrix: &[SparseVector]) -> Result<Vec<Label>, AnalysisError> {
        match self {
            ReportModel::Single(model) => Ok(classifiers::predict_all(model, matrix)?),
            ReportModel::Bagged(model) => Ok(ensemble::predict_bagged_all(model, matrix)?),
        }
    }
}

/// The six report sections. Distributions and joint data cover the full
/// app corpus; the correlation matrices are computed per split so the two
/// can be compared.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RqReport {
    pub category_distribution: DistributionTable,
    pub rating_distribution: DistributionTable,
    pub price_distribution: DistributionTable,
    pub department_participation: DistributionTable,
    pub size_vs_rating: Vec<(f64, f64)>,
    pub train_correlations: CorrelationMatrix,
    pub test_correlations: CorrelationMatrix,
    pub sentiment_scatter: Vec<(f64, f64)>,
    pub price_vs_installs: Vec<(f64, f64)>,
    pub model: Option<ModelSection>,
}

/// Assemble all six sections. The model section is included only when a
/// fitted model and a vectorized held-out set are supplied.
pub fn rq_report(
    train_apps: &[AppRecord],
    test_apps: &[AppRecord],
    students: &[StudentRecord],
    scored_reviews: &[(ReviewRecord, SentimentScore)],
    model: Option<(ReportModel<'_>, &VectorizedDataset)>,
) -> Result<RqReport, AnalysisError> {
    let full: Vec<AppRecord> = train_apps.iter().chain(test_apps).cloned().collect();
    let model_section = match model {
        None => None,
        Some((fitted, held_out)) => {
            let predictions = fitted.predict_all(&held_out.matrix)?;
            let matrix = confusion(&predictions, &held_out.labels)?;
            Some(ModelSection {
                confusion: matrix,
                accuracy: matrix.accuracy(),
            })
        }
    };
    Ok(RqReport {
        category_distribution: distribution(&full, "category")?,
        rating_distribution: distribution(&full, "rating")?,
        price_distribution: distribution(&full, "price")?,
        department_participation: student_distribution(students, "department")?,
        size_vs_rating: joint_data(&full, "size_bytes", "rating")?,
        train_correlations: correlation_matrix(train_apps)?,
        test_correlations: correlation_matrix(test_apps)?,
        sentiment_scatter: sentiment_scatter(scored_reviews),
        price_vs_installs: joint_data(&full, "price", "installs")?,
        model: model_section,
    })
}

const SUMMARY_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct SummaryFile<'a> {
    version: u32,
    report: &'a RqReport,
}

fn write_pairs(
    path: &Path,
    header: [&str; 2],
    pairs: &[(f64, f64)],
) -> Result<(), AnalysisError> {
    let mut writer = csv::Writer::from_writer(File::create(path)?);
    writer.write_record(header)?;
    for &(x, y) in pairs {
        writer.write_record([x.to_string(), y.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Write one CSV per section plus `summary.json` into `dir` (created if
/// absent). Returns the written paths in a fixed order; the model CSV is
/// omitted when that section is absent.
pub fn export_rq_report(report: &RqReport, dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let distributions_path = dir.join("rq1_distributions.csv");
    {
        let mut writer = csv::Writer::from_writer(File::create(&distributions_path)?);
        writer.write_record(["group_field", "key", "count", "mean_rating", "mean_price"])?;
        for table in [
            &report.category_distribution,
            &report.rating_distribution,
            &report.price_distribution,
            &report.department_participation,
        ] {
            for row in &table.rows {
                writer.write_record([
                    table.group_field.clone(),
                    row.key.clone(),
                    row.count.to_string(),
                    row.mean_rating.map(|v| v.to_string()).unwrap_or_default(),
                    row.mean_price.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        writer.flush()?;
    }
    written.push(distributions_path);

    let size_rating_path = dir.join("rq2_size_vs_rating.csv");
    write_pairs(&size_rating_path, ["size_bytes", "rating"], &report.size_vs_rating)?;
    written.push(size_rating_path);

    let correlations_path = dir.join("rq3_correlations.csv");
    {
        let mut writer = csv::Writer::from_writer(File::create(&correlations_path)?);
        let mut header = vec!["corpus".to_string(), "variable".to_string()];
        header.extend(report.train_correlations.variables.iter().cloned());
        writer.write_record(&header)?;
        for (corpus, matrix) in [
            ("train", &report.train_correlations),
            ("test", &report.test_correlations),
        ] {
            for (i, variable) in matrix.variables.iter().enumerate() {
                let mut row = vec![corpus.to_string(), variable.clone()];
                row.extend(matrix.values[i].iter().map(|v| v.to_string()));
                writer.write_record(&row)?;
            }
        }
        writer.flush()?;
    }
    written.push(correlations_path);

    let sentiment_path = dir.join("rq4_sentiment.csv");
    write_pairs(&sentiment_path, ["polarity", "subjectivity"], &report.sentiment_scatter)?;
    written.push(sentiment_path);

    let price_installs_path = dir.join("rq5_price_vs_installs.csv");
    write_pairs(&price_installs_path, ["price", "installs"], &report.price_vs_installs)?;
    written.push(price_installs_path);

    if let Some(section) = &report.model {
        let confusion_path = dir.join("rq6_confusion.csv");
        let mut writer = csv::Writer::from_writer(File::create(&confusion_path)?);
        writer.write_record(["tp", "fp", "fn", "tn", "accuracy"])?;
        writer.write_record([
            section.confusion.true_positives.to_string(),
            section.confusion.false_positives.to_string(),
            section.confusion.false_negatives.to_string(),
            section.confusion.true_negatives.to_string(),
            section.accuracy.to_string(),
        ])?;
        writer.flush()?;
        written.push(confusion_path);
    }

    let summary_path = dir.join("summary.json");
    let summary = SummaryFile {
        version: SUMMARY_FORMAT_VERSION,
        report,
    };
    serde_json::to_writer_pretty(File::create(&summary_path)?, &summary)?;
    written.push(summary_path);

    Ok(written)
}
