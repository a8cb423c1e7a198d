//! k-nearest-neighbors under cosine similarity.
//!
//! Fitting just stores the training matrix. Prediction scans every stored
//! vector, which is fine at review-corpus scale and keeps the neighbor
//! semantics exact: neighbors are ordered by similarity descending with
//! index ascending as the tie-break, so reruns are reproducible.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::vectorize::{SparseVector, VectorizedDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnIndex {
    pub vectors: Vec<SparseVector>,
    pub labels: Vec<Label>,
    pub k: usize,
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub(crate) fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let na = a.l2_norm();
    let nb = b.l2_norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

impl KnnIndex {
    pub fn dimension(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.dimension)
    }

    /// The up-to-k nearest training indices, most similar first.
    /// Similarity ties keep the lower training index first.
    fn neighbors(&self, query: &SparseVector) -> Vec<usize> {
        let mut ranked: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (cosine(query, v), i))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked.truncate(self.k.min(self.vectors.len()));
        ranked.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority vote over the k nearest; a tied vote falls back to the
    /// single nearest neighbor's label.
    pub fn predict(&self, query: &SparseVector) -> Label {
        let neighbors = self.neighbors(query);
        let positives = neighbors
            .iter()
            .filter(|&&i| self.labels[i] == Label::Positive)
            .count();
        let negatives = neighbors.len() - positives;
        match positives.cmp(&negatives) {
            std::cmp::Ordering::Greater => Label::Positive,
            std::cmp::Ordering::Less => Label::Negative,
            std::cmp::Ordering::Equal => self.labels[neighbors[0]],
        }
    }

    /// Fraction of the considered neighbors voting Positive.
    pub fn score(&self, query: &SparseVector) -> f64 {
        let neighbors = self.neighbors(query);
        if neighbors.is_empty() {
            return 0.0;
        }
        let positives = neighbors
            .iter()
            .filter(|&&i| self.labels[i] == Label::Positive)
            .count();
        positives as f64 / neighbors.len() as f64
    }

    pub(super) fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if self.vectors.is_empty() {
            return Err("index holds no training vectors".into());
        }
        if self.vectors.len() != self.labels.len() {
            return Err(format!(
                "{} vectors but {} labels",
                self.vectors.len(),
                self.labels.len()
            ));
        }
        let dimension = self.vectors[0].dimension;
        for (i, v) in self.vectors.iter().enumerate() {
            if v.dimension != dimension {
                return Err(format!(
                    "vector {i} has dimension {} but vector 0 has {dimension}",
                    v.dimension
                ));
            }
            super::validate_sparse_vector(v).map_err(|m| format!("vector {i}: {m}"))?;
        }
        Ok(())
    }
}

pub(super) fn fit(dataset: &VectorizedDataset, k: usize) -> KnnIndex {
    KnnIndex {
        vectors: dataset.matrix.clone(),
        labels: dataset.labels.clone(),
        k,
    }
}
