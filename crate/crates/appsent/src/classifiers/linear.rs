//! The two linear models: logistic regression and a primal linear SVM.
//!
//! Both share [`LinearParams`] (dense weights plus bias). They differ in
//! loss and optimizer:
//!
//! * Logistic regression minimizes L2-penalized binary cross-entropy with
//!   full-batch fixed-step gradient descent. The gradient is exposed via
//!   [`logistic_loss_and_gradient`] so tests can check it against finite
//!   differences.
//! * The SVM minimizes the hinge loss with the 1/(lambda t) stochastic
//!   subgradient schedule over seeded per-epoch shuffles. It is trained
//!   without an intercept: the 1/(lambda t) steps make an unregularized
//!   intercept swing wildly in early iterations, and L2-normalized text
//!   vectors separate fine through the origin.

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::seed;
use crate::vectorize::{SparseVector, VectorizedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearKind {
    Logistic,
    Svm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearParams {
    pub fn margin(&self, vector: &SparseVector) -> f64 {
        vector.dot_dense(&self.weights) + self.bias
    }

    /// sign(w.x + b); a margin of exactly 0 predicts Positive.
    pub fn predict(&self, vector: &SparseVector) -> Label {
        if self.margin(vector) >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// Logistic: posterior probability. SVM: the raw margin.
    pub fn score(&self, vector: &SparseVector) -> f64 {
        let margin = self.margin(vector);
        match self.kind {
            LinearKind::Logistic => sigmoid(margin),
            LinearKind::Svm => margin,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn target(label: Label) -> f64 {
    match label {
        Label::Positive => 1.0,
        Label::Negative => 0.0,
    }
}

/// L2-penalized mean binary cross-entropy and its exact gradient.
///
/// loss = -(1/N) sum_i [y ln p + (1-y) ln(1-p)] + (lambda/2) |w|^2 with
/// p = sigmoid(w.x + b). The bias is not penalized. Returns
/// (loss, d/dw, d/db).
pub fn logistic_loss_and_gradient(
    weights: &[f64],
    bias: f64,
    matrix: &[SparseVector],
    labels: &[Label],
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = matrix.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (vector, &label) in matrix.iter().zip(labels) {
        let margin = vector.dot_dense(weights) + bias;
        let y = target(label);
        // ln(1 + e^-|m|) computed stably from the margin sign
        loss += if margin >= 0.0 {
            (1.0 + (-margin).exp()).ln() + margin * (1.0 - y)
        } else {
            (1.0 + margin.exp()).ln() - margin * y
        };
        let residual = sigmoid(margin) - y;
        for &(idx, x) in &vector.entries {
            grad_w[idx] += residual * x;
        }
        grad_b += residual;
    }
    loss /= n;
    grad_b /= n;
    let mut penalty = 0.0;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g /= n;
        *g += lambda * w;
        penalty += w * w;
    }
    loss += 0.5 * lambda * penalty;
    (loss, grad_w, grad_b)
}

/// Full-batch gradient descent from zero initialization. Stops when the
/// gradient infinity-norm (weights and bias jointly) drops below
/// `tolerance`, or after `max_epochs` epochs with a warning.
pub(super) fn fit_logistic(
    dataset: &VectorizedDataset,
    lambda: f64,
    step: f64,
    max_epochs: usize,
    tolerance: f64,
) -> LinearParams {
    let dimension = dataset
        .matrix
        .first()
        .map_or(dataset.vocabulary.len(), |v| v.dimension);
    let mut weights = vec![0.0; dimension];
    let mut bias = 0.0;
    let mut converged = false;
    for _ in 0..max_epochs {
        let (_, grad_w, grad_b) =
            logistic_loss_and_gradient(&weights, bias, &dataset.matrix, &dataset.labels, lambda);
        let inf_norm = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if inf_norm < tolerance {
            converged = true;
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= step * g;
        }
        bias -= step * grad_b;
    }
    if !converged {
        warn!("logistic regression hit the {max_epochs}-epoch cap before the gradient tolerance");
    }
    LinearParams {
        kind: LinearKind::Logistic,
        weights,
        bias,
    }
}

fn signed_target(label: Label) -> f64 {
    match label {
        Label::Positive => 1.0,
        Label::Negative => -1.0,
    }
}

/// Hinge-loss stochastic subgradient descent with the 1/(lambda t) step
/// schedule: at step t, w <- (1 - 1/t) w, plus (1/(lambda t)) y x when the
/// example violates the margin (y w.x < 1). Epoch order is a seeded
/// shuffle; epoch e uses the stream-e seed derived from the model seed.
pub(super) fn fit_svm(
    dataset: &VectorizedDataset,
    lambda: f64,
    epochs: usize,
    model_seed: u64,
) -> LinearParams {
    let dimension = dataset
        .matrix
        .first()
        .map_or(dataset.vocabulary.len(), |v| v.dimension);
    let n = dataset.matrix.len();

    // w is kept as scale * values so the per-step shrink is O(1)
    let mut scale = 1.0f64;
    let mut values = vec![0.0f64; dimension];
    let mut t: u64 = 1;

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..epochs {
        let mut rng = seed::rng(seed::derive(model_seed, epoch as u64));
        order.shuffle(&mut rng);
        for &i in &order {
            let vector = &dataset.matrix[i];
            let y = signed_target(dataset.labels[i]);
            let margin = scale * vector.dot_dense(&values);
            let eta = 1.0 / (lambda * t as f64);

            scale *= 1.0 - 1.0 / (t as f64);
            if scale.abs() < 1e-12 {
                // materialize before the representation degenerates; this
                // always happens at t = 1, where the shrink factor is 0
                for v in &mut values {
                    *v *= scale;
                }
                scale = 1.0;
            }
            if y * margin < 1.0 {
                for &(idx, x) in &vector.entries {
                    values[idx] += eta * y * x / scale;
                }
            }
            t += 1;
        }
    }

    let weights = values.into_iter().map(|v| v * scale).collect();
    LinearParams {
        kind: LinearKind::Svm,
        weights,
        bias: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{fit, predict, predict_score, Algorithm, FittedModel, ModelConfig};
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn manual_linear_model_signs() {
        let params = LinearParams {
            kind: LinearKind::Svm,
            weights: vec![1.0, -1.0],
            bias: 0.0,
        };
        // vector with only the second feature ("bad") set
        let bad_doc = sparse(2, &[(1, 1.0)]);
        assert_eq!(params.predict(&bad_doc), Label::Negative);
        assert_eq!(params.score(&bad_doc), -1.0);
        // zero margin predicts Positive
        let empty = sparse(2, &[]);
        assert_eq!(params.predict(&empty), Label::Positive);
    }

    #[test]
    fn zero_weight_logistic_scores_half() {
        let params = LinearParams {
            kind: LinearKind::Logistic,
            weights: vec![0.0, 0.0],
            bias: 0.0,
        };
        let v = sparse(2, &[(0, 3.0)]);
        assert_eq!(params.score(&v), 0.5);
    }

    #[test]
    fn logistic_learns_the_sign_of_one_feature() {
        let data = dataset_from_dense(
            &[vec![1.0], vec![-1.0]],
            &[Label::Positive, Label::Negative],
        );
        let model = fit(&data, &ModelConfig::default_for(Algorithm::LogisticRegression, 0)).unwrap();
        let FittedModel::Linear(params) = &model else {
            panic!("expected linear params")
        };
        assert!(params.weights[0] > 0.0);
        assert_eq!(
            predict(&model, &sparse(1, &[(0, 1.0)])).unwrap(),
            Label::Positive
        );
        assert_eq!(
            predict(&model, &sparse(1, &[(0, -1.0)])).unwrap(),
            Label::Negative
        );
        let p = predict_score(&model, &sparse(1, &[(0, 1.0)])).unwrap();
        assert!(p > 0.5 && p < 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seed::rng(11);
        for _ in 0..5 {
            let n = 6;
            let f = 4;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let labels: Vec<Label> = (0..n)
                .map(|i| {
                    if i % 2 == 0 {
                        Label::Positive
                    } else {
                        Label::Negative
                    }
                })
                .collect();
            let data = dataset_from_dense(&rows, &labels);
            let weights: Vec<f64> = (0..f).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let bias: f64 = rng.gen_range(-0.5..0.5);
            let lambda = 0.01;

            let (_, grad_w, grad_b) =
                logistic_loss_and_gradient(&weights, bias, &data.matrix, &data.labels, lambda);

            let h = 1e-6;
            let loss_at = |w: &[f64], b: f64| {
                logistic_loss_and_gradient(w, b, &data.matrix, &data.labels, lambda).0
            };
            for j in 0..f {
                let mut wp = weights.clone();
                let mut wm = weights.clone();
                wp[j] += h;
                wm[j] -= h;
                let numeric = (loss_at(&wp, bias) - loss_at(&wm, bias)) / (2.0 * h);
                let denom = numeric.abs().max(grad_w[j].abs()).max(1e-8);
                assert!(
                    (numeric - grad_w[j]).abs() / denom < 1e-4,
                    "dw[{j}]: analytic {} vs numeric {numeric}",
                    grad_w[j]
                );
            }
            let numeric_b = (loss_at(&weights, bias + h) - loss_at(&weights, bias - h)) / (2.0 * h);
            let denom = numeric_b.abs().max(grad_b.abs()).max(1e-8);
            assert!((numeric_b - grad_b).abs() / denom < 1e-4);
        }
    }

    /// Unit-norm points with a guaranteed margin around a known separator.
    fn separable(n: usize, margin: f64, rng_seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let f = 6;
        let mut rng = seed::rng(rng_seed);
        // separator direction e0; orthogonal noise fills e1..ef
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % 2 == 0;
            let m = rng.gen_range(margin..1.0) * if y { 1.0 } else { -1.0 };
            let mut noise: Vec<f64> = (0..f - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = noise.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let noise_scale = (1.0 - m * m).sqrt() / norm;
            for v in &mut noise {
                *v *= noise_scale;
            }
            let mut row = vec![m];
            row.extend(noise);
            rows.push(row);
            labels.push(if y { Label::Positive } else { Label::Negative });
        }
        (rows, labels)
    }

    #[test]
    fn both_linear_models_fit_separable_data_perfectly() {
        let (rows, labels) = separable(60, 0.5, 42);
        let data = dataset_from_dense(&rows, &labels);
        for algorithm in [Algorithm::LogisticRegression, Algorithm::Svm] {
            let model = fit(&data, &ModelConfig::default_for(algorithm, 3)).unwrap();
            let mut correct = 0;
            for (v, &l) in data.matrix.iter().zip(&data.labels) {
                if predict(&model, v).unwrap() == l {
                    correct += 1;
                }
            }
            assert_eq!(correct, rows.len(), "{algorithm:?} must separate the data");
        }
    }

    #[test]
    fn svm_training_is_seed_deterministic() {
        let (rows, labels) = separable(40, 0.5, 9);
        let data = dataset_from_dense(&rows, &labels);
        let config = ModelConfig::default_for(Algorithm::Svm, 77);
        let a = fit(&data, &config).unwrap();
        let b = fit(&data, &config).unwrap();
        assert_eq!(a, b);
        let c = fit(&data, &ModelConfig::default_for(Algorithm::Svm, 78)).unwrap();
        assert_ne!(a, c, "different seed shuffles differently");
    }

    proptest! {
        #[test]
        fn svm_margin_score_agrees_with_prediction(
            entries in proptest::collection::vec((0usize..4, -2.0f64..2.0), 0..4),
        ) {
            let (rows, labels) = separable(30, 0.5, 5);
            let data = dataset_from_dense(&rows, &labels);
            // deduplicate indices to build a valid sparse vector
            let mut map = std::collections::BTreeMap::new();
            for (i, w) in entries {
                map.insert(i, w);
            }
            let v = SparseVector {
                dimension: 6,
                entries: map.into_iter().collect(),
            };
            let model = fit(&data, &ModelConfig::default_for(Algorithm::Svm, 1)).unwrap();
            let label = predict(&model, &v).unwrap();
            let score = predict_score(&model, &v).unwrap();
            prop_assert_eq!(label == Label::Positive, score >= 0.0);
        }
    }
}
