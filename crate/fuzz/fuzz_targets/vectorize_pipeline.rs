//! Fit a vocabulary on fuzzed documents and transform them back through
//! it, checking the sparse-vector contract end to end: sorted unique
//! indices inside the dimension, no explicit zeros, finite weights.

#![no_main]

use libfuzzer_sys::fuzz_target;

use appsent::textprep::TokenizedDocument;
use appsent::vectorize::{fit_vocabulary, transform, VectorizeConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };

    // one document per line, whitespace-tokenized, bounded for throughput
    let documents: Vec<TokenizedDocument> = text
        .lines()
        .take(16)
        .enumerate()
        .map(|(doc_id, line)| TokenizedDocument {
            doc_id,
            tokens: line.split_whitespace().take(64).map(str::to_owned).collect(),
            original_length: line.chars().count(),
        })
        .collect();
    if documents.is_empty() {
        return;
    }

    let ngram_max = 1 + (data.len() % 3);
    let config = VectorizeConfig {
        ngram_range: (1, ngram_max),
        min_df: 1 + (data.len() % 2) as u64,
        max_features: Some(32),
        normalize: data.len().is_multiple_of(2),
        smooth_idf: data.len().is_multiple_of(3),
        sublinear_tf: data.len().is_multiple_of(5),
        allow_empty_vocabulary: true,
    };

    let vocabulary = fit_vocabulary(&documents, &config).expect("fit is total here");
    for document in &documents {
        let vector = transform(document, &vocabulary, &config).expect("transform is total here");
        let mut previous: Option<usize> = None;
        for &(index, value) in &vector.entries {
            assert!(index < vector.dimension, "index out of range");
            assert!(previous.is_none_or(|p| p < index), "indices not strictly sorted");
            assert!(value != 0.0, "explicit zero stored");
            assert!(value.is_finite(), "non-finite weight");
            previous = Some(index);
        }
        if config.normalize && !vector.entries.is_empty() {
            let norm: f64 = vector.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "normalized vector has norm {norm}");
        }
    }
});
