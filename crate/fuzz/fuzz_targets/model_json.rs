//! Saved classifier files are reloaded by the analyze pipeline. Loading
//! untrusted bytes must fail cleanly or produce a model that predicts
//! without panicking on a matching-dimension input.

#![no_main]

use libfuzzer_sys::fuzz_target;

use appsent::classifiers::{self, FittedModel};
use appsent::vectorize::SparseVector;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = FittedModel::from_reader(data) {
        let dimension = model.dimension();
        let probe = SparseVector {
            dimension,
            entries: if dimension == 0 { vec![] } else { vec![(0, 1.0)] },
        };
        // prediction may fail with a typed error but must never panic
        let _ = classifiers::predict(&model, &probe);
        let _ = classifiers::predict_score(&model, &probe);
    }
});
