//! The labeled review loader must never panic, and every accepted record
//! must satisfy the invariants downstream consumers rely on.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(load) = appsent::corpus::load_review_corpus_from_reader(data) {
        for record in &load.records {
            assert!(!record.raw_text.trim().is_empty(), "blank review accepted");
            if let Some(rating) = record.rating {
                assert!(rating.is_finite());
            }
        }
        // accounting must close: every input row is either a record or a
        // reject (neutral rows land in the neutral list AND as a reject)
        assert_eq!(
            load.records.len() + load.rejects.len(),
            load.stats.input_rows,
            "rows silently dropped"
        );
        assert!(load.neutral.len() <= load.rejects.len());
    }
});
