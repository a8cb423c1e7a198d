//! The app metadata loader must never panic: any byte stream either parses
//! into records plus per-row rejects or fails with a typed error.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(load) = appsent::corpus::load_app_metadata_from_reader(data) {
        // accepted rows carry the invariants the rest of the pipeline assumes
        for record in &load.records {
            if let Some(rating) = record.rating {
                assert!((1.0..=5.0).contains(&rating), "rating {rating} out of range");
            }
            assert!(!record.app_name.is_empty(), "empty app name accepted");
        }
    }
});
