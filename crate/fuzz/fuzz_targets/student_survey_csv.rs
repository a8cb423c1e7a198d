//! The survey loader must never panic, and accepted rows must convert to
//! labeled reviews without panicking (the conversion trusts load-time
//! rating validation).

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(load) = appsent::corpus::load_student_survey_from_reader(data) {
        for record in &load.records {
            assert!((1.0..=5.0).contains(&record.rating));
            let review = record.to_review();
            assert_eq!(review.rating, Some(record.rating));
        }
    }
});
