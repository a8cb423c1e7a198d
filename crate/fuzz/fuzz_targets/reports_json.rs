//! Benchmark report files are re-read for table regeneration; the loader
//! recomputes every derived metric and must reject inconsistent files
//! without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(reports) = appsent::eval::reports_from_reader(data) {
        for report in &reports {
            assert!(report.accuracy.is_finite());
            assert!((0.0..=1.0).contains(&report.accuracy));
        }
    }
});
