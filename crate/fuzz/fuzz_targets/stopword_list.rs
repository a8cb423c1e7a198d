//! Stopword lists come from user-supplied files; parsing must be total,
//! and accepted lists must contain exactly the non-comment entries.

#![no_main]

use libfuzzer_sys::fuzz_target;

use appsent::textprep::StopwordSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = StopwordSet::from_reader(data) {
        // a successful parse means every surviving entry was ascii
        // lowercase, so re-derive the expected membership from the input
        if let Ok(text) = std::str::from_utf8(data) {
            for line in text.lines() {
                let entry = match line.split_once('#') {
                    Some((before, _)) => before.trim(),
                    None => line.trim(),
                };
                if !entry.is_empty() {
                    assert!(set.contains(entry), "entry {entry:?} missing");
                }
            }
        }
    }
});
