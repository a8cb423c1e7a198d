//! Vocabulary files round-trip through saved model bundles; deserializing
//! untrusted bytes must either fail cleanly or yield a consistent table.

#![no_main]

use libfuzzer_sys::fuzz_target;

use appsent::vectorize::Vocabulary;

fuzz_target!(|data: &[u8]| {
    let _ = Vocabulary::from_reader(data);
});
