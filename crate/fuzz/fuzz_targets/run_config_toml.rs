//! Run configuration files are user-authored TOML; deserialization must be
//! total over arbitrary text and reject unknown keys instead of guessing.

#![no_main]

use libfuzzer_sys::fuzz_target;

use appsent::cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = toml::from_str::<RunConfig>(text);
});
