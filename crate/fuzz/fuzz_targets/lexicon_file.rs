//! Lexicon parsing must be total, and anything it accepts must be safe to
//! score with: finite polarities in [-1, 1] and usable modifier factors.

#![no_main]

use libfuzzer_sys::fuzz_target;

use appsent::lexicon;

fuzz_target!(|data: &[u8]| {
    if let Ok(load) = lexicon::load_lexicon_from_reader(data) {
        // scoring a token stream against the parsed lexicon must not panic
        // and must produce finite numbers
        if let Ok(text) = std::str::from_utf8(data) {
            let tokens: Vec<String> = text
                .split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty())
                .take(64)
                .map(|t| t.to_lowercase())
                .collect();
            let score = lexicon::score(&tokens, &load.lexicon);
            assert!(score.polarity.is_finite());
            assert!(score.subjectivity.is_finite());
            assert!((-1.0..=1.0).contains(&score.polarity));
            assert!((0.0..=1.0).contains(&score.subjectivity));
        }
    }
});
