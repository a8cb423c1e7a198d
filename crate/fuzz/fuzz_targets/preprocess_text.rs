//! The text pipeline (normalize, tokenize, stopword filter, stem) runs on
//! raw review text from the wild. It must be total and its output must
//! satisfy the tokenizer contract.

#![no_main]

use libfuzzer_sys::fuzz_target;

use appsent::textprep::{normalize, preprocess, tokenize, PreprocessConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };

    let normalized = normalize(text);
    for token in tokenize(&normalized) {
        assert!(!token.is_empty(), "tokenizer produced an empty token");
        assert_eq!(token, token.to_lowercase(), "token not lowercased");
    }

    // the full pipeline shares those invariants under every toggle combo
    for (filter_stopwords, stem) in [(false, false), (true, false), (false, true), (true, true)] {
        let config = PreprocessConfig {
            filter_stopwords,
            stem,
            ..PreprocessConfig::default()
        };
        let document = preprocess(0, text, &config);
        assert_eq!(document.original_length, text.chars().count());
        for token in &document.tokens {
            assert!(!token.is_empty());
        }
    }
});
