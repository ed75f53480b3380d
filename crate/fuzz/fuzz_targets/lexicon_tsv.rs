#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(lex) = infodemic::sentiment::SentimentLexicon::from_tsv(data) {
        let s = infodemic::sentiment::score_text(&lex, "not GOOD but very bad");
        assert!((-1.0..=1.0).contains(&s.compound));
    }
});
