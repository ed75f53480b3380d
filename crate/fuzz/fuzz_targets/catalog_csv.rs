#![no_main]

use infodemic::catalog::{SourceCatalog, TagMode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        for mode in [TagMode::Strict, TagMode::Lenient] {
            if let Ok(cat) = SourceCatalog::from_csv_str(s, mode) {
                assert!(cat.entries().values().all(|e| !e.categories.is_empty()));
            }
        }
    }
});
