#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(host) = infodemic::catalog::normalize_domain(s) {
            assert!(!host.is_empty());
            assert!(!host.starts_with("www."));
        }
    }
});
