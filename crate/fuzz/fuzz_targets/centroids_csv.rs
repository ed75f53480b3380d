#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = infodemic::geo::Centroids::from_reader(data) {
        let _ = c.lookup("US", Some("California"));
    }
});
