#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(gaz) = infodemic::geo::Gazetteer::from_reader(data) {
        for e in gaz.entries() {
            assert!(e.us_state.is_none() || e.country == "US");
            let _ = gaz.match_location(&e.pattern);
        }
    }
});
