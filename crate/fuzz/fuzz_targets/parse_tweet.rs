#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        if let Ok(parsed) = infodemic::tweet::parse_tweet(line) {
            let t = &parsed.tweet;
            assert!(t
                .hashtags
                .iter()
                .all(|h| !h.is_empty() && h.to_lowercase() == *h));
            if let Some(c) = t.coordinates {
                assert!((-90.0..=90.0).contains(&c.lat) && (-180.0..=180.0).contains(&c.lon));
            }
            if let Some(p) = t.parent {
                assert_ne!(p.parent_id, t.id);
            }
        }
    }
});
