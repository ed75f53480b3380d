// Replays the checked-in fuzz seed corpora through the same entry points as
// the fuzz targets, so the seeds stay valid on stable toolchains.

use std::fs;
use std::path::{Path, PathBuf};

use infodemic::catalog::{normalize_domain, SourceCatalog, TagMode};
use infodemic::config::PipelineConfig;
use infodemic::geo::{Centroids, Gazetteer};
use infodemic::sentiment::{score_text, SentimentLexicon};
use infodemic::tweet::{parse_timestamp, parse_tweet};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).expect("seeds are UTF-8")
}

#[test]
fn parse_tweet_seeds() {
    let mut ok = 0;
    for (path, bytes) in seeds("parse_tweet") {
        if let Ok(parsed) = parse_tweet(text(&bytes)) {
            let t = &parsed.tweet;
            assert!(
                t.hashtags
                    .iter()
                    .all(|h| !h.is_empty() && h.to_lowercase() == *h),
                "{}",
                path.display()
            );
            if let Some(p) = t.parent {
                assert_ne!(p.parent_id, t.id);
            }
            ok += 1;
        }
    }
    assert!(ok >= 5);
}

#[test]
fn timestamp_seeds() {
    let parsed = seeds("timestamp")
        .iter()
        .filter(|(_, b)| parse_timestamp(text(b)).is_ok())
        .count();
    assert!(parsed >= 2);
}

#[test]
fn catalog_seeds() {
    for (path, bytes) in seeds("catalog_csv") {
        for mode in [TagMode::Strict, TagMode::Lenient] {
            if let Ok(cat) = SourceCatalog::from_csv_str(text(&bytes), mode) {
                assert!(
                    cat.entries().values().all(|e| !e.categories.is_empty()),
                    "{}",
                    path.display()
                );
            }
        }
    }
}

#[test]
fn gazetteer_seeds() {
    for (_, bytes) in seeds("gazetteer_csv") {
        if let Ok(gaz) = Gazetteer::from_reader(bytes.as_slice()) {
            for e in gaz.entries() {
                assert!(e.us_state.is_none() || e.country == "US");
                assert!(gaz.match_location(&e.pattern).is_some());
            }
        }
    }
}

#[test]
fn centroid_seeds() {
    for (_, bytes) in seeds("centroids_csv") {
        if let Ok(c) = Centroids::from_reader(bytes.as_slice()) {
            let _ = c.lookup("US", Some("California"));
        }
    }
}

#[test]
fn lexicon_seeds() {
    for (_, bytes) in seeds("lexicon_tsv") {
        if let Ok(lex) = SentimentLexicon::from_tsv(bytes.as_slice()) {
            let s = score_text(&lex, "not GOOD but very bad");
            assert!((-1.0..=1.0).contains(&s.compound));
        }
    }
}

#[test]
fn domain_seeds() {
    for (_, bytes) in seeds("normalize_domain") {
        if let Ok(host) = normalize_domain(text(&bytes)) {
            assert!(!host.is_empty() && !host.starts_with("www."));
        }
    }
}

#[test]
fn config_seeds() {
    let accepted = seeds("config_json")
        .iter()
        .filter(|(_, b)| PipelineConfig::from_json(text(b), Path::new("/fuzz")).is_ok())
        .count();
    assert!(accepted >= 1);
}
