//! Batch analytics over newline-delimited tweet corpora: misinformation
//! labeling from source catalogs, retweet/reply cascade extraction, hashtag
//! narratives, lexicon sentiment, topic clustering and emerging trends,
//! exported as a JSON artifact bundle.

pub mod analytics;
pub mod catalog;
pub mod config;
pub mod export;
pub mod geo;
pub mod graph;
pub(crate) mod id_string;
pub mod ingest;
pub mod sentiment;
pub mod synth;
pub mod text;
pub mod time;
pub mod topics;
pub mod trends;
pub mod tweet;
pub mod unionfind;
