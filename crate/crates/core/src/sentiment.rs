//! Lexicon valence scoring with negation, booster and capitalization rules,
//! plus country/day aggregation and policy-hashtag panels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoIndex;
use crate::ingest::CorpusStore;
use crate::time::Day;
use crate::tweet::Tweet;

const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.tsv");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad lexicon row {line}: {reason}")]
    BadRow { line: u64, reason: String },
    #[error("token `{0}` is both a valence entry and a negator")]
    Conflict(String),
}

/// Scoring constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SentimentConfig {
    pub negation_factor: f64,
    pub negation_window: usize,
    pub caps_increment: f64,
    pub alpha: f64,
    pub threshold: f64,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            negation_factor: -0.74,
            negation_window: 3,
            caps_increment: 0.733,
            alpha: 15.0,
            threshold: 0.05,
        }
    }
}

const DEFAULT_NEGATORS: &[&str] = &[
    "ain't",
    "aint",
    "aren't",
    "arent",
    "cannot",
    "can't",
    "cant",
    "couldn't",
    "couldnt",
    "didn't",
    "didnt",
    "doesn't",
    "doesnt",
    "don't",
    "dont",
    "hadn't",
    "hasn't",
    "haven't",
    "isn't",
    "isnt",
    "neither",
    "never",
    "no",
    "nobody",
    "none",
    "nor",
    "not",
    "nothing",
    "nowhere",
    "shouldn't",
    "wasn't",
    "weren't",
    "without",
    "won't",
    "wont",
    "wouldn't",
];

const DEFAULT_BOOSTERS: &[(&str, f64)] = &[
    ("absolutely", 0.293),
    ("completely", 0.293),
    ("extremely", 0.293),
    ("highly", 0.293),
    ("incredibly", 0.293),
    ("really", 0.293),
    ("so", 0.293),
    ("totally", 0.293),
    ("very", 0.293),
    ("barely", -0.293),
    ("hardly", -0.293),
    ("kinda", -0.293),
    ("slightly", -0.293),
    ("somewhat", -0.293),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    valences: HashMap<String, f64>,
    boosters: HashMap<String, f64>,
    negators: HashSet<String>,
    pub config: SentimentConfig,
}

impl SentimentLexicon {
    pub fn new(
        valences: HashMap<String, f64>,
        boosters: HashMap<String, f64>,
        negators: HashSet<String>,
        config: SentimentConfig,
    ) -> Result<SentimentLexicon, LexiconError> {
        let valences: HashMap<String, f64> = valences
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
        let negators: HashSet<String> = negators.into_iter().map(|n| n.to_lowercase()).collect();
        if let Some(tok) = negators.iter().find(|n| valences.contains_key(*n)) {
            return Err(LexiconError::Conflict(tok.clone()));
        }
        Ok(SentimentLexicon {
            valences,
            boosters: boosters
                .into_iter()
                .map(|(k, v)| (k.to_lowercase(), v))
                .collect(),
            negators,
            config,
        })
    }

    /// Reads `token<TAB>valence` rows (extra columns ignored, `#` comments
    /// and blank lines skipped) with the default boosters and negators.
    pub fn from_tsv<R: Read>(reader: R) -> Result<SentimentLexicon, LexiconError> {
        let mut valences = HashMap::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = line.map_err(|e| LexiconError::BadRow {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let token = cols.next().unwrap_or("").trim();
            let value = cols.next().map(str::trim).unwrap_or("");
            let bad = |reason: &str| LexiconError::BadRow {
                line: line_no,
                reason: reason.to_string(),
            };
            if token.is_empty() {
                return Err(bad("empty token"));
            }
            let v: f64 = value.parse().map_err(|_| bad("valence is not a number"))?;
            if !(-4.0..=4.0).contains(&v) {
                return Err(bad("valence outside [-4, 4]"));
            }
            valences.insert(token.to_string(), v);
        }
        SentimentLexicon::new(
            valences,
            DEFAULT_BOOSTERS
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            DEFAULT_NEGATORS.iter().map(|n| n.to_string()).collect(),
            SentimentConfig::default(),
        )
    }

    pub fn load(path: &Path) -> Result<SentimentLexicon, LexiconError> {
        let file = File::open(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        SentimentLexicon::from_tsv(file)
    }

    /// The small lexicon shipped with the crate.
    pub fn bundled() -> SentimentLexicon {
        SentimentLexicon::from_tsv(BUNDLED_LEXICON.as_bytes()).expect("bundled lexicon is valid")
    }

    pub fn with_config(mut self, config: SentimentConfig) -> SentimentLexicon {
        self.config = config;
        self
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    /// All valences multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SentimentLexicon {
        SentimentLexicon {
            valences: self
                .valences
                .iter()
                .map(|(k, v)| (k.clone(), v * factor))
                .collect(),
            ..self.clone()
        }
    }

    fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token) || token.ends_with("n't")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub compound: f64,
    pub label: SentimentLabel,
    pub raw_sum: f64,
}

struct Token<'a> {
    lower: String,
    original: &'a str,
}

impl Token<'_> {
    fn all_caps(&self) -> bool {
        let mut letters = self
            .original
            .chars()
            .filter(|c| c.is_alphabetic())
            .peekable();
        letters.peek().is_some() && letters.all(|c| c.is_uppercase())
    }
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(|t| Token {
            lower: t.to_lowercase(),
            original: t,
        })
        .collect()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn label_for(compound: f64, threshold: f64) -> SentimentLabel {
    if compound >= threshold {
        SentimentLabel::Positive
    } else if compound <= -threshold {
        SentimentLabel::Negative
    } else {
        SentimentLabel::Neutral
    }
}

/// Scores one text. Unknown tokens contribute nothing.
pub fn score_text(lexicon: &SentimentLexicon, text: &str) -> SentimentScore {
    let cfg = &lexicon.config;
    let tokens = tokenize(text);
    let mut raw_sum = 0.0;
    for (i, tok) in tokens.iter().enumerate() {
        let Some(mut v) = lexicon.valence(&tok.lower) else {
            continue;
        };
        let window = &tokens[i.saturating_sub(cfg.negation_window)..i];
        if window.iter().any(|t| lexicon.is_negator(&t.lower)) {
            v *= cfg.negation_factor;
        }
        if i > 0 {
            if let Some(b) = lexicon.boosters.get(&tokens[i - 1].lower) {
                v += sign(v) * b;
            }
        }
        if tok.all_caps() {
            v += sign(v) * cfg.caps_increment;
        }
        raw_sum += v;
    }
    let compound = if raw_sum == 0.0 {
        0.0
    } else {
        (raw_sum / (raw_sum * raw_sum + cfg.alpha).sqrt()).clamp(-1.0, 1.0)
    };
    SentimentScore {
        compound,
        label: label_for(compound, cfg.threshold),
        raw_sum,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Country,
    Day,
    CountryDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentGroup {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<Day>,
    pub n: u64,
    pub mean_compound: f64,
    pub pct_pos: f64,
    pub pct_neg: f64,
    pub pct_neu: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    n: u64,
    sum: f64,
    pos: u64,
    neg: u64,
    neu: u64,
}

impl Tally {
    fn add(&mut self, s: &SentimentScore) {
        self.n += 1;
        self.sum += s.compound;
        match s.label {
            SentimentLabel::Positive => self.pos += 1,
            SentimentLabel::Negative => self.neg += 1,
            SentimentLabel::Neutral => self.neu += 1,
        }
    }

    fn finish(self, country: Option<String>, day: Option<Day>) -> SentimentGroup {
        let pct = |x: u64| x as f64 / self.n as f64 * 100.0;
        SentimentGroup {
            country,
            day,
            n: self.n,
            mean_compound: self.sum / self.n as f64,
            pct_pos: pct(self.pos),
            pct_neg: pct(self.neg),
            pct_neu: pct(self.neu),
        }
    }
}

fn english(store: &CorpusStore) -> Vec<&Tweet> {
    store.collected().filter(|t| t.is_english()).collect()
}

/// Mean compound and label shares per group over collected English tweets.
/// Tweets lacking the grouping attribute are skipped; empty groups are
/// absent.
pub fn aggregate_sentiment(
    store: &CorpusStore,
    geo: &GeoIndex,
    lexicon: &SentimentLexicon,
    group: GroupBy,
) -> Vec<SentimentGroup> {
    let tweets = english(store);
    let scores: Vec<SentimentScore> = tweets
        .par_iter()
        .map(|t| score_text(lexicon, &t.text))
        .collect();
    let mut groups: BTreeMap<(Option<String>, Option<Day>), Tally> = BTreeMap::new();
    for (t, s) in tweets.iter().zip(&scores) {
        let country = geo.country(t.id).map(str::to_string);
        let day = t.day();
        let key = match group {
            GroupBy::Country => match country {
                Some(c) => (Some(c), None),
                None => continue,
            },
            GroupBy::Day => match day {
                Some(d) => (None, Some(d)),
                None => continue,
            },
            GroupBy::CountryDay => match (country, day) {
                (Some(c), Some(d)) => (Some(c), Some(d)),
                _ => continue,
            },
        };
        groups.entry(key).or_default().add(s);
    }
    groups
        .into_iter()
        .map(|((c, d), tally)| tally.finish(c, d))
        .collect()
}

/// A named hashtag filter such as the work-from-home set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTagSet {
    pub name: String,
    pub tags: Vec<String>,
}

impl PolicyTagSet {
    pub fn new(name: &str, tags: &[&str]) -> PolicyTagSet {
        let mut tags: Vec<String> = tags
            .iter()
            .map(|t| t.trim_start_matches('#').to_lowercase())
            .collect();
        tags.sort();
        tags.dedup();
        PolicyTagSet {
            name: name.to_string(),
            tags,
        }
    }

    pub fn work_from_home() -> PolicyTagSet {
        PolicyTagSet::new(
            "work_from_home",
            &[
                "#workfromhome",
                "#wfm",
                "#workfromhome",
                "#workingfromhome",
                "#wfhlife",
            ],
        )
    }

    pub fn social_distancing() -> PolicyTagSet {
        PolicyTagSet::new(
            "social_distancing",
            &["#socialdistance", "#socialdistancing"],
        )
    }

    pub fn matches(&self, tweet: &Tweet) -> bool {
        tweet
            .hashtags
            .iter()
            .any(|h| self.tags.iter().any(|t| t.eq_ignore_ascii_case(h)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTweet {
    #[serde(with = "crate::id_string")]
    pub tweet_id: u64,
    pub text: String,
    pub compound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySentiment {
    pub name: String,
    pub tags: Vec<String>,
    pub n_tweets: u64,
    pub distribution: Vec<SentimentGroup>,
    pub top_positive: Vec<RankedTweet>,
    pub top_negative: Vec<RankedTweet>,
}

/// Daily sentiment of English tweets carrying any tag of `tags`, with the
/// strongest positive and negative tweets by |compound|.
pub fn policy_sentiment(
    store: &CorpusStore,
    lexicon: &SentimentLexicon,
    tags: &PolicyTagSet,
    top_n: usize,
) -> PolicySentiment {
    let tweets: Vec<&Tweet> = english(store)
        .into_iter()
        .filter(|t| tags.matches(t))
        .collect();
    let scores: Vec<SentimentScore> = tweets
        .par_iter()
        .map(|t| score_text(lexicon, &t.text))
        .collect();
    let mut by_day: BTreeMap<Day, Tally> = BTreeMap::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (t, s) in tweets.iter().zip(&scores) {
        if let Some(d) = t.day() {
            by_day.entry(d).or_default().add(s);
        }
        let ranked = RankedTweet {
            tweet_id: t.id,
            text: crate::export::truncate_text(&t.text),
            compound: s.compound,
        };
        match s.label {
            SentimentLabel::Positive => pos.push(ranked),
            SentimentLabel::Negative => neg.push(ranked),
            SentimentLabel::Neutral => {}
        }
    }
    let rank = |v: &mut Vec<RankedTweet>| {
        v.sort_by(|a, b| {
            b.compound
                .abs()
                .total_cmp(&a.compound.abs())
                .then(a.tweet_id.cmp(&b.tweet_id))
        });
        v.truncate(top_n);
    };
    rank(&mut pos);
    rank(&mut neg);
    PolicySentiment {
        name: tags.name.clone(),
        tags: tags.tags.clone(),
        n_tweets: tweets.len() as u64,
        distribution: by_day
            .into_iter()
            .map(|(d, tally)| tally.finish(None, Some(d)))
            .collect(),
        top_positive: pos,
        top_negative: neg,
    }
}
