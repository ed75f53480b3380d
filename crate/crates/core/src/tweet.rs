//! Tweet records and the NDJSON line parser.

use chrono::DateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Day;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("invalid timestamp `{0}`")]
    InvalidTimestamp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngagementKind {
    Retweet,
    Reply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentRef {
    pub parent_id: u64,
    pub kind: EngagementKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UserRef {
    pub user_id: u64,
    pub screen_name: String,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_location: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub lon: f64,
    pub lat: f64,
}

impl Coordinates {
    pub fn new(lon: f64, lat: f64) -> Option<Self> {
        let valid = lon.is_finite()
            && lat.is_finite()
            && (-180.0..=180.0).contains(&lon)
            && (-90.0..=90.0).contains(&lat);
        valid.then_some(Coordinates { lon, lat })
    }
}

/// One parsed tweet.
///
/// `created_at` is `None` when the record carried no timestamp at all; such
/// tweets take part in graph and label analyses but not in any per-day series.
/// `synthetic` marks parents materialized from an embedded retweeted-status
/// object rather than sampled from the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: u64,
    pub created_at: Option<i64>,
    pub text: String,
    pub lang: String,
    pub user: UserRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<ParentRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hashtags: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub urls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Coordinates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place_country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place_name: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

impl Tweet {
    pub fn day(&self) -> Option<Day> {
        self.created_at.map(Day::from_epoch_seconds)
    }

    pub fn is_english(&self) -> bool {
        self.lang == "en"
    }
}

/// A parsed line: the tweet itself plus the embedded retweeted-status
/// object, if any, as a synthetic parent.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLine {
    pub tweet: Tweet,
    pub embedded_parent: Option<Tweet>,
}

#[derive(Deserialize)]
struct RawTweet {
    id_str: Option<String>,
    id: Option<u64>,
    created_at: Option<String>,
    timestamp_ms: Option<String>,
    text: Option<String>,
    full_text: Option<String>,
    extended_tweet: Option<RawExtended>,
    lang: Option<String>,
    user: Option<RawUser>,
    coordinates: Option<RawCoordinates>,
    place: Option<RawPlace>,
    retweeted_status: Option<Box<RawTweet>>,
    in_reply_to_status_id_str: Option<String>,
    entities: Option<RawEntities>,
}

#[derive(Deserialize)]
struct RawExtended {
    full_text: Option<String>,
    entities: Option<RawEntities>,
}

#[derive(Deserialize)]
struct RawUser {
    id_str: Option<String>,
    id: Option<u64>,
    screen_name: Option<String>,
    verified: Option<bool>,
    location: Option<String>,
}

#[derive(Deserialize)]
struct RawCoordinates {
    coordinates: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPlace {
    country_code: Option<String>,
    full_name: Option<String>,
}

#[derive(Deserialize)]
struct RawEntities {
    #[serde(default)]
    hashtags: Vec<RawHashtag>,
    #[serde(default)]
    urls: Vec<RawUrl>,
}

#[derive(Deserialize)]
struct RawHashtag {
    text: String,
}

#[derive(Deserialize)]
struct RawUrl {
    expanded_url: Option<String>,
    url: Option<String>,
}

/// Parses one NDJSON line into a tweet.
pub fn parse_tweet(raw: &str) -> Result<ParsedLine, ParseError> {
    let record: RawTweet =
        serde_json::from_str(raw).map_err(|e| ParseError::MalformedRecord(e.to_string()))?;
    let embedded_parent = match &record.retweeted_status {
        Some(inner) => {
            let inner_parent = match &inner.in_reply_to_status_id_str {
                Some(r) => Some(ParentRef {
                    parent_id: parse_id(r)?,
                    kind: EngagementKind::Reply,
                }),
                None => None,
            };
            Some(convert(inner, inner_parent, true)?)
        }
        None => None,
    };
    let parent = match (&embedded_parent, &record.in_reply_to_status_id_str) {
        (Some(p), _) => Some(ParentRef {
            parent_id: p.id,
            kind: EngagementKind::Retweet,
        }),
        (None, Some(reply_to)) => Some(ParentRef {
            parent_id: parse_id(reply_to)?,
            kind: EngagementKind::Reply,
        }),
        (None, None) => None,
    };
    let tweet = convert(&record, parent, false)?;
    Ok(ParsedLine {
        tweet,
        embedded_parent,
    })
}

fn parse_id(s: &str) -> Result<u64, ParseError> {
    s.trim()
        .parse()
        .map_err(|_| ParseError::MalformedRecord(format!("bad id `{s}`")))
}

fn convert(
    raw: &RawTweet,
    parent: Option<ParentRef>,
    synthetic: bool,
) -> Result<Tweet, ParseError> {
    let id = match (&raw.id_str, raw.id) {
        (Some(s), _) => parse_id(s)?,
        (None, Some(id)) => id,
        (None, None) => return Err(ParseError::MissingField("id")),
    };
    let text = raw
        .extended_tweet
        .as_ref()
        .and_then(|e| e.full_text.clone())
        .or_else(|| raw.full_text.clone())
        .or_else(|| raw.text.clone())
        .ok_or(ParseError::MissingField("text"))?;
    let created_at = match (&raw.created_at, &raw.timestamp_ms) {
        (Some(s), _) => Some(parse_timestamp(s)?),
        (None, Some(ms)) => Some(
            ms.trim()
                .parse::<i64>()
                .map_err(|_| ParseError::InvalidTimestamp(ms.clone()))?
                .div_euclid(1000),
        ),
        (None, None) => None,
    };
    let user = match &raw.user {
        Some(u) => UserRef {
            user_id: match (&u.id_str, u.id) {
                (Some(s), _) => parse_id(s)?,
                (None, Some(id)) => id,
                (None, None) => 0,
            },
            screen_name: u.screen_name.clone().unwrap_or_default(),
            verified: u.verified.unwrap_or(false),
            profile_location: u
                .location
                .as_ref()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty()),
        },
        None => UserRef::default(),
    };

    let entities = raw
        .extended_tweet
        .as_ref()
        .and_then(|e| e.entities.as_ref())
        .or(raw.entities.as_ref());
    let (hashtags, urls) = match entities {
        Some(ent) => {
            let mut tags: Vec<String> = Vec::with_capacity(ent.hashtags.len());
            for h in &ent.hashtags {
                let tag = h.text.trim().trim_start_matches('#').to_lowercase();
                if !tag.is_empty() {
                    tags.push(tag);
                }
            }
            let urls = ent
                .urls
                .iter()
                .filter_map(|u| u.expanded_url.as_ref().or(u.url.as_ref()))
                .map(|u| u.trim().to_string())
                .filter(|u| !u.is_empty())
                .collect();
            (tags, urls)
        }
        None => (extract_hashtags(&text), Vec::new()),
    };

    let coordinates = raw
        .coordinates
        .as_ref()
        .filter(|c| c.coordinates.len() == 2)
        .and_then(|c| Coordinates::new(c.coordinates[0], c.coordinates[1]));
    let (place_country, place_name) = match &raw.place {
        Some(p) => (
            p.country_code
                .as_ref()
                .map(|c| c.trim().to_ascii_uppercase())
                .filter(|c| !c.is_empty()),
            p.full_name
                .as_ref()
                .map(|n| n.trim().to_string())
                .filter(|n| !n.is_empty()),
        ),
        None => (None, None),
    };

    let parent = parent.filter(|p| p.parent_id != id);
    Ok(Tweet {
        id,
        created_at,
        text,
        lang: raw
            .lang
            .as_ref()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .unwrap_or_else(|| "und".to_string()),
        user,
        parent,
        hashtags,
        urls,
        coordinates,
        place_country,
        place_name,
        synthetic,
    })
}

/// Accepts the classic `Wed Mar 04 12:00:00 +0000 2020` form and RFC 3339.
pub fn parse_timestamp(s: &str) -> Result<i64, ParseError> {
    let s = s.trim();
    DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y")
        .or_else(|_| DateTime::parse_from_rfc3339(s))
        .map(|dt| dt.timestamp())
        .map_err(|_| ParseError::InvalidTimestamp(s.to_string()))
}

/// Hashtags scraped from raw text, used only when a record has no entities
/// block at all.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c != '#' {
            continue;
        }
        let start = i + 1;
        let mut end = start;
        while let Some(&(j, d)) = chars.peek() {
            if d.is_alphanumeric() || d == '_' {
                end = j + d.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        if end > start {
            out.push(text[start..end].to_lowercase());
        }
    }
    out
}
