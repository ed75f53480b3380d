//! Seeded generator of synthetic streaming-API tweet corpora. Output is
//! raw NDJSON in the shape the ingest parser reads, with retweet/reply
//! chains, dangling parents, duplicates, malformed lines, geo signals,
//! catalog-domain links and hashtags whose use rises over time.

use std::io::{self, Write};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::time::Day;

const TOPICS: [&[&str]; 20] = [
    &[
        "vaccine", "trial", "dose", "immunity", "pfizer", "moderna", "antibody", "research",
    ],
    &[
        "lockdown",
        "curfew",
        "restrictions",
        "closed",
        "stayhome",
        "quarantine",
        "order",
        "police",
    ],
    &[
        "masks", "wearing", "face", "covering", "n95", "surgical", "shortage", "fabric",
    ],
    &[
        "school",
        "students",
        "teachers",
        "classes",
        "online",
        "exams",
        "university",
        "campus",
    ],
    &[
        "economy",
        "stocks",
        "market",
        "recession",
        "jobs",
        "unemployment",
        "stimulus",
        "business",
    ],
    &[
        "hospital",
        "icu",
        "beds",
        "ventilators",
        "doctors",
        "nurses",
        "patients",
        "capacity",
    ],
    &[
        "testing",
        "tests",
        "kits",
        "positive",
        "results",
        "swab",
        "labs",
        "screening",
    ],
    &[
        "travel",
        "flights",
        "airport",
        "borders",
        "cruise",
        "passengers",
        "stranded",
        "ban",
    ],
    &[
        "groceries",
        "toilet",
        "paper",
        "shelves",
        "panic",
        "buying",
        "stores",
        "supplies",
    ],
    &[
        "china", "wuhan", "origin", "lab", "bats", "market", "outbreak", "spread",
    ],
    &[
        "cure",
        "remedy",
        "garlic",
        "bleach",
        "miracle",
        "herbal",
        "vitamin",
        "treatment",
    ],
    &[
        "5g",
        "towers",
        "radiation",
        "network",
        "signals",
        "antennas",
        "waves",
        "phones",
    ],
    &[
        "sports",
        "league",
        "season",
        "postponed",
        "olympics",
        "football",
        "games",
        "fans",
    ],
    &[
        "church",
        "prayer",
        "faith",
        "worship",
        "mosque",
        "service",
        "religious",
        "gathering",
    ],
    &[
        "president",
        "government",
        "briefing",
        "minister",
        "response",
        "policy",
        "election",
        "congress",
    ],
    &[
        "home", "working", "remote", "zoom", "meetings", "office", "laptop", "commute",
    ],
    &[
        "distance",
        "social",
        "apart",
        "feet",
        "crowds",
        "parks",
        "gatherings",
        "distancing",
    ],
    &[
        "deaths",
        "cases",
        "toll",
        "confirmed",
        "rising",
        "curve",
        "numbers",
        "statistics",
    ],
    &[
        "symptoms",
        "fever",
        "cough",
        "breathing",
        "taste",
        "smell",
        "fatigue",
        "illness",
    ],
    &[
        "music", "concert", "netflix", "movies", "books", "cooking", "baking", "hobbies",
    ],
];

const KEYWORDS: [&str; 9] = [
    "covid19",
    "COVID19",
    "Covid19",
    "coronavirus",
    "Coronavirus",
    "corona virus",
    "2019nCoV",
    "CoronavirusOutbreak",
    "coronapocalypse",
];

const SENTIMENT_WORDS: [&str; 24] = [
    "good", "great", "love", "hope", "safe", "thanks", "happy", "proud", "heroes", "best", "calm",
    "strong", "bad", "terrible", "fear", "panic", "sad", "worst", "crisis", "death", "sick",
    "worried", "angry", "chaos",
];

const FILLER: [&str; 16] = [
    "the", "is", "and", "we", "this", "today", "everyone", "people", "now", "just", "so", "really",
    "very", "not", "all", "our",
];

const LOCATIONS: [(&str, &str); 24] = [
    ("London, England", "GB"),
    ("Manchester, UK", "GB"),
    ("Los Angeles, CA", "US"),
    ("Texas, USA", "US"),
    ("New York, NY", "US"),
    ("Chicago, IL", "US"),
    ("Florida", "US"),
    ("Seattle, WA", "US"),
    ("Mumbai, India", "IN"),
    ("New Delhi", "IN"),
    ("Lagos, Nigeria", "NG"),
    ("Toronto, Ontario", "CA"),
    ("Sydney, Australia", "AU"),
    ("Cape Town, South Africa", "ZA"),
    ("Karachi, Pakistan", "PK"),
    ("Paris, France", "FR"),
    ("Berlin", "DE"),
    ("Dublin, Ireland", "IE"),
    ("Manila", "PH"),
    ("Nairobi, Kenya", "KE"),
    ("everywhere", ""),
    ("Planet Earth", ""),
    ("somewhere over the rainbow", ""),
    ("", ""),
];

const COUNTRY_POINTS: [(&str, f64, f64, &str); 8] = [
    ("US", 39.8, -98.6, "United States"),
    ("GB", 54.0, -2.5, "United Kingdom"),
    ("IN", 22.0, 79.0, "India"),
    ("CA", 56.1, -106.3, "Canada"),
    ("NG", 9.1, 8.7, "Nigeria"),
    ("AU", -25.3, 133.8, "Australia"),
    ("ZA", -30.6, 22.9, "South Africa"),
    ("PK", 30.4, 69.3, "Pakistan"),
];

const GLOBAL_TAGS: [&str; 8] = [
    "covid19",
    "coronavirus",
    "stayhome",
    "stayathome",
    "pandemic",
    "flattenthecurve",
    "quarantine",
    "covid_19",
];

const POLICY_TAGS: [&str; 6] = [
    "workfromhome",
    "wfhlife",
    "WorkingFromHome",
    "wfm",
    "socialdistancing",
    "SocialDistance",
];

const RISING_TAGS: [&str; 4] = [
    "stayhomesavelives",
    "clapforourcarers",
    "plankthecurve",
    "masks4all",
];

/// Fixture catalog domains plus variants the catalog resolves through
/// subdomain stripping or aliases.
pub const MISINFO_DOMAINS: [&str; 14] = [
    "dailyhoaxwire.com",
    "www.truthpatriotnews.net",
    "healthfreedomdaily.org",
    "miraclecureinsider.com",
    "viralremedyhub.net",
    "shadowstatefiles.com",
    "lableakleaks.info",
    "youwontbelievethis.co",
    "partisanpulse.us",
    "loudmegaphone.net",
    "satirepandemic.com",
    "rumormill-today.com",
    "m.dailyhoaxwire.com",
    "dhw.link",
];

const BENIGN_DOMAINS: [&str; 10] = [
    "globalnewsledger.com",
    "citytribune-example.com",
    "who.int",
    "cdc.gov",
    "nhs.uk",
    "example-news.org",
    "youtube.com",
    "instagram.com",
    "redbluebulletin.com",
    "statemediawatch.org",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_tweets: usize,
    pub seed: u64,
    pub start: Day,
    pub days: u32,
    pub retweet_rate: f64,
    pub reply_rate: f64,
    pub url_rate: f64,
    /// Share of url-bearing source tweets that link a catalog domain.
    pub misinfo_url_rate: f64,
    pub dangling_rate: f64,
    pub malformed_rate: f64,
    pub duplicate_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_tweets: 10_000,
            seed: 0,
            start: Day::from_ymd(2020, 3, 1).expect("valid date"),
            days: 31,
            retweet_rate: 0.45,
            reply_rate: 0.10,
            url_rate: 0.4,
            misinfo_url_rate: 0.06,
            dangling_rate: 0.02,
            malformed_rate: 0.001,
            duplicate_rate: 0.003,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SynthSummary {
    pub lines: u64,
    pub tweets: u64,
    pub malformed: u64,
    pub duplicates: u64,
}

struct User {
    id: u64,
    name: String,
    verified: bool,
    location: Option<&'static str>,
    country: &'static str,
}

struct Emitted {
    id: u64,
    user: usize,
    text: String,
    hashtags: Vec<String>,
    urls: Vec<String>,
    ts: i64,
}

fn twitter_time(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .expect("timestamp in range")
        .format("%a %b %d %H:%M:%S +0000 %Y")
        .to_string()
}

fn user_json(u: &User) -> Value {
    let mut v = json!({
        "id_str": u.id.to_string(),
        "screen_name": u.name,
        "verified": u.verified,
    });
    if let Some(loc) = u.location {
        v["location"] = json!(loc);
    }
    v
}

fn entities(hashtags: &[String], urls: &[String]) -> Value {
    json!({
        "hashtags": hashtags.iter().map(|h| json!({"text": h})).collect::<Vec<_>>(),
        "urls": urls.iter().map(|u| json!({"url": "https://t.co/x", "expanded_url": u})).collect::<Vec<_>>(),
    })
}

struct Generator<'a> {
    p: &'a SynthParams,
    rng: ChaCha8Rng,
    users: Vec<User>,
    emitted: Vec<Emitted>,
    sources: Vec<usize>,
}

impl Generator<'_> {
    fn pick<'b, T>(&mut self, xs: &'b [T]) -> &'b T {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn original_text(&mut self, day_frac: f64, user: usize) -> (String, Vec<String>, Vec<String>) {
        let topic = TOPICS[self.rng.gen_range(0..TOPICS.len())];
        let mut words: Vec<String> = Vec::new();
        for _ in 0..self.rng.gen_range(5..10) {
            words.push(self.pick(topic).to_string());
            if self.rng.gen_bool(0.4) {
                words.push(self.pick(&FILLER).to_string());
            }
        }
        for _ in 0..self.rng.gen_range(0..3) {
            let w = self.pick(&SENTIMENT_WORDS).to_string();
            let w = if self.rng.gen_bool(0.1) {
                w.to_uppercase()
            } else {
                w
            };
            let at = self.rng.gen_range(0..=words.len());
            words.insert(at, w);
        }
        if !self.rng.gen_bool(0.02) {
            let kw = self.pick(&KEYWORDS).to_string();
            let at = self.rng.gen_range(0..=words.len());
            words.insert(at, kw);
        }
        let mut tags: Vec<String> = Vec::new();
        if self.rng.gen_bool(0.5) {
            tags.push(self.pick(&GLOBAL_TAGS).to_string());
        }
        if self.rng.gen_bool(0.3) {
            tags.push(topic[0].to_string());
        }
        if self.rng.gen_bool(0.08) {
            tags.push(self.pick(&POLICY_TAGS).to_string());
        }
        if self.rng.gen_bool(0.3 * day_frac * day_frac) {
            tags.push(self.pick(&RISING_TAGS).to_string());
        }
        let country = self.users[user].country;
        if !country.is_empty() && self.rng.gen_bool(0.4 * day_frac) {
            tags.push(format!("lockdown{}", country.to_lowercase()));
        }
        tags.dedup();
        let mut urls = Vec::new();
        if self.rng.gen_bool(self.p.url_rate) {
            let domain = if self.rng.gen_bool(self.p.misinfo_url_rate) {
                self.pick(&MISINFO_DOMAINS).to_string()
            } else {
                self.pick(&BENIGN_DOMAINS).to_string()
            };
            let path: u32 = self.rng.gen();
            urls.push(format!("https://{domain}/article/{path}"));
        }
        let mut text = words.join(" ");
        for t in &tags {
            text.push_str(" #");
            text.push_str(t);
        }
        for u in &urls {
            text.push(' ');
            text.push_str(u);
        }
        (text, tags, urls)
    }

    fn geo_fields(&mut self, v: &mut Value, user: usize) {
        let roll: f64 = self.rng.gen();
        if roll < 0.01 {
            let (_, lat, lon, _) = *self.pick(&COUNTRY_POINTS);
            let (dlat, dlon): (f64, f64) =
                (self.rng.gen_range(-2.0..2.0), self.rng.gen_range(-2.0..2.0));
            v["coordinates"] = json!({"type": "Point", "coordinates": [lon + dlon, lat + dlat]});
        } else if roll < 0.03 {
            let country = self.users[user].country;
            let (cc, name) = match COUNTRY_POINTS.iter().find(|c| c.0 == country) {
                Some(c) => (c.0, c.3),
                None => ("US", "United States"),
            };
            v["place"] = json!({"country_code": cc, "full_name": name});
        }
    }

    fn lang(&mut self) -> &'static str {
        let r: f64 = self.rng.gen();
        match r {
            r if r < 0.65 => "en",
            r if r < 0.75 => "es",
            r if r < 0.80 => "fr",
            r if r < 0.85 => "de",
            r if r < 0.90 => "pt",
            r if r < 0.95 => "it",
            _ => "und",
        }
    }

    fn tweet(&mut self, i: usize, ts: i64) -> Value {
        let p = self.p;
        let id = 1_235_000_000_000_000_000u64 + i as u64 * 1000 + self.rng.gen_range(0..500);
        let user = self.rng.gen_range(0..self.users.len());
        let day_frac =
            ((ts - p.start.start_seconds()) as f64 / (p.days as f64 * 86_400.0)).clamp(0.0, 1.0);
        let lang = self.lang();
        let roll: f64 = self.rng.gen();
        let mut v = json!({
            "id_str": id.to_string(),
            "created_at": twitter_time(ts),
            "lang": lang,
            "user": user_json(&self.users[user]),
        });
        let has_parent = !self.sources.is_empty();
        if has_parent && roll < p.retweet_rate {
            if self.rng.gen_bool(p.dangling_rate) {
                // the original was never sampled; only its embedded copy exists
                let (text, tags, urls) = self.original_text(day_frac, user);
                let ghost_user = self.rng.gen_range(0..self.users.len());
                let ghost_id = id - 1 - self.rng.gen_range(0..400);
                let mut ghost = json!({
                    "id_str": ghost_id.to_string(),
                    "created_at": twitter_time(ts - self.rng.gen_range(60..7200)),
                    "text": text,
                    "lang": lang,
                    "user": user_json(&self.users[ghost_user]),
                    "entities": entities(&tags, &urls),
                });
                self.geo_fields(&mut ghost, ghost_user);
                v["text"] = json!(format!("RT @{}: {}", self.users[ghost_user].name, text));
                v["entities"] = entities(&tags, &urls);
                v["retweeted_status"] = ghost;
                self.emitted.push(Emitted {
                    id,
                    user,
                    text: v["text"].as_str().unwrap_or_default().to_string(),
                    hashtags: tags,
                    urls,
                    ts,
                });
                self.geo_fields(&mut v, user);
                return v;
            }
            // popular recent sources attract most retweets
            let k = self.sources.len();
            let pick = if self.rng.gen_bool(0.7) {
                self.sources[k - 1 - self.rng.gen_range(0..k.min(500))]
            } else {
                self.sources[self.rng.gen_range(0..k)]
            };
            let parent = &self.emitted[pick];
            let pu = &self.users[parent.user];
            let embedded = json!({
                "id_str": parent.id.to_string(),
                "created_at": twitter_time(parent.ts),
                "text": parent.text,
                "user": user_json(pu),
                "entities": entities(&parent.hashtags, &parent.urls),
            });
            let text = format!("RT @{}: {}", pu.name, parent.text);
            let (tags, urls) = (parent.hashtags.clone(), parent.urls.clone());
            v["text"] = json!(text);
            v["entities"] = entities(&tags, &urls);
            v["retweeted_status"] = embedded;
            self.emitted.push(Emitted {
                id,
                user,
                text,
                hashtags: tags,
                urls,
                ts,
            });
        } else if has_parent && roll < p.retweet_rate + p.reply_rate {
            let pick = self
                .rng
                .gen_range(self.emitted.len().saturating_sub(2000)..self.emitted.len());
            let (parent_id, parent_user) = (self.emitted[pick].id, self.emitted[pick].user);
            let (body, tags, urls) = self.original_text(day_frac, user);
            let text = format!("@{} {}", self.users[parent_user].name, body);
            v["text"] = json!(text);
            v["in_reply_to_status_id_str"] = json!(parent_id.to_string());
            v["entities"] = entities(&tags, &urls);
            self.emitted.push(Emitted {
                id,
                user,
                text,
                hashtags: tags,
                urls,
                ts,
            });
        } else {
            let (text, tags, urls) = self.original_text(day_frac, user);
            v["text"] = json!(text);
            v["entities"] = entities(&tags, &urls);
            self.sources.push(self.emitted.len());
            self.emitted.push(Emitted {
                id,
                user,
                text,
                hashtags: tags,
                urls,
                ts,
            });
        }
        self.geo_fields(&mut v, user);
        v
    }
}

/// Writes `params.n_tweets` tweet records (plus malformed and duplicate
/// lines) to `out`. Identical parameters give identical bytes.
pub fn write_corpus<W: Write>(params: &SynthParams, out: W) -> io::Result<SynthSummary> {
    let mut out = io::BufWriter::with_capacity(1 << 20, out);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_users = (params.n_tweets / 8).max(50);
    let users = (0..n_users)
        .map(|i| {
            let (loc, country) = if rng.gen_bool(0.3) {
                (None, "")
            } else {
                let (l, c) = LOCATIONS[rng.gen_range(0..LOCATIONS.len())];
                (Some(l), c)
            };
            User {
                id: 10_000 + i as u64,
                name: format!("user{i}"),
                verified: rng.gen_bool(0.03),
                location: loc,
                country,
            }
        })
        .collect();
    // volume grows over the window
    let span = params.days.max(1) as f64 * 86_400.0;
    let mut times: Vec<i64> = (0..params.n_tweets)
        .map(|_| params.start.start_seconds() + (span * rng.gen::<f64>().sqrt()) as i64)
        .collect();
    times.sort_unstable();
    let mut g = Generator {
        p: params,
        rng,
        users,
        emitted: Vec::with_capacity(params.n_tweets),
        sources: Vec::new(),
    };
    let mut summary = SynthSummary::default();
    let mut recent_lines: Vec<Vec<u8>> = Vec::new();
    for (i, &ts) in times.iter().enumerate() {
        let v = g.tweet(i, ts);
        let line = serde_json::to_vec(&v).map_err(io::Error::other)?;
        out.write_all(&line)?;
        out.write_all(b"\n")?;
        summary.lines += 1;
        summary.tweets += 1;
        if recent_lines.len() < 64 {
            recent_lines.push(line);
        } else {
            let slot = g.rng.gen_range(0..64);
            recent_lines[slot] = line;
        }
        if g.rng.gen_bool(params.duplicate_rate) {
            let dup = g.rng.gen_range(0..recent_lines.len());
            out.write_all(&recent_lines[dup])?;
            out.write_all(b"\n")?;
            summary.lines += 1;
            summary.duplicates += 1;
        }
        if g.rng.gen_bool(params.malformed_rate) {
            out.write_all(b"{\"id_str\": \"truncated\n")?;
            summary.lines += 1;
            summary.malformed += 1;
        }
    }
    out.flush()?;
    Ok(summary)
}
