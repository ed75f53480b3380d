//! Corpus ingestion: keyword/language/date filtering, id dedup, the on-disk
//! corpus store, and dataset statistics.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::ops::{Add, AddAssign};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoIndex;
use crate::time::DayRange;
use crate::tweet::{parse_tweet, ParsedLine, Tweet};

/// Filter terms used for the COVID-19 stream.
pub const DEFAULT_KEYWORDS: [&str; 6] = [
    "covid19",
    "coronavirus",
    "corona virus",
    "2019ncov",
    "coronavirusoutbreak",
    "coronapocalypse",
];

const RECORDS_FILE: &str = "records.jsonl";
const INDEX_FILE: &str = "index.bin";
const CHUNK_LINES: usize = 16_384;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt corpus store: {0}")]
    CorruptStore(String),
}

impl IngestError {
    fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// True iff `text` contains any keyword as a case-insensitive substring.
pub fn matches_keywords<S: AsRef<str>>(text: &str, keywords: &[S]) -> bool {
    let lowered = text.to_lowercase();
    keywords
        .iter()
        .any(|k| lowered.contains(&k.as_ref().to_lowercase()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filters {
    pub keywords: Vec<String>,
    /// Empty means every language is accepted.
    pub lang_whitelist: Vec<String>,
    pub date_range: Option<DayRange>,
}

impl Default for Filters {
    fn default() -> Self {
        Filters {
            keywords: DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect(),
            lang_whitelist: Vec::new(),
            date_range: None,
        }
    }
}

impl Filters {
    fn normalized(&self) -> Filters {
        Filters {
            keywords: self
                .keywords
                .iter()
                .map(|k| k.trim().to_lowercase())
                .filter(|k| !k.is_empty())
                .collect(),
            lang_whitelist: self
                .lang_whitelist
                .iter()
                .map(|l| l.trim().to_string())
                .collect(),
            date_range: self.date_range,
        }
    }

    /// Assumes `self` is normalized.
    fn accepts(&self, tweet: &Tweet) -> bool {
        if !self.lang_whitelist.is_empty() && !self.lang_whitelist.contains(&tweet.lang) {
            return false;
        }
        if let Some(range) = self.date_range {
            match tweet.day() {
                Some(d) if range.contains(d) => {}
                _ => return false,
            }
        }
        if self.keywords.is_empty() {
            return true;
        }
        let lowered = tweet.text.to_lowercase();
        self.keywords.iter().any(|k| lowered.contains(k.as_str()))
    }
}

/// Per-run ingestion counters.
///
/// `read = parsed + rejected_parse` and
/// `parsed = stored + rejected_filter + deduped` hold for every run;
/// `synthetic_parents` counts extra tweets materialized from embedded
/// retweeted-status objects, so the store holds `stored + synthetic_parents`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub read: u64,
    pub parsed: u64,
    pub rejected_parse: u64,
    pub rejected_filter: u64,
    pub deduped: u64,
    pub stored: u64,
    pub synthetic_parents: u64,
}

impl IngestReport {
    pub fn is_conserved(&self) -> bool {
        self.read == self.parsed + self.rejected_parse
            && self.parsed == self.stored + self.rejected_filter + self.deduped
    }
}

impl Add for IngestReport {
    type Output = IngestReport;

    fn add(self, o: IngestReport) -> IngestReport {
        IngestReport {
            read: self.read + o.read,
            parsed: self.parsed + o.parsed,
            rejected_parse: self.rejected_parse + o.rejected_parse,
            rejected_filter: self.rejected_filter + o.rejected_filter,
            deduped: self.deduped + o.deduped,
            stored: self.stored + o.stored,
            synthetic_parents: self.synthetic_parents + o.synthetic_parents,
        }
    }
}

impl AddAssign for IngestReport {
    fn add_assign(&mut self, o: IngestReport) {
        *self = *self + o;
    }
}

/// Immutable set of tweets, sorted by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStore {
    tweets: Vec<Tweet>,
}

impl CorpusStore {
    /// Builds a store from tweets with unique ids.
    pub fn from_tweets(mut tweets: Vec<Tweet>) -> Result<CorpusStore, IngestError> {
        tweets.sort_unstable_by_key(|t| t.id);
        if let Some(w) = tweets.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(IngestError::CorruptStore(format!(
                "duplicate id {}",
                w[0].id
            )));
        }
        Ok(CorpusStore { tweets })
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.tweets.binary_search_by_key(&id, |t| t.id).ok()
    }

    pub fn get(&self, id: u64) -> Option<&Tweet> {
        self.position(id).map(|i| &self.tweets[i])
    }

    /// Tweets sampled from the stream, i.e. excluding synthetic parents.
    pub fn collected(&self) -> impl Iterator<Item = &Tweet> {
        self.tweets.iter().filter(|t| !t.synthetic)
    }

    /// Days spanned by the collected tweets.
    pub fn day_range(&self) -> Option<DayRange> {
        DayRange::spanning(self.collected().filter_map(|t| t.day()))
    }

    /// Writes the record log and the id→offset index into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), IngestError> {
        std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
        let records_path = dir.join(RECORDS_FILE);
        let index_path = dir.join(INDEX_FILE);
        let mut records = BufWriter::new(
            File::create(&records_path).map_err(|e| IngestError::io(&records_path, e))?,
        );
        let mut index =
            BufWriter::new(File::create(&index_path).map_err(|e| IngestError::io(&index_path, e))?);
        let mut offset = 0u64;
        for t in &self.tweets {
            let mut line =
                serde_json::to_vec(t).map_err(|e| IngestError::CorruptStore(e.to_string()))?;
            line.push(b'\n');
            records
                .write_all(&line)
                .map_err(|e| IngestError::io(&records_path, e))?;
            index
                .write_all(&t.id.to_le_bytes())
                .and_then(|_| index.write_all(&offset.to_le_bytes()))
                .map_err(|e| IngestError::io(&index_path, e))?;
            offset += line.len() as u64;
        }
        records
            .flush()
            .map_err(|e| IngestError::io(&records_path, e))?;
        index.flush().map_err(|e| IngestError::io(&index_path, e))?;
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<CorpusStore, IngestError> {
        let records_path = dir.join(RECORDS_FILE);
        let file = File::open(&records_path).map_err(|e| IngestError::io(&records_path, e))?;
        let lines: Vec<String> = BufReader::with_capacity(1 << 20, file)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| IngestError::io(&records_path, e))?;
        let tweets = lines
            .par_iter()
            .map(|l| serde_json::from_str::<Tweet>(l))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IngestError::CorruptStore(e.to_string()))?;
        if tweets.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(IngestError::CorruptStore("records not sorted by id".into()));
        }
        Ok(CorpusStore { tweets })
    }

    /// Random access to one record through the on-disk index.
    pub fn read_one(dir: &Path, id: u64) -> Result<Option<Tweet>, IngestError> {
        let index_path = dir.join(INDEX_FILE);
        let mut bytes = Vec::new();
        File::open(&index_path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| IngestError::io(&index_path, e))?;
        if bytes.len() % 16 != 0 {
            return Err(IngestError::CorruptStore("index length".into()));
        }
        let entry = |i: usize| {
            let at = i * 16;
            let id = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            let off = u64::from_le_bytes(bytes[at + 8..at + 16].try_into().unwrap());
            (id, off)
        };
        let n = bytes.len() / 16;
        let (mut lo, mut hi) = (0usize, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if entry(mid).0 < id {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if lo == n || entry(lo).0 != id {
            return Ok(None);
        }
        let records_path = dir.join(RECORDS_FILE);
        let mut file = File::open(&records_path).map_err(|e| IngestError::io(&records_path, e))?;
        file.seek(SeekFrom::Start(entry(lo).1))
            .map_err(|e| IngestError::io(&records_path, e))?;
        let mut line = String::new();
        BufReader::new(file)
            .read_line(&mut line)
            .map_err(|e| IngestError::io(&records_path, e))?;
        serde_json::from_str(&line)
            .map(Some)
            .map_err(|e| IngestError::CorruptStore(e.to_string()))
    }
}

/// Sequential accumulator applying dedup in input order.
struct Accumulator {
    filters: Filters,
    tweets: HashMap<u64, Tweet>,
    report: IngestReport,
}

impl Accumulator {
    fn new(filters: &Filters) -> Self {
        Accumulator {
            filters: filters.normalized(),
            tweets: HashMap::new(),
            report: IngestReport::default(),
        }
    }

    fn push(&mut self, parsed: Option<ParsedLine>) {
        self.report.read += 1;
        let Some(ParsedLine {
            tweet,
            embedded_parent,
        }) = parsed
        else {
            self.report.rejected_parse += 1;
            return;
        };
        self.report.parsed += 1;
        if !self.filters.accepts(&tweet) {
            self.report.rejected_filter += 1;
            return;
        }
        match self.tweets.get(&tweet.id) {
            Some(existing) if !existing.synthetic => {
                self.report.deduped += 1;
                return;
            }
            Some(_) => {
                // a sampled copy replaces the synthetic placeholder
                self.report.synthetic_parents -= 1;
            }
            None => {}
        }
        self.report.stored += 1;
        self.tweets.insert(tweet.id, tweet);
        if let Some(parent) = embedded_parent {
            if !self.tweets.contains_key(&parent.id) {
                self.report.synthetic_parents += 1;
                self.tweets.insert(parent.id, parent);
            }
        }
    }

    fn finish(self) -> (CorpusStore, IngestReport) {
        let tweets: Vec<Tweet> = self.tweets.into_values().collect();
        let store = CorpusStore::from_tweets(tweets).expect("map keys are unique");
        debug_assert!(self.report.is_conserved());
        (store, self.report)
    }
}

/// Ingests an in-memory line stream.
pub fn ingest_lines<I, S>(lines: I, filters: &Filters) -> (CorpusStore, IngestReport)
where
    I: IntoIterator<Item = S>,
    S: AsRef<str> + Sync,
{
    let mut acc = Accumulator::new(filters);
    let mut chunk: Vec<S> = Vec::with_capacity(CHUNK_LINES);
    let flush = |chunk: &mut Vec<S>, acc: &mut Accumulator| {
        let parsed: Vec<Option<ParsedLine>> =
            chunk.par_iter().map(|l| parse_line(l.as_ref())).collect();
        parsed.into_iter().for_each(|p| acc.push(p));
        chunk.clear();
    };
    for line in lines {
        chunk.push(line);
        if chunk.len() == CHUNK_LINES {
            flush(&mut chunk, &mut acc);
        }
    }
    flush(&mut chunk, &mut acc);
    acc.finish()
}

fn parse_line(line: &str) -> Option<ParsedLine> {
    let line = line.trim_end_matches(['\r', '\n']);
    parse_tweet(line).ok()
}

/// Ingests NDJSON files in the given order; `.gz` files are decompressed.
/// Blank lines are skipped and not counted as records.
pub fn ingest_files(
    paths: &[PathBuf],
    filters: &Filters,
) -> Result<(CorpusStore, IngestReport), IngestError> {
    let mut acc = Accumulator::new(filters);
    let mut chunk: Vec<String> = Vec::with_capacity(CHUNK_LINES);
    let flush = |chunk: &mut Vec<String>, acc: &mut Accumulator| {
        let parsed: Vec<Option<ParsedLine>> = chunk.par_iter().map(|l| parse_line(l)).collect();
        parsed.into_iter().for_each(|p| acc.push(p));
        chunk.clear();
    };
    for path in paths {
        let reader = open_input(path)?;
        for line in reader.lines() {
            let line = line.map_err(|e| IngestError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            chunk.push(line);
            if chunk.len() == CHUNK_LINES {
                flush(&mut chunk, &mut acc);
            }
        }
    }
    flush(&mut chunk, &mut acc);
    Ok(acc.finish())
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    Ok(if gz {
        Box::new(BufReader::with_capacity(1 << 20, MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::with_capacity(1 << 20, file))
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_tweets: u64,
    pub n_english: u64,
    pub pct_english: f64,
    pub n_geo_english: u64,
    pub pct_geo_of_english: f64,
    pub n_unique_users: u64,
    pub n_verified_users: u64,
    pub pct_verified_users: f64,
    pub per_country: BTreeMap<String, u64>,
    pub per_us_state: BTreeMap<String, u64>,
    /// Set when the corpus holds no collected tweets; all percents are 0.
    pub empty_corpus: bool,
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64 * 100.0
    }
}

/// Table-style statistics over collected tweets. Geography, users and
/// verification are measured over the English subset.
pub fn compute_dataset_stats(store: &CorpusStore, geo: &GeoIndex) -> DatasetStats {
    let mut stats = DatasetStats::default();
    let mut users: HashMap<u64, bool> = HashMap::new();
    for t in store.collected() {
        stats.n_tweets += 1;
        if !t.is_english() {
            continue;
        }
        stats.n_english += 1;
        *users.entry(t.user.user_id).or_insert(false) |= t.user.verified;
        let Some(res) = geo.get(t.id) else { continue };
        if let Some(country) = &res.country {
            stats.n_geo_english += 1;
            *stats.per_country.entry(country.clone()).or_insert(0) += 1;
            if let Some(state) = &res.us_state {
                *stats.per_us_state.entry(state.clone()).or_insert(0) += 1;
            }
        }
    }
    stats.n_unique_users = users.len() as u64;
    stats.n_verified_users = users.values().filter(|v| **v).count() as u64;
    stats.pct_english = percent(stats.n_english, stats.n_tweets);
    stats.pct_geo_of_english = percent(stats.n_geo_english, stats.n_english);
    stats.pct_verified_users = percent(stats.n_verified_users, stats.n_unique_users);
    stats.empty_corpus = stats.n_tweets == 0;
    stats
}
