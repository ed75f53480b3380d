//! Country and US-state resolution from place metadata or free-text profile
//! locations, backed by a pattern gazetteer.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CorpusStore;
use crate::tweet::Tweet;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("duplicate gazetteer pattern `{0}`")]
    DuplicatePattern(String),
    #[error("bad row {line}: {reason}")]
    BadRow { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeoMethod {
    Coordinates,
    Place,
    Profile,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoResolution {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub us_state: Option<String>,
    pub method: GeoMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
}

impl GeoResolution {
    fn unresolved() -> Self {
        GeoResolution {
            country: None,
            us_state: None,
            method: GeoMethod::None,
            lat: None,
            lon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub pattern: String,
    pub country: String,
    pub us_state: Option<String>,
    pub priority: i64,
}

/// Location patterns sorted by (priority desc, pattern length desc).
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    by_pattern: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct GazetteerRow {
    pattern: String,
    country: String,
    #[serde(default)]
    us_state: Option<String>,
    priority: i64,
}

/// Lowercases, drops punctuation other than commas, trims every
/// comma-separated token and collapses inner whitespace.
pub fn normalize_location(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .filter_map(|c| {
            if c.is_alphanumeric() || c == ',' {
                Some(c)
            } else if c.is_whitespace() {
                Some(' ')
            } else {
                None
            }
        })
        .collect::<String>()
        .to_lowercase();
    cleaned
        .split(',')
        .map(|tok| tok.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|tok| !tok.is_empty())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Gazetteer {
    pub fn new(entries: Vec<GazetteerEntry>) -> Result<Gazetteer, GeoError> {
        let mut entries: Vec<GazetteerEntry> = entries
            .into_iter()
            .map(|e| GazetteerEntry {
                pattern: normalize_location(&e.pattern),
                ..e
            })
            .collect();
        entries.sort_by(|a, b| {
            b.priority
                .cmp(&a.priority)
                .then(b.pattern.len().cmp(&a.pattern.len()))
                .then(a.pattern.cmp(&b.pattern))
        });
        let mut by_pattern = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if by_pattern.insert(e.pattern.clone(), i).is_some() {
                return Err(GeoError::DuplicatePattern(e.pattern.clone()));
            }
        }
        Ok(Gazetteer {
            entries,
            by_pattern,
        })
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Gazetteer, GeoError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut entries = Vec::new();
        for (i, row) in rdr.deserialize::<GazetteerRow>().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| GeoError::BadRow {
                line,
                reason: e.to_string(),
            })?;
            let country = row.country.trim().to_ascii_uppercase();
            let us_state = row.us_state.filter(|s| !s.trim().is_empty());
            if normalize_location(&row.pattern).is_empty() || country.is_empty() {
                return Err(GeoError::BadRow {
                    line,
                    reason: "empty pattern or country".into(),
                });
            }
            if us_state.is_some() && country != "US" {
                return Err(GeoError::BadRow {
                    line,
                    reason: "us_state given for a non-US country".into(),
                });
            }
            entries.push(GazetteerEntry {
                pattern: row.pattern,
                country,
                us_state,
                priority: row.priority,
            });
        }
        Gazetteer::new(entries)
    }

    pub fn load(path: &Path) -> Result<Gazetteer, GeoError> {
        let file = File::open(path).map_err(|source| GeoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Gazetteer::from_reader(file)
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self, normalized: &str) -> Option<(usize, &GazetteerEntry)> {
        self.by_pattern
            .get(normalized)
            .map(|&i| (i, &self.entries[i]))
    }

    /// Best match for a free-text location. Candidates are the comma tokens
    /// right to left, then the whole string; the entry earliest in
    /// (priority, length) order wins, earlier candidates breaking ties.
    pub fn match_location(&self, raw: &str) -> Option<&GazetteerEntry> {
        let norm = normalize_location(raw);
        if norm.is_empty() {
            return None;
        }
        let tokens: Vec<&str> = norm.split(", ").collect();
        tokens
            .iter()
            .rev()
            .copied()
            .chain(std::iter::once(norm.as_str()))
            .enumerate()
            .filter_map(|(pos, c)| self.lookup(c).map(|(_, e)| (pos, e)))
            .min_by_key(|(pos, e)| {
                (
                    std::cmp::Reverse(e.priority),
                    std::cmp::Reverse(e.pattern.len()),
                    *pos,
                )
            })
            .map(|(_, e)| e)
    }

    fn us_state_of(&self, place_name: &str) -> Option<&str> {
        let norm = normalize_location(place_name);
        let tokens: Vec<&str> = norm.split(", ").collect();
        tokens
            .iter()
            .rev()
            .copied()
            .chain(std::iter::once(norm.as_str()))
            .filter_map(|c| self.lookup(c))
            .find(|(_, e)| e.country == "US" && e.us_state.is_some())
            .and_then(|(_, e)| e.us_state.as_deref())
    }
}

/// Place metadata first, then the profile location; coordinates are carried
/// through whatever the method.
pub fn resolve_geo(tweet: &Tweet, gaz: &Gazetteer) -> GeoResolution {
    let mut res = GeoResolution::unresolved();
    if let Some(c) = tweet.coordinates {
        res.lat = Some(c.lat);
        res.lon = Some(c.lon);
    }
    if let Some(country) = &tweet.place_country {
        res.method = GeoMethod::Place;
        res.country = Some(country.to_ascii_uppercase());
        if country.eq_ignore_ascii_case("US") {
            res.us_state = tweet
                .place_name
                .as_deref()
                .and_then(|n| gaz.us_state_of(n))
                .map(str::to_string);
        }
        return res;
    }
    if let Some(hit) = tweet
        .user
        .profile_location
        .as_deref()
        .and_then(|loc| gaz.match_location(loc))
    {
        res.method = GeoMethod::Profile;
        res.country = Some(hit.country.clone());
        res.us_state = hit.us_state.clone();
        return res;
    }
    if res.lat.is_some() {
        res.method = GeoMethod::Coordinates;
    }
    res
}

#[derive(Serialize, Deserialize)]
struct IndexRow {
    id: u64,
    #[serde(flatten)]
    res: GeoResolution,
}

/// Resolutions keyed by tweet id, sorted by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeoIndex {
    ids: Vec<u64>,
    resolutions: Vec<GeoResolution>,
}

impl GeoIndex {
    pub fn build(store: &CorpusStore, gaz: &Gazetteer) -> GeoIndex {
        let resolutions = store
            .tweets()
            .par_iter()
            .map(|t| resolve_geo(t, gaz))
            .collect();
        GeoIndex {
            ids: store.tweets().iter().map(|t| t.id).collect(),
            resolutions,
        }
    }

    pub fn from_pairs(mut pairs: Vec<(u64, GeoResolution)>) -> GeoIndex {
        pairs.sort_by_key(|p| p.0);
        pairs.dedup_by_key(|p| p.0);
        let (ids, resolutions) = pairs.into_iter().unzip();
        GeoIndex { ids, resolutions }
    }

    pub fn get(&self, id: u64) -> Option<&GeoResolution> {
        self.ids
            .binary_search(&id)
            .ok()
            .map(|i| &self.resolutions[i])
    }

    /// Resolved country of a tweet, if any.
    pub fn country(&self, id: u64) -> Option<&str> {
        self.get(id).and_then(|r| r.country.as_deref())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &GeoResolution)> {
        self.ids.iter().copied().zip(self.resolutions.iter())
    }

    /// JSON lines, one `{id, ...resolution}` object per tweet.
    pub fn write(&self, path: &Path) -> Result<(), GeoError> {
        let io_err = |source| GeoError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        for (id, res) in self.iter() {
            let row = IndexRow {
                id,
                res: res.clone(),
            };
            serde_json::to_writer(&mut w, &row).map_err(|e| io_err(e.into()))?;
            w.write_all(b"\n").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn open(path: &Path) -> Result<GeoIndex, GeoError> {
        let io_err = |source| GeoError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(io_err)?;
        let mut pairs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err)?;
            let row: IndexRow = serde_json::from_str(&line).map_err(|e| GeoError::BadRow {
                line: i as u64 + 1,
                reason: e.to_string(),
            })?;
            pairs.push((row.id, row.res));
        }
        Ok(GeoIndex::from_pairs(pairs))
    }
}

/// Representative points per country and per US state, used to place
/// trace points for tweets that carry no raw coordinates.
#[derive(Debug, Clone, Default)]
pub struct Centroids {
    points: BTreeMap<(String, String), (f64, f64)>,
}

#[derive(Deserialize)]
struct CentroidRow {
    country: String,
    #[serde(default)]
    us_state: Option<String>,
    lat: f64,
    lon: f64,
}

impl Centroids {
    pub fn from_reader<R: Read>(reader: R) -> Result<Centroids, GeoError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut points = BTreeMap::new();
        for (i, row) in rdr.deserialize::<CentroidRow>().enumerate() {
            let row = row.map_err(|e| GeoError::BadRow {
                line: i as u64 + 2,
                reason: e.to_string(),
            })?;
            let key = (
                row.country.to_ascii_uppercase(),
                row.us_state.unwrap_or_default(),
            );
            points.insert(key, (row.lat, row.lon));
        }
        Ok(Centroids { points })
    }

    pub fn load(path: &Path) -> Result<Centroids, GeoError> {
        let file = File::open(path).map_err(|source| GeoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Centroids::from_reader(file)
    }

    /// `(lat, lon)` for the state when known, else for the country.
    pub fn lookup(&self, country: &str, us_state: Option<&str>) -> Option<(f64, f64)> {
        if let Some(state) = us_state {
            if let Some(p) = self.points.get(&(country.to_string(), state.to_string())) {
                return Some(*p);
            }
        }
        self.points
            .get(&(country.to_string(), String::new()))
            .copied()
    }
}
