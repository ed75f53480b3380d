//! Stage orchestration and the JSON artifact bundle.
//!
//! Every stage persists its outputs and a stamp hashing its inputs (config
//! section, input file contents and upstream stamps). A stage whose stamp
//! is unchanged and whose outputs exist is skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{
    hashtag_tfidf, misinfo_volume_series, narratives, relative_volume, source_breakdown,
};
use crate::catalog::{CatalogError, CategorySet, SourceCatalog};
use crate::config::PipelineConfig;
use crate::geo::{Centroids, Gazetteer, GeoError, GeoIndex};
use crate::graph::{
    build_engagement_graph, cascade_spread_trace, extract_cascades, graph_stats, label_cascades,
    Cascade, MisinfoStats, SpreadTrace,
};
use crate::ingest::{compute_dataset_stats, ingest_files, CorpusStore, IngestError};
use crate::sentiment::{
    aggregate_sentiment, policy_sentiment, GroupBy, LexiconError, PolicyTagSet, SentimentGroup,
    SentimentLexicon,
};
use crate::time::{Day, DayRange};
use crate::topics::{fit_topics, representative_tweets, TopicCluster, TopicError};
use crate::trends::{
    emerging_by_country, geo_activity_stats, hashtag_trend_slopes, trailing_window, TrendError,
    TrendScale, TrendSeries,
};

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const MAX_TEXT_CHARS: usize = 280;

const BUNDLED_GAZETTEER: &str = include_str!("../data/gazetteer.csv");
const BUNDLED_CENTROIDS: &str = include_str!("../data/centroids.csv");

/// The twelve fixed artifacts, in manifest order.
pub const ARTIFACTS: [&str; 12] = [
    "dataset_stats",
    "misinfo_stats",
    "volume_by_category",
    "source_breakdown",
    "relative_volume",
    "narratives",
    "sentiment_country_day",
    "policy_sentiment",
    "topics",
    "trends_global",
    "trends_by_country",
    "geo_activity",
];

pub const MISINFO_DAILY_DIR: &str = "misinfo_daily";
pub const CASCADES_DIR: &str = "cascades";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn truncate_text(text: &str) -> String {
    match text.char_indices().nth(MAX_TEXT_CHARS) {
        Some((i, _)) => text[..i].to_string(),
        None => text.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Geo,
    Label,
    Cascades,
    Analyze,
    Sentiment,
    Topics,
    Trends,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Geo,
        Stage::Label,
        Stage::Cascades,
        Stage::Analyze,
        Stage::Sentiment,
        Stage::Topics,
        Stage::Trends,
        Stage::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Geo => "geo",
            Stage::Label => "label",
            Stage::Cascades => "cascades",
            Stage::Analyze => "analyze",
            Stage::Sentiment => "sentiment",
            Stage::Topics => "topics",
            Stage::Trends => "trends",
            Stage::Export => "export",
        }
    }

    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Ingest | Stage::Label => &[],
            Stage::Geo | Stage::Topics => &[Stage::Ingest],
            Stage::Cascades => &[Stage::Ingest, Stage::Label],
            Stage::Analyze => &[Stage::Ingest, Stage::Geo, Stage::Cascades],
            Stage::Sentiment | Stage::Trends => &[Stage::Ingest, Stage::Geo],
            Stage::Export => &[
                Stage::Analyze,
                Stage::Sentiment,
                Stage::Topics,
                Stage::Trends,
            ],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Stage, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Topics(#[from] TopicError),
    #[error(transparent)]
    Trends(#[from] TrendError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad input glob `{0}`")]
    Glob(String),
    #[error("no input files match {0:?}")]
    NoInputs(Vec<String>),
    #[error("artifact {0} is missing")]
    MissingArtifact(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StageFailure + '_ {
    move |source| StageFailure::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        /// Stages that finished (or were up to date) before the failure.
        completed: Vec<Stage>,
        #[source]
        source: StageFailure,
    },
    #[error("cannot build worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub row_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub schema_version: String,
    pub generated_at: String,
    pub corpus_range: Option<DayRange>,
    pub files: BTreeMap<String, FileEntry>,
}

impl ArtifactManifest {
    pub fn load(out: &Path) -> Result<ArtifactManifest, StageFailure> {
        let path = out.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        serde_json::from_slice(&bytes).map_err(|source| StageFailure::Json { path, source })
    }

    /// Re-hashes every listed file; returns the names that are missing or
    /// whose hash differs.
    pub fn verify(&self, out: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|(_, e)| {
                fs::read(out.join(&e.path))
                    .map(|b| sha256_hex(&b) != e.sha256)
                    .unwrap_or(true)
            })
            .map(|(n, _)| n.clone())
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String, StageFailure> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path).map_err(io_err(path))?;
    io::copy(&mut file, &mut hasher).map_err(io_err(path))?;
    Ok(hex::encode(hasher.finalize()))
}

fn generated_at() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now);
    now.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), StageFailure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| StageFailure::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StageFailure> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| StageFailure::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StageFailure> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// One row of a `misinfo_daily/<date>.json` file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisinfoDailyRow {
    #[serde(with = "crate::id_string")]
    pub tweet_id: u64,
    pub text: String,
    pub categories: CategorySet,
    pub matched_domain: Option<String>,
    pub cascade_size: usize,
}

/// Misinformation roots grouped by the day they were posted, each day sorted
/// by cascade size descending then id. Undated roots are skipped.
pub fn misinfo_daily(
    cascades: &[Cascade],
    store: &CorpusStore,
) -> BTreeMap<Day, Vec<MisinfoDailyRow>> {
    let mut days: BTreeMap<Day, Vec<MisinfoDailyRow>> = BTreeMap::new();
    for c in cascades.iter().filter(|c| c.is_misinformation()) {
        let Some(day) = c.root().timestamp.map(Day::from_epoch_seconds) else {
            continue;
        };
        days.entry(day).or_default().push(MisinfoDailyRow {
            tweet_id: c.root_id,
            text: store
                .get(c.root_id)
                .map(|t| truncate_text(&t.text))
                .unwrap_or_default(),
            categories: c.categories,
            matched_domain: c.matched_domains.first().cloned(),
            cascade_size: c.size,
        });
    }
    for rows in days.values_mut() {
        rows.sort_by(|a, b| {
            b.cascade_size
                .cmp(&a.cascade_size)
                .then(a.tweet_id.cmp(&b.tweet_id))
        });
    }
    days
}

pub fn write_misinfo_daily(
    out: &Path,
    days: &BTreeMap<Day, Vec<MisinfoDailyRow>>,
) -> Result<(), StageFailure> {
    let dir = out.join(MISINFO_DAILY_DIR);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for (day, rows) in days {
        write_json(&dir.join(format!("{day}.json")), rows)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeFile {
    #[serde(with = "crate::id_string")]
    pub root_id: u64,
    pub size: usize,
    pub depth: usize,
    pub categories: CategorySet,
    pub matched_domains: Vec<String>,
    pub trace: SpreadTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentArtifact {
    pub by_country: Vec<SentimentGroup>,
    pub by_day: Vec<SentimentGroup>,
    pub by_country_day: Vec<SentimentGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsArtifact {
    pub k: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
    pub n_tweets: u64,
    pub degenerate_count: u64,
    pub clusters: Vec<TopicCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendsGlobalArtifact {
    pub window: Option<DayRange>,
    pub scale: TrendScale,
    pub series: Vec<TrendSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendsByCountryArtifact {
    pub window: Option<DayRange>,
    pub countries: BTreeMap<String, Vec<TrendSeries>>,
}

fn row_count(name: &str, value: &serde_json::Value) -> u64 {
    use serde_json::Value;
    let len = |v: Option<&Value>| match v {
        Some(Value::Array(a)) => a.len() as u64,
        Some(Value::Object(o)) => o.len() as u64,
        _ => 0,
    };
    match name {
        "dataset_stats" | "misinfo_stats" => 1,
        "sentiment_country_day" => len(value.get("by_country_day")),
        "topics" => len(value.get("clusters")),
        "trends_global" => len(value.get("series")),
        "trends_by_country" => len(value.get("countries")),
        "narratives" => len(Some(value)).saturating_sub(1),
        _ if name.starts_with(CASCADES_DIR) => {
            len(value.get("trace").and_then(|t| t.get("points")))
        }
        _ => len(Some(value)),
    }
}

fn manifest_entry(out: &Path, name: &str, rel: &str) -> Result<FileEntry, StageFailure> {
    let path = out.join(rel);
    if !path.exists() {
        return Err(StageFailure::MissingArtifact(rel.to_string()));
    }
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|source| StageFailure::Json {
            path: path.clone(),
            source,
        })?;
    Ok(FileEntry {
        path: rel.to_string(),
        sha256: sha256_hex(&bytes),
        row_count: row_count(name, &value),
    })
}

fn sorted_json_files(dir: &Path) -> Result<Vec<String>, StageFailure> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".json") {
            names.push(stem.to_string());
        }
    }
    names.sort();
    Ok(names)
}

/// Hashes the bundle under `out` and writes the manifest atomically.
pub fn build_manifest(
    out: &Path,
    corpus_range: Option<DayRange>,
) -> Result<ArtifactManifest, StageFailure> {
    let mut files = BTreeMap::new();
    for name in ARTIFACTS {
        files.insert(
            name.to_string(),
            manifest_entry(out, name, &format!("{name}.json"))?,
        );
    }
    for dir in [MISINFO_DAILY_DIR, CASCADES_DIR] {
        for stem in sorted_json_files(&out.join(dir))? {
            let name = format!("{dir}/{stem}");
            let entry = manifest_entry(out, &name, &format!("{name}.json"))?;
            files.insert(name, entry);
        }
    }
    let manifest = ArtifactManifest {
        schema_version: SCHEMA_VERSION.to_string(),
        generated_at: generated_at(),
        corpus_range,
        files,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|source| StageFailure::Json {
        path: out.join(MANIFEST_FILE),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(&out.join(MANIFEST_FILE), &bytes)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; the global rayon pool when `None`.
    pub workers: Option<usize>,
    /// Re-run stages even when their stamps match.
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub outcomes: Vec<StageOutcome>,
    pub manifest: Option<ArtifactManifest>,
}

const GEO_FILE: &str = "geo.jsonl";
const CASCADES_FILE: &str = "cascades.jsonl";
const CATALOG_FILE: &str = "catalog.json";
const MISINFO_STATS_FILE: &str = "misinfo_stats.json";
const GRAPH_STATS_FILE: &str = "graph_stats.json";
const INGEST_REPORT_FILE: &str = "ingest_report.json";
const STAMP_DIR: &str = "stamps";

/// Lazily loaded pipeline state. Outputs of skipped stages are read back
/// from disk only when a later stage needs them.
pub struct Pipeline {
    cfg: PipelineConfig,
    force: bool,
    store: Option<CorpusStore>,
    geo: Option<GeoIndex>,
    catalog: Option<SourceCatalog>,
    cascades: Option<Vec<Cascade>>,
    stamps: HashMap<Stage, String>,
    outcomes: Vec<StageOutcome>,
}

/// Runs `target` and every stage it depends on inside a pool of
/// `opts.workers` threads.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    target: Stage,
    opts: RunOptions,
) -> Result<RunSummary, PipelineError> {
    let mut pipeline = Pipeline::new(cfg.clone(), opts.force);
    match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| PipelineError::ThreadPool(e.to_string()))?
            .install(|| pipeline.run(target)),
        None => pipeline.run(target),
    }
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, force: bool) -> Pipeline {
        Pipeline {
            cfg,
            force,
            store: None,
            geo: None,
            catalog: None,
            cascades: None,
            stamps: HashMap::new(),
            outcomes: Vec::new(),
        }
    }

    pub fn run(&mut self, target: Stage) -> Result<RunSummary, PipelineError> {
        self.ensure(target)?;
        let manifest = if target == Stage::Export {
            ArtifactManifest::load(&self.cfg.out).ok()
        } else {
            None
        };
        Ok(RunSummary {
            outcomes: self.outcomes.clone(),
            manifest,
        })
    }

    fn fail(&self, stage: Stage, source: StageFailure) -> PipelineError {
        PipelineError::Stage {
            stage,
            completed: self.outcomes.iter().map(|o| o.stage).collect(),
            source,
        }
    }

    fn ensure(&mut self, stage: Stage) -> Result<String, PipelineError> {
        if let Some(s) = self.stamps.get(&stage) {
            return Ok(s.clone());
        }
        let mut hasher = Sha256::new();
        hasher.update(env!("CARGO_PKG_VERSION"));
        hasher.update(SCHEMA_VERSION);
        hasher.update(stage.name());
        for dep in stage.deps() {
            hasher.update(self.ensure(*dep)?);
        }
        let inputs = self.stage_inputs(stage).map_err(|e| self.fail(stage, e))?;
        hasher.update(inputs);
        let stamp = hex::encode(hasher.finalize());

        let stamp_path = self.stamp_path(stage);
        let up_to_date = !self.force
            && fs::read_to_string(&stamp_path).ok().as_deref() == Some(stamp.as_str())
            && self.outputs_present(stage);
        if up_to_date {
            info!("{stage}: up to date");
        } else {
            info!("{stage}: running");
            // invalidate before writing so a crash never leaves a stale stamp
            let _ = fs::remove_file(&stamp_path);
            self.execute(stage).map_err(|e| self.fail(stage, e))?;
            self.write_stamp(&stamp_path, &stamp)
                .map_err(|e| self.fail(stage, e))?;
        }
        self.outcomes.push(StageOutcome {
            stage,
            skipped: up_to_date,
        });
        self.stamps.insert(stage, stamp.clone());
        Ok(stamp)
    }

    fn stamp_path(&self, stage: Stage) -> PathBuf {
        self.cfg
            .store_dir
            .join(STAMP_DIR)
            .join(format!("{}.sha256", stage.name()))
    }

    fn write_stamp(&self, path: &Path, stamp: &str) -> Result<(), StageFailure> {
        let dir = path.parent().expect("stamp path has a parent");
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        fs::write(path, stamp).map_err(io_err(path))
    }

    fn input_files(&self) -> Result<Vec<PathBuf>, StageFailure> {
        let mut files = Vec::new();
        for pattern in &self.cfg.input_globs {
            let paths = glob::glob(pattern).map_err(|_| StageFailure::Glob(pattern.clone()))?;
            for p in paths {
                let p = p.map_err(|e| StageFailure::Io {
                    path: e.path().to_path_buf(),
                    source: io::Error::new(e.error().kind(), e.error().to_string()),
                })?;
                if p.is_file() {
                    files.push(p);
                }
            }
        }
        files.sort();
        files.dedup();
        if files.is_empty() {
            return Err(StageFailure::NoInputs(self.cfg.input_globs.clone()));
        }
        Ok(files)
    }

    fn optional_file_hash(path: &Option<PathBuf>, bundled: &str) -> Result<String, StageFailure> {
        match path {
            Some(p) => file_sha256(p),
            None => Ok(sha256_hex(bundled.as_bytes())),
        }
    }

    fn stage_inputs(&self, stage: Stage) -> Result<String, StageFailure> {
        fn json<T: Serialize>(v: &T) -> String {
            serde_json::to_string(v).expect("config values serialize")
        }
        let cfg = &self.cfg;
        let mut parts: Vec<String> = Vec::new();
        match stage {
            Stage::Ingest => {
                parts.push(json(&cfg.filters()));
                for f in self.input_files()? {
                    parts.push(f.to_string_lossy().into_owned());
                    parts.push(file_sha256(&f)?);
                }
            }
            Stage::Geo => parts.push(Self::optional_file_hash(&cfg.gazetteer, BUNDLED_GAZETTEER)?),
            Stage::Label => {
                parts.push(json(&cfg.tag_mode));
                for c in &cfg.catalogs {
                    parts.push(c.to_string_lossy().into_owned());
                    parts.push(file_sha256(c)?);
                }
                if let Some(a) = &cfg.aliases {
                    parts.push(file_sha256(a)?);
                }
            }
            Stage::Cascades => {}
            Stage::Analyze => {
                parts.push(json(&cfg.analytics));
                parts.push(Self::optional_file_hash(&cfg.centroids, BUNDLED_CENTROIDS)?);
            }
            Stage::Sentiment => {
                parts.push(json(&cfg.sentiment));
                parts.push(json(&cfg.analytics.policy_top_n));
                if let Some(l) = &cfg.lexicon {
                    parts.push(file_sha256(l)?);
                }
            }
            Stage::Topics => parts.push(json(&cfg.topic_params())),
            Stage::Trends => parts.push(json(&cfg.trends)),
            Stage::Export => {}
        }
        Ok(parts.join("\n"))
    }

    fn outputs_present(&self, stage: Stage) -> bool {
        let store = &self.cfg.store_dir;
        let out = &self.cfg.out;
        let artifacts: &[&str] = match stage {
            Stage::Ingest => {
                return store.join("records.jsonl").exists() && store.join("index.bin").exists()
            }
            Stage::Geo => return store.join(GEO_FILE).exists(),
            Stage::Label => return store.join(CATALOG_FILE).exists(),
            Stage::Cascades => {
                return store.join(CASCADES_FILE).exists()
                    && store.join(MISINFO_STATS_FILE).exists()
            }
            Stage::Analyze => &ARTIFACTS[..6],
            Stage::Sentiment => &ARTIFACTS[6..8],
            Stage::Topics => &ARTIFACTS[8..9],
            Stage::Trends => &ARTIFACTS[9..12],
            Stage::Export => return out.join(MANIFEST_FILE).exists(),
        };
        artifacts
            .iter()
            .all(|a| out.join(format!("{a}.json")).exists())
    }

    fn execute(&mut self, stage: Stage) -> Result<(), StageFailure> {
        match stage {
            Stage::Ingest => self.run_ingest(),
            Stage::Geo => self.run_geo(),
            Stage::Label => self.run_label(),
            Stage::Cascades => self.run_cascades(),
            Stage::Analyze => self.run_analyze(),
            Stage::Sentiment => self.run_sentiment(),
            Stage::Topics => self.run_topics(),
            Stage::Trends => self.run_trends(),
            Stage::Export => self.run_export(),
        }
    }

    fn store(&mut self) -> Result<&CorpusStore, StageFailure> {
        if self.store.is_none() {
            self.store = Some(CorpusStore::open(&self.cfg.store_dir)?);
        }
        Ok(self.store.as_ref().expect("just loaded"))
    }

    fn geo(&mut self) -> Result<&GeoIndex, StageFailure> {
        if self.geo.is_none() {
            self.geo = Some(GeoIndex::open(&self.cfg.store_dir.join(GEO_FILE))?);
        }
        Ok(self.geo.as_ref().expect("just loaded"))
    }

    fn load_catalog(&self) -> Result<SourceCatalog, StageFailure> {
        let mut catalog = SourceCatalog::load(&self.cfg.catalogs, self.cfg.tag_mode)?;
        if let Some(a) = &self.cfg.aliases {
            catalog = catalog.with_aliases_file(a)?;
        }
        Ok(catalog)
    }

    fn catalog(&mut self) -> Result<&SourceCatalog, StageFailure> {
        if self.catalog.is_none() {
            self.catalog = Some(self.load_catalog()?);
        }
        Ok(self.catalog.as_ref().expect("just loaded"))
    }

    fn cascades(&mut self) -> Result<&[Cascade], StageFailure> {
        if self.cascades.is_none() {
            let path = self.cfg.store_dir.join(CASCADES_FILE);
            let file = File::open(&path).map_err(io_err(&path))?;
            let lines: Vec<String> = BufReader::new(file)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(io_err(&path))?;
            let cascades = lines
                .par_iter()
                .map(|l| serde_json::from_str::<Cascade>(l))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| StageFailure::Json { path, source })?;
            self.cascades = Some(cascades);
        }
        Ok(self.cascades.as_deref().expect("just loaded"))
    }

    fn gazetteer(&self) -> Result<Gazetteer, StageFailure> {
        Ok(match &self.cfg.gazetteer {
            Some(p) => Gazetteer::load(p)?,
            None => Gazetteer::from_reader(BUNDLED_GAZETTEER.as_bytes())?,
        })
    }

    fn centroids(&self) -> Result<Centroids, StageFailure> {
        Ok(match &self.cfg.centroids {
            Some(p) => Centroids::load(p)?,
            None => Centroids::from_reader(BUNDLED_CENTROIDS.as_bytes())?,
        })
    }

    fn lexicon(&self) -> Result<SentimentLexicon, StageFailure> {
        let lex = match &self.cfg.lexicon {
            Some(p) => SentimentLexicon::load(p)?,
            None => SentimentLexicon::bundled(),
        };
        Ok(lex.with_config(self.cfg.sentiment))
    }

    fn run_ingest(&mut self) -> Result<(), StageFailure> {
        let files = self.input_files()?;
        let (store, report) = ingest_files(&files, &self.cfg.filters())?;
        info!(
            "ingest: read {} parsed {} stored {} (+{} synthetic parents)",
            report.read, report.parsed, report.stored, report.synthetic_parents
        );
        store.write(&self.cfg.store_dir)?;
        write_json(&self.cfg.store_dir.join(INGEST_REPORT_FILE), &report)?;
        self.store = Some(store);
        // downstream in-memory state derives from the old store
        self.geo = None;
        self.cascades = None;
        Ok(())
    }

    fn run_geo(&mut self) -> Result<(), StageFailure> {
        let gaz = self.gazetteer()?;
        let geo = GeoIndex::build(self.store()?, &gaz);
        geo.write(&self.cfg.store_dir.join(GEO_FILE))?;
        self.geo = Some(geo);
        Ok(())
    }

    fn run_label(&mut self) -> Result<(), StageFailure> {
        let catalog = self.load_catalog()?;
        write_json(&self.cfg.store_dir.join(CATALOG_FILE), catalog.entries())?;
        self.catalog = Some(catalog);
        self.cascades = None;
        Ok(())
    }

    fn run_cascades(&mut self) -> Result<(), StageFailure> {
        self.catalog()?;
        self.store()?;
        let store = self.store.as_ref().expect("loaded");
        let graph = build_engagement_graph(store);
        let mut cascades = extract_cascades(&graph, Some(store));
        let stats = label_cascades(&mut cascades, self.catalog.as_ref().expect("loaded"));
        let gstats = graph_stats(&graph, &cascades);
        info!(
            "cascades: {} cascades, {} misinformation sources",
            gstats.cascade_count, stats.n_misinfo_source
        );
        let path = self.cfg.store_dir.join(CASCADES_FILE);
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        for c in &cascades {
            serde_json::to_writer(&mut w, c).map_err(|source| StageFailure::Json {
                path: path.clone(),
                source,
            })?;
            w.write_all(b"\n").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        write_json(&self.cfg.store_dir.join(MISINFO_STATS_FILE), &stats)?;
        write_json(&self.cfg.store_dir.join(GRAPH_STATS_FILE), &gstats)?;
        self.cascades = Some(cascades);
        Ok(())
    }

    fn run_analyze(&mut self) -> Result<(), StageFailure> {
        let centroids = self.centroids()?;
        self.store()?;
        self.geo()?;
        self.cascades()?;
        let (store, geo, cascades) = (
            self.store.as_ref().expect("loaded"),
            self.geo.as_ref().expect("loaded"),
            self.cascades.as_deref().expect("loaded"),
        );
        let out = &self.cfg.out;
        let params = &self.cfg.analytics;
        let misinfo: MisinfoStats = read_json(&self.cfg.store_dir.join(MISINFO_STATS_FILE))?;

        write_json(
            &out.join("dataset_stats.json"),
            &compute_dataset_stats(store, geo),
        )?;
        write_json(&out.join("misinfo_stats.json"), &misinfo)?;
        let volume = match store.day_range() {
            Some(range) => misinfo_volume_series(cascades, range),
            None => Vec::new(),
        };
        write_json(&out.join("volume_by_category.json"), &volume)?;
        write_json(
            &out.join("source_breakdown.json"),
            &source_breakdown(cascades, params.top_sources),
        )?;
        write_json(
            &out.join("relative_volume.json"),
            &relative_volume(cascades),
        )?;
        let table = hashtag_tfidf(cascades, store);
        write_json(
            &out.join("narratives.json"),
            &narratives(&table, params.narrative_k, params.exclusion_depth),
        )?;
        write_misinfo_daily(out, &misinfo_daily(cascades, store))?;

        let mut misinfo_cascades: Vec<&Cascade> =
            cascades.iter().filter(|c| c.is_misinformation()).collect();
        misinfo_cascades.sort_by(|a, b| b.size.cmp(&a.size).then(a.root_id.cmp(&b.root_id)));
        misinfo_cascades.truncate(params.cascade_files);
        let dir = out.join(CASCADES_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for c in misinfo_cascades {
            // cascades without any placeable member still get a file
            let trace = cascade_spread_trace(c, geo, &centroids).unwrap_or_default();
            let file = CascadeFile {
                root_id: c.root_id,
                size: c.size,
                depth: c.depth,
                categories: c.categories,
                matched_domains: c.matched_domains.clone(),
                trace,
            };
            write_json(&dir.join(format!("{}.json", c.root_id)), &file)?;
        }
        Ok(())
    }

    fn run_sentiment(&mut self) -> Result<(), StageFailure> {
        let lexicon = self.lexicon()?;
        self.store()?;
        self.geo()?;
        let (store, geo) = (
            self.store.as_ref().expect("loaded"),
            self.geo.as_ref().expect("loaded"),
        );
        let artifact = SentimentArtifact {
            by_country: aggregate_sentiment(store, geo, &lexicon, GroupBy::Country),
            by_day: aggregate_sentiment(store, geo, &lexicon, GroupBy::Day),
            by_country_day: aggregate_sentiment(store, geo, &lexicon, GroupBy::CountryDay),
        };
        write_json(&self.cfg.out.join("sentiment_country_day.json"), &artifact)?;
        let top_n = self.cfg.analytics.policy_top_n;
        let policies: Vec<_> = [
            PolicyTagSet::work_from_home(),
            PolicyTagSet::social_distancing(),
        ]
        .iter()
        .map(|set| policy_sentiment(store, &lexicon, set, top_n))
        .collect();
        write_json(&self.cfg.out.join("policy_sentiment.json"), &policies)
    }

    fn run_topics(&mut self) -> Result<(), StageFailure> {
        let params = self.cfg.topic_params();
        let store = self.store()?;
        let english = store.collected().filter(|t| t.is_english()).count();
        let artifact = if english < params.kmeans.k {
            warn!(
                "topics: {english} English tweets, fewer than k = {}",
                params.kmeans.k
            );
            TopicsArtifact {
                k: params.kmeans.k,
                iterations: 0,
                converged: false,
                objective_history: Vec::new(),
                n_tweets: english as u64,
                degenerate_count: 0,
                clusters: Vec::new(),
            }
        } else {
            let model = fit_topics(store, &params)?;
            let clusters =
                representative_tweets(&model, store, params.representatives, params.top_words);
            TopicsArtifact {
                k: model.k,
                iterations: model.fit.iterations,
                converged: model.fit.converged,
                objective_history: model.fit.objective_history.clone(),
                n_tweets: model.tweet_ids.len() as u64,
                degenerate_count: model.degenerate_count,
                clusters,
            }
        };
        write_json(&self.cfg.out.join("topics.json"), &artifact)
    }

    fn run_trends(&mut self) -> Result<(), StageFailure> {
        let t = self.cfg.trends.clone();
        self.store()?;
        self.geo()?;
        let (store, geo) = (
            self.store.as_ref().expect("loaded"),
            self.geo.as_ref().expect("loaded"),
        );
        let corpus = store.day_range();
        let window = match (t.window_start, t.window_end, corpus) {
            (Some(s), Some(e), _) => Some(DayRange::new(s, e)),
            (s, e, Some(c)) => Some(DayRange::new(s.unwrap_or(c.start), e.unwrap_or(c.end))),
            _ => None,
        };
        let series = match window {
            Some(w) if w.len() >= 2 => hashtag_trend_slopes(store, w, t.top, t.scale)?,
            Some(w) if t.window_start.is_some() && t.window_end.is_some() => {
                return Err(TrendError::WindowTooShort(w.len()).into())
            }
            _ => {
                warn!("trends: corpus spans fewer than 2 days, global trends left empty");
                Vec::new()
            }
        };
        write_json(
            &self.cfg.out.join("trends_global.json"),
            &TrendsGlobalArtifact {
                window,
                scale: t.scale,
                series,
            },
        )?;
        write_json(
            &self.cfg.out.join("trends_by_country.json"),
            &TrendsByCountryArtifact {
                window: trailing_window(store, t.country_last_days),
                countries: emerging_by_country(store, geo, t.country_last_days, t.country_top)?,
            },
        )?;
        write_json(
            &self.cfg.out.join("geo_activity.json"),
            &geo_activity_stats(store, geo),
        )
    }

    fn run_export(&mut self) -> Result<(), StageFailure> {
        let range = self.store()?.day_range();
        let manifest = build_manifest(&self.cfg.out, range)?;
        info!("export: manifest lists {} files", manifest.files.len());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Category;
    use crate::graph::CascadeMember;
    use crate::tweet::{Tweet, UserRef};
    use Category::*;

    #[test]
    fn truncation_counts_chars() {
        let s: String = "é".repeat(300);
        assert_eq!(truncate_text(&s).chars().count(), 280);
        assert_eq!(truncate_text("short"), "short");
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("bogus".parse::<Stage>().is_err());
    }

    fn cascade(root: u64, ts: i64, size: usize, cats: &[Category]) -> Cascade {
        Cascade {
            root_id: root,
            members: vec![CascadeMember {
                tweet_id: root,
                parent_id: None,
                timestamp: Some(ts),
            }],
            size,
            depth: 1,
            categories: CategorySet::of(cats),
            source_urls: vec!["http://x.com".into()],
            matched_domains: if cats.is_empty() {
                vec![]
            } else {
                vec!["x.com".into()]
            },
        }
    }

    fn tweet(id: u64) -> Tweet {
        Tweet {
            id,
            created_at: Some(0),
            text: format!("text {id}"),
            lang: "en".into(),
            user: UserRef::default(),
            parent: None,
            hashtags: vec![],
            urls: vec![],
            coordinates: None,
            place_country: None,
            place_name: None,
            synthetic: false,
        }
    }

    #[test]
    fn daily_rows() {
        let day2 = 86_400 + 5;
        let cs = vec![
            cascade(1, 10, 3, &[Unreliable]),
            cascade(2, 20, 9, &[Conspiracy, Clickbait]),
            cascade(3, day2, 1, &[]),
        ];
        let store = CorpusStore::from_tweets((1..=3).map(tweet).collect()).unwrap();
        let days = misinfo_daily(&cs, &store);
        assert_eq!(days.len(), 1);
        let rows = &days[&Day(0)];
        assert_eq!(rows.iter().map(|r| r.tweet_id).collect::<Vec<_>>(), [2, 1]);
        assert_eq!(rows[0].categories.len(), 2);
        let json = serde_json::to_value(&rows[0]).unwrap();
        assert_eq!(json["tweet_id"], "2");
        assert_eq!(
            json["categories"],
            serde_json::json!(["conspiracy", "clickbait"])
        );
    }
}
