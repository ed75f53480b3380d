//! Pipeline configuration, read from JSON. Relative paths resolve against
//! the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::TagMode;
use crate::ingest::{Filters, DEFAULT_KEYWORDS};
use crate::sentiment::SentimentConfig;
use crate::time::{Day, DayRange};
use crate::topics::TopicParams;
use crate::trends::TrendScale;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_keywords() -> Vec<String> {
    DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect()
}

fn default_store_dir() -> PathBuf {
    PathBuf::from("store")
}

fn default_out() -> PathBuf {
    PathBuf::from("artifacts")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsParams {
    pub top_sources: usize,
    pub narrative_k: usize,
    pub exclusion_depth: usize,
    pub policy_top_n: usize,
    /// Largest misinformation cascades written as individual trace files.
    pub cascade_files: usize,
}

impl Default for AnalyticsParams {
    fn default() -> Self {
        AnalyticsParams {
            top_sources: 20,
            narrative_k: 10,
            exclusion_depth: 10,
            policy_top_n: 10,
            cascade_files: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendParams {
    /// Global window; defaults to the whole corpus range.
    pub window_start: Option<Day>,
    pub window_end: Option<Day>,
    pub top: usize,
    pub country_last_days: usize,
    pub country_top: usize,
    pub scale: TrendScale,
}

impl Default for TrendParams {
    fn default() -> Self {
        TrendParams {
            window_start: None,
            window_end: None,
            top: 30,
            country_last_days: 10,
            country_top: 10,
            scale: TrendScale::Counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_globs: Vec<String>,
    #[serde(default = "default_keywords")]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub lang_whitelist: Vec<String>,
    #[serde(default)]
    pub date_start: Option<Day>,
    #[serde(default)]
    pub date_end: Option<Day>,
    #[serde(default = "default_store_dir")]
    pub store_dir: PathBuf,
    /// Bundled tables are used when these are absent.
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    #[serde(default)]
    pub centroids: Option<PathBuf>,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    pub catalogs: Vec<PathBuf>,
    #[serde(default)]
    pub aliases: Option<PathBuf>,
    #[serde(default)]
    pub tag_mode: TagMode,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub analytics: AnalyticsParams,
    #[serde(default)]
    pub sentiment: SentimentConfig,
    #[serde(default)]
    pub topics: TopicParams,
    #[serde(default)]
    pub trends: TrendParams,
}

impl PipelineConfig {
    pub fn from_json(json: &str, base: &Path) -> Result<PipelineConfig, ConfigError> {
        let mut cfg: PipelineConfig = serde_json::from_str(json)?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let json = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        PipelineConfig::from_json(&json, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut self.store_dir);
        abs(&mut self.out);
        for p in self.catalogs.iter_mut() {
            abs(p);
        }
        for p in [
            &mut self.gazetteer,
            &mut self.centroids,
            &mut self.lexicon,
            &mut self.aliases,
        ]
        .into_iter()
        .flatten()
        {
            abs(p);
        }
        for g in self.input_globs.iter_mut() {
            if Path::new(g.as_str()).is_relative() {
                *g = base.join(g.as_str()).to_string_lossy().into_owned();
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.input_globs.is_empty() {
            return invalid("input_globs is empty");
        }
        if self.keywords.iter().all(|k| k.trim().is_empty()) {
            return invalid("keywords is empty");
        }
        if self.catalogs.is_empty() {
            return invalid("catalogs is empty");
        }
        if let (Some(s), Some(e)) = (self.date_start, self.date_end) {
            if s > e {
                return invalid("date_start is after date_end");
            }
        }
        if self.topics.kmeans.k == 0 {
            return invalid("topics.kmeans.k must be positive");
        }
        if self.topics.fit_sample < self.topics.kmeans.k {
            return invalid("topics.fit_sample is smaller than k");
        }
        if self.trends.country_last_days < 2 {
            return invalid("trends.country_last_days must be at least 2");
        }
        if let (Some(s), Some(e)) = (self.trends.window_start, self.trends.window_end) {
            if e <= s {
                return invalid("trend window must span at least 2 days");
            }
        }
        Ok(())
    }

    pub fn filters(&self) -> Filters {
        let date_range = match (self.date_start, self.date_end) {
            (None, None) => None,
            (s, e) => Some(DayRange::new(
                s.unwrap_or(Day(i32::MIN / 2)),
                e.unwrap_or(Day(i32::MAX / 2)),
            )),
        };
        Filters {
            keywords: self
                .keywords
                .iter()
                .map(|k| k.trim().to_lowercase())
                .collect(),
            lang_whitelist: self.lang_whitelist.clone(),
            date_range,
        }
    }

    /// Topic parameters with both seeds taken from the run seed.
    pub fn topic_params(&self) -> TopicParams {
        let mut p = self.topics;
        p.embed.seed = self.seed;
        p.kmeans.seed = self.seed;
        p
    }
}
