//! Aggregates over labeled cascades: category volume per day, most linked
//! sources, source/response volume, and TF-IDF hashtag narratives.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::catalog::Category;
use crate::graph::Cascade;
use crate::ingest::CorpusStore;
use crate::text::smoothed_idf;
use crate::time::{Day, DayRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayCount {
    pub day: Day,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeSeries {
    pub category: Category,
    pub points: Vec<DayCount>,
}

impl VolumeSeries {
    pub fn total(&self) -> u64 {
        self.points.iter().map(|p| p.count).sum()
    }
}

fn root_day(c: &Cascade) -> Option<Day> {
    c.root().timestamp.map(Day::from_epoch_seconds)
}

/// Daily misinformation source counts per category over `range`, zero
/// filled. A root with several labels counts once in each of them.
pub fn misinfo_volume_series(cascades: &[Cascade], range: DayRange) -> Vec<VolumeSeries> {
    let mut counts = vec![vec![0u64; range.len()]; Category::ALL.len()];
    for c in cascades.iter().filter(|c| c.is_misinformation()) {
        let Some(i) = root_day(c).and_then(|d| range.index(d)) else {
            continue;
        };
        for cat in c.categories.iter() {
            counts[cat as usize][i] += 1;
        }
    }
    Category::ALL
        .iter()
        .map(|&category| VolumeSeries {
            category,
            points: range
                .days()
                .zip(&counts[category as usize])
                .map(|(day, &count)| DayCount { day, count })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCount {
    pub domain: String,
    pub source_tweets: u64,
}

/// Misinformation roots per matched catalog domain, most linked first,
/// ties by domain.
pub fn source_breakdown(cascades: &[Cascade], top_n: usize) -> Vec<SourceCount> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for c in cascades.iter().filter(|c| c.is_misinformation()) {
        for d in &c.matched_domains {
            *counts.entry(d.as_str()).or_insert(0) += 1;
        }
    }
    let mut out: Vec<SourceCount> = counts
        .into_iter()
        .map(|(d, n)| SourceCount {
            domain: d.to_string(),
            source_tweets: n,
        })
        .collect();
    out.sort_by(|a, b| {
        b.source_tweets
            .cmp(&a.source_tweets)
            .then_with(|| a.domain.cmp(&b.domain))
    });
    out.truncate(top_n);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeVolume {
    /// A category name or `others`.
    pub category: String,
    pub n_sources: u64,
    pub n_responses: u64,
    pub response_ratio: f64,
    /// Set when there are no sources and the ratio is reported as 0.
    pub undefined: bool,
}

/// Sources and responses per category, plus `others` for unlabeled
/// cascades.
pub fn relative_volume(cascades: &[Cascade]) -> Vec<RelativeVolume> {
    let mut acc = [(0u64, 0u64); 5];
    for c in cascades {
        let responses = c.responses() as u64;
        if c.categories.is_empty() {
            acc[4].0 += 1;
            acc[4].1 += responses;
        }
        for cat in c.categories.iter() {
            acc[cat as usize].0 += 1;
            acc[cat as usize].1 += responses;
        }
    }
    let names = Category::ALL
        .iter()
        .map(|c| c.name())
        .chain(std::iter::once("others"));
    names
        .zip(acc)
        .map(|(name, (n_sources, n_responses))| RelativeVolume {
            category: name.to_string(),
            n_sources,
            n_responses,
            response_ratio: if n_sources == 0 {
                0.0
            } else {
                n_responses as f64 / n_sources as f64
            },
            undefined: n_sources == 0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagScore {
    pub hashtag: String,
    pub tf: u64,
    pub idf: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScores {
    pub category: Category,
    /// Sorted by score descending, then hashtag.
    pub rows: Vec<HashtagScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScoreTable {
    pub categories: Vec<CategoryScores>,
}

impl CategoryScoreTable {
    pub fn rows(&self, cat: Category) -> &[HashtagScore] {
        &self.categories[cat as usize].rows
    }
}

/// TF-IDF of root hashtags with one document per category.
pub fn hashtag_tfidf(cascades: &[Cascade], store: &CorpusStore) -> CategoryScoreTable {
    let mut tf: Vec<HashMap<&str, u64>> = vec![HashMap::new(); Category::ALL.len()];
    for c in cascades.iter().filter(|c| c.is_misinformation()) {
        let Some(root) = store.get(c.root_id) else {
            continue;
        };
        for cat in c.categories.iter() {
            for h in &root.hashtags {
                *tf[cat as usize].entry(h.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in &tf {
        for h in doc.keys() {
            *df.entry(h).or_insert(0) += 1;
        }
    }
    let n_docs = Category::ALL.len();
    let categories = Category::ALL
        .iter()
        .map(|&category| {
            let mut rows: Vec<HashtagScore> = tf[category as usize]
                .iter()
                .map(|(h, &count)| {
                    let idf = smoothed_idf(n_docs, df[h]);
                    HashtagScore {
                        hashtag: h.to_string(),
                        tf: count,
                        idf,
                        score: count as f64 * idf,
                    }
                })
                .collect();
            rows.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then_with(|| a.hashtag.cmp(&b.hashtag))
            });
            CategoryScores { category, rows }
        })
        .collect();
    CategoryScoreTable { categories }
}

/// Per category, the highest-scoring hashtags absent from every other
/// category's top `exclusion_depth`.
pub fn distinctive_hashtags(
    table: &CategoryScoreTable,
    k: usize,
    exclusion_depth: usize,
) -> BTreeMap<Category, Vec<HashtagScore>> {
    let tops: Vec<HashSet<&str>> = table
        .categories
        .iter()
        .map(|c| {
            c.rows
                .iter()
                .take(exclusion_depth)
                .map(|r| r.hashtag.as_str())
                .collect()
        })
        .collect();
    table
        .categories
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let picked = c
                .rows
                .iter()
                .filter(|r| {
                    tops.iter()
                        .enumerate()
                        .all(|(j, top)| j == i || !top.contains(r.hashtag.as_str()))
                })
                .take(k)
                .cloned()
                .collect();
            (c.category, picked)
        })
        .collect()
}

/// Narrative export: raw top-k rows and the distinctive selection per
/// category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Narratives {
    #[serde(flatten)]
    pub top: BTreeMap<Category, Vec<HashtagScore>>,
    pub distinctive: BTreeMap<Category, Vec<HashtagScore>>,
}

pub fn narratives(table: &CategoryScoreTable, k: usize, exclusion_depth: usize) -> Narratives {
    Narratives {
        top: table
            .categories
            .iter()
            .map(|c| (c.category, c.rows.iter().take(k).cloned().collect()))
            .collect(),
        distinctive: distinctive_hashtags(table, k, exclusion_depth),
    }
}
