//! Feature-hashed character n-gram embeddings, spherical k-means and
//! tf-idf based representative tweets per cluster.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hasher;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twox_hash::XxHash64;

use crate::ingest::CorpusStore;
use crate::text::{content_words, smoothed_idf};
use crate::tweet::Tweet;

// Distinct seed for the sign hash so bucket and sign are independent.
const SIGN_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopicError {
    #[error("need at least {k} vectors, got {n}")]
    TooFewPoints { k: usize, n: usize },
    #[error("k must be positive")]
    ZeroClusters,
    #[error("vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedParams {
    pub dim: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        EmbedParams {
            dim: 128,
            n_min: 3,
            n_max: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweetVector {
    pub values: Vec<f64>,
    /// Set when the text hashed to the zero vector and was replaced by e0.
    pub degenerate: bool,
}

fn hash_bytes(bytes: &[u8], seed: u64) -> u64 {
    let mut h = XxHash64::with_seed(seed);
    h.write(bytes);
    h.finish()
}

pub fn embed_tweet(text: &str, params: &EmbedParams) -> TweetVector {
    let dim = params.dim.max(1);
    let wrapped = format!("<{}>", text.to_lowercase());
    let mut bounds: Vec<usize> = wrapped.char_indices().map(|(i, _)| i).collect();
    bounds.push(wrapped.len());
    let n_chars = bounds.len() - 1;
    let bytes = wrapped.as_bytes();
    let mut values = vec![0.0f64; dim];
    let mut add = |gram: &[u8]| {
        let bucket = (hash_bytes(gram, params.seed) % dim as u64) as usize;
        let sign = if hash_bytes(gram, params.seed ^ SIGN_SEED_MIX) & 1 == 0 {
            1.0
        } else {
            -1.0
        };
        values[bucket] += sign;
    };
    if n_chars < params.n_min {
        add(bytes);
    } else {
        for n in params.n_min..=params.n_max.min(n_chars) {
            for start in 0..=(n_chars - n) {
                add(&bytes[bounds[start]..bounds[start + n]]);
            }
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        values[0] = 1.0;
        return TweetVector {
            values,
            degenerate: true,
        };
    }
    values.iter_mut().for_each(|v| *v /= norm);
    TweetVector {
        values,
        degenerate: false,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Index of the most similar centroid, lowest index on ties.
pub fn nearest_centroid(v: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let s = dot(v, c);
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 20,
            max_iters: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Σ (1 − cos) after each assignment step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansFit {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn seed_centroids(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut dist: Vec<f64> = vectors
        .par_iter()
        .map(|v| (1.0 - dot(v, &vectors[chosen[0]])).max(0.0))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                if *d > 0.0 {
                    pick = Some(i);
                    if target < *d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // every point coincides with a chosen centre
            rng.gen_range(0..n)
        };
        chosen.push(next);
        let c = &vectors[next];
        dist.par_iter_mut()
            .zip(vectors.par_iter())
            .for_each(|(d, v)| {
                *d = d.min((1.0 - dot(v, c)).max(0.0));
            });
    }
    chosen.iter().map(|&i| vectors[i].clone()).collect()
}

/// Spherical k-means with k-means++ seeding. Inputs are expected to be unit
/// vectors. A point only changes cluster when another centroid is strictly
/// closer, and an empty cluster keeps its previous centroid.
pub fn cluster_topics(
    vectors: &[Vec<f64>],
    params: &KMeansParams,
) -> Result<KMeansFit, TopicError> {
    let k = params.k;
    if k == 0 {
        return Err(TopicError::ZeroClusters);
    }
    if vectors.len() < k {
        return Err(TopicError::TooFewPoints {
            k,
            n: vectors.len(),
        });
    }
    let dim = vectors[0].len();
    if let Some((index, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(TopicError::DimensionMismatch {
            index,
            got: v.len(),
            expected: dim,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = seed_centroids(vectors, k, &mut rng);
    let mut assignments: Vec<usize> = vec![usize::MAX; vectors.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..params.max_iters.max(1) {
        iterations = iter + 1;
        let step: Vec<(usize, f64)> = vectors
            .par_iter()
            .zip(assignments.par_iter())
            .map(|(v, &cur)| {
                let (best, best_sim) = nearest_centroid(v, &centroids);
                if cur != usize::MAX {
                    let cur_sim = dot(v, &centroids[cur]);
                    if cur_sim >= best_sim {
                        return (cur, cur_sim);
                    }
                }
                (best, best_sim)
            })
            .collect();
        let changed = step
            .iter()
            .zip(&assignments)
            .filter(|((a, _), b)| a != *b)
            .count();
        history.push(step.iter().map(|(_, s)| 1.0 - s).sum());
        for (slot, (a, _)) in assignments.iter_mut().zip(&step) {
            *slot = *a;
        }
        if changed == 0 {
            converged = true;
            break;
        }
        if iter + 1 == params.max_iters {
            break;
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        for (v, &a) in vectors.iter().zip(&assignments) {
            for (s, x) in sums[a].iter_mut().zip(v) {
                *s += x;
            }
        }
        for (c, mut s) in centroids.iter_mut().zip(sums) {
            if normalize(&mut s) {
                *c = s;
            }
        }
    }
    Ok(KMeansFit {
        centroids,
        assignments,
        objective_history: history,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordWeight {
    pub word: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    #[serde(with = "crate::id_string")]
    pub tweet_id: u64,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCluster {
    pub cluster: usize,
    pub size: u64,
    pub words: Vec<WordWeight>,
    pub representatives: Vec<Representative>,
}

/// A fitted model over a set of tweets; `assignments[i]` is the cluster of
/// `tweet_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub tweet_ids: Vec<u64>,
    pub assignments: Vec<u32>,
    pub fit: KMeansFit,
    pub degenerate_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicParams {
    pub embed: EmbedParams,
    pub kmeans: KMeansParams,
    /// Upper bound on the tweets used to fit centroids; every tweet is
    /// assigned afterwards.
    pub fit_sample: usize,
    pub representatives: usize,
    pub top_words: usize,
}

impl Default for TopicParams {
    fn default() -> Self {
        TopicParams {
            embed: EmbedParams::default(),
            kmeans: KMeansParams::default(),
            fit_sample: 50_000,
            representatives: 10,
            top_words: 20,
        }
    }
}

fn topic_tweets(store: &CorpusStore) -> Vec<&Tweet> {
    store.collected().filter(|t| t.is_english()).collect()
}

/// Embeds collected English tweets, fits centroids on a seeded sample and
/// assigns every tweet to its nearest centroid.
pub fn fit_topics(store: &CorpusStore, params: &TopicParams) -> Result<TopicModel, TopicError> {
    let tweets = topic_tweets(store);
    let n = tweets.len();
    let sample: Vec<usize> = if n > params.fit_sample {
        let mut rng = ChaCha8Rng::seed_from_u64(params.kmeans.seed ^ 0x5eed);
        let mut idx = index::sample(&mut rng, n, params.fit_sample).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let vectors: Vec<Vec<f64>> = sample
        .par_iter()
        .map(|&i| embed_tweet(&tweets[i].text, &params.embed).values)
        .collect();
    let fit = cluster_topics(&vectors, &params.kmeans)?;
    drop(vectors);
    let assigned: Vec<(u32, bool)> = tweets
        .par_iter()
        .map(|t| {
            let v = embed_tweet(&t.text, &params.embed);
            (
                nearest_centroid(&v.values, &fit.centroids).0 as u32,
                v.degenerate,
            )
        })
        .collect();
    Ok(TopicModel {
        k: params.kmeans.k,
        centroids: fit.centroids.clone(),
        tweet_ids: tweets.iter().map(|t| t.id).collect(),
        assignments: assigned.iter().map(|(a, _)| *a).collect(),
        degenerate_count: assigned.iter().filter(|(_, d)| *d).count() as u64,
        fit,
    })
}

/// Per-cluster word weights: relative term frequency in the cluster times
/// the smoothed idf across clusters.
pub fn cluster_word_weights(k: usize, docs: &[(u32, Vec<String>)]) -> Vec<HashMap<String, f64>> {
    let mut counts: Vec<HashMap<&str, u64>> = vec![HashMap::new(); k];
    for (c, words) in docs {
        for w in words {
            *counts[*c as usize].entry(w.as_str()).or_default() += 1;
        }
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for c in &counts {
        for w in c.keys() {
            *df.entry(w).or_default() += 1;
        }
    }
    counts
        .iter()
        .map(|c| {
            let total: u64 = c.values().sum();
            c.iter()
                .map(|(w, &tf)| {
                    let weight = tf as f64 / total as f64 * smoothed_idf(k, df[w]);
                    (w.to_string(), weight)
                })
                .collect()
        })
        .collect()
}

/// Mean cluster weight over the tweet's distinct content words.
pub fn representative_score(words: &[String], weights: &HashMap<String, f64>) -> f64 {
    // sorted so the float sum is independent of hash order
    let mut distinct: Vec<&str> = words.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.is_empty() {
        return 0.0;
    }
    distinct
        .iter()
        .map(|w| weights.get(*w).copied().unwrap_or(0.0))
        .sum::<f64>()
        / distinct.len() as f64
}

/// Ranked word distribution and top-`m` representative tweets per cluster.
pub fn representative_tweets(
    model: &TopicModel,
    store: &CorpusStore,
    m: usize,
    top_words: usize,
) -> Vec<TopicCluster> {
    let docs: Vec<(u32, Vec<String>)> = model
        .tweet_ids
        .par_iter()
        .zip(model.assignments.par_iter())
        .map(|(id, &c)| {
            let text = store.get(*id).map(|t| t.text.as_str()).unwrap_or("");
            (c, content_words(text))
        })
        .collect();
    let weights = cluster_word_weights(model.k, &docs);
    let scores: Vec<f64> = docs
        .par_iter()
        .map(|(c, words)| representative_score(words, &weights[*c as usize]))
        .collect();
    let mut members: BTreeMap<u32, Vec<(f64, u64)>> = BTreeMap::new();
    for ((id, &c), s) in model.tweet_ids.iter().zip(&model.assignments).zip(&scores) {
        members.entry(c).or_default().push((*s, *id));
    }
    (0..model.k)
        .map(|c| {
            let mut words: Vec<WordWeight> = weights[c]
                .iter()
                .map(|(w, &weight)| WordWeight {
                    word: w.clone(),
                    weight,
                })
                .collect();
            words.sort_by(|a, b| {
                b.weight
                    .total_cmp(&a.weight)
                    .then_with(|| a.word.cmp(&b.word))
            });
            words.truncate(top_words);
            let mut ranked = members.remove(&(c as u32)).unwrap_or_default();
            let size = ranked.len() as u64;
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            ranked.truncate(m);
            TopicCluster {
                cluster: c,
                size,
                words,
                representatives: ranked
                    .into_iter()
                    .map(|(score, id)| Representative {
                        tweet_id: id,
                        text: store
                            .get(id)
                            .map(|t| crate::export::truncate_text(&t.text))
                            .unwrap_or_default(),
                        score,
                    })
                    .collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        normalize(&mut v);
        v
    }

    #[test]
    fn embedding_is_deterministic_and_unit() {
        let p = EmbedParams::default();
        let a = embed_tweet("Stay home, stay safe", &p);
        let b = embed_tweet("Stay home, stay safe", &p);
        assert_eq!(a, b);
        let norm: f64 = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(!a.degenerate);
        assert_ne!(
            a,
            embed_tweet("Stay home, stay safe", &EmbedParams { seed: 9, ..p })
        );
    }

    #[test]
    fn short_text_uses_whole_gram() {
        let p = EmbedParams::default();
        let v = embed_tweet("a", &p);
        assert_eq!(v.values.iter().filter(|x| **x != 0.0).count(), 1);
        let norm: f64 = embed_tweet("ab", &p).values.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        // "<>" is shorter than three characters as well
        assert!(!embed_tweet("", &p).degenerate);
    }

    #[test]
    fn zero_vector_maps_to_e0() {
        // one gram per bucket cancelling is hard to construct; use dim 1 with
        // two grams of opposite sign
        let p = EmbedParams {
            dim: 1,
            n_min: 3,
            n_max: 3,
            seed: 0,
        };
        let found = (0..2000u32).find_map(|i| {
            let v = embed_tweet(&format!("x{i}"), &p);
            v.degenerate.then_some(v)
        });
        let v = found.expect("some text cancels in a single bucket");
        assert_eq!(v.values, vec![1.0]);
    }

    #[test]
    fn k_one_is_normalized_mean() {
        let vs = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0]), unit(&[1.0, 1.0])];
        let fit = cluster_topics(
            &vs,
            &KMeansParams {
                k: 1,
                max_iters: 10,
                seed: 3,
            },
        )
        .unwrap();
        assert!(fit.assignments.iter().all(|&a| a == 0));
        let mean = unit(&[1.0 + 0.5f64.sqrt(), 1.0 + 0.5f64.sqrt()]);
        for (a, b) in fit.centroids[0].iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_points() {
        let vs = vec![unit(&[1.0, 0.0])];
        assert_eq!(
            cluster_topics(
                &vs,
                &KMeansParams {
                    k: 2,
                    max_iters: 10,
                    seed: 0
                }
            ),
            Err(TopicError::TooFewPoints { k: 2, n: 1 })
        );
        assert_eq!(
            cluster_topics(
                &vs,
                &KMeansParams {
                    k: 0,
                    max_iters: 10,
                    seed: 0
                }
            ),
            Err(TopicError::ZeroClusters)
        );
    }

    #[test]
    fn two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut vs = Vec::new();
        for i in 0..200 {
            let base = if i < 100 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 0.0, 1.0]
            };
            let jitter: Vec<f64> = base.iter().map(|b| b + rng.gen_range(-0.1..0.1)).collect();
            vs.push(unit(&jitter));
        }
        let fit = cluster_topics(
            &vs,
            &KMeansParams {
                k: 2,
                max_iters: 50,
                seed: 7,
            },
        )
        .unwrap();
        assert!(fit.converged);
        let first = fit.assignments[0];
        assert!(fit.assignments[..100].iter().all(|&a| a == first));
        assert!(fit.assignments[100..].iter().all(|&a| a != first));
        for w in fit.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn representative_ranking() {
        let docs = vec![
            (0, content_words("masks vaccine lockdown today")),
            (0, content_words("masks vaccine lockdown")),
            (0, content_words("weather sunny")),
            (1, content_words("football match tonight")),
        ];
        let w = cluster_word_weights(2, &docs);
        let top = representative_score(&content_words("masks vaccine lockdown"), &w[0]);
        let none = representative_score(&content_words("random words here"), &w[0]);
        assert!(top > none);
        assert_eq!(none, 0.0);
        assert_eq!(representative_score(&[], &w[0]), 0.0);
    }
}
