//! Emerging hashtags ranked by least-squares slope of daily counts, and
//! per-country activity series.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoIndex;
use crate::ingest::CorpusStore;
use crate::time::{Day, DayRange};
use crate::tweet::Tweet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrendError {
    #[error("trend window must span at least 2 days, got {0}")]
    WindowTooShort(usize),
}

/// Least-squares fit of `ys` against 0..n. Returns (slope, intercept);
/// fewer than two points give a zero slope.
pub fn ols_slope(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return (0.0, ys.first().copied().unwrap_or(0.0));
    }
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let x = i as f64;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub key: String,
    pub start: Day,
    pub counts: Vec<u64>,
    pub total: u64,
    pub slope: f64,
    pub intercept: f64,
    /// Daily share of all tweets, present when ranking per capita.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendScale {
    Counts,
    PerCapita,
}

fn daily_hashtag_counts<'a>(
    tweets: &[&'a Tweet],
    window: DayRange,
) -> (HashMap<&'a str, Vec<u64>>, Vec<u64>) {
    let len = window.len();
    tweets
        .par_chunks(8192)
        .map(|chunk| {
            let mut tags: HashMap<&str, Vec<u64>> = HashMap::new();
            let mut totals = vec![0u64; len];
            for t in chunk {
                let Some(i) = t.day().and_then(|d| window.index(d)) else {
                    continue;
                };
                totals[i] += 1;
                let mut seen: Vec<&str> = t.hashtags.iter().map(String::as_str).collect();
                seen.sort_unstable();
                seen.dedup();
                for h in seen {
                    tags.entry(h).or_insert_with(|| vec![0; len])[i] += 1;
                }
            }
            (tags, totals)
        })
        .reduce(
            || (HashMap::new(), vec![0; len]),
            |(mut a, mut at), (b, bt)| {
                for (k, v) in b {
                    let slot = a.entry(k).or_insert_with(|| vec![0; len]);
                    slot.iter_mut().zip(v).for_each(|(x, y)| *x += y);
                }
                at.iter_mut().zip(bt).for_each(|(x, y)| *x += y);
                (a, at)
            },
        )
}

fn rank_series(
    tweets: &[&Tweet],
    window: DayRange,
    top: usize,
    scale: TrendScale,
) -> Result<Vec<TrendSeries>, TrendError> {
    if window.len() < 2 {
        return Err(TrendError::WindowTooShort(window.len()));
    }
    let (tags, totals) = daily_hashtag_counts(tweets, window);
    let mut series: Vec<TrendSeries> = tags
        .into_par_iter()
        .map(|(key, counts)| {
            let rates = (scale == TrendScale::PerCapita).then(|| {
                counts
                    .iter()
                    .zip(&totals)
                    .map(|(&c, &t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
                    .collect::<Vec<f64>>()
            });
            let ys: Vec<f64> = match &rates {
                Some(r) => r.clone(),
                None => counts.iter().map(|&c| c as f64).collect(),
            };
            let (slope, intercept) = ols_slope(&ys);
            TrendSeries {
                key: key.to_string(),
                start: window.start,
                total: counts.iter().sum(),
                counts,
                slope,
                intercept,
                rates,
            }
        })
        .collect();
    series.sort_by(|a, b| {
        b.slope
            .total_cmp(&a.slope)
            .then(b.total.cmp(&a.total))
            .then_with(|| a.key.cmp(&b.key))
    });
    series.truncate(top);
    Ok(series)
}

/// Top hashtags by slope of zero-filled daily counts over `window`, using all
/// collected tweets. Ties break by higher total, then key.
pub fn hashtag_trend_slopes(
    store: &CorpusStore,
    window: DayRange,
    top: usize,
    scale: TrendScale,
) -> Result<Vec<TrendSeries>, TrendError> {
    let tweets: Vec<&Tweet> = store.collected().collect();
    rank_series(&tweets, window, top, scale)
}

/// Last `last_days` days ending at the latest collected tweet date.
pub fn trailing_window(store: &CorpusStore, last_days: usize) -> Option<DayRange> {
    let end = store.collected().filter_map(Tweet::day).max()?;
    Some(DayRange::new(end.offset(1 - last_days as i32), end))
}

/// Per-country top hashtags over the trailing window, restricted to tweets
/// resolved to that country. Countries without hashtags in the window are
/// omitted.
pub fn emerging_by_country(
    store: &CorpusStore,
    geo: &GeoIndex,
    last_days: usize,
    top: usize,
) -> Result<BTreeMap<String, Vec<TrendSeries>>, TrendError> {
    if last_days < 2 {
        return Err(TrendError::WindowTooShort(last_days));
    }
    let Some(window) = trailing_window(store, last_days) else {
        return Ok(BTreeMap::new());
    };
    let mut by_country: BTreeMap<&str, Vec<&Tweet>> = BTreeMap::new();
    for t in store.collected() {
        if let Some(c) = geo.country(t.id) {
            by_country.entry(c).or_default().push(t);
        }
    }
    let mut out = BTreeMap::new();
    for (country, tweets) in by_country {
        let ranked = rank_series(&tweets, window, top, TrendScale::Counts)?;
        if !ranked.is_empty() {
            out.insert(country.to_string(), ranked);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryActivity {
    pub start: Day,
    pub daily_counts: Vec<u64>,
    /// Day-over-day differences; one shorter than `daily_counts`.
    pub daily_increments: Vec<i64>,
    pub peak_day: Day,
}

pub fn activity_from_counts(start: Day, counts: Vec<u64>) -> CountryActivity {
    let increments = counts
        .windows(2)
        .map(|w| w[1] as i64 - w[0] as i64)
        .collect();
    let mut peak = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[peak] {
            peak = i;
        }
    }
    CountryActivity {
        start,
        daily_counts: counts,
        daily_increments: increments,
        peak_day: start.offset(peak as i32),
    }
}

/// Daily tweet counts per resolved country over that country's own active
/// range, with increments and earliest peak.
pub fn geo_activity_stats(
    store: &CorpusStore,
    geo: &GeoIndex,
) -> BTreeMap<String, CountryActivity> {
    let mut days: BTreeMap<&str, BTreeMap<Day, u64>> = BTreeMap::new();
    for t in store.collected() {
        if let (Some(c), Some(d)) = (geo.country(t.id), t.day()) {
            *days.entry(c).or_default().entry(d).or_default() += 1;
        }
    }
    days.into_iter()
        .filter_map(|(country, per_day)| {
            let range = DayRange::spanning(per_day.keys().copied())?;
            let counts = range
                .days()
                .map(|d| per_day.get(&d).copied().unwrap_or(0))
                .collect();
            Some((
                country.to_string(),
                activity_from_counts(range.start, counts),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoMethod, GeoResolution};
    use crate::tweet::UserRef;

    fn slope(ys: &[f64]) -> f64 {
        ols_slope(ys).0
    }

    #[test]
    fn ols_examples() {
        assert_eq!(slope(&[2.0, 2.0, 2.0]), 0.0);
        assert!((slope(&[1.0, 2.0, 3.0, 4.0]) - 1.0).abs() < 1e-12);
        assert!((slope(&[0.0, 1.0, 0.0, 5.0]) - 1.4).abs() < 1e-12);
        let (s, b) = ols_slope(&[1.0, 3.0]);
        assert_eq!((s, b), (2.0, 1.0));
    }

    fn tweet(id: u64, day: i32, tags: &[&str]) -> Tweet {
        Tweet {
            id,
            created_at: Some(Day(day).start_seconds() + 60),
            text: String::new(),
            lang: "en".into(),
            user: UserRef::default(),
            parent: None,
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            urls: vec![],
            coordinates: None,
            place_country: None,
            place_name: None,
            synthetic: false,
        }
    }

    #[test]
    fn window_too_short() {
        let store = CorpusStore::from_tweets(vec![]).unwrap();
        let w = DayRange::new(Day(0), Day(0));
        assert_eq!(
            hashtag_trend_slopes(&store, w, 30, TrendScale::Counts),
            Err(TrendError::WindowTooShort(1))
        );
    }

    #[test]
    fn spike_beats_flat_of_equal_total() {
        let mut ts = Vec::new();
        let mut id = 0;
        for d in 0..4 {
            id += 1;
            ts.push(tweet(id, d, &["flat"]));
        }
        for _ in 0..4 {
            id += 1;
            ts.push(tweet(id, 3, &["spike"]));
        }
        // duplicate tags in one tweet count once
        id += 1;
        ts.push(tweet(id, 0, &["dup", "dup"]));
        let store = CorpusStore::from_tweets(ts).unwrap();
        let w = DayRange::new(Day(0), Day(3));
        let r = hashtag_trend_slopes(&store, w, 30, TrendScale::Counts).unwrap();
        assert_eq!(r[0].key, "spike");
        assert_eq!(r[1].key, "flat");
        assert_eq!(r[1].counts, vec![1, 1, 1, 1]);
        assert_eq!(r[2].counts, vec![1, 0, 0, 0]);
        let pc = hashtag_trend_slopes(&store, w, 1, TrendScale::PerCapita).unwrap();
        assert_eq!(pc[0].key, "spike");
        assert_eq!(pc[0].rates.as_ref().unwrap()[3], 0.8);
    }

    #[test]
    fn ties_break_by_total_then_key() {
        let store = CorpusStore::from_tweets(vec![
            tweet(1, 0, &["e", "b", "a"]),
            tweet(2, 1, &["b", "e", "a", "c"]),
            tweet(3, 1, &["c"]),
            tweet(4, 0, &["a"]),
            tweet(5, 1, &["a"]),
        ])
        .unwrap();
        let r = hashtag_trend_slopes(
            &store,
            DayRange::new(Day(0), Day(1)),
            30,
            TrendScale::Counts,
        )
        .unwrap();
        let keys: Vec<&str> = r.iter().map(|s| s.key.as_str()).collect();
        assert_eq!(keys, ["c", "a", "b", "e"]);
    }

    fn at(country: &str) -> GeoResolution {
        GeoResolution {
            country: Some(country.into()),
            us_state: None,
            method: GeoMethod::Profile,
            lat: None,
            lon: None,
        }
    }

    #[test]
    fn country_trends() {
        let mut ts = Vec::new();
        let mut geo = Vec::new();
        let mut id = 0;
        for d in 0..10 {
            for _ in 0..d {
                id += 1;
                ts.push(tweet(id, d, &["rising"]));
                geo.push((id, at("GB")));
            }
            id += 1;
            ts.push(tweet(id, d, &["steady"]));
            geo.push((id, at("US")));
        }
        id += 1;
        ts.push(tweet(id, 9, &["once"]));
        geo.push((id, at("IN")));
        let store = CorpusStore::from_tweets(ts).unwrap();
        let geo = GeoIndex::from_pairs(geo);
        let r = emerging_by_country(&store, &geo, 10, 10).unwrap();
        assert_eq!(r["GB"][0].key, "rising");
        assert!(r["US"].iter().all(|s| s.key != "rising"));
        assert_eq!(r["IN"][0].counts.len(), 10);
        assert_eq!(r["IN"][0].counts[9], 1);
    }

    #[test]
    fn activity_examples() {
        let a = activity_from_counts(Day(0), vec![3, 5, 4]);
        assert_eq!(a.daily_increments, vec![2, -1]);
        assert_eq!(a.peak_day, Day(1));
        let a = activity_from_counts(Day(5), vec![7]);
        assert!(a.daily_increments.is_empty());
        assert_eq!(a.peak_day, Day(5));
        assert_eq!(activity_from_counts(Day(0), vec![4, 4]).peak_day, Day(0));
    }

    #[test]
    fn activity_per_country_range() {
        let store =
            CorpusStore::from_tweets(vec![tweet(1, 2, &[]), tweet(2, 4, &[]), tweet(3, 4, &[])])
                .unwrap();
        let geo = GeoIndex::from_pairs(vec![(1, at("US")), (2, at("US")), (3, at("US"))]);
        let a = &geo_activity_stats(&store, &geo)["US"];
        assert_eq!(a.start, Day(2));
        assert_eq!(a.daily_counts, vec![1, 0, 2]);
        assert_eq!(a.peak_day, Day(4));
    }
}
