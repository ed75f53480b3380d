//! UTC calendar days.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SECONDS_PER_DAY: i64 = 86_400;

/// A UTC calendar day, stored as days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(pub i32);

impl Day {
    pub fn from_epoch_seconds(secs: i64) -> Day {
        Day(secs.div_euclid(SECONDS_PER_DAY) as i32)
    }

    pub fn from_ymd(y: i32, m: u32, d: u32) -> Option<Day> {
        NaiveDate::from_ymd_opt(y, m, d).map(Day::from_date)
    }

    fn from_date(date: NaiveDate) -> Day {
        Day(date.num_days_from_ce() - epoch().num_days_from_ce())
    }

    pub fn date(self) -> NaiveDate {
        epoch() + chrono::Duration::days(self.0 as i64)
    }

    pub fn start_seconds(self) -> i64 {
        self.0 as i64 * SECONDS_PER_DAY
    }

    pub fn succ(self) -> Day {
        Day(self.0 + 1)
    }

    pub fn offset(self, days: i32) -> Day {
        Day(self.0 + days)
    }
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.date().format("%Y-%m-%d"))
    }
}

impl FromStr for Day {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map(Day::from_date)
    }
}

impl Serialize for Day {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Day {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive range of days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub start: Day,
    pub end: Day,
}

impl DayRange {
    pub fn new(start: Day, end: Day) -> DayRange {
        DayRange { start, end }
    }

    /// Number of days covered; zero when `end < start`.
    pub fn len(&self) -> usize {
        (self.end.0 - self.start.0 + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, day: Day) -> bool {
        day >= self.start && day <= self.end
    }

    /// Position of `day` in the range.
    pub fn index(&self, day: Day) -> Option<usize> {
        self.contains(day).then(|| (day.0 - self.start.0) as usize)
    }

    pub fn days(&self) -> impl Iterator<Item = Day> {
        (self.start.0..=self.end.0).map(Day)
    }

    /// Smallest range covering every day in `days`.
    pub fn spanning(days: impl IntoIterator<Item = Day>) -> Option<DayRange> {
        let mut it = days.into_iter();
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d)));
        Some(DayRange::new(lo, hi))
    }
}
