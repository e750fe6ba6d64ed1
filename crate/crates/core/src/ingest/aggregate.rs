use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::events::{EventRecord, QuadClass};
use crate::design::RelationalSeries;
use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// A calendar month (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInput(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        YearMonth {
            year: date.year(),
            month: date.month(),
        }
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    /// Number of months from `self` to `other`, inclusive of both ends.
    pub fn months_through(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal() + 1
    }

    pub fn plus(self, months: i64) -> YearMonth {
        let o = self.ordinal() + months;
        YearMonth {
            year: o.div_euclid(12) as i32,
            month: (o.rem_euclid(12) + 1) as u32,
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationConfig {
    /// Ordered actor codes; their order fixes the tensor's first two modes.
    pub actors: Vec<String>,
    pub variables: Vec<QuadClass>,
    /// First month, `YYYY-MM`.
    pub start: YearMonth,
    /// Last month, inclusive.
    pub end: YearMonth,
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.actors.len() < 3 {
            return Err(Error::Config(format!("need at least 3 actors, got {}", self.actors.len())));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.actors.iter().find(|a| !seen.insert(*a)) {
            return Err(Error::Config(format!("duplicate actor {dup:?}")));
        }
        if self.variables.is_empty() {
            return Err(Error::Config("variable subset is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.variables.iter().find(|v| !seen.insert(**v)) {
            return Err(Error::Config(format!("duplicate variable {dup}")));
        }
        if self.num_periods() < 2 {
            return Err(Error::Config(format!(
                "date range {}..{} must span at least 2 months",
                self.start, self.end
            )));
        }
        Ok(())
    }

    pub fn num_periods(&self) -> usize {
        self.start.months_through(self.end).max(0) as usize
    }
}

/// Records that did not make it into the tensor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DropTally {
    pub unknown_actor: u64,
    pub out_of_range: u64,
    pub unselected_variable: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub series: RelationalSeries,
    pub dropped: DropTally,
}

/// Sums event counts per (source, target, variable, month); months without events are zero.
pub fn aggregate(records: &[EventRecord], config: &AggregationConfig) -> Result<Aggregation> {
    config.validate()?;
    let m = config.actors.len();
    let v = config.variables.len();
    let n = config.num_periods();
    let actor_idx: HashMap<&str, usize> = config.actors.iter().enumerate().map(|(k, a)| (a.as_str(), k)).collect();
    let var_idx: HashMap<QuadClass, usize> = config.variables.iter().enumerate().map(|(k, q)| (*q, k)).collect();

    if !records.is_empty()
        && !records
            .iter()
            .any(|r| actor_idx.contains_key(r.source.as_str()) || actor_idx.contains_key(r.target.as_str()))
    {
        return Err(Error::InvalidInput(
            "none of the configured actors appear in the event records".into(),
        ));
    }

    let mut counts = vec![0u64; m * m * v * n];
    let mut dropped = DropTally::default();
    for r in records {
        let (Some(&i), Some(&j)) = (actor_idx.get(r.source.as_str()), actor_idx.get(r.target.as_str())) else {
            dropped.unknown_actor += 1;
            continue;
        };
        let t = config.start.months_through(YearMonth::of(r.date)) - 1;
        if t < 0 || t as usize >= n {
            dropped.out_of_range += 1;
            continue;
        }
        let Some(&w) = var_idx.get(&r.quad) else {
            dropped.unselected_variable += 1;
            continue;
        };
        if i == j {
            continue;
        }
        counts[i + m * (j + m * (w + v * t as usize))] += r.count;
    }
    let data = Tensor4::from_vec([m, m, v, n], counts.into_iter().map(|c| c as f64).collect())?;
    let series = RelationalSeries::new(
        config.actors.clone(),
        config.variables.iter().map(|q| q.as_str().to_string()).collect(),
        (0..n as i64).map(|k| config.start.plus(k).to_string()).collect(),
        data,
    )?;
    Ok(Aggregation { series, dropped })
}
