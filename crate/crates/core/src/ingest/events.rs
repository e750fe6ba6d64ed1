use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four verbal/material × cooperation/conflict event classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadClass {
    VerbalCoop,
    MaterialCoop,
    VerbalConf,
    MaterialConf,
}

impl QuadClass {
    pub const ALL: [QuadClass; 4] = [
        QuadClass::VerbalCoop,
        QuadClass::MaterialCoop,
        QuadClass::VerbalConf,
        QuadClass::MaterialConf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuadClass::VerbalCoop => "verbal_coop",
            QuadClass::MaterialCoop => "material_coop",
            QuadClass::VerbalConf => "verbal_conf",
            QuadClass::MaterialConf => "material_conf",
        }
    }
}

impl fmt::Display for QuadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuadClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuadClass::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown quad class {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub date: NaiveDate,
    pub source: String,
    pub target: String,
    pub quad: QuadClass,
    pub count: u64,
}

/// CAMEO root code → quad class lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CameoMapping {
    roots: BTreeMap<String, QuadClass>,
}

impl CameoMapping {
    /// Reads `cameo_root,quad_class` rows.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["cameo_root", "quad_class"] {
            return Err(Error::InvalidInput(format!(
                "mapping header must be cameo_root,quad_class, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut roots = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let root = rec.get(0).unwrap_or_default().to_string();
            let quad: QuadClass = rec
                .get(1)
                .unwrap_or_default()
                .parse()
                .map_err(|e| Error::InvalidInput(format!("mapping line {line}: {e}")))?;
            if roots.insert(root.clone(), quad).is_some() {
                return Err(Error::InvalidInput(format!("mapping line {line}: duplicate root {root:?}")));
            }
        }
        Ok(CameoMapping { roots })
    }

    pub fn insert(&mut self, root: impl Into<String>, quad: QuadClass) {
        self.roots.insert(root.into(), quad);
    }

    /// Exact match first, then the two-digit root of a longer event code.
    pub fn lookup(&self, code: &str) -> Option<QuadClass> {
        self.roots
            .get(code)
            .or_else(|| code.get(..2).and_then(|root| self.roots.get(root)))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub records: Vec<EventRecord>,
    pub errors: Vec<RowError>,
}

const REQUIRED: [&str; 4] = ["date", "source", "target", "quad_class"];

/// Parses `date,source,target,quad_class[,count]` rows. Malformed rows are
/// collected in the report rather than aborting; a bad header is an error.
///
/// With a mapping, a `quad_class` value that is not a quad name is looked up
/// as a CAMEO code.
pub fn parse_events<R: Read>(input: R, mapping: Option<&CameoMapping>) -> Result<ParseReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_count = headers.len() == 5;
    let valid = headers.len() >= 4
        && headers[..4] == REQUIRED
        && (headers.len() == 4 || (has_count && headers[4] == "count"));
    if !valid {
        return Err(Error::InvalidInput(format!(
            "event header must be date,source,target,quad_class[,count], got {headers:?}"
        )));
    }

    let mut report = ParseReport::default();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        match parse_row(&rec, has_count, mapping) {
            Ok(r) => report.records.push(r),
            Err(message) => report.errors.push(RowError { line, message }),
        }
    }
    Ok(report)
}

fn parse_row(rec: &csv::StringRecord, has_count: bool, mapping: Option<&CameoMapping>) -> std::result::Result<EventRecord, String> {
    let expected = if has_count { 5 } else { 4 };
    if rec.len() != expected && !(has_count && rec.len() == 4) {
        return Err(format!("expected {expected} fields, found {}", rec.len()));
    }
    let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
        .map_err(|e| format!("unparseable date {:?}: {e}", &rec[0]))?;
    let (source, target) = (rec[1].to_string(), rec[2].to_string());
    if source.is_empty() || target.is_empty() {
        return Err("empty actor code".into());
    }
    if source == target {
        return Err(format!("source equals target ({source})"));
    }
    let quad = match rec[3].parse::<QuadClass>() {
        Ok(q) => q,
        Err(_) => mapping
            .and_then(|m| m.lookup(&rec[3]))
            .ok_or_else(|| format!("unknown quad class {:?}", &rec[3]))?,
    };
    let count = match rec.get(4) {
        Some(c) if !c.is_empty() => c
            .parse::<u64>()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| format!("count must be a positive integer, got {c:?}"))?,
        _ => 1,
    };
    Ok(EventRecord {
        date,
        source,
        target,
        quad,
        count,
    })
}
