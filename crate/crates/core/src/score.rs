//! Score records: the common output of every scorer and the input of
//! selection.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MooreLewis,
    Importance,
    Embedding,
    Random,
    External,
    /// Full augmentation: every source instance, no scoring.
    Full,
}

impl Method {
    pub const SCORERS: [Method; 4] = [
        Method::MooreLewis,
        Method::Importance,
        Method::Embedding,
        Method::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MooreLewis => "moore_lewis",
            Method::Importance => "importance",
            Method::Embedding => "embedding",
            Method::Random => "random",
            Method::External => "external",
            Method::Full => "full",
        }
    }

    /// Moore–Lewis ranks ascending (smaller difference is more target-like);
    /// every other method ranks descending.
    pub fn orientation(self) -> Orientation {
        match self {
            Method::MooreLewis => Orientation::Asc,
            _ => Orientation::Desc,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts both `moore_lewis` and `moore-lewis` spellings.
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "moore_lewis" => Ok(Method::MooreLewis),
            "importance" => Ok(Method::Importance),
            "embedding" => Ok(Method::Embedding),
            "random" => Ok(Method::Random),
            "external" => Ok(Method::External),
            "full" => Ok(Method::Full),
            _ => Err(Error::param(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Asc,
    Desc,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asc" => Ok(Orientation::Asc),
            "desc" => Ok(Orientation::Desc),
            _ => Err(Error::param(format!("unknown orientation {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub uid: String,
    pub method: Method,
    pub score: f64,
    /// 1-based position after ranking; 0 until [`rank_records`] runs.
    pub rank: usize,
}

/// Assigns ranks 1..=N in place. Ties are broken by uid, so the ranking is
/// independent of input order. NaN scores sort last in either orientation.
pub fn rank_records(records: &mut [ScoreRecord], orientation: Orientation) {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        let by_score = match (ra.score.is_nan(), rb.score.is_nan()) {
            (true, true) => std::cmp::Ordering::Equal,
            (true, false) => std::cmp::Ordering::Greater,
            (false, true) => std::cmp::Ordering::Less,
            (false, false) => match orientation {
                Orientation::Asc => ra.score.total_cmp(&rb.score),
                Orientation::Desc => rb.score.total_cmp(&ra.score),
            },
        };
        by_score.then_with(|| ra.uid.cmp(&rb.uid))
    });
    for (pos, idx) in order.into_iter().enumerate() {
        records[idx].rank = pos + 1;
    }
}

/// Builds ranked records, kept in input order.
pub fn ranked(
    uids_scores: impl IntoIterator<Item = (String, f64)>,
    method: Method,
    orientation: Orientation,
) -> Vec<ScoreRecord> {
    let mut records: Vec<ScoreRecord> = uids_scores
        .into_iter()
        .map(|(uid, score)| ScoreRecord {
            uid,
            method,
            score,
            rank: 0,
        })
        .collect();
    rank_records(&mut records, orientation);
    records
}

/// Checks that ranks form a permutation of 1..=N and uids are distinct.
pub fn check_ranking(records: &[ScoreRecord]) -> Result<()> {
    let n = records.len();
    let mut seen = vec![false; n];
    let mut uids = HashMap::with_capacity(n);
    for r in records {
        if r.rank == 0 || r.rank > n || std::mem::replace(&mut seen[r.rank - 1], true) {
            return Err(Error::param(format!(
                "ranks are not a permutation of 1..={n} (uid {:?}, rank {})",
                r.uid, r.rank
            )));
        }
        if uids.insert(r.uid.as_str(), ()).is_some() {
            return Err(Error::param(format!(
                "duplicate uid {:?} in score records",
                r.uid
            )));
        }
    }
    Ok(())
}

/// Records sorted by rank.
pub fn by_rank(records: &[ScoreRecord]) -> Vec<&ScoreRecord> {
    let mut out: Vec<&ScoreRecord> = records.iter().collect();
    out.sort_by_key(|r| r.rank);
    out
}

pub fn write_records<W: Write>(records: &[ScoreRecord], mut writer: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_records(records: &[ScoreRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_records(records, BufWriter::new(file))
}

pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(i + 1, format!("invalid score record: {e}")))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_records(BufReader::new(file))
}
