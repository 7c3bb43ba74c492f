//! Time-series ingestion for the discrete-domain experiment.

use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

const HOUR: i64 = 3600;

enum Stamp {
    Index(i64),
    Time(i64),
}

fn parse_stamp(s: &str) -> Option<Stamp> {
    if let Ok(i) = s.parse::<i64>() {
        return Some(Stamp::Index(i));
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(Stamp::Time(t.timestamp()));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Stamp::Time(t.and_utc().timestamp()));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| Stamp::Time(t.and_utc().timestamp()))
}

/// Reads `(timestamp or index, value)` rows. Timestamped series sampled more
/// often than hourly are reduced to the first reading of each hour.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut indexed: Vec<(i64, f64)> = Vec::new();
    let mut timed: Vec<(i64, f64)> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 columns, found {}", rec.len())));
        }
        let value = rec[1].parse::<f64>();
        let stamp = parse_stamp(&rec[0]);
        if row == 0 && indexed.is_empty() && timed.is_empty() && value.is_err() && stamp.is_none() {
            continue; // header
        }
        let value = value
            .map_err(|_| parse_err(line, format!("invalid value `{}`", &rec[1])))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("non-finite value `{}`", &rec[1])));
        }
        match stamp {
            Some(Stamp::Index(i)) if timed.is_empty() => indexed.push((i, value)),
            Some(Stamp::Time(t)) if indexed.is_empty() => timed.push((t, value)),
            Some(_) => {
                return Err(parse_err(line, "mixed index and timestamp rows".into()));
            }
            None => return Err(parse_err(line, format!("invalid timestamp `{}`", &rec[0]))),
        }
    }
    if indexed.is_empty() && timed.is_empty() {
        return Err(Error::EmptySeries(path.to_path_buf()));
    }
    if !indexed.is_empty() {
        indexed.sort_by_key(|&(i, _)| i);
        return Ok(indexed.into_iter().map(|(_, v)| v).collect());
    }
    timed.sort_by_key(|&(t, _)| t);
    if !denser_than_hourly(&timed) {
        return Ok(timed.into_iter().map(|(_, v)| v).collect());
    }
    let mut out = Vec::new();
    let mut bucket = None;
    for (t, v) in timed {
        let b = t.div_euclid(HOUR);
        if bucket != Some(b) {
            bucket = Some(b);
            out.push(v);
        }
    }
    Ok(out)
}

fn denser_than_hourly(rows: &[(i64, f64)]) -> bool {
    let mut gaps: Vec<i64> = rows.windows(2).map(|w| w[1].0 - w[0].0).collect();
    if gaps.is_empty() {
        return false;
    }
    let mid = gaps.len() / 2;
    let (_, median, _) = gaps.select_nth_unstable(mid);
    *median < HOUR
}
