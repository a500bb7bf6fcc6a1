//! Porto taxi CSV: one trip per row, positions in a `POLYLINE` JSON array
//! of `[lon, lat]` pairs sampled every 15 seconds from `TIMESTAMP`.

use std::io::Read;

use super::{RawPoint, RawTrajectory};
use crate::error::{Error, Result};

pub const PORTO_INTERVAL_S: i64 = 15;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PortoParse {
    pub trajectories: Vec<RawTrajectory>,
    /// Rows flagged `MISSING_DATA`.
    pub dropped_missing: usize,
    /// Rows with an unreadable timestamp, flag or polyline.
    pub skipped_malformed: usize,
}

/// Converts one row's fields into a trajectory. `Ok(None)` for rows flagged
/// as missing data.
pub fn parse_porto_record(
    trip_id: &str,
    timestamp: &str,
    missing: &str,
    polyline: &str,
) -> Result<Option<RawTrajectory>> {
    let missing = match missing.trim().to_ascii_lowercase().as_str() {
        "true" => true,
        "false" => false,
        other => {
            return Err(Error::Parse(format!(
                "trip {trip_id}: bad MISSING_DATA value {other:?}"
            )))
        }
    };
    if missing {
        return Ok(None);
    }
    let start: i64 = timestamp
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("trip {trip_id}: bad TIMESTAMP {timestamp:?}")))?;
    let pairs: Vec<[f64; 2]> =
        serde_json::from_str(polyline).map_err(|e| Error::Parse(format!("trip {trip_id}: bad POLYLINE: {e}")))?;
    let points = pairs
        .into_iter()
        .enumerate()
        .map(|(i, [lon, lat])| RawPoint {
            lat,
            lon,
            t: start + PORTO_INTERVAL_S * i as i64,
        })
        .collect();
    Ok(Some(RawTrajectory {
        id: trip_id.trim().to_string(),
        points,
    }))
}

/// Parses a whole Porto CSV with a header row. Only `TRIP_ID`, `TIMESTAMP`,
/// `MISSING_DATA` and `POLYLINE` are read.
pub fn parse_porto(reader: impl Read) -> Result<PortoParse> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("Porto CSV lacks a {name} column")))
    };
    let (id_col, ts_col, miss_col, poly_col) = (
        column("TRIP_ID")?,
        column("TIMESTAMP")?,
        column("MISSING_DATA")?,
        column("POLYLINE")?,
    );
    let mut out = PortoParse::default();
    for record in rdr.records() {
        let Ok(record) = record else {
            out.skipped_malformed += 1;
            continue;
        };
        let field = |i: usize| record.get(i);
        let (Some(id), Some(ts), Some(miss), Some(poly)) =
            (field(id_col), field(ts_col), field(miss_col), field(poly_col))
        else {
            out.skipped_malformed += 1;
            continue;
        };
        match parse_porto_record(id, ts, miss, poly) {
            Ok(Some(t)) => out.trajectories.push(t),
            Ok(None) => out.dropped_missing += 1,
            Err(_) => out.skipped_malformed += 1,
        }
    }
    Ok(out)
}
