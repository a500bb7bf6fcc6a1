//! Geolife PLT files: six header lines, then rows of
//! `lat,lon,0,alt,days,date,time`.

use std::path::Path;

use chrono::NaiveDateTime;
use walkdir::WalkDir;

use super::{RawPoint, RawTrajectory};
use crate::error::{Error, Result};

const HEADER_LINES: usize = 6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PltParse {
    pub points: Vec<RawPoint>,
    /// Data rows that could not be parsed.
    pub skipped: usize,
}

fn parse_row(line: &str) -> Option<RawPoint> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return None;
    }
    let lat: f64 = fields[0].parse().ok()?;
    let lon: f64 = fields[1].parse().ok()?;
    if !lat.is_finite() || !lon.is_finite() {
        return None;
    }
    let stamp = NaiveDateTime::parse_from_str(&format!("{} {}", fields[5], fields[6]), "%Y-%m-%d %H:%M:%S").ok()?;
    Some(RawPoint {
        lat,
        lon,
        t: stamp.and_utc().timestamp(),
    })
}

/// Parses one PLT file. Dates are read as UTC. Blank lines are ignored;
/// any other row that fails to parse is counted in `skipped`.
pub fn parse_plt(bytes: &[u8]) -> Result<PltParse> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(format!("PLT is not UTF-8: {e}")))?;
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    if !first.trim_start_matches('\u{feff}').starts_with("Geolife trajectory") {
        return Err(Error::Parse("missing Geolife PLT header".into()));
    }
    for i in 1..HEADER_LINES {
        if lines.next().is_none() {
            return Err(Error::Parse(format!("PLT header truncated after {i} lines")));
        }
    }
    let mut out = PltParse::default();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        match parse_row(line) {
            Some(p) => out.points.push(p),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Parses every `*.plt` file under `dir` (recursively), in sorted path
/// order. Ids are the path relative to `dir` without extension, with `/`
/// separators. Returns the trajectories and the total skipped-row count.
pub fn read_plt_dir(dir: &Path) -> Result<(Vec<RawTrajectory>, usize)> {
    let mut out = Vec::new();
    let mut skipped = 0;
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            Error::io(path, e.into())
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("plt")) {
            continue;
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let parsed = parse_plt(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        skipped += parsed.skipped;
        let rel = path.strip_prefix(dir).unwrap_or(path).with_extension("");
        let id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        out.push(RawTrajectory {
            id,
            points: parsed.points,
        });
    }
    Ok((out, skipped))
}
