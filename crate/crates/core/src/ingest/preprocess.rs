//! Turns raw GPS fixes into grid trajectories: bounding-box clipping,
//! time subsampling, gap splitting, discretization and length filtering.

use serde::{Deserialize, Serialize};

use super::{RawPoint, RawTrajectory};
use crate::error::{Error, Result};
use crate::grid::{GridSpace, TimedCell, TrajectoryTrue};

/// Gaps longer than this many subsample intervals split a trajectory.
const GAP_FACTOR: i64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub cell_size_m: f64,
    pub subsample_s: i64,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for PreprocessConfig {
    /// The Beijing box used for Geolife.
    fn default() -> Self {
        PreprocessConfig {
            lon_min: 116.28,
            lon_max: 116.32,
            lat_min: 39.95,
            lat_max: 40.0,
            cell_size_m: 99.383,
            subsample_s: 18,
            min_len: 5,
            max_len: 30,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subsample_s <= 0 {
            return Err(Error::Config(format!(
                "subsample_s must be positive, got {}",
                self.subsample_s
            )));
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return Err(Error::Config(format!(
                "need 1 <= min_len <= max_len, got {}..{}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpace> {
        GridSpace::from_extent(self.lon_min, self.lon_max, self.lat_min, self.lat_max, self.cell_size_m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub trajectories_in: usize,
    pub points_in: usize,
    pub points_outside_bbox: usize,
    /// In-box points dropped because they fell inside a subsample window.
    pub points_subsampled_out: usize,
    pub segments: usize,
    /// Pieces dropped for being shorter than `min_len`.
    pub pieces_too_short: usize,
    pub trajectories_out: usize,
    pub steps_out: usize,
}

/// Splits one source into subsampled in-box segments of raw points.
fn segments(
    points: &[RawPoint],
    cfg: &PreprocessConfig,
    gs: &GridSpace,
    report: &mut PreprocessReport,
) -> Vec<Vec<RawPoint>> {
    let mut out = Vec::new();
    let mut current: Vec<RawPoint> = Vec::new();
    for &p in points {
        if !gs.contains_point(p.lon, p.lat) {
            report.points_outside_bbox += 1;
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        match current.last() {
            Some(last) if p.t < last.t + cfg.subsample_s => report.points_subsampled_out += 1,
            Some(last) if p.t - last.t > GAP_FACTOR * cfg.subsample_s => {
                out.push(std::mem::replace(&mut current, vec![p]));
            }
            _ => current.push(p),
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Preprocesses raw trajectories in input order.
///
/// A segment ends where a point leaves the grid's bounding box or where the
/// gap between kept points exceeds three subsample intervals. Within a
/// segment the first point of every `subsample_s` window is kept. Segments
/// longer than `max_len` are cut into consecutive `max_len` pieces, and
/// pieces shorter than `min_len` are dropped. A source that yields a single
/// piece keeps its id; otherwise pieces are named `{id}_{k}`.
pub fn preprocess(
    raw: &[RawTrajectory],
    cfg: &PreprocessConfig,
    gs: &GridSpace,
) -> Result<(Vec<TrajectoryTrue>, PreprocessReport)> {
    cfg.validate()?;
    let mut report = PreprocessReport {
        trajectories_in: raw.len(),
        ..Default::default()
    };
    let mut out = Vec::new();
    for src in raw {
        report.points_in += src.points.len();
        let segs = segments(&src.points, cfg, gs, &mut report);
        report.segments += segs.len();
        let mut pieces = Vec::new();
        for seg in segs {
            for chunk in seg.chunks(cfg.max_len) {
                if chunk.len() < cfg.min_len {
                    report.pieces_too_short += 1;
                } else {
                    pieces.push(chunk.to_vec());
                }
            }
        }
        let single = pieces.len() == 1;
        for (k, piece) in pieces.into_iter().enumerate() {
            let points = piece
                .iter()
                .map(|p| {
                    Ok(TimedCell {
                        t: p.t,
                        cell: gs.cell_of(p.lon, p.lat)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let id = if single {
                src.id.clone()
            } else {
                format!("{}_{k}", src.id)
            };
            report.steps_out += points.len();
            out.push(TrajectoryTrue::new(id, points)?);
        }
    }
    report.trajectories_out = out.len();
    Ok((out, report))
}

/// Raw points at the cell centers of a grid trajectory.
pub fn to_raw(traj: &TrajectoryTrue, gs: &GridSpace) -> RawTrajectory {
    let points = traj
        .points()
        .iter()
        .map(|p| {
            let (lon, lat) = gs.center_lonlat(p.cell);
            RawPoint { lat, lon, t: p.t }
        })
        .collect();
    RawTrajectory {
        id: traj.id().to_string(),
        points,
    }
}
