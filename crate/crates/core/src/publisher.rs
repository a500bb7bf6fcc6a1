//! Confidence-bounded region publishing.
//!
//! Each true cell is released as a rectangle of at least `ceil(1/lambda)`
//! cells, grown around the cell by random symmetric expansion and then
//! optionally shifted `d` cells off-center.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpace, PublishedTrajectory, Region, TimedRegion, TrajectoryTrue};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishConfig {
    /// Upper bound on the attacker's per-step confidence, in (0, 1].
    pub lambda: f64,
    /// Cells to shift each region away from its true cell.
    pub deviation: usize,
    pub seed: u64,
}

impl Default for PublishConfig {
    fn default() -> Self {
        PublishConfig {
            lambda: 0.1,
            deviation: 2,
            seed: 0,
        }
    }
}

impl PublishConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("lambda must lie in (0, 1], got {lambda}")))
    }
}

/// Smallest region area whose confidence `1/area` does not exceed `lambda`.
pub fn min_region_size(lambda: f64) -> usize {
    let inv = 1.0 / lambda;
    let rounded = inv.round();
    // 1/lambda for decimal lambdas can land a few ulps off an integer
    if (inv - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as usize
    } else {
        inv.ceil() as usize
    }
}

/// Worst-case distance, in meters, between a true cell and any cell of a
/// region of minimum area `ell` shifted by `d`.
pub fn theoretical_max_error(ell: usize, d: usize, g: f64) -> f64 {
    // ceil((ell + 1) / 2) in integers
    ((ell + 2) / 2 + d) as f64 * g
}

/// Expansion axis. `Rows` grows north-south (latitude), `Cols` east-west.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Rows => Axis::Cols,
            Axis::Cols => Axis::Rows,
        }
    }
}

/// Grows `region` by one cell on both sides along `axis`, skipping a side
/// that would leave the grid. `None` when neither side can grow.
pub fn grow(region: Region, axis: Axis, gs: &GridSpace) -> Option<Region> {
    let mut r = region;
    let (low, high) = match axis {
        Axis::Rows => (r.row0 > 0, r.row_end() < gs.n_rows()),
        Axis::Cols => (r.col0 > 0, r.col_end() < gs.n_cols()),
    };
    if !low && !high {
        return None;
    }
    let grown = usize::from(low) + usize::from(high);
    match axis {
        Axis::Rows => {
            r.row0 -= usize::from(low);
            r.height += grown;
        }
        Axis::Cols => {
            r.col0 -= usize::from(low);
            r.width += grown;
        }
    }
    Some(r)
}

fn check_target(tl: Cell, ell: usize, gs: &GridSpace) -> Result<()> {
    if !gs.is_valid(tl) {
        return Err(Error::InvalidGrid(format!("cell {tl:?} is outside the grid")));
    }
    if ell == 0 {
        return Err(Error::Config("region size must be at least 1".into()));
    }
    if ell > gs.n_cells() {
        return Err(Error::GridTooSmall {
            ell,
            cells: gs.n_cells(),
        });
    }
    Ok(())
}

/// Grows a region around `tl` until its area reaches `ell`, taking the axis
/// of each step from `next_axis`. A saturated axis defers to the other one.
pub fn expand_region_with(tl: Cell, ell: usize, gs: &GridSpace, mut next_axis: impl FnMut() -> Axis) -> Result<Region> {
    check_target(tl, ell, gs)?;
    let mut region = Region::singleton(tl);
    while region.area() < ell {
        let axis = next_axis();
        region = grow(region, axis, gs)
            .or_else(|| grow(region, axis.other(), gs))
            .expect("area below grid size leaves an axis to grow");
    }
    Ok(region)
}

/// Random symmetric expansion: each step picks latitude or longitude with
/// equal probability.
pub fn expand_region<R: Rng + ?Sized>(tl: Cell, ell: usize, gs: &GridSpace, rng: &mut R) -> Result<Region> {
    expand_region_with(tl, ell, gs, || if rng.gen_bool(0.5) { Axis::Rows } else { Axis::Cols })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];
}

/// Translates `region` by `d` cells, pulling it back inside the grid if
/// the move would overhang an edge.
pub fn shift(region: Region, dir: Direction, d: usize, gs: &GridSpace) -> Region {
    let mut r = region;
    match dir {
        Direction::North => r.row0 = r.row0.saturating_sub(d),
        Direction::South => r.row0 = (r.row0 + d).min(gs.n_rows().saturating_sub(r.height)),
        Direction::West => r.col0 = r.col0.saturating_sub(d),
        Direction::East => r.col0 = (r.col0 + d).min(gs.n_cols().saturating_sub(r.width)),
    }
    r
}

/// Shifts `region` by `d` in a direction chosen by `pick` (an index into the
/// directions still untried). A direction that would evict `tl` is dropped
/// and another drawn; when all four evict, the shift distance drops by one.
pub fn apply_deviation_with(
    region: Region,
    tl: Cell,
    d: usize,
    gs: &GridSpace,
    mut pick: impl FnMut(&[Direction]) -> usize,
) -> Region {
    debug_assert!(region.contains(tl));
    for dist in (1..=d).rev() {
        let mut remaining = Direction::ALL.to_vec();
        while !remaining.is_empty() {
            let dir = remaining.remove(pick(&remaining));
            let moved = shift(region, dir, dist, gs);
            if moved.contains(tl) {
                return moved;
            }
        }
    }
    region
}

pub fn apply_deviation<R: Rng + ?Sized>(region: Region, tl: Cell, d: usize, gs: &GridSpace, rng: &mut R) -> Region {
    apply_deviation_with(region, tl, d, gs, |dirs| rng.gen_range(0..dirs.len()))
}

/// Publishes one trajectory. The random stream is keyed by the trajectory
/// id, so output does not depend on corpus order.
pub fn publish_trajectory(traj: &TrajectoryTrue, cfg: &PublishConfig, gs: &GridSpace) -> Result<PublishedTrajectory> {
    cfg.validate()?;
    let ell = min_region_size(cfg.lambda);
    let mut rng = stream_rng(cfg.seed, traj.id());
    let regions = traj
        .points()
        .iter()
        .map(|p| {
            let region = expand_region(p.cell, ell, gs, &mut rng)?;
            let region = apply_deviation(region, p.cell, cfg.deviation, gs, &mut rng);
            Ok(TimedRegion { t: p.t, region })
        })
        .collect::<Result<Vec<_>>>()?;
    PublishedTrajectory::new(traj.id(), regions)
}

pub fn publish_corpus(
    trajs: &[TrajectoryTrue],
    cfg: &PublishConfig,
    gs: &GridSpace,
) -> Result<Vec<PublishedTrajectory>> {
    trajs.par_iter().map(|t| publish_trajectory(t, cfg, gs)).collect()
}

/// True when every region keeps the confidence `1/area` at or below `lambda`.
pub fn verify_privacy(published: &PublishedTrajectory, lambda: f64) -> bool {
    published.region_iter().all(|r| 1.0 / r.area() as f64 <= lambda)
}

/// Full release check against the ground truth: pairing, containment and
/// the confidence bound.
pub fn check_release(truth: &TrajectoryTrue, published: &PublishedTrajectory, lambda: f64) -> Result<()> {
    let violation = |step: usize, reason: String| Error::PrivacyViolation {
        id: truth.id().to_string(),
        step,
        reason,
    };
    if truth.id() != published.id() || truth.len() != published.len() {
        return Err(violation(0, "release does not pair with its source".into()));
    }
    for (i, (p, r)) in truth.points().iter().zip(published.regions()).enumerate() {
        if p.t != r.t {
            return Err(violation(i, format!("timestamp {} released as {}", p.t, r.t)));
        }
        if !r.region.contains(p.cell) {
            return Err(violation(i, format!("{:?} does not contain {:?}", r.region, p.cell)));
        }
        if 1.0 / r.region.area() as f64 > lambda {
            return Err(violation(
                i,
                format!("area {} exceeds confidence bound {lambda}", r.region.area()),
            ));
        }
    }
    Ok(())
}
