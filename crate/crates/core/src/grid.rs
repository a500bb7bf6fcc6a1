//! Discretized data space: grid, cells, rectangular regions and trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Meters per degree of latitude on a sphere of mean Earth radius.
const METERS_PER_DEGREE: f64 = 6_371_008.8 * std::f64::consts::PI / 180.0;

/// Tolerance used when turning an extent into a whole number of cells.
const CELL_COUNT_EPS: f64 = 1e-9;

/// Bounding box split into square cells of side `cell_size_m` meters.
///
/// Cell angular sizes are derived from the side length at the box's
/// mid-latitude (spherical earth). Row 0 is the northern edge and column 0
/// the western edge. A trailing partial row or column is counted as a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpaceRepr", into = "GridSpaceRepr")]
pub struct GridSpace {
    lon_min: f64,
    lon_max: f64,
    lat_min: f64,
    lat_max: f64,
    cell_size_m: f64,
    n_rows: usize,
    n_cols: usize,
}

#[derive(Serialize, Deserialize)]
struct GridSpaceRepr {
    lon_min: f64,
    lon_max: f64,
    lat_min: f64,
    lat_max: f64,
    cell_size_m: f64,
    n_rows: usize,
    n_cols: usize,
}

impl TryFrom<GridSpaceRepr> for GridSpace {
    type Error = Error;

    fn try_from(r: GridSpaceRepr) -> Result<Self> {
        check_extent(r.lon_min, r.lon_max, r.lat_min, r.lat_max, r.cell_size_m)?;
        if r.n_rows == 0 || r.n_cols == 0 {
            return Err(Error::InvalidGrid("n_rows and n_cols must be at least 1".into()));
        }
        Ok(GridSpace {
            lon_min: r.lon_min,
            lon_max: r.lon_max,
            lat_min: r.lat_min,
            lat_max: r.lat_max,
            cell_size_m: r.cell_size_m,
            n_rows: r.n_rows,
            n_cols: r.n_cols,
        })
    }
}

impl From<GridSpace> for GridSpaceRepr {
    fn from(g: GridSpace) -> Self {
        GridSpaceRepr {
            lon_min: g.lon_min,
            lon_max: g.lon_max,
            lat_min: g.lat_min,
            lat_max: g.lat_max,
            cell_size_m: g.cell_size_m,
            n_rows: g.n_rows,
            n_cols: g.n_cols,
        }
    }
}

fn check_extent(lon_min: f64, lon_max: f64, lat_min: f64, lat_max: f64, g: f64) -> Result<()> {
    let finite = [lon_min, lon_max, lat_min, lat_max, g].iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidGrid("non-finite extent or cell size".into()));
    }
    if lon_min >= lon_max || lat_min >= lat_max {
        return Err(Error::InvalidGrid(format!(
            "empty extent lon [{lon_min}, {lon_max}] lat [{lat_min}, {lat_max}]"
        )));
    }
    if !(-90.0..=90.0).contains(&lat_min) || !(-90.0..=90.0).contains(&lat_max) {
        return Err(Error::InvalidGrid("latitude outside [-90, 90]".into()));
    }
    if g <= 0.0 {
        return Err(Error::InvalidGrid(format!("cell size must be positive, got {g}")));
    }
    Ok(())
}

fn cell_count(extent: f64, step: f64) -> usize {
    ((extent / step) - CELL_COUNT_EPS).ceil().max(1.0) as usize
}

impl GridSpace {
    /// Discretizes a geographic bounding box into cells of side `cell_size_m`.
    pub fn from_extent(lon_min: f64, lon_max: f64, lat_min: f64, lat_max: f64, cell_size_m: f64) -> Result<Self> {
        check_extent(lon_min, lon_max, lat_min, lat_max, cell_size_m)?;
        let mut gs = GridSpace {
            lon_min,
            lon_max,
            lat_min,
            lat_max,
            cell_size_m,
            n_rows: 1,
            n_cols: 1,
        };
        gs.n_rows = cell_count(lat_max - lat_min, gs.lat_step());
        gs.n_cols = cell_count(lon_max - lon_min, gs.lon_step());
        Ok(gs)
    }

    /// A grid of exactly `n_rows` x `n_cols` cells anchored at (0°, 0°).
    ///
    /// Used for synthetic corpora where only the cell lattice matters.
    pub fn synthetic(n_rows: usize, n_cols: usize, cell_size_m: f64) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidGrid("n_rows and n_cols must be at least 1".into()));
        }
        if !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell size must be positive, got {cell_size_m}"
            )));
        }
        let lat_step = cell_size_m / METERS_PER_DEGREE;
        let lat_max = n_rows as f64 * lat_step;
        let mid = (lat_max / 2.0).to_radians();
        let lon_max = n_cols as f64 * cell_size_m / (METERS_PER_DEGREE * mid.cos());
        Ok(GridSpace {
            lon_min: 0.0,
            lon_max,
            lat_min: 0.0,
            lat_max,
            cell_size_m,
            n_rows,
            n_cols,
        })
    }

    pub fn lon_min(&self) -> f64 {
        self.lon_min
    }
    pub fn lon_max(&self) -> f64 {
        self.lon_max
    }
    pub fn lat_min(&self) -> f64 {
        self.lat_min
    }
    pub fn lat_max(&self) -> f64 {
        self.lat_max
    }
    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// Latitude span of one cell, in degrees.
    pub fn lat_step(&self) -> f64 {
        self.cell_size_m / METERS_PER_DEGREE
    }

    /// Longitude span of one cell at the box's mid-latitude, in degrees.
    pub fn lon_step(&self) -> f64 {
        let mid = ((self.lat_min + self.lat_max) / 2.0).to_radians();
        self.cell_size_m / (METERS_PER_DEGREE * mid.cos())
    }

    pub fn contains_point(&self, lon: f64, lat: f64) -> bool {
        (self.lon_min..=self.lon_max).contains(&lon) && (self.lat_min..=self.lat_max).contains(&lat)
    }

    pub fn is_valid(&self, cell: Cell) -> bool {
        cell.row < self.n_rows && cell.col < self.n_cols
    }

    /// Cell holding the point. Points on the southern or eastern edge clamp
    /// to the last row or column.
    pub fn cell_of(&self, lon: f64, lat: f64) -> Result<Cell> {
        if !self.contains_point(lon, lat) {
            return Err(Error::OutOfBounds { lon, lat });
        }
        let row = ((self.lat_max - lat) / self.lat_step()).floor() as usize;
        let col = ((lon - self.lon_min) / self.lon_step()).floor() as usize;
        Ok(Cell::new(row.min(self.n_rows - 1), col.min(self.n_cols - 1)))
    }

    /// Planar cell-center coordinates in meters, measured from the
    /// north-west corner (x grows east, y grows south).
    pub fn center_m(&self, cell: Cell) -> (f64, f64) {
        let g = self.cell_size_m;
        ((cell.col as f64 + 0.5) * g, (cell.row as f64 + 0.5) * g)
    }

    /// Geographic center of the part of `cell` that lies inside the box.
    pub fn center_lonlat(&self, cell: Cell) -> (f64, f64) {
        let (lat_step, lon_step) = (self.lat_step(), self.lon_step());
        let lat_hi = self.lat_max - cell.row as f64 * lat_step;
        let lat_lo = (self.lat_max - (cell.row + 1) as f64 * lat_step).max(self.lat_min);
        let lon_lo = self.lon_min + cell.col as f64 * lon_step;
        let lon_hi = (self.lon_min + (cell.col + 1) as f64 * lon_step).min(self.lon_max);
        ((lon_lo + lon_hi) / 2.0, (lat_lo + lat_hi) / 2.0)
    }

    /// Whether the whole region lies inside the grid.
    pub fn fits(&self, region: &Region) -> bool {
        region.row_end() <= self.n_rows && region.col_end() <= self.n_cols
    }

    /// The region covering every cell of the grid.
    pub fn full_region(&self) -> Region {
        Region {
            row0: 0,
            col0: 0,
            height: self.n_rows,
            width: self.n_cols,
        }
    }
}

/// One grid cell, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

/// Axis-aligned rectangle of cells, identified by its top-left cell and
/// its extent. The derived ordering `(row0, col0, height, width)` is the
/// canonical region order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

impl Region {
    pub fn new(row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid(format!(
                "region extent must be positive, got {height}x{width}"
            )));
        }
        Ok(Region {
            row0,
            col0,
            height,
            width,
        })
    }

    pub const fn singleton(cell: Cell) -> Self {
        Region {
            row0: cell.row,
            col0: cell.col,
            height: 1,
            width: 1,
        }
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    /// One past the last row.
    pub fn row_end(&self) -> usize {
        self.row0 + self.height
    }

    /// One past the last column.
    pub fn col_end(&self) -> usize {
        self.col0 + self.width
    }

    pub fn contains(&self, cell: Cell) -> bool {
        (self.row0..self.row_end()).contains(&cell.row) && (self.col0..self.col_end()).contains(&cell.col)
    }

    pub fn intersection(&self, other: &Region) -> Option<Region> {
        let row0 = self.row0.max(other.row0);
        let col0 = self.col0.max(other.col0);
        let row_end = self.row_end().min(other.row_end());
        let col_end = self.col_end().min(other.col_end());
        (row0 < row_end && col0 < col_end).then(|| Region {
            row0,
            col0,
            height: row_end - row0,
            width: col_end - col0,
        })
    }

    pub fn intersection_area(&self, other: &Region) -> usize {
        self.intersection(other).map_or(0, |r| r.area())
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.row0..self.row_end()).flat_map(move |r| (self.col0..self.col_end()).map(move |c| Cell::new(r, c)))
    }

    /// The `index`-th cell in row-major order.
    pub fn cell_at(&self, index: usize) -> Cell {
        debug_assert!(index < self.area());
        Cell::new(self.row0 + index / self.width, self.col0 + index % self.width)
    }
}

/// A true location at a timestamp. Serialized as `[t, row, col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(i64, usize, usize)", into = "(i64, usize, usize)")]
pub struct TimedCell {
    pub t: i64,
    pub cell: Cell,
}

impl From<(i64, usize, usize)> for TimedCell {
    fn from((t, row, col): (i64, usize, usize)) -> Self {
        TimedCell {
            t,
            cell: Cell::new(row, col),
        }
    }
}

impl From<TimedCell> for (i64, usize, usize) {
    fn from(p: TimedCell) -> Self {
        (p.t, p.cell.row, p.cell.col)
    }
}

/// A published region at a timestamp. Serialized as `[t, row0, col0, h, w]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    try_from = "(i64, usize, usize, usize, usize)",
    into = "(i64, usize, usize, usize, usize)"
)]
pub struct TimedRegion {
    pub t: i64,
    pub region: Region,
}

impl TryFrom<(i64, usize, usize, usize, usize)> for TimedRegion {
    type Error = Error;

    fn try_from((t, row0, col0, h, w): (i64, usize, usize, usize, usize)) -> Result<Self> {
        Ok(TimedRegion {
            t,
            region: Region::new(row0, col0, h, w)?,
        })
    }
}

impl From<TimedRegion> for (i64, usize, usize, usize, usize) {
    fn from(p: TimedRegion) -> Self {
        let r = p.region;
        (p.t, r.row0, r.col0, r.height, r.width)
    }
}

fn check_timestamps(id: &str, ts: impl Iterator<Item = i64>) -> Result<()> {
    let mut prev: Option<i64> = None;
    let mut n = 0usize;
    for t in ts {
        if let Some(p) = prev {
            if t <= p {
                return Err(Error::InvalidTrajectory {
                    id: id.to_string(),
                    reason: format!("timestamp {t} does not follow {p}"),
                });
            }
        }
        prev = Some(t);
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidTrajectory {
            id: id.to_string(),
            reason: "empty trajectory".into(),
        });
    }
    Ok(())
}

/// Ground-truth trajectory: strictly increasing timestamps, at least one point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryRepr")]
pub struct TrajectoryTrue {
    id: String,
    points: Vec<TimedCell>,
}

#[derive(Deserialize)]
struct TrajectoryRepr {
    id: String,
    points: Vec<TimedCell>,
}

impl TryFrom<TrajectoryRepr> for TrajectoryTrue {
    type Error = Error;
    fn try_from(r: TrajectoryRepr) -> Result<Self> {
        TrajectoryTrue::new(r.id, r.points)
    }
}

impl TrajectoryTrue {
    pub fn new(id: impl Into<String>, points: Vec<TimedCell>) -> Result<Self> {
        let id = id.into();
        check_timestamps(&id, points.iter().map(|p| p.t))?;
        Ok(TrajectoryTrue { id, points })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[TimedCell] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.points.iter().map(|p| p.cell)
    }

    /// Errors when a cell falls outside `gs`.
    pub fn check_within(&self, gs: &GridSpace) -> Result<()> {
        match self.points.iter().position(|p| !gs.is_valid(p.cell)) {
            Some(i) => Err(Error::InvalidTrajectory {
                id: self.id.clone(),
                reason: format!("cell {:?} at step {i} is outside the grid", self.points[i].cell),
            }),
            None => Ok(()),
        }
    }
}

/// Released trajectory: one region per timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PublishedRepr")]
pub struct PublishedTrajectory {
    id: String,
    regions: Vec<TimedRegion>,
}

#[derive(Deserialize)]
struct PublishedRepr {
    id: String,
    regions: Vec<TimedRegion>,
}

impl TryFrom<PublishedRepr> for PublishedTrajectory {
    type Error = Error;
    fn try_from(r: PublishedRepr) -> Result<Self> {
        PublishedTrajectory::new(r.id, r.regions)
    }
}

impl PublishedTrajectory {
    pub fn new(id: impl Into<String>, regions: Vec<TimedRegion>) -> Result<Self> {
        let id = id.into();
        check_timestamps(&id, regions.iter().map(|p| p.t))?;
        Ok(PublishedTrajectory { id, regions })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn regions(&self) -> &[TimedRegion] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region_iter(&self) -> impl Iterator<Item = Region> + '_ {
        self.regions.iter().map(|p| p.region)
    }

    pub fn check_within(&self, gs: &GridSpace) -> Result<()> {
        match self.regions.iter().position(|p| !gs.fits(&p.region)) {
            Some(i) => Err(Error::InvalidTrajectory {
                id: self.id.clone(),
                reason: format!("region {:?} at step {i} is outside the grid", self.regions[i].region),
            }),
            None => Ok(()),
        }
    }
}
