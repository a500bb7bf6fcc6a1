//! Seeded synthetic corpus: persistent random walks on an 8-neighborhood.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpace, TimedCell, TrajectoryTrue};
use crate::rng::stream_rng;

/// A one-step displacement; the last variant stays put.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub drow: i64,
    pub dcol: i64,
}

impl Move {
    /// Kernel order: N, NE, E, SE, S, SW, W, NW, stay.
    pub const ALL: [Move; 9] = [
        Move { drow: -1, dcol: 0 },
        Move { drow: -1, dcol: 1 },
        Move { drow: 0, dcol: 1 },
        Move { drow: 1, dcol: 1 },
        Move { drow: 1, dcol: 0 },
        Move { drow: 1, dcol: -1 },
        Move { drow: 0, dcol: -1 },
        Move { drow: -1, dcol: -1 },
        Move { drow: 0, dcol: 0 },
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_traj: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub cell_size_m: f64,
    /// Weights over [`Move::ALL`].
    pub step_kernel: Vec<f64>,
    /// Probability of repeating the previous move.
    pub persistence: f64,
    pub step_seconds: i64,
    pub start_time: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_traj: 200,
            min_len: 10,
            max_len: 20,
            n_rows: 20,
            n_cols: 20,
            cell_size_m: 100.0,
            step_kernel: vec![0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.0],
            persistence: 0.8,
            step_seconds: 18,
            start_time: 0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_kernel.len() != Move::ALL.len() {
            return Err(Error::Config(format!(
                "step_kernel needs {} weights, got {}",
                Move::ALL.len(),
                self.step_kernel.len()
            )));
        }
        if self.step_kernel.iter().any(|w| !w.is_finite() || *w < 0.0)
            || (self.step_kernel.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config("step_kernel must be non-negative and sum to 1".into()));
        }
        if !(0.0..=1.0).contains(&self.persistence) {
            return Err(Error::Config(format!(
                "persistence must lie in [0, 1], got {}",
                self.persistence
            )));
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return Err(Error::Config(format!(
                "need 1 <= min_len <= max_len, got {}..{}",
                self.min_len, self.max_len
            )));
        }
        if self.step_seconds <= 0 {
            return Err(Error::Config("step_seconds must be positive".into()));
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<GridSpace> {
        GridSpace::synthetic(self.n_rows, self.n_cols, self.cell_size_m)
    }
}

/// Moves `pos` by `delta` along one axis of length `n`, reflecting off the
/// edges. Returns the new position and the displacement actually taken.
fn reflect(pos: usize, delta: i64, n: usize) -> (usize, i64) {
    let n = n as i64;
    let target = pos as i64 + delta;
    if (0..n).contains(&target) {
        return (target as usize, delta);
    }
    let back = pos as i64 - delta;
    if (0..n).contains(&back) {
        (back as usize, -delta)
    } else {
        (pos, 0)
    }
}

fn walk<R: Rng>(cfg: &SynthConfig, kernel: &WeightedIndex<f64>, rng: &mut R, id: String) -> Result<TrajectoryTrue> {
    let len = rng.gen_range(cfg.min_len..=cfg.max_len);
    let mut cell = Cell {
        row: rng.gen_range(0..cfg.n_rows),
        col: rng.gen_range(0..cfg.n_cols),
    };
    let mut last: Option<Move> = None;
    let mut points = Vec::with_capacity(len);
    for i in 0..len {
        if i > 0 {
            let mv = match last {
                Some(m) if rng.gen_bool(cfg.persistence) => m,
                _ => Move::ALL[kernel.sample(rng)],
            };
            let (row, drow) = reflect(cell.row, mv.drow, cfg.n_rows);
            let (col, dcol) = reflect(cell.col, mv.dcol, cfg.n_cols);
            cell = Cell { row, col };
            last = Some(Move { drow, dcol });
        }
        points.push(TimedCell {
            t: cfg.start_time + i as i64 * cfg.step_seconds,
            cell,
        });
    }
    TrajectoryTrue::new(id, points)
}

/// Generates `n_traj` walks with ids `syn-00000`, `syn-00001`, ... Each walk
/// draws from its own stream keyed by id, so the corpus is reproducible
/// under `seed` regardless of scheduling.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<TrajectoryTrue>> {
    cfg.validate()?;
    let kernel = WeightedIndex::new(&cfg.step_kernel).map_err(|e| Error::Config(format!("step_kernel: {e}")))?;
    (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| {
            let id = format!("syn-{i:05}");
            let mut rng = stream_rng(cfg.seed, &id);
            walk(cfg, &kernel, &mut rng, id)
        })
        .collect()
}
