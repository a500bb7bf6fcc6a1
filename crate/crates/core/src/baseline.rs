//! Random-guess attacker: one cell drawn uniformly from each published region.

use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{Cell, PublishedTrajectory, Region, TimedCell, TrajectoryTrue};
use crate::rng::stream_rng;

/// Uniform cell of `region`, drawn as a row-major index.
pub fn sample_cell<R: Rng + ?Sized>(region: &Region, rng: &mut R) -> Cell {
    region.cell_at(rng.gen_range(0..region.area()))
}

/// Guesses one cell per step. The stream is keyed by the trajectory id, so
/// the result does not depend on corpus order.
pub fn baseline_attack(published: &PublishedTrajectory, seed: u64) -> Result<TrajectoryTrue> {
    let mut rng = stream_rng(seed, published.id());
    let points = published
        .regions()
        .iter()
        .map(|r| TimedCell {
            t: r.t,
            cell: sample_cell(&r.region, &mut rng),
        })
        .collect();
    TrajectoryTrue::new(published.id(), points)
}

pub fn baseline_corpus(pubs: &[PublishedTrajectory], seed: u64) -> Result<Vec<TrajectoryTrue>> {
    pubs.par_iter().map(|p| baseline_attack(p, seed)).collect()
}
