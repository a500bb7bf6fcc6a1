use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, PublishedTrajectory, Region};

/// Candidate true locations: every cell covered by some observed region,
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSpace {
    states: Vec<Cell>,
    index: HashMap<Cell, usize>,
}

impl HiddenSpace {
    pub fn build(pubs: &[PublishedTrajectory]) -> Result<Self> {
        let cells: BTreeSet<Cell> = pubs
            .iter()
            .flat_map(|p| p.region_iter())
            .flat_map(|r| r.cells().collect::<Vec<_>>())
            .collect();
        if cells.is_empty() {
            return Err(Error::Config(
                "no published regions to build a hidden space from".into(),
            ));
        }
        Ok(Self::from_states(cells.into_iter().collect()))
    }

    /// Wraps an already deduplicated, ordered state list.
    pub fn from_states(states: Vec<Cell>) -> Self {
        let index = states.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        HiddenSpace { states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Cell] {
        &self.states
    }

    pub fn cell(&self, state: usize) -> Cell {
        self.states[state]
    }

    pub fn index_of(&self, cell: Cell) -> Option<usize> {
        self.index.get(&cell).copied()
    }
}

/// How observed regions whose area falls outside `[ell, ell + gamma]` are
/// treated when building the observation alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandPolicy {
    /// Every observed region must lie inside the band.
    Strict,
    /// Observed regions at or above `ell` are always symbols; the band only
    /// filters the attacker's own candidate regions.
    #[default]
    AdmitObserved,
}

/// Observation symbols: canonical, deduplicated regions sorted by
/// `(row0, col0, height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationAlphabet {
    symbols: Vec<Region>,
    index: HashMap<Region, usize>,
}

impl ObservationAlphabet {
    /// All observed regions plus the candidate region of every hidden state,
    /// candidates kept only when their area lies in `[ell, ell + gamma]`.
    pub fn build(
        pubs: &[PublishedTrajectory],
        hidden: &HiddenSpace,
        mut candidate: impl FnMut(Cell) -> Result<Region>,
        ell: usize,
        gamma: usize,
        policy: BandPolicy,
    ) -> Result<Self> {
        let max = ell + gamma;
        let mut set = BTreeSet::new();
        for region in pubs.iter().flat_map(|p| p.region_iter()) {
            let area = region.area();
            let admitted = match policy {
                BandPolicy::Strict => (ell..=max).contains(&area),
                BandPolicy::AdmitObserved => area >= ell,
            };
            if !admitted {
                return Err(Error::AreaBand { region, area, ell, max });
            }
            set.insert(region);
        }
        for &cell in hidden.states() {
            let region = candidate(cell)?;
            if (ell..=max).contains(&region.area()) {
                set.insert(region);
            }
        }
        Ok(Self::from_symbols(set.into_iter().collect()))
    }

    pub fn from_symbols(symbols: Vec<Region>) -> Self {
        let index = symbols.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        ObservationAlphabet { symbols, index }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Region] {
        &self.symbols
    }

    pub fn region(&self, symbol: usize) -> Region {
        self.symbols[symbol]
    }

    pub fn index_of(&self, region: &Region) -> Option<usize> {
        self.index.get(region).copied()
    }

    /// Symbol indices of a published trajectory, in time order.
    pub fn encode(&self, published: &PublishedTrajectory) -> Result<Vec<usize>> {
        published
            .region_iter()
            .map(|r| {
                self.index_of(&r).ok_or_else(|| {
                    Error::Config(format!(
                        "region {r:?} of {:?} is not an observation symbol",
                        published.id()
                    ))
                })
            })
            .collect()
    }
}
