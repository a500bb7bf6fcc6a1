//! Discrete multi-sequence hidden Markov model.
//!
//! Hidden states are grid cells, observation symbols are rectangular
//! regions. One model carries two transition matrices, one for time-forward
//! sequences and one for time-reversed sequences, sharing the initial
//! distribution and the emission matrix.

mod em;
mod inference;
mod matrix;
mod params;
mod spaces;

pub use em::baum_welch_pass;
pub use inference::{forward_backward, log_likelihood, viterbi, Posterior, StepXi};
pub use matrix::Matrix;
pub use params::{init_params, EmissionMask, HmmCheckpoint, HmmParams, INIT_JITTER};
pub use spaces::{BandPolicy, HiddenSpace, ObservationAlphabet};

use serde::{Deserialize, Serialize};

/// Which transition matrix a computation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}
