//! Dataset parsers, preprocessing into grid trajectories, and a seeded
//! synthetic corpus generator.

mod plt;
mod porto;
mod preprocess;
mod synth;

use serde::{Deserialize, Serialize};

pub use plt::{parse_plt, read_plt_dir, PltParse};
pub use porto::{parse_porto, parse_porto_record, PortoParse, PORTO_INTERVAL_S};
pub use preprocess::{preprocess, to_raw, PreprocessConfig, PreprocessReport};
pub use synth::{synth_generate, Move, SynthConfig};

/// A GPS fix with an epoch-second timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    pub lat: f64,
    pub lon: f64,
    pub t: i64,
}

/// Time-ordered fixes of one source trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrajectory {
    pub id: String,
    pub points: Vec<RawPoint>,
}
