//! Grid-trajectory privacy toolkit.
//!
//! Publishes coarse rectangular regions for grid-discretized trajectories
//! under a per-step confidence bound, and attacks sequences of such releases
//! with a bi-directional hidden Markov model refined by IoU-reward
//! reinforcement. Attack quality is scored with Euclidean-distance metrics.
//!
//! Module map:
//!
//! - [`grid`]: grid space, cells, rectangular regions, trajectory types.
//! - [`io`]: JSONL trajectory interchange and the grid sidecar.
//! - [`publisher`]: confidence-bounded region generation and verification.
//! - [`hmm`]: state spaces, scaled forward-backward, pooled Baum-Welch, Viterbi.
//! - [`attack`]: the bi-directional HMM-RL attacker.
//! - [`baseline`]: per-step uniform guessing attacker.
//! - [`metrics`]: AED / A2ED / AMED.
//! - [`ingest`]: Geolife and Porto parsers, preprocessing, synthetic corpora.
//! - [`experiment`]: config-driven pipeline stages and parameter sweeps.

pub mod attack;
pub mod baseline;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod hmm;
pub mod ingest;
pub mod io;
pub mod metrics;
pub mod publisher;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{Cell, GridSpace, PublishedTrajectory, Region, TimedCell, TimedRegion, TrajectoryTrue};
