//! Bi-directional HMM attacker refined by IoU-reward reinforcement.
//!
//! Training alternates directions. Odd passes run Baum-Welch on the
//! time-forward sequences (updating `pi`, the emission matrix and the
//! forward transition matrix), decode every trajectory with Viterbi, score
//! each decoded cell by the IoU between its centered region and the observed
//! region, and reinforce the transitions and emissions along the path.
//! Even passes do the same on time-reversed sequences with the backward
//! transition matrix. After each pass the opposite direction's transition
//! matrix is reset to the mean of its last `k` stored versions.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpace, PublishedTrajectory, Region, TimedCell, TrajectoryTrue};
use crate::hmm::{
    baum_welch_pass, init_params, viterbi, BandPolicy, Direction, EmissionMask, HiddenSpace, HmmParams, Matrix,
    ObservationAlphabet,
};
use crate::publisher::{check_lambda, expand_region_with, min_region_size, Axis};

/// Which emission entry the reward acts on at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionTarget {
    /// `B[state][observed region]`.
    #[default]
    Observed,
    /// `B[state][centered region of state]`, when that region is a symbol.
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Confidence bound the publisher is assumed to use.
    pub lambda: f64,
    /// Area slack above `ceil(1/lambda)` admitted for candidate symbols.
    pub gamma: usize,
    /// Reward threshold.
    pub delta: f64,
    /// Sliding-window size for transition-matrix averaging.
    pub k: usize,
    pub passes: usize,
    /// Multiplicative reinforcement step.
    pub alpha: f64,
    /// Reinforce emissions even when the previous step's reward is below `delta`.
    pub eprl: bool,
    pub seed: u64,
    pub band: BandPolicy,
    pub emission_target: EmissionTarget,
    /// Run Baum-Welch at the start of each pass.
    pub baum_welch: bool,
    /// Uniform mass mixed into the prior before each Baum-Welch pass and
    /// before final decoding.
    pub support_floor: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            lambda: 0.1,
            gamma: 5,
            delta: 0.7,
            k: 3,
            passes: 50,
            alpha: 0.1,
            eprl: true,
            seed: 0,
            band: BandPolicy::AdmitObserved,
            emission_target: EmissionTarget::Observed,
            baum_welch: true,
            support_floor: 1e-9,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.k == 0 {
            return Err(Error::Config("sliding window k must be at least 1".into()));
        }
        if self.passes == 0 {
            return Err(Error::Config("at least one pass is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::Config(format!(
                "delta must be a non-negative number, got {}",
                self.delta
            )));
        }
        if !(0.0..1.0).contains(&self.support_floor) {
            return Err(Error::Config(format!(
                "support_floor must lie in [0, 1), got {}",
                self.support_floor
            )));
        }
        Ok(())
    }

    pub fn ell(&self) -> usize {
        min_region_size(self.lambda)
    }
}

/// The attacker's assumed publishing rule: the smallest region of area at
/// least `ell` centered on `tl`, grown alternately along rows then columns
/// and clipped to the grid.
pub fn t2p_predict(tl: Cell, ell: usize, gs: &GridSpace) -> Result<Region> {
    let mut next = Axis::Cols;
    expand_region_with(tl, ell, gs, || {
        next = next.other();
        next
    })
}

/// Intersection over union of two regions.
pub fn iou_reward(pred: &Region, truth: &Region) -> f64 {
    let inter = pred.intersection_area(truth);
    inter as f64 / (pred.area() + truth.area() - inter) as f64
}

/// Decoded state and rewards at one step of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFeedback {
    pub prev_state: Option<usize>,
    pub state: usize,
    /// Emission column to reinforce; `None` skips the emission update.
    pub symbol: Option<usize>,
    pub prev_reward: Option<f64>,
    pub reward: f64,
}

fn scale_entry(m: &mut Matrix, row: usize, col: usize, factor: f64) {
    let v = m.get(row, col);
    if v > 0.0 {
        m.set(row, col, v * factor);
        m.normalize_row(row);
    }
}

/// Applies the reward and penalty rules for one step to `params`.
///
/// The transition `prev_state -> state` of the `dir` matrix is scaled by
/// `1 + alpha` or `1 - alpha` only when the previous reward reached
/// `delta`. The emission entry is scaled the same way whenever the previous
/// reward reached `delta`, or always when EPRL is on.
pub fn reinforce_step(
    params: &mut HmmParams,
    step: &StepFeedback,
    cfg: &AttackConfig,
    dir: Direction,
    mask: Option<&EmissionMask>,
) {
    let factor = if step.reward >= cfg.delta {
        1.0 + cfg.alpha
    } else {
        1.0 - cfg.alpha
    };
    let prev_ok = step.prev_reward.is_some_and(|r| r >= cfg.delta);
    if prev_ok {
        if let Some(prev) = step.prev_state {
            scale_entry(params.transition_mut(dir), prev, step.state, factor);
        }
    }
    if cfg.eprl || prev_ok {
        if let Some(o) = step.symbol {
            if let Some(mask) = mask {
                if !mask.allows(step.state, o) {
                    return;
                }
                scale_entry(&mut params.b, step.state, o, factor);
                mask.apply_row(&mut params.b, step.state);
            } else {
                scale_entry(&mut params.b, step.state, o, factor);
            }
        }
    }
}

/// Bounded per-direction queues of recent transition matrices.
#[derive(Debug, Clone)]
pub struct MatrixHistory {
    capacity: usize,
    forward: VecDeque<Matrix>,
    backward: VecDeque<Matrix>,
}

impl MatrixHistory {
    pub fn new(capacity: usize) -> Self {
        MatrixHistory {
            capacity: capacity.max(1),
            forward: VecDeque::new(),
            backward: VecDeque::new(),
        }
    }

    fn queue(&mut self, dir: Direction) -> &mut VecDeque<Matrix> {
        match dir {
            Direction::Forward => &mut self.forward,
            Direction::Backward => &mut self.backward,
        }
    }

    pub fn push(&mut self, dir: Direction, m: Matrix) {
        let cap = self.capacity;
        let q = self.queue(dir);
        q.push_back(m);
        while q.len() > cap {
            q.pop_front();
        }
    }

    pub fn len(&self, dir: Direction) -> usize {
        match dir {
            Direction::Forward => self.forward.len(),
            Direction::Backward => self.backward.len(),
        }
    }

    /// Mean of the newest `k` matrices, if at least `k` are stored.
    pub fn mean_last(&self, dir: Direction, k: usize) -> Option<Matrix> {
        let q = match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        };
        (k > 0 && q.len() >= k).then(|| Matrix::mean(q.iter().skip(q.len() - k)))
    }
}

/// Per-pass training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassDiagnostics {
    pub pass: usize,
    pub direction: Direction,
    /// Pooled log-likelihood from the pass's Baum-Welch E-step (0 when disabled).
    pub total_log_likelihood: f64,
    pub mean_reward: f64,
    /// Fraction of steps with reward at or above `delta`.
    pub fraction_rewarded: f64,
}

pub fn write_diagnostics_csv(mut w: impl Write, rows: &[PassDiagnostics]) -> Result<()> {
    let mut out = csv::Writer::from_writer(&mut w);
    out.write_record([
        "pass",
        "direction",
        "total_log_likelihood",
        "mean_reward",
        "fraction_rewarded",
    ])?;
    for r in rows {
        out.write_record([
            r.pass.to_string(),
            r.direction.as_str().to_string(),
            format!("{:.10}", r.total_log_likelihood),
            format!("{:.10}", r.mean_reward),
            format!("{:.10}", r.fraction_rewarded),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<diagnostics>", e))?;
    Ok(())
}

/// State handed to a pass observer after each pass completes.
pub struct PassReport<'a> {
    pub diagnostics: &'a PassDiagnostics,
    pub params: &'a HmmParams,
    pub mask: &'a EmissionMask,
    /// Decoded state paths of this pass, in time-forward order.
    pub paths: &'a [Vec<usize>],
}

/// Everything produced by an attack run.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub predictions: Vec<TrajectoryTrue>,
    /// Direction whose decoding was kept, per trajectory.
    pub chosen: Vec<Direction>,
    pub diagnostics: Vec<PassDiagnostics>,
    pub hidden: HiddenSpace,
    pub alphabet: ObservationAlphabet,
    pub params: HmmParams,
}

/// Spaces and encoded sequences shared by every pass.
struct AttackSetup<'a> {
    pubs: &'a [PublishedTrajectory],
    hidden: HiddenSpace,
    alphabet: ObservationAlphabet,
    mask: EmissionMask,
    /// Centered region of each hidden state.
    t2p: Vec<Region>,
    forward_seqs: Vec<Vec<usize>>,
    backward_seqs: Vec<Vec<usize>>,
}

impl<'a> AttackSetup<'a> {
    fn new(pubs: &'a [PublishedTrajectory], gs: &'a GridSpace, cfg: &AttackConfig) -> Result<Self> {
        if pubs.is_empty() {
            return Err(Error::Config("no published trajectories to attack".into()));
        }
        for p in pubs {
            p.check_within(gs)?;
        }
        let ell = cfg.ell();
        let hidden = HiddenSpace::build(pubs)?;
        let t2p = hidden
            .states()
            .iter()
            .map(|&c| t2p_predict(c, ell, gs))
            .collect::<Result<Vec<_>>>()?;
        let mut next = t2p.iter().copied();
        let alphabet = ObservationAlphabet::build(
            pubs,
            &hidden,
            |_| Ok(next.next().expect("one candidate per state")),
            ell,
            cfg.gamma,
            cfg.band,
        )?;
        let mask = EmissionMask::from_spaces(&hidden, &alphabet);
        let forward_seqs = pubs.iter().map(|p| alphabet.encode(p)).collect::<Result<Vec<_>>>()?;
        let backward_seqs = forward_seqs.iter().map(|s| s.iter().rev().copied().collect()).collect();
        Ok(AttackSetup {
            pubs,
            hidden,
            alphabet,
            mask,
            t2p,
            forward_seqs,
            backward_seqs,
        })
    }

    fn sequences(&self, dir: Direction) -> &[Vec<usize>] {
        match dir {
            Direction::Forward => &self.forward_seqs,
            Direction::Backward => &self.backward_seqs,
        }
    }

    /// Observed regions of trajectory `s` in the order of `dir`.
    fn observed(&self, s: usize, dir: Direction) -> Vec<Region> {
        let mut regions: Vec<Region> = self.pubs[s].region_iter().collect();
        if dir == Direction::Backward {
            regions.reverse();
        }
        regions
    }

    /// Rewards along a path given in `dir` order.
    fn rewards(&self, path: &[usize], observed: &[Region]) -> Vec<f64> {
        path.iter()
            .zip(observed)
            .map(|(&h, truth)| iou_reward(&self.t2p[h], truth))
            .collect()
    }

    fn decode_all(&self, params: &HmmParams, dir: Direction) -> Result<Vec<Vec<usize>>> {
        self.sequences(dir)
            .par_iter()
            .map(|obs| viterbi(params, obs, dir))
            .collect()
    }
}

/// Runs the attack and returns one predicted trajectory per published one.
pub fn run_attack(pubs: &[PublishedTrajectory], gs: &GridSpace, cfg: &AttackConfig) -> Result<AttackOutcome> {
    run_attack_observed(pubs, gs, cfg, |_| {})
}

/// [`run_attack`] with a callback invoked after every pass.
pub fn run_attack_observed(
    pubs: &[PublishedTrajectory],
    gs: &GridSpace,
    cfg: &AttackConfig,
    mut observer: impl FnMut(&PassReport<'_>),
) -> Result<AttackOutcome> {
    cfg.validate()?;
    let setup = AttackSetup::new(pubs, gs, cfg)?;
    let mask = &setup.mask;
    let mut params = init_params(mask, cfg.seed)?;
    let mut history = MatrixHistory::new(cfg.k);
    let mut diagnostics = Vec::with_capacity(cfg.passes);

    for pass in 1..=cfg.passes {
        let dir = if pass % 2 == 1 {
            Direction::Forward
        } else {
            Direction::Backward
        };
        let mut total_ll = 0.0;
        if cfg.baum_welch {
            params.floor_support(cfg.support_floor, dir, mask);
            let (updated, ll) = baum_welch_pass(&params, setup.sequences(dir), dir, Some(mask))?;
            params = updated;
            total_ll = ll;
        }

        let paths = setup.decode_all(&params, dir)?;
        let mut reward_sum = 0.0;
        let mut rewarded = 0usize;
        let mut steps = 0usize;
        for (s, path) in paths.iter().enumerate() {
            let observed = setup.observed(s, dir);
            let rewards = setup.rewards(path, &observed);
            let symbols: Vec<usize> = setup.sequences(dir)[s].clone();
            for i in 0..path.len() {
                let symbol = match cfg.emission_target {
                    EmissionTarget::Observed => Some(symbols[i]),
                    EmissionTarget::Predicted => setup.alphabet.index_of(&setup.t2p[path[i]]),
                };
                let step = StepFeedback {
                    prev_state: i.checked_sub(1).map(|j| path[j]),
                    state: path[i],
                    symbol,
                    prev_reward: i.checked_sub(1).map(|j| rewards[j]),
                    reward: rewards[i],
                };
                reinforce_step(&mut params, &step, cfg, dir, Some(mask));
            }
            reward_sum += rewards.iter().sum::<f64>();
            rewarded += rewards.iter().filter(|&&r| r >= cfg.delta).count();
            steps += rewards.len();
        }

        history.push(dir, params.transition(dir).clone());
        let other = dir.opposite();
        if let Some(avg) = history.mean_last(other, cfg.k) {
            *params.transition_mut(other) = avg;
        }

        let diag = PassDiagnostics {
            pass,
            direction: dir,
            total_log_likelihood: total_ll,
            mean_reward: reward_sum / steps as f64,
            fraction_rewarded: rewarded as f64 / steps as f64,
        };
        let forward_paths: Vec<Vec<usize>>;
        let report_paths = match dir {
            Direction::Forward => &paths,
            Direction::Backward => {
                forward_paths = paths.iter().map(|p| p.iter().rev().copied().collect()).collect();
                &forward_paths
            }
        };
        observer(&PassReport {
            diagnostics: &diag,
            params: &params,
            mask,
            paths: report_paths,
        });
        diagnostics.push(diag);
    }

    let (predictions, chosen) = final_predictions(&setup, &params, cfg)?;
    Ok(AttackOutcome {
        predictions,
        chosen,
        diagnostics,
        hidden: setup.hidden,
        alphabet: setup.alphabet,
        params,
    })
}

/// Decodes every trajectory with both directions and keeps, per trajectory,
/// the path whose centered regions overlap the observations better on
/// average (forward on ties).
fn final_predictions(
    setup: &AttackSetup<'_>,
    params: &HmmParams,
    cfg: &AttackConfig,
) -> Result<(Vec<TrajectoryTrue>, Vec<Direction>)> {
    let decode = |dir: Direction| -> Result<Vec<Vec<usize>>> {
        let mut p = params.clone();
        if cfg.baum_welch {
            p.floor_support(cfg.support_floor, dir, &setup.mask);
        }
        let mut paths = setup.decode_all(&p, dir)?;
        if dir == Direction::Backward {
            paths.iter_mut().for_each(|path| path.reverse());
        }
        Ok(paths)
    };
    let fwd = decode(Direction::Forward)?;
    let bwd = decode(Direction::Backward)?;

    let mut predictions = Vec::with_capacity(fwd.len());
    let mut chosen = Vec::with_capacity(fwd.len());
    for (s, (pf, pb)) in fwd.iter().zip(&bwd).enumerate() {
        let observed = setup.observed(s, Direction::Forward);
        let mean = |path: &[usize]| setup.rewards(path, &observed).iter().sum::<f64>() / path.len() as f64;
        let (path, dir) = if mean(pb) > mean(pf) {
            (pb, Direction::Backward)
        } else {
            (pf, Direction::Forward)
        };
        let points = setup.pubs[s]
            .regions()
            .iter()
            .zip(path)
            .map(|(r, &h)| TimedCell {
                t: r.t,
                cell: setup.hidden.cell(h),
            })
            .collect();
        predictions.push(TrajectoryTrue::new(setup.pubs[s].id(), points)?);
        chosen.push(dir);
    }
    Ok((predictions, chosen))
}
