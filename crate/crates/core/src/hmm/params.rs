use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::spaces::{HiddenSpace, ObservationAlphabet};
use super::Direction;
use crate::error::{Error, Result};
use crate::grid::{Cell, Region};
use crate::rng::stream_rng;

/// Relative amplitude of the symmetry-breaking noise applied at initialization.
pub const INIT_JITTER: f64 = 0.01;

/// Which (state, symbol) emissions are structurally possible: a state may
/// only emit regions that contain its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMask {
    allowed: Vec<Vec<usize>>,
    n_symbols: usize,
}

impl EmissionMask {
    pub fn from_spaces(hidden: &HiddenSpace, alphabet: &ObservationAlphabet) -> Self {
        let mut allowed = vec![Vec::new(); hidden.len()];
        for (o, region) in alphabet.symbols().iter().enumerate() {
            for cell in region.cells() {
                if let Some(h) = hidden.index_of(cell) {
                    allowed[h].push(o);
                }
            }
        }
        EmissionMask {
            allowed,
            n_symbols: alphabet.len(),
        }
    }

    /// No structural zeros.
    pub fn full(n_states: usize, n_symbols: usize) -> Self {
        EmissionMask {
            allowed: vec![(0..n_symbols).collect(); n_states],
            n_symbols,
        }
    }

    /// Explicit allowed-symbol lists per state.
    pub fn from_allowed(mut allowed: Vec<Vec<usize>>, n_symbols: usize) -> Self {
        for a in &mut allowed {
            a.sort_unstable();
            a.dedup();
        }
        EmissionMask { allowed, n_symbols }
    }

    pub fn n_states(&self) -> usize {
        self.allowed.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn allowed(&self, state: usize) -> &[usize] {
        &self.allowed[state]
    }

    pub fn allows(&self, state: usize, symbol: usize) -> bool {
        self.allowed[state].binary_search(&symbol).is_ok()
    }

    /// Zeroes the disallowed entries of row `state` of `b`.
    pub fn apply_row(&self, b: &mut Matrix, state: usize) {
        let allowed = &self.allowed[state];
        let row = b.row_mut(state);
        let mut next = allowed.iter().peekable();
        for (o, v) in row.iter_mut().enumerate() {
            if next.peek() == Some(&&o) {
                next.next();
            } else {
                *v = 0.0;
            }
        }
    }

    pub fn apply(&self, b: &mut Matrix) {
        for h in 0..self.allowed.len() {
            self.apply_row(b, h);
        }
    }

    /// Whether every disallowed entry of `b` is exactly zero.
    pub fn is_respected_by(&self, b: &Matrix) -> bool {
        (0..self.allowed.len()).all(|h| b.row(h).iter().enumerate().all(|(o, &v)| v == 0.0 || self.allows(h, o)))
    }
}

/// Model parameters. Rows of both transition matrices and of the emission
/// matrix are probability distributions, as is `pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    pub pi: Vec<f64>,
    pub a_fwd: Matrix,
    pub a_bwd: Matrix,
    pub b: Matrix,
}

impl HmmParams {
    pub fn new(pi: Vec<f64>, a_fwd: Matrix, a_bwd: Matrix, b: Matrix) -> Result<Self> {
        let n = pi.len();
        let shapes_ok = n > 0
            && (a_fwd.rows(), a_fwd.cols()) == (n, n)
            && (a_bwd.rows(), a_bwd.cols()) == (n, n)
            && b.rows() == n
            && b.cols() > 0;
        if !shapes_ok {
            return Err(Error::Config(format!(
                "inconsistent parameter shapes: pi {n}, a_fwd {}x{}, a_bwd {}x{}, b {}x{}",
                a_fwd.rows(),
                a_fwd.cols(),
                a_bwd.rows(),
                a_bwd.cols(),
                b.rows(),
                b.cols()
            )));
        }
        Ok(HmmParams { pi, a_fwd, a_bwd, b })
    }

    /// Uniform `pi` and transitions; each emission row uniform over the
    /// symbols the mask allows.
    pub fn uniform(mask: &EmissionMask) -> Result<Self> {
        let n = mask.n_states();
        let m = mask.n_symbols();
        if n == 0 || m == 0 {
            return Err(Error::Config("empty hidden space or alphabet".into()));
        }
        let mut b = Matrix::zeros(n, m);
        for h in 0..n {
            let allowed = mask.allowed(h);
            if allowed.is_empty() {
                return Err(Error::UncoveredState(h));
            }
            let p = 1.0 / allowed.len() as f64;
            for &o in allowed {
                b.set(h, o, p);
            }
        }
        let a = Matrix::filled(n, n, 1.0 / n as f64);
        HmmParams::new(vec![1.0 / n as f64; n], a.clone(), a, b)
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.b.cols()
    }

    pub fn transition(&self, dir: Direction) -> &Matrix {
        match dir {
            Direction::Forward => &self.a_fwd,
            Direction::Backward => &self.a_bwd,
        }
    }

    pub fn transition_mut(&mut self, dir: Direction) -> &mut Matrix {
        match dir {
            Direction::Forward => &mut self.a_fwd,
            Direction::Backward => &mut self.a_bwd,
        }
    }

    /// Multiplies every positive entry by `1 + u`, `u` uniform in
    /// `[-amplitude, amplitude]`, then renormalizes. Zeros stay zero.
    pub fn jitter(&mut self, seed: u64, amplitude: f64) {
        if amplitude == 0.0 {
            return;
        }
        let mut rng = stream_rng(seed, "hmm-init-jitter");
        let mut perturb = |v: &mut f64| {
            if *v > 0.0 {
                *v *= 1.0 + rng.gen_range(-amplitude..=amplitude);
            }
        };
        self.pi.iter_mut().for_each(&mut perturb);
        normalize(&mut self.pi);
        for m in [&mut self.a_fwd, &mut self.a_bwd, &mut self.b] {
            for r in 0..m.rows() {
                m.row_mut(r).iter_mut().for_each(&mut perturb);
                m.normalize_row(r);
            }
        }
    }

    /// Mixes `pi`, the `dir` transition matrix and the emission rows with a
    /// weight `eps` of their uniform (mask-restricted) counterparts, so every
    /// structurally possible path has positive probability.
    pub fn floor_support(&mut self, eps: f64, dir: Direction, mask: &EmissionMask) {
        if eps <= 0.0 {
            return;
        }
        let n = self.n_states();
        let keep = 1.0 - eps;
        let share = eps / n as f64;
        self.pi.iter_mut().for_each(|v| *v = keep * *v + share);
        let a = self.transition_mut(dir);
        for r in 0..n {
            a.row_mut(r).iter_mut().for_each(|v| *v = keep * *v + share);
        }
        for h in 0..n {
            let allowed = mask.allowed(h);
            let share = eps / allowed.len().max(1) as f64;
            let row = self.b.row_mut(h);
            row.iter_mut().for_each(|v| *v *= keep);
            for &o in allowed {
                row[o] += share;
            }
        }
    }

    /// Largest deviation from one over `pi` and every matrix row.
    pub fn max_stochastic_error(&self) -> f64 {
        let pi_err = (self.pi.iter().sum::<f64>() - 1.0).abs();
        [&self.a_fwd, &self.a_bwd, &self.b]
            .iter()
            .map(|m| m.max_row_sum_error())
            .fold(pi_err, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        let pi_min = self.pi.iter().copied().fold(f64::INFINITY, f64::min);
        [&self.a_fwd, &self.a_bwd, &self.b]
            .iter()
            .map(|m| m.min_entry())
            .fold(pi_min, f64::min)
    }
}

pub(crate) fn normalize(v: &mut [f64]) -> bool {
    let s: f64 = v.iter().sum();
    if s <= 0.0 || !s.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= s);
    true
}

/// Masked uniform parameters with seeded ±1% jitter.
pub fn init_params(mask: &EmissionMask, seed: u64) -> Result<HmmParams> {
    let mut p = HmmParams::uniform(mask)?;
    p.jitter(seed, INIT_JITTER);
    Ok(p)
}

/// JSON checkpoint: state cells, symbol regions and dense matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmCheckpoint {
    pub states: Vec<Cell>,
    pub symbols: Vec<Region>,
    pub pi: Vec<f64>,
    pub a_fwd: Matrix,
    pub a_bwd: Matrix,
    pub b: Matrix,
}

impl HmmCheckpoint {
    pub fn new(hidden: &HiddenSpace, alphabet: &ObservationAlphabet, params: &HmmParams) -> Self {
        HmmCheckpoint {
            states: hidden.states().to_vec(),
            symbols: alphabet.symbols().to_vec(),
            pi: params.pi.clone(),
            a_fwd: params.a_fwd.clone(),
            a_bwd: params.a_bwd.clone(),
            b: params.b.clone(),
        }
    }

    pub fn into_parts(self) -> Result<(HiddenSpace, ObservationAlphabet, HmmParams)> {
        let params = HmmParams::new(self.pi, self.a_fwd, self.a_bwd, self.b)?;
        if params.n_states() != self.states.len() || params.n_symbols() != self.symbols.len() {
            return Err(Error::Config(
                "checkpoint matrices do not match its state/symbol lists".into(),
            ));
        }
        Ok((
            HiddenSpace::from_states(self.states),
            ObservationAlphabet::from_symbols(self.symbols),
            params,
        ))
    }
}
