//! Scaled forward-backward and log-domain Viterbi.
//!
//! Both recursions only visit, at each step, the states that can emit that
//! step's symbol (`B[h][o] > 0`), which keeps the work proportional to the
//! region sizes rather than to the full state space.

use super::params::HmmParams;
use super::Direction;
use crate::error::{Error, Result};

fn check_sequence(params: &HmmParams, obs: &[usize]) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::Config("empty observation sequence".into()));
    }
    if let Some(&o) = obs.iter().find(|&&o| o >= params.n_symbols()) {
        return Err(Error::Config(format!(
            "symbol {o} outside an alphabet of {}",
            params.n_symbols()
        )));
    }
    Ok(())
}

/// States with non-zero emission probability for `symbol`, ascending.
fn emitters(params: &HmmParams, symbol: usize) -> Vec<usize> {
    (0..params.n_states())
        .filter(|&h| params.b.get(h, symbol) > 0.0)
        .collect()
}

/// Posterior transition marginals between two consecutive steps, stored
/// densely over the two steps' emitter sets.
#[derive(Debug, Clone, PartialEq)]
pub struct StepXi {
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    /// Row-major `from.len() x to.len()`.
    pub values: Vec<f64>,
}

impl StepXi {
    pub fn get(&self, from: usize, to: usize) -> f64 {
        match (self.from.binary_search(&from), self.to.binary_search(&to)) {
            (Ok(i), Ok(j)) => self.values[i * self.to.len() + j],
            _ => 0.0,
        }
    }
}

/// E-step quantities for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// `gammas[t][h]`: posterior probability of state `h` at step `t`.
    pub gammas: Vec<Vec<f64>>,
    /// `xis[t]`: posterior of the transition from step `t` to `t + 1`.
    pub xis: Vec<StepXi>,
    pub log_likelihood: f64,
}

impl Posterior {
    pub fn xi(&self, t: usize, from: usize, to: usize) -> f64 {
        self.xis[t].get(from, to)
    }
}

struct ForwardPass {
    support: Vec<Vec<usize>>,
    /// Normalized forward variables over `support[t]`.
    alpha: Vec<Vec<f64>>,
    /// Per-step normalizers; their logs sum to the log-likelihood.
    scale: Vec<f64>,
}

fn forward(params: &HmmParams, obs: &[usize], dir: Direction) -> Result<ForwardPass> {
    check_sequence(params, obs)?;
    let a = params.transition(dir);
    let b = &params.b;
    let t_len = obs.len();
    let mut support = Vec::with_capacity(t_len);
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(t_len);
    let mut scale = Vec::with_capacity(t_len);
    for (t, &o) in obs.iter().enumerate() {
        let s = emitters(params, o);
        let mut next: Vec<f64> = if t == 0 {
            s.iter().map(|&h| params.pi[h] * b.get(h, o)).collect()
        } else {
            let prev_s: &Vec<usize> = &support[t - 1];
            let prev = &alpha[t - 1];
            s.iter()
                .map(|&j| {
                    let mut acc = 0.0;
                    for (k, &i) in prev_s.iter().enumerate() {
                        acc += prev[k] * a.get(i, j);
                    }
                    acc * b.get(j, o)
                })
                .collect()
        };
        let c: f64 = next.iter().sum();
        // also catches NaN
        if c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::ZeroProbability { step: t });
        }
        next.iter_mut().for_each(|v| *v /= c);
        support.push(s);
        alpha.push(next);
        scale.push(c);
    }
    Ok(ForwardPass { support, alpha, scale })
}

/// Log-likelihood of `obs` under the `dir` transition matrix.
pub fn log_likelihood(params: &HmmParams, obs: &[usize], dir: Direction) -> Result<f64> {
    Ok(forward(params, obs, dir)?.scale.iter().map(|c| c.ln()).sum())
}

/// Posterior state and transition marginals plus the log-likelihood.
pub fn forward_backward(params: &HmmParams, obs: &[usize], dir: Direction) -> Result<Posterior> {
    let ForwardPass { support, alpha, scale } = forward(params, obs, dir)?;
    let a = params.transition(dir);
    let b = &params.b;
    let t_len = obs.len();
    let n = params.n_states();

    let mut beta: Vec<Vec<f64>> = vec![Vec::new(); t_len];
    beta[t_len - 1] = vec![1.0; support[t_len - 1].len()];
    // emission-weighted, scaled beta of the following step, reused for xi
    let mut weighted_next: Vec<Vec<f64>> = vec![Vec::new(); t_len];
    for t in (0..t_len - 1).rev() {
        let o_next = obs[t + 1];
        let w: Vec<f64> = support[t + 1]
            .iter()
            .zip(&beta[t + 1])
            .map(|(&j, &bj)| b.get(j, o_next) * bj / scale[t + 1])
            .collect();
        beta[t] = support[t]
            .iter()
            .map(|&i| support[t + 1].iter().zip(&w).map(|(&j, &wj)| a.get(i, j) * wj).sum())
            .collect();
        weighted_next[t] = w;
    }

    let mut gammas = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut g = vec![0.0; n];
        let mut total = 0.0;
        for (k, &h) in support[t].iter().enumerate() {
            let v = alpha[t][k] * beta[t][k];
            g[h] = v;
            total += v;
        }
        if total > 0.0 {
            support[t].iter().for_each(|&h| g[h] /= total);
        }
        gammas.push(g);
    }

    let mut xis = Vec::with_capacity(t_len.saturating_sub(1));
    for t in 0..t_len.saturating_sub(1) {
        let (from, to) = (&support[t], &support[t + 1]);
        let mut values = Vec::with_capacity(from.len() * to.len());
        for (k, &i) in from.iter().enumerate() {
            for (l, &j) in to.iter().enumerate() {
                values.push(alpha[t][k] * a.get(i, j) * weighted_next[t][l]);
            }
        }
        xis.push(StepXi {
            from: from.clone(),
            to: to.clone(),
            values,
        });
    }

    Ok(Posterior {
        gammas,
        xis,
        log_likelihood: scale.iter().map(|c| c.ln()).sum(),
    })
}

/// Most probable state path. Every maximization prefers the lowest state
/// index on ties.
pub fn viterbi(params: &HmmParams, obs: &[usize], dir: Direction) -> Result<Vec<usize>> {
    check_sequence(params, obs)?;
    let a = params.transition(dir);
    let b = &params.b;
    let t_len = obs.len();
    let mut support: Vec<Vec<usize>> = Vec::with_capacity(t_len);
    let mut delta: Vec<Vec<f64>> = Vec::with_capacity(t_len);
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(t_len);

    for (t, &o) in obs.iter().enumerate() {
        let s = emitters(params, o);
        let mut d = Vec::with_capacity(s.len());
        let mut ptr = Vec::with_capacity(s.len());
        for &j in &s {
            let log_b = b.get(j, o).ln();
            if t == 0 {
                d.push(params.pi[j].ln() + log_b);
                ptr.push(0);
            } else {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (k, &i) in support[t - 1].iter().enumerate() {
                    let v = delta[t - 1][k] + a.get(i, j).ln();
                    if v > best {
                        best = v;
                        arg = k;
                    }
                }
                d.push(best + log_b);
                ptr.push(arg);
            }
        }
        if !d.iter().any(|v| v.is_finite()) {
            return Err(Error::ZeroProbability { step: t });
        }
        support.push(s);
        delta.push(d);
        back.push(ptr);
    }

    let last = &delta[t_len - 1];
    let mut k = 0;
    for (i, &v) in last.iter().enumerate() {
        if v > last[k] {
            k = i;
        }
    }
    let mut path = vec![0; t_len];
    for t in (0..t_len).rev() {
        path[t] = support[t][k];
        k = back[t][k];
    }
    Ok(path)
}
