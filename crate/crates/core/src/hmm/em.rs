use rayon::prelude::*;

use super::inference::{forward_backward, Posterior};
use super::matrix::Matrix;
use super::params::{normalize, EmissionMask, HmmParams};
use super::Direction;
use crate::error::{Error, Result};

/// One pooled Baum-Welch iteration over `sequences`.
///
/// Expected counts are summed over all sequences (in slice order) before
/// normalizing. `pi`, the emission matrix and the `dir` transition matrix
/// are re-estimated; the other transition matrix is returned untouched.
/// Rows with no expected count keep their prior values. The returned
/// log-likelihood is that of `sequences` under the input parameters.
pub fn baum_welch_pass(
    params: &HmmParams,
    sequences: &[Vec<usize>],
    dir: Direction,
    mask: Option<&EmissionMask>,
) -> Result<(HmmParams, f64)> {
    if sequences.is_empty() {
        return Err(Error::Config("Baum-Welch needs at least one sequence".into()));
    }
    let posteriors: Vec<Posterior> = sequences
        .par_iter()
        .map(|obs| forward_backward(params, obs, dir))
        .collect::<Result<_>>()?;

    let n = params.n_states();
    let m = params.n_symbols();
    let mut pi_num = vec![0.0; n];
    let mut a_num = Matrix::zeros(n, n);
    let mut a_den = vec![0.0; n];
    let mut b_num = Matrix::zeros(n, m);
    let mut b_den = vec![0.0; n];
    let mut total_ll = 0.0;

    for (obs, post) in sequences.iter().zip(&posteriors) {
        total_ll += post.log_likelihood;
        for (h, v) in post.gammas[0].iter().enumerate() {
            pi_num[h] += v;
        }
        for (t, (&o, g)) in obs.iter().zip(&post.gammas).enumerate() {
            let has_next = t + 1 < obs.len();
            for (h, &v) in g.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                b_num.row_mut(h)[o] += v;
                b_den[h] += v;
                if has_next {
                    a_den[h] += v;
                }
            }
        }
        for xi in &post.xis {
            let width = xi.to.len();
            for (k, &i) in xi.from.iter().enumerate() {
                let row = a_num.row_mut(i);
                for (l, &j) in xi.to.iter().enumerate() {
                    row[j] += xi.values[k * width + l];
                }
            }
        }
    }

    let mut next = params.clone();
    if normalize(&mut pi_num) {
        next.pi = pi_num;
    }
    let a = next.transition_mut(dir);
    for (h, &den) in a_den.iter().enumerate() {
        if den > 0.0 && a_num.normalize_row(h) {
            a.row_mut(h).copy_from_slice(a_num.row(h));
        }
    }
    for (h, &den) in b_den.iter().enumerate() {
        if den <= 0.0 {
            continue;
        }
        if let Some(mask) = mask {
            mask.apply_row(&mut b_num, h);
        }
        if b_num.normalize_row(h) {
            next.b.row_mut(h).copy_from_slice(b_num.row(h));
        }
    }
    Ok((next, total_ll))
}
