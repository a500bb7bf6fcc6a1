//! Euclidean error metrics between true and predicted trajectories.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, TrajectoryTrue};

/// Distance in meters between two cell centers on a grid of cell size `g`.
pub fn ed(a: Cell, b: Cell, g: f64) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    g * dr.hypot(dc)
}

/// Per-step distances between two aligned trajectories.
pub fn step_errors(truth: &TrajectoryTrue, pred: &TrajectoryTrue, g: f64) -> Result<Vec<f64>> {
    if truth.len() != pred.len() {
        return Err(Error::Mismatch {
            id: truth.id().to_string(),
            reason: format!("{} true points against {} predicted", truth.len(), pred.len()),
        });
    }
    truth
        .points()
        .iter()
        .zip(pred.points())
        .map(|(a, b)| {
            if a.t != b.t {
                return Err(Error::Mismatch {
                    id: truth.id().to_string(),
                    reason: format!("timestamp {} against {}", a.t, b.t),
                });
            }
            Ok(ed(a.cell, b.cell, g))
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

pub fn aed(truth: &TrajectoryTrue, pred: &TrajectoryTrue, g: f64) -> Result<f64> {
    Ok(mean(&step_errors(truth, pred, g)?))
}

pub fn max_ed(truth: &TrajectoryTrue, pred: &TrajectoryTrue, g: f64) -> Result<f64> {
    Ok(max(&step_errors(truth, pred, g)?))
}

/// Pairs predictions with truths by id. The result follows `truths` order;
/// every truth needs exactly one prediction and vice versa.
pub fn pair_by_id<'a>(
    truths: &'a [TrajectoryTrue],
    preds: &'a [TrajectoryTrue],
) -> Result<Vec<(&'a TrajectoryTrue, &'a TrajectoryTrue)>> {
    if truths.is_empty() {
        return Err(Error::IdMismatch("no trajectories to evaluate".into()));
    }
    let mut by_id: HashMap<&str, &TrajectoryTrue> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id(), p).is_some() {
            return Err(Error::IdMismatch(format!("duplicate prediction id {}", p.id())));
        }
    }
    let pairs = truths
        .iter()
        .map(|t| {
            by_id
                .remove(t.id())
                .map(|p| (t, p))
                .ok_or_else(|| Error::IdMismatch(format!("no prediction for id {}", t.id())))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::IdMismatch(format!("prediction {extra} has no ground truth")));
    }
    Ok(pairs)
}

pub fn a2ed(truths: &[TrajectoryTrue], preds: &[TrajectoryTrue], g: f64) -> Result<f64> {
    Ok(evaluate(truths, preds, g)?.a2ed_m)
}

pub fn amed(truths: &[TrajectoryTrue], preds: &[TrajectoryTrue], g: f64) -> Result<f64> {
    Ok(evaluate(truths, preds, g)?.amed_m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryError {
    pub id: String,
    pub steps: usize,
    pub aed_m: f64,
    pub max_ed_m: f64,
    pub step_ed_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub trajectories: Vec<TrajectoryError>,
    pub a2ed_m: f64,
    pub amed_m: f64,
}

pub fn evaluate(truths: &[TrajectoryTrue], preds: &[TrajectoryTrue], g: f64) -> Result<EvalReport> {
    let trajectories = pair_by_id(truths, preds)?
        .into_iter()
        .map(|(t, p)| {
            let step_ed_m = step_errors(t, p, g)?;
            Ok(TrajectoryError {
                id: t.id().to_string(),
                steps: step_ed_m.len(),
                aed_m: mean(&step_ed_m),
                max_ed_m: max(&step_ed_m),
                step_ed_m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let s = trajectories.len() as f64;
    let a2ed_m = trajectories.iter().map(|e| e.aed_m).sum::<f64>() / s;
    let amed_m = trajectories.iter().map(|e| e.max_ed_m).sum::<f64>() / s;
    Ok(EvalReport {
        trajectories,
        a2ed_m,
        amed_m,
    })
}

impl EvalReport {
    /// One row per trajectory followed by a footer row with the corpus
    /// aggregates in the error columns.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["id", "T", "AED_m", "maxED_m"])?;
        for e in &self.trajectories {
            out.write_record([
                e.id.clone(),
                e.steps.to_string(),
                format!("{:.6}", e.aed_m),
                format!("{:.6}", e.max_ed_m),
            ])?;
        }
        out.write_record([
            "ALL".to_string(),
            self.trajectories.iter().map(|e| e.steps).sum::<usize>().to_string(),
            format!("{:.6}", self.a2ed_m),
            format!("{:.6}", self.amed_m),
        ])?;
        out.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimedCell;
    use proptest::prelude::*;

    fn traj(id: &str, cells: &[(usize, usize)]) -> TrajectoryTrue {
        let points = cells
            .iter()
            .enumerate()
            .map(|(i, &(row, col))| TimedCell {
                t: i as i64,
                cell: Cell { row, col },
            })
            .collect();
        TrajectoryTrue::new(id, points).unwrap()
    }

    #[test]
    fn distances() {
        let a = Cell { row: 2, col: 2 };
        assert_eq!(ed(a, a, 100.0), 0.0);
        assert_eq!(ed(a, Cell { row: 2, col: 3 }, 100.0), 100.0);
        assert!((ed(a, Cell { row: 5, col: 6 }, 99.383) - 496.915).abs() < 1e-9);
    }

    #[test]
    fn trajectory_averages() {
        let t = traj("a", &[(0, 0), (0, 0), (0, 0)]);
        let p = traj("a", &[(0, 0), (1, 0), (0, 2)]);
        assert!((aed(&t, &p, 100.0).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(max_ed(&t, &p, 100.0).unwrap(), 200.0);
        assert_eq!(aed(&t, &t, 100.0).unwrap(), 0.0);
        let shifted = traj("a", &[(0, 1), (0, 1), (0, 1)]);
        assert_eq!(aed(&t, &shifted, 100.0).unwrap(), 100.0);
    }

    #[test]
    fn corpus_aggregates() {
        let truths = vec![traj("a", &[(0, 0), (0, 0)]), traj("b", &[(0, 0), (0, 0)])];
        let preds = vec![traj("b", &[(0, 1), (0, 5)]), traj("a", &[(0, 1), (0, 1)])];
        let r = evaluate(&truths, &preds, 100.0).unwrap();
        assert!((r.a2ed_m - 200.0).abs() < 1e-12);
        assert!((r.amed_m - 300.0).abs() < 1e-12);
        assert_eq!(r.trajectories[0].id, "a");
        assert_eq!(a2ed(&truths[..1], &preds[1..], 100.0).unwrap(), 100.0);
    }

    #[test]
    fn pairing_errors() {
        let truths = vec![traj("a", &[(0, 0)])];
        assert!(matches!(
            evaluate(&truths, &[traj("b", &[(0, 0)])], 1.0),
            Err(Error::IdMismatch(_))
        ));
        let two = vec![traj("a", &[(0, 0)]), traj("c", &[(0, 0)])];
        assert!(matches!(evaluate(&truths, &two, 1.0), Err(Error::IdMismatch(_))));
        assert!(matches!(
            evaluate(&truths, &[traj("a", &[(0, 0), (1, 1)])], 1.0),
            Err(Error::Mismatch { .. })
        ));
    }

    #[test]
    fn csv_has_footer() {
        let truths = vec![traj("a", &[(0, 0), (0, 0)])];
        let preds = vec![traj("a", &[(0, 0), (0, 2)])];
        let mut buf = Vec::new();
        evaluate(&truths, &preds, 10.0).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "id,T,AED_m,maxED_m\na,2,10.000000,20.000000\nALL,2,10.000000,20.000000\n"
        );
    }

    fn cell() -> impl Strategy<Value = Cell> {
        (0usize..50, 0usize..50).prop_map(|(row, col)| Cell { row, col })
    }

    proptest! {
        #[test]
        fn ed_is_a_metric(a in cell(), b in cell(), c in cell(), g in 1.0f64..500.0) {
            prop_assert_eq!(ed(a, a, g), 0.0);
            prop_assert_eq!(ed(a, b, g), ed(b, a, g));
            prop_assert!(ed(a, c, g) <= ed(a, b, g) + ed(b, c, g) + 1e-9);
        }

        #[test]
        fn amed_dominates_a2ed(paths in prop::collection::vec(prop::collection::vec((cell(), cell()), 1..8), 1..6)) {
            let truths: Vec<_> = paths.iter().enumerate().map(|(i, p)| {
                let cells: Vec<_> = p.iter().map(|(a, _)| (a.row, a.col)).collect();
                traj(&format!("t{i}"), &cells)
            }).collect();
            let preds: Vec<_> = paths.iter().enumerate().map(|(i, p)| {
                let cells: Vec<_> = p.iter().map(|(_, b)| (b.row, b.col)).collect();
                traj(&format!("t{i}"), &cells)
            }).collect();
            let r = evaluate(&truths, &preds, 50.0).unwrap();
            prop_assert!(r.amed_m >= r.a2ed_m - 1e-9);
        }
    }
}
