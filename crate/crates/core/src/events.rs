//! Per-emission event distributions for one pair of settings.
//!
//! A jointly realised setting contributes all its outcomes to a single run
//! plus the no-detection remainder `1 - Q`. A per-outcome setting is split
//! into one run per outcome, each with the two events "outcome fired" and
//! "nothing fired". The runs of a setting pair are the Cartesian product of
//! both sides' runs; emissions are shared evenly among them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix};
use crate::measurements::{MeasurementSetting, Realization};
use crate::states::QuantumState;

/// Probabilities that drift below zero by less than this are clamped.
pub const CLAMP_TOL: f64 = 1e-12;
/// Allowed deviation of a run's total probability from one.
pub const SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Run {
    /// Outcome indices of the first setting active in this run.
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    /// Row-major `(first.len() + 1) x (second.len() + 1)` table; the last row
    /// and column are the no-detection events.
    pub probs: Vec<f64>,
}

impl Run {
    pub fn cols(&self) -> usize {
        self.second.len() + 1
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.cols() + j]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairModel {
    pub first_label: String,
    pub second_label: String,
    pub first_values: Vec<i64>,
    pub second_values: Vec<i64>,
    pub runs: Vec<Run>,
}

fn run_groups(s: &MeasurementSetting) -> Vec<Vec<usize>> {
    let n = s.outcomes().len();
    match s.realization() {
        Realization::Joint => vec![(0..n).collect()],
        Realization::PerOutcome => (0..n).map(|i| vec![i]).collect(),
    }
}

/// Active outcome operators followed by the remainder `1 - Σ active`.
fn run_operators(s: &MeasurementSetting, active: &[usize]) -> Vec<ComplexMatrix> {
    let mut ops: Vec<ComplexMatrix> = active.iter().map(|&i| s.outcomes()[i].operator.as_matrix().clone()).collect();
    let mut rest = HermitianMatrix::identity(s.dim()).into_matrix();
    for op in &ops {
        rest = &rest - op;
    }
    ops.push(rest);
    ops
}

impl PairModel {
    pub fn build(state: &impl QuantumState, first: &MeasurementSetting, second: &MeasurementSetting) -> Result<Self> {
        state.check_dims(first.dim(), second.dim())?;
        let mut runs = Vec::new();
        for g1 in run_groups(first) {
            let ops1 = run_operators(first, &g1);
            for g2 in run_groups(second) {
                let ops2 = run_operators(second, &g2);
                let mut probs = Vec::with_capacity(ops1.len() * ops2.len());
                for a in &ops1 {
                    for b in &ops2 {
                        probs.push(clamp(state.local_expectation(a, b)?)?);
                    }
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > SUM_TOL {
                    return Err(Error::InconsistentProbabilities(total));
                }
                runs.push(Run { first: g1.clone(), second: g2, probs });
            }
        }
        Ok(PairModel {
            first_label: first.label().to_string(),
            second_label: second.label().to_string(),
            first_values: first.values(),
            second_values: second.values(),
            runs,
        })
    }

    /// Detected-coincidence probabilities per emission, indexed by outcome
    /// index on each side. Each outcome pair is detected in exactly one run.
    pub fn coincidences(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.second_values.len()]; self.first_values.len()];
        for run in &self.runs {
            for (i, &m) in run.first.iter().enumerate() {
                for (j, &n) in run.second.iter().enumerate() {
                    out[m][n] += run.cell(i, j);
                }
            }
        }
        out
    }

    /// `Σ_{m,n} value_m value_n R(m,n)`: the per-emission correlator.
    pub fn exact_correlator(&self) -> f64 {
        self.weighted(|a, b| (a * b) as f64)
    }

    /// Sum of coincidence probabilities.
    pub fn coincidence_total(&self) -> f64 {
        self.weighted(|_, _| 1.0)
    }

    fn weighted(&self, f: impl Fn(i64, i64) -> f64) -> f64 {
        let c = self.coincidences();
        let mut acc = 0.0;
        for (m, row) in c.iter().enumerate() {
            for (n, p) in row.iter().enumerate() {
                acc += f(self.first_values[m], self.second_values[n]) * p;
            }
        }
        acc
    }

    /// Coincidence-normalised correlator; `None` when nothing is detected.
    pub fn postselected_correlator(&self) -> Option<f64> {
        let total = self.coincidence_total();
        (total > 0.0).then(|| self.exact_correlator() / total)
    }
}

fn clamp(p: f64) -> Result<f64> {
    if !p.is_finite() || !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&p) {
        return Err(Error::InconsistentProbabilities(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::{dichotomic_projector, mu_setting};
    use crate::states::{basis_vector, psi4, StateVector};

    #[test]
    fn joint_settings_give_one_run() {
        let a = dichotomic_projector("A", &basis_vector(2, 0), 0.5).unwrap();
        let psi = StateVector::product(&basis_vector(2, 0), &basis_vector(2, 0)).unwrap();
        let m = PairModel::build(&psi, &a, &a).unwrap();
        assert_eq!(m.runs.len(), 1);
        // p|0><0| twice on |00>: (+,+) with 1/4
        assert!((m.coincidences()[0][0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn per_outcome_settings_split_runs() {
        let a = mu_setting("a", 0.3, 0.6).unwrap();
        let c = mu_setting("c", 1.1, 0.6).unwrap();
        let m = PairModel::build(&psi4(), &a, &c).unwrap();
        assert_eq!(m.runs.len(), 4);
        for run in &m.runs {
            assert_eq!(run.probs.len(), 4);
            assert!((run.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = dichotomic_projector("A", &basis_vector(3, 0), 1.0).unwrap();
        let psi = StateVector::product(&basis_vector(2, 0), &basis_vector(2, 0)).unwrap();
        assert!(PairModel::build(&psi, &a, &a).is_err());
    }
}
