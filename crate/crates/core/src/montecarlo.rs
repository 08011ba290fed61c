//! Finite-statistics simulation of Bell experiments.
//!
//! Every emission of a setting pair yields one event: a coincidence, a
//! single-sided detection, or nothing. Counts are turned into per-emission
//! rates and fed to the per-emission or postselected estimators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cglmp;
use crate::chsh::{ChshScenario, SIGNS};
use crate::error::{Error, Result};
use crate::events::PairModel;
use crate::measurements::{MeasurementSetJson, MeasurementSetting};
use crate::states::{DensityMatrix, State};

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub state: DensityMatrix,
    pub pairs: Vec<(MeasurementSetting, MeasurementSetting)>,
    pub emissions_per_pair: u64,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn new(
        state: DensityMatrix,
        pairs: Vec<(MeasurementSetting, MeasurementSetting)>,
        emissions_per_pair: u64,
        seed: u64,
    ) -> Result<Self> {
        if emissions_per_pair == 0 {
            return Err(Error::InvalidArgument("emissions_per_pair must be at least 1".into()));
        }
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("plan has no setting pairs".into()));
        }
        Ok(ExperimentPlan { state, pairs, emissions_per_pair, seed })
    }

    /// The four CHSH pairs of a scenario, in estimator order.
    pub fn chsh(s: &ChshScenario, emissions_per_pair: u64, seed: u64) -> Result<Self> {
        let pairs = s.pairs().iter().map(|(x, y)| ((*x).clone(), (*y).clone())).collect();
        Self::new(s.state.clone(), pairs, emissions_per_pair, seed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    /// Outcome indices of the first setting active in this run.
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub emissions: u64,
    /// Row-major `(first.len() + 1) x (second.len() + 1)`; the last row and
    /// column count emissions where that side saw nothing.
    pub counts: Vec<u64>,
}

impl RunCounts {
    fn cols(&self) -> usize {
        self.second.len() + 1
    }

    fn rate(&self, i: usize, j: usize) -> f64 {
        if self.emissions == 0 {
            return 0.0;
        }
        self.counts[i * self.cols() + j] as f64 / self.emissions as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub first_label: String,
    pub second_label: String,
    pub first_values: Vec<i64>,
    pub second_values: Vec<i64>,
    pub runs: Vec<RunCounts>,
    /// Coincidences by outcome index, summed over runs.
    pub coincidences: Vec<Vec<u64>>,
    pub first_only: u64,
    pub second_only: u64,
    pub neither: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.runs.iter().map(|r| r.counts.iter().sum::<u64>()).sum()
    }

    /// `Σ_cells g(m, n) R(m, n)` and its delta-method variance, treating each
    /// run as an independent multinomial; `g` sees outcome indices.
    fn linear(&self, g: impl Fn(usize, usize) -> f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut var = 0.0;
        for run in &self.runs {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for (i, &m) in run.first.iter().enumerate() {
                for (j, &n) in run.second.iter().enumerate() {
                    let r = run.rate(i, j);
                    let gv = g(m, n);
                    s1 += gv * r;
                    s2 += gv * gv * r;
                }
            }
            value += s1;
            if run.emissions > 0 {
                var += (s2 - s1 * s1).max(0.0) / run.emissions as f64;
            }
        }
        (value, var)
    }

    /// Per-emission correlator `Σ mn R(m,n)` with its variance.
    pub fn per_emission(&self) -> (f64, f64) {
        self.linear(|m, n| (self.first_values[m] * self.second_values[n]) as f64)
    }

    /// `Σ mn R / Σ R` with its variance.
    pub fn postselected(&self) -> Result<(f64, f64)> {
        let (den, _) = self.linear(|_, _| 1.0);
        if den <= 0.0 {
            return Err(Error::ZeroCoincidence(format!("({}, {})", self.first_label, self.second_label)));
        }
        let (num, _) = self.per_emission();
        let e = num / den;
        // dE/dR(m,n) = (mn - E) / D
        let (_, var) = self.linear(|m, n| ((self.first_values[m] * self.second_values[n]) as f64 - e) / den);
        Ok((e, var))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub emissions_per_pair: u64,
    pub seed: u64,
    pub pairs: Vec<PairCounts>,
}

/// Emissions of `n` shared among `runs` runs; the first `n % runs` runs get
/// one extra.
fn split(n: u64, runs: usize) -> Vec<u64> {
    let r = runs as u64;
    (0..r).map(|i| n / r + u64::from(i < n % r)).collect()
}

fn sample_run(rng: &mut ChaCha8Rng, probs: &[f64], emissions: u64) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let last = probs.len() - 1;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..emissions {
        let u: f64 = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(last);
        counts[k] += 1;
    }
    counts
}

fn simulate_pair(model: &PairModel, n: u64, seed: u64, stream: u64) -> PairCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let shares = split(n, model.runs.len());
    let mut coincidences = vec![vec![0u64; model.second_values.len()]; model.first_values.len()];
    let (mut first_only, mut second_only, mut neither) = (0, 0, 0);
    let runs: Vec<RunCounts> = model
        .runs
        .iter()
        .zip(shares)
        .map(|(run, emissions)| {
            let counts = sample_run(&mut rng, &run.probs, emissions);
            let (n1, n2) = (run.first.len(), run.second.len());
            for i in 0..=n1 {
                for j in 0..=n2 {
                    let c = counts[i * (n2 + 1) + j];
                    match (i < n1, j < n2) {
                        (true, true) => coincidences[run.first[i]][run.second[j]] += c,
                        (true, false) => first_only += c,
                        (false, true) => second_only += c,
                        (false, false) => neither += c,
                    }
                }
            }
            RunCounts { first: run.first.clone(), second: run.second.clone(), emissions, counts }
        })
        .collect();
    PairCounts {
        first_label: model.first_label.clone(),
        second_label: model.second_label.clone(),
        first_values: model.first_values.clone(),
        second_values: model.second_values.clone(),
        runs,
        coincidences,
        first_only,
        second_only,
        neither,
    }
}

/// Samples every setting pair independently. Pair `i` draws from a
/// ChaCha8 generator seeded with `plan.seed` on stream `i`, so the record is
/// bit-identical across runs and thread counts.
pub fn simulate(plan: &ExperimentPlan) -> Result<CountRecord> {
    let models = plan.pairs.iter().map(|(x, y)| PairModel::build(&plan.state, x, y)).collect::<Result<Vec<_>>>()?;
    let pairs = models
        .par_iter()
        .enumerate()
        .map(|(i, m)| simulate_pair(m, plan.emissions_per_pair, plan.seed, i as u64))
        .collect();
    Ok(CountRecord { emissions_per_pair: plan.emissions_per_pair, seed: plan.seed, pairs })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    Postselected,
    PerEmission,
}

#[derive(Clone, Debug, Serialize)]
pub struct BellEstimate {
    pub s: f64,
    pub stderr: f64,
    pub correlators: Vec<f64>,
    pub correlator_stderr: Vec<f64>,
    pub mode: EstimatorMode,
}

/// CHSH estimate from four pairs in the order (a,c), (a,d), (b,c), (b,d).
pub fn estimate_bell(counts: &CountRecord, mode: EstimatorMode) -> Result<BellEstimate> {
    if counts.pairs.len() != 4 {
        return Err(Error::InvalidArgument(format!(
            "CHSH estimate needs 4 setting pairs, record has {}",
            counts.pairs.len()
        )));
    }
    let mut s = 0.0;
    let mut var = 0.0;
    let mut correlators = Vec::with_capacity(4);
    let mut correlator_stderr = Vec::with_capacity(4);
    for (p, sign) in counts.pairs.iter().zip(SIGNS) {
        let (e, v) = match mode {
            EstimatorMode::PerEmission => p.per_emission(),
            EstimatorMode::Postselected => p.postselected()?,
        };
        s += sign * e;
        var += v;
        correlators.push(e);
        correlator_stderr.push(v.sqrt());
    }
    Ok(BellEstimate { s, stderr: var.sqrt(), correlators, correlator_stderr, mode })
}

/// CGLMP estimate from four complete-basis pairs in the order
/// (A0,B0), (A0,B1), (A1,B0), (A1,B1), with outcome values `0..d`.
pub fn estimate_cglmp(counts: &CountRecord, d: usize) -> Result<(f64, f64)> {
    if counts.pairs.len() != 4 {
        return Err(Error::InvalidArgument("CGLMP estimate needs 4 setting pairs".into()));
    }
    let c = cglmp::coefficients(d);
    let mut s = 0.0;
    let mut var = 0.0;
    for (idx, p) in counts.pairs.iter().enumerate() {
        let expect: Vec<i64> = (0..d as i64).collect();
        if p.first_values != expect || p.second_values != expect {
            return Err(Error::InvalidArgument(format!(
                "pair ({}, {}) does not have outcomes 0..{d}",
                p.first_label, p.second_label
            )));
        }
        let (a, b) = (idx / 2, idx % 2);
        let coef = &c[a][b];
        let (x, v) = p.linear(|m, n| coef[(m + d - n) % d]);
        s += x;
        var += v;
    }
    Ok((s, var.sqrt()))
}

/// JSON plan: a state, two measurement sets, and the pairs to run by label.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanJson {
    pub state: State,
    pub first: MeasurementSetJson,
    pub second: MeasurementSetJson,
    pub pairs: Vec<[String; 2]>,
    pub emissions_per_pair: u64,
    pub seed: u64,
}

impl PlanJson {
    pub fn into_plan(self) -> Result<ExperimentPlan> {
        let first = self.first.into_settings()?;
        let second = self.second.into_settings()?;
        let find = |set: &[MeasurementSetting], label: &str, side: &str| {
            set.iter()
                .find(|s| s.label() == label)
                .cloned()
                .ok_or_else(|| Error::Input(format!("pairs: no setting labelled '{label}' in '{side}'")))
        };
        let pairs = self
            .pairs
            .iter()
            .map(|[x, y]| Ok((find(&first, x, "first")?, find(&second, y, "second")?)))
            .collect::<Result<Vec<_>>>()?;
        ExperimentPlan::new(self.state.density(), pairs, self.emissions_per_pair, self.seed)
    }

    pub fn from_scenario(s: &ChshScenario, emissions_per_pair: u64, seed: u64) -> Result<Self> {
        Ok(PlanJson {
            state: State::Mixed(s.state.clone()),
            first: MeasurementSetJson::from_settings(&s.first_party())?,
            second: MeasurementSetJson::from_settings(&s.second_party())?,
            pairs: s.pairs().iter().map(|(x, y)| [x.label().to_string(), y.label().to_string()]).collect(),
            emissions_per_pair,
            seed,
        })
    }
}
