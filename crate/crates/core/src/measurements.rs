//! Measurement settings and the fair-sampling audit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, eig_hermitian, Complex, ComplexMatrix, HermitianMatrix};

/// Most negative eigenvalue tolerated in an outcome operator.
pub const PSD_TOL: f64 = 1e-10;
pub const DEFAULT_AUDIT_TOL: f64 = 1e-9;

/// How the outcomes of a setting are realised in the lab.
///
/// `Joint`: one device reports at most one outcome per emission, so the
/// operators must sum to at most the identity and the remainder `1 - Q` is
/// the no-detection event.
///
/// `PerOutcome`: each outcome is a separate filter-and-detect measurement
/// (e.g. a hologram followed by a single detector), run on its own share of
/// emissions. Only each operator individually is bounded by the identity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    #[default]
    Joint,
    PerOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub value: i64,
    pub operator: HermitianMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSetting {
    label: String,
    dim: usize,
    outcomes: Vec<Outcome>,
    realization: Realization,
}

impl MeasurementSetting {
    pub fn new(label: impl Into<String>, outcomes: Vec<Outcome>) -> Result<Self> {
        Self::with_realization(label, outcomes, Realization::Joint)
    }

    pub fn with_realization(
        label: impl Into<String>,
        outcomes: Vec<Outcome>,
        realization: Realization,
    ) -> Result<Self> {
        let label = label.into();
        let bad = |reason: String| Error::InvalidMeasurement { label: label.clone(), reason };
        let dim = outcomes.first().ok_or_else(|| bad("no outcomes".into()))?.operator.dim();
        for (i, o) in outcomes.iter().enumerate() {
            if o.operator.dim() != dim {
                return Err(bad(format!("outcome {i} has dimension {}", o.operator.dim())));
            }
            if outcomes[..i].iter().any(|p| p.value == o.value) {
                return Err(bad(format!("duplicate outcome value {}", o.value)));
            }
            let e = eig_hermitian(&o.operator)?;
            if e.min() < -PSD_TOL {
                return Err(bad(format!("outcome {} is not positive ({:e})", o.value, e.min())));
            }
            if realization == Realization::PerOutcome && e.max() > 1.0 + PSD_TOL {
                return Err(bad(format!("outcome {} exceeds the identity", o.value)));
            }
        }
        let qmax =
            if realization == Realization::Joint { eig_hermitian(&operator_sum(dim, &outcomes))?.max() } else { 0.0 };
        if qmax > 1.0 + PSD_TOL {
            return Err(bad(format!("outcome sum exceeds the identity ({qmax})")));
        }
        Ok(MeasurementSetting { label, dim, outcomes, realization })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn realization(&self) -> Realization {
        self.realization
    }

    pub fn values(&self) -> Vec<i64> {
        self.outcomes.iter().map(|o| o.value).collect()
    }

    /// Detection operator `Q = Σ_m Π_m`.
    pub fn q(&self) -> HermitianMatrix {
        operator_sum(self.dim, &self.outcomes)
    }

    /// `1 - Q`, the no-detection operator of a jointly realised setting.
    pub fn no_detection(&self) -> HermitianMatrix {
        HermitianMatrix::identity(self.dim).sub(&self.q()).expect("shared dim")
    }

    /// The observable `Σ_m value_m Π_m` (e.g. `Π⁺ - Π⁻` for ±1 outcomes).
    pub fn observable(&self) -> HermitianMatrix {
        let mut a = ComplexMatrix::zeros(self.dim, self.dim);
        for o in &self.outcomes {
            a.add_scaled(Complex::real(o.value as f64), o.operator.as_matrix()).expect("shared dim");
        }
        HermitianMatrix::with_tolerance(a, f64::INFINITY).expect("real combination")
    }

    /// Multiplies every outcome operator by `c` in (0, 1], modelling a
    /// setting-independent loss.
    pub fn scaled(&self, c: f64, label: impl Into<String>) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidArgument(format!("scale factor {c} outside (0,1]")));
        }
        let outcomes =
            self.outcomes.iter().map(|o| Outcome { value: o.value, operator: o.operator.scale(c) }).collect();
        Self::with_realization(label, outcomes, self.realization)
    }
}

fn operator_sum(dim: usize, outcomes: &[Outcome]) -> HermitianMatrix {
    let mut q = ComplexMatrix::zeros(dim, dim);
    for o in outcomes {
        q.add_scaled(Complex::ONE, o.operator.as_matrix()).expect("shared dim");
    }
    HermitianMatrix::with_tolerance(q, f64::INFINITY).expect("sum of Hermitian matrices")
}

fn unit_vector(v: &[Complex]) -> Result<()> {
    let n = linalg::norm(v);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n * n));
    }
    Ok(())
}

/// Two outcomes: `+1 ↦ p|φ><φ|` and `-1 ↦ 1 - p|φ><φ|`, so `Q = 1`.
pub fn dichotomic_projector(label: impl Into<String>, phi: &[Complex], p: f64) -> Result<MeasurementSetting> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("detection weight p = {p} outside (0,1]")));
    }
    unit_vector(phi)?;
    let plus = HermitianMatrix::projector(phi).scale(p);
    let minus = HermitianMatrix::identity(phi.len()).sub(&plus)?;
    MeasurementSetting::new(label, vec![Outcome { value: 1, operator: plus }, Outcome { value: -1, operator: minus }])
}

/// One rank-one projector per basis state. Two states get the values
/// `+1, -1`; longer lists get `0, 1, 2, ...`.
pub fn subspace_basis_measurement(label: impl Into<String>, basis: &[Vec<Complex>]) -> Result<MeasurementSetting> {
    let values: Vec<i64> = if basis.len() == 2 { vec![1, -1] } else { (0..basis.len() as i64).collect() };
    subspace_basis_measurement_with_values(label, basis, &values)
}

pub fn subspace_basis_measurement_with_values(
    label: impl Into<String>,
    basis: &[Vec<Complex>],
    values: &[i64],
) -> Result<MeasurementSetting> {
    if basis.len() != values.len() {
        return Err(Error::InvalidArgument("one outcome value per basis state".into()));
    }
    for (i, u) in basis.iter().enumerate() {
        for (j, v) in basis.iter().enumerate().take(i + 1) {
            if u.len() != v.len() {
                return Err(Error::DimensionMismatch("basis states differ in dimension".into()));
            }
            let ip = linalg::inner(v, u);
            let expect = if i == j { Complex::ONE } else { Complex::ZERO };
            if (ip - expect).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "basis states {j} and {i} are not orthonormal (<{j}|{i}> = {ip})"
                )));
            }
        }
    }
    let outcomes = basis
        .iter()
        .zip(values)
        .map(|(v, &value)| Outcome { value, operator: HermitianMatrix::projector(v) })
        .collect();
    MeasurementSetting::new(label, outcomes)
}

/// The two four-dimensional leakage states
///
/// `μ₊(θ, r) = r [cos(θ/2)|0> + sin(θ/2)|1>] + √(1-r²) [cos θ |2> + sin θ |3>]`
///
/// and `μ₋(θ, r) = μ₊(θ + π, r)`. They are not orthogonal:
/// `<μ₊|μ₋> = -(1 - r²)`.
pub fn mu_basis(theta: f64, r: f64) -> Result<(Vec<Complex>, Vec<Complex>)> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!("r = {r} outside (0,1]")));
    }
    Ok((mu_plus(theta, r), mu_plus(theta + PI, r)))
}

fn mu_plus(theta: f64, r: f64) -> Vec<Complex> {
    let leak = (1.0 - r * r).max(0.0).sqrt();
    [r * (theta / 2.0).cos(), r * (theta / 2.0).sin(), leak * theta.cos(), leak * theta.sin()]
        .iter()
        .map(|&x| Complex::real(x))
        .collect()
}

/// `{μ₊, μ₋}` as a ±1 setting whose two outcomes are realised separately.
pub fn mu_setting(label: impl Into<String>, theta: f64, r: f64) -> Result<MeasurementSetting> {
    let (p, m) = mu_basis(theta, r)?;
    MeasurementSetting::with_realization(
        label,
        vec![
            Outcome { value: 1, operator: HermitianMatrix::projector(&p) },
            Outcome { value: -1, operator: HermitianMatrix::projector(&m) },
        ],
        Realization::PerOutcome,
    )
}

/// Cosine/sine analyser state `cos(θ/2)|0> + sin(θ/2)|1>` in `dim`
/// dimensions.
pub fn analyser_state(dim: usize, theta: f64) -> Vec<Complex> {
    let mut v = vec![Complex::ZERO; dim];
    v[0] = Complex::real((theta / 2.0).cos());
    v[1] = Complex::real((theta / 2.0).sin());
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

/// Offsets of the Fourier-type analysers: `α = (0, 1/2)`, `β = (1/4, -1/4)`.
pub fn cglmp_offset(party: Party, setting: usize) -> f64 {
    match (party, setting) {
        (Party::A, 0) => 0.0,
        (Party::A, _) => 0.5,
        (Party::B, 0) => 0.25,
        (Party::B, _) => -0.25,
    }
}

/// `|v>_a = d^{-1/2} Σ_j exp[i 2π/d j(v + α_a)] |j>` for party A and
/// `|w>_b = d^{-1/2} Σ_j exp[i 2π/d j(-w + β_b)] |j>` for party B.
pub fn cglmp_vector(party: Party, setting: usize, d: usize, outcome: usize) -> Vec<Complex> {
    let off = cglmp_offset(party, setting);
    let shift = match party {
        Party::A => outcome as f64 + off,
        Party::B => -(outcome as f64) + off,
    };
    let amp = 1.0 / (d as f64).sqrt();
    (0..d).map(|j| Complex::cis(2.0 * PI / d as f64 * j as f64 * shift) * amp).collect()
}

pub fn cglmp_basis(party: Party, setting: usize, d: usize) -> Result<MeasurementSetting> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("d = {d} < 2")));
    }
    if setting > 1 {
        return Err(Error::InvalidArgument(format!("setting {setting} not in {{0,1}}")));
    }
    let name = match party {
        Party::A => "A",
        Party::B => "B",
    };
    let outcomes = (0..d)
        .map(|v| Outcome { value: v as i64, operator: HermitianMatrix::projector(&cglmp_vector(party, setting, d, v)) })
        .collect();
    MeasurementSetting::new(format!("{name}{setting}"), outcomes)
}

#[derive(Clone, Debug, Serialize)]
pub struct SettingEfficiency {
    pub label: String,
    pub epsilon: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FairSamplingReport {
    pub passed: bool,
    #[serde(serialize_with = "ser_hermitian")]
    pub reference_q: HermitianMatrix,
    pub per_setting_efficiency: Vec<SettingEfficiency>,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl FairSamplingReport {
    pub fn epsilon(&self, label: &str) -> Option<f64> {
        self.per_setting_efficiency.iter().find(|e| e.label == label).map(|e| e.epsilon)
    }
}

fn ser_hermitian<S: serde::Serializer>(m: &HermitianMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.as_matrix().to_rows().serialize(s)
}

/// Checks whether every setting's detection operator is a multiple of one
/// common operator, `Q_k = ε(k) Q̂`.
///
/// `Q̂` is seeded with the detection operator of largest trace; each `ε(k)`
/// is the least-squares factor `Tr(Q_k Q̂) / Tr(Q̂²)`, and the report is
/// rescaled so the largest `ε` is 1.
pub fn audit_fair_sampling(settings: &[MeasurementSetting], tol: f64) -> Result<FairSamplingReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("audit tolerance {tol}")));
    }
    let first = settings.first().ok_or_else(|| Error::InvalidArgument("no settings to audit".into()))?;
    if let Some(s) = settings.iter().find(|s| s.dim() != first.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "setting '{}' has dimension {}, '{}' has {}",
            s.label(),
            s.dim(),
            first.label(),
            first.dim()
        )));
    }
    let qs: Vec<HermitianMatrix> = settings.iter().map(MeasurementSetting::q).collect();
    let mut star = 0;
    for (k, q) in qs.iter().enumerate() {
        if q.trace() > qs[star].trace() {
            star = k;
        }
    }
    let qhat = &qs[star];
    let norm2 = qhat.trace_product(qhat)?;
    if norm2 == 0.0 {
        return Err(Error::InvalidArgument("every setting has a zero detection operator".into()));
    }
    let raw: Vec<f64> = qs.iter().map(|q| q.trace_product(qhat).map(|x| x / norm2)).collect::<Result<_>>()?;
    let top = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let reference = qhat.scale(top);

    let mut rows = Vec::with_capacity(settings.len());
    let mut max_residual: f64 = 0.0;
    for ((s, q), e) in settings.iter().zip(&qs).zip(&raw) {
        let fit = qhat.scale(*e);
        let residual = q.as_matrix().checked_sub(fit.as_matrix())?.frobenius_norm();
        max_residual = max_residual.max(residual);
        rows.push(SettingEfficiency { label: s.label().to_string(), epsilon: e / top, residual });
    }
    let passed = max_residual <= tol && rows.iter().all(|r| r.epsilon > 0.0 && r.epsilon <= 1.0 + tol);
    Ok(FairSamplingReport {
        passed,
        reference_q: reference,
        per_setting_efficiency: rows,
        max_residual,
        tolerance: tol,
    })
}

// ---- JSON -----------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct OutcomeJson {
    pub value: i64,
    pub matrix: Vec<Vec<Complex>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SettingJson {
    pub label: String,
    pub outcomes: Vec<OutcomeJson>,
    #[serde(default)]
    pub realization: Realization,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeasurementSetJson {
    pub dim: usize,
    pub settings: Vec<SettingJson>,
}

/// Hermiticity tolerance for operators read from text files.
const FILE_HERMITIAN_TOL: f64 = 1e-9;

impl MeasurementSetJson {
    pub fn into_settings(self) -> Result<Vec<MeasurementSetting>> {
        let dim = self.dim;
        self.settings
            .into_iter()
            .map(|s| {
                let label = s.label;
                let outcomes = s
                    .outcomes
                    .into_iter()
                    .enumerate()
                    .map(|(i, o)| {
                        let m = ComplexMatrix::from_rows(&o.matrix)
                            .map_err(|e| Error::Input(format!("settings['{label}'].outcomes[{i}].matrix: {e}")))?;
                        if m.rows() != dim || m.cols() != dim {
                            return Err(Error::Input(format!(
                                "settings['{label}'].outcomes[{i}].matrix is {}x{}, expected {dim}x{dim}",
                                m.rows(),
                                m.cols()
                            )));
                        }
                        let operator = HermitianMatrix::with_tolerance(m, FILE_HERMITIAN_TOL)
                            .map_err(|e| Error::Input(format!("settings['{label}'].outcomes[{i}].matrix: {e}")))?;
                        Ok(Outcome { value: o.value, operator })
                    })
                    .collect::<Result<Vec<_>>>()?;
                MeasurementSetting::with_realization(label, outcomes, s.realization)
            })
            .collect()
    }

    pub fn from_settings(settings: &[MeasurementSetting]) -> Result<Self> {
        let dim = settings.first().map_or(0, MeasurementSetting::dim);
        if settings.iter().any(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch("settings differ in dimension".into()));
        }
        Ok(MeasurementSetJson {
            dim,
            settings: settings
                .iter()
                .map(|s| SettingJson {
                    label: s.label.clone(),
                    realization: s.realization,
                    outcomes: s
                        .outcomes
                        .iter()
                        .map(|o| OutcomeJson { value: o.value, matrix: o.operator.as_matrix().to_rows() })
                        .collect(),
                })
                .collect(),
        })
    }
}
