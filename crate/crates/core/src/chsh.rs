//! CHSH correlators, the CHSH Bell operator and the postselection
//! scenarios built on them.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::PairModel;
use crate::linalg::{tensor, HermitianMatrix};
use crate::measurements::{dichotomic_projector, mu_setting, subspace_basis_measurement, MeasurementSetting};
use crate::states::{basis_vector, psi4, psi_singletlike, separable_correlated, DensityMatrix, QuantumState};

/// Standard analyser angles `θ_a, θ_b, θ_c, θ_d`.
pub const STANDARD_ANGLES: [f64; 4] = [FRAC_PI_2, 0.0, 3.0 * FRAC_PI_4, FRAC_PI_4];

/// Sign of each correlator in `S = E(a,c) + E(a,d) + E(b,c) - E(b,d)`.
pub const SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

#[derive(Clone, Debug)]
pub struct ChshScenario {
    pub state: DensityMatrix,
    pub a: MeasurementSetting,
    pub b: MeasurementSetting,
    pub c: MeasurementSetting,
    pub d: MeasurementSetting,
}

fn check_dichotomic(s: &MeasurementSetting) -> Result<()> {
    let mut v = s.values();
    v.sort_unstable();
    if v != [-1, 1] {
        return Err(Error::InvalidMeasurement {
            label: s.label().to_string(),
            reason: format!("CHSH settings need outcomes {{+1, -1}}, got {:?}", s.values()),
        });
    }
    Ok(())
}

impl ChshScenario {
    pub fn new(
        state: DensityMatrix,
        a: MeasurementSetting,
        b: MeasurementSetting,
        c: MeasurementSetting,
        d: MeasurementSetting,
    ) -> Result<Self> {
        for s in [&a, &b, &c, &d] {
            check_dichotomic(s)?;
        }
        state.check_dims(a.dim(), c.dim())?;
        state.check_dims(b.dim(), d.dim())?;
        Ok(ChshScenario { state, a, b, c, d })
    }

    /// The four setting pairs in the order (a,c), (a,d), (b,c), (b,d).
    pub fn pairs(&self) -> [(&MeasurementSetting, &MeasurementSetting); 4] {
        [(&self.a, &self.c), (&self.a, &self.d), (&self.b, &self.c), (&self.b, &self.d)]
    }

    pub fn first_party(&self) -> [MeasurementSetting; 2] {
        [self.a.clone(), self.b.clone()]
    }

    pub fn second_party(&self) -> [MeasurementSetting; 2] {
        [self.c.clone(), self.d.clone()]
    }

    pub fn bell_operator(&self) -> Result<HermitianMatrix> {
        bell_operator(&self.a, &self.b, &self.c, &self.d)
    }
}

/// `Tr[(Π_A ⊗ Π_B) ρ]` for the outcomes labelled `outcome_a`, `outcome_b`.
pub fn joint_probability(
    state: &impl QuantumState,
    setting_a: &MeasurementSetting,
    setting_b: &MeasurementSetting,
    outcome_a: i64,
    outcome_b: i64,
) -> Result<f64> {
    state.check_dims(setting_a.dim(), setting_b.dim())?;
    let find = |s: &MeasurementSetting, v: i64| {
        s.outcomes()
            .iter()
            .find(|o| o.value == v)
            .map(|o| o.operator.clone())
            .ok_or_else(|| Error::InvalidArgument(format!("setting '{}' has no outcome {v}", s.label())))
    };
    let pa = find(setting_a, outcome_a)?;
    let pb = find(setting_b, outcome_b)?;
    let p = state.local_expectation(pa.as_matrix(), pb.as_matrix())?;
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(Error::InconsistentProbabilities(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct PairCorrelation {
    pub model: PairModel,
    /// Per-emission correlator (undetected events count as zero).
    pub exact: f64,
    /// Coincidence-normalised correlator.
    pub postselected: f64,
    /// Detected-coincidence probability per emission.
    pub coincidence_total: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelatorSet {
    /// In the order (a,c), (a,d), (b,c), (b,d).
    pub pairs: Vec<PairCorrelation>,
}

impl CorrelatorSet {
    pub fn exact(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.pairs.get(i).map_or(0.0, |p| p.exact))
    }

    pub fn postselected(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.pairs.get(i).map_or(0.0, |p| p.postselected))
    }
}

pub fn correlators(s: &ChshScenario) -> Result<CorrelatorSet> {
    let pairs = s
        .pairs()
        .iter()
        .map(|(x, y)| {
            let model = PairModel::build(&s.state, x, y)?;
            let postselected = model
                .postselected_correlator()
                .ok_or_else(|| Error::ZeroCoincidence(format!("({}, {})", x.label(), y.label())))?;
            Ok(PairCorrelation {
                exact: model.exact_correlator(),
                coincidence_total: model.coincidence_total(),
                postselected,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelatorSet { pairs })
}

/// `E(a,c) + E(a,d) + E(b,c) - E(b,d)`, signed.
pub fn bell_parameter(c: &CorrelatorSet, postselected: bool) -> f64 {
    let e = if postselected { c.postselected() } else { c.exact() };
    e.iter().zip(SIGNS).map(|(x, s)| x * s).sum()
}

/// `Ŝ = Â⊗Ĉ + Â⊗D̂ + B̂⊗Ĉ - B̂⊗D̂` with `Â = Π⁺ - Π⁻`.
pub fn bell_operator(
    a: &MeasurementSetting,
    b: &MeasurementSetting,
    c: &MeasurementSetting,
    d: &MeasurementSetting,
) -> Result<HermitianMatrix> {
    for s in [a, b, c, d] {
        check_dichotomic(s)?;
    }
    if a.dim() != b.dim() || c.dim() != d.dim() {
        return Err(Error::DimensionMismatch(format!(
            "first party {}/{}, second party {}/{}",
            a.dim(),
            b.dim(),
            c.dim(),
            d.dim()
        )));
    }
    let (oa, ob, oc, od) = (a.observable(), b.observable(), c.observable(), d.observable());
    let cpd = oc.add(&od)?;
    let cmd = oc.sub(&od)?;
    let s = tensor(oa.as_matrix(), cpd.as_matrix()).checked_add(&tensor(ob.as_matrix(), cmd.as_matrix()))?;
    HermitianMatrix::new(s)
}

/// Analyser states `cos(θ/2)|0> + sin(θ/2)|1>` and
/// `-sin(θ/2)|0> + cos(θ/2)|1>` embedded in `dim` dimensions, as a ±1
/// projective setting.
pub fn analyser_setting(label: &str, dim: usize, theta: f64) -> Result<MeasurementSetting> {
    let (s, c) = (theta / 2.0).sin_cos();
    let mut plus = basis_vector(dim, 0);
    let mut minus = basis_vector(dim, 1);
    plus[0] = c.into();
    plus[1] = s.into();
    minus[0] = (-s).into();
    minus[1] = c.into();
    subspace_basis_measurement(label, &[plus, minus])
}

/// Two-qubit test on `(|0,1> + |1,0>)/√2` at the standard angles.
pub fn standard() -> Result<ChshScenario> {
    let [ta, tb, tc, td] = STANDARD_ANGLES;
    ChshScenario::new(
        psi_singletlike().density(),
        analyser_setting("a", 2, ta)?,
        analyser_setting("b", 2, tb)?,
        analyser_setting("c", 2, tc)?,
        analyser_setting("d", 2, td)?,
    )
}

/// Classically correlated four-level state with settings that probe
/// different two-dimensional subspaces on each side.
pub fn separable4() -> Result<ChshScenario> {
    let e = |i| basis_vector(4, i);
    ChshScenario::new(
        separable_correlated(4)?,
        subspace_basis_measurement("a", &[e(0), e(1)])?,
        subspace_basis_measurement("b", &[e(2), e(3)])?,
        subspace_basis_measurement("c", &[e(0), e(3)])?,
        subspace_basis_measurement("d", &[e(3), e(1)])?,
    )
}

/// Dichotomic settings `{|φ><φ|, 1 - |φ><φ|}` with `|a> = |c> = |0>`,
/// `|b> = cos θ₁|0> + sin θ₁|1>`, `|d> = cos θ₂|0> + sin θ₂|1>`, in `dim`
/// dimensions per side. Returns `[a, b, c, d]`.
pub fn dichotomic_family(dim: usize, theta1: f64, theta2: f64) -> Result<[MeasurementSetting; 4]> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dimension {dim} < 2")));
    }
    let rot = |t: f64| {
        let mut v = basis_vector(dim, 0);
        v[0] = t.cos().into();
        v[1] = t.sin().into();
        v
    };
    Ok([
        dichotomic_projector("a", &basis_vector(dim, 0), 1.0)?,
        dichotomic_projector("b", &rot(theta1), 1.0)?,
        dichotomic_projector("c", &basis_vector(dim, 0), 1.0)?,
        dichotomic_projector("d", &rot(theta2), 1.0)?,
    ])
}

/// How the scan parameter `r` enters the leakage states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakConvention {
    /// `r` is the amplitude on the leakage subspace `{|2>, |3>}`.
    #[default]
    Leakage,
    /// `r` is the amplitude on the intended subspace `{|0>, |1>}`.
    Target,
}

impl LeakConvention {
    /// The target-subspace amplitude for a given scan parameter.
    pub fn target_amplitude(self, r: f64) -> f64 {
        match self {
            LeakConvention::Leakage => (1.0 - r * r).max(0.0).sqrt(),
            LeakConvention::Target => r,
        }
    }
}

/// Which parties carry the leakage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyVariant {
    /// Both parties measure with leaky states.
    #[default]
    Symmetric,
    /// Only the first party leaks; the second uses ideal analysers.
    Asymmetric,
}

/// `psi4` measured with leakage states at the standard angles.
pub fn anomalous(r: f64, convention: LeakConvention, variant: PartyVariant) -> Result<ChshScenario> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("r = {r} outside (0,1)")));
    }
    let t = convention.target_amplitude(r);
    let [ta, tb, tc, td] = STANDARD_ANGLES;
    let (c, d) = match variant {
        PartyVariant::Symmetric => (mu_setting("c", tc, t)?, mu_setting("d", td, t)?),
        PartyVariant::Asymmetric => (analyser_setting("c", 4, tc)?, analyser_setting("d", 4, td)?),
    };
    ChshScenario::new(psi4().density(), mu_setting("a", ta, t)?, mu_setting("b", tb, t)?, c, d)
}

/// Postselected Bell parameter of [`anomalous`].
pub fn anomalous_s(r: f64, convention: LeakConvention, variant: PartyVariant) -> Result<f64> {
    Ok(bell_parameter(&correlators(&anomalous(r, convention, variant)?)?, true))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanPoint {
    pub r: f64,
    pub s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub r_star: f64,
    pub s_max: f64,
    pub convention: LeakConvention,
    pub variant: PartyVariant,
    pub curve: Vec<ScanPoint>,
}

#[derive(Clone, Copy, Debug)]
pub struct ScanOptions {
    pub lo: f64,
    pub hi: f64,
    /// Coarse grid spacing.
    pub step: f64,
    /// Width at which the golden-section refinement stops.
    pub r_tol: f64,
    pub convention: LeakConvention,
    pub variant: PartyVariant,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            lo: 0.005,
            hi: 0.705,
            step: 0.005,
            r_tol: 1e-5,
            convention: LeakConvention::default(),
            variant: PartyVariant::default(),
        }
    }
}

/// Coarse grid over `[lo, hi]` followed by golden-section refinement around
/// the best grid point.
pub fn anomalous_violation_scan(opts: &ScanOptions) -> Result<ScanResult> {
    let ScanOptions { lo, hi, step, r_tol, convention, variant } = *opts;
    if !(lo > 0.0 && lo < hi && hi < 1.0) {
        return Err(Error::InvalidArgument(format!("scan range [{lo}, {hi}] must satisfy 0 < lo < hi < 1")));
    }
    if !(step > 0.0) || !(r_tol > 0.0) {
        return Err(Error::InvalidArgument("scan step and tolerance must be positive".into()));
    }
    let s_of = |r: f64| anomalous_s(r, convention, variant);

    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let curve = (0..n)
        .map(|i| {
            let r = (lo + i as f64 * step).min(hi);
            Ok(ScanPoint { r, s: s_of(r)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = curve
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.s.total_cmp(&y.1.s).then(y.0.cmp(&x.0)))
        .map(|(i, _)| i)
        .expect("non-empty grid");

    let mut a = curve[best.saturating_sub(1)].r;
    let mut b = curve[(best + 1).min(n - 1)].r;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = s_of(x1)?;
    let mut f2 = s_of(x2)?;
    while b - a > r_tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = s_of(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = s_of(x2)?;
        }
    }
    let mut r_star = 0.5 * (a + b);
    let mut s_max = s_of(r_star)?;
    // A maximum on the range boundary is reported as such.
    if curve[best].s > s_max {
        r_star = curve[best].r;
        s_max = curve[best].s;
    }
    Ok(ScanResult { r_star, s_max, convention, variant, curve })
}

/// Maximum of `S` over the leak/target amplitude ratio; independent of the
/// parameterisation.
pub fn leak_ratio(r: f64, convention: LeakConvention) -> f64 {
    let t = convention.target_amplitude(r);
    (1.0 - t * t).max(0.0).sqrt() / t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{max_entangled, StateVector};

    #[test]
    fn separable4_probabilities() {
        let s = separable4().unwrap();
        let p = |x: &MeasurementSetting, y: &MeasurementSetting, a, b| joint_probability(&s.state, x, y, a, b).unwrap();
        assert!((p(&s.a, &s.c, 1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(p(&s.a, &s.c, 1, -1), 0.0);
        assert_eq!(p(&s.a, &s.c, -1, 1), 0.0);
        assert_eq!(p(&s.a, &s.c, -1, -1), 0.0);
    }

    #[test]
    fn max_entangled_same_projector() {
        let psi = max_entangled(2).unwrap();
        let z = subspace_basis_measurement("z", &[basis_vector(2, 0), basis_vector(2, 1)]).unwrap();
        assert!((joint_probability(&psi, &z, &z, 1, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn separable4_bell_values() {
        let c = correlators(&separable4().unwrap()).unwrap();
        let e = c.exact();
        for (x, want) in e.iter().zip([0.25, 0.25, 0.25, -0.25]) {
            assert!((x - want).abs() < 1e-15);
        }
        assert!((bell_parameter(&c, false) - 1.0).abs() < 1e-12);
        assert!((bell_parameter(&c, true) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn standard_is_tsirelson() {
        let s = standard().unwrap();
        let c = correlators(&s).unwrap();
        assert!((bell_parameter(&c, false) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let op = s.bell_operator().unwrap();
        let tr = s.state.expectation(&op).unwrap();
        assert!((tr - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn product_state_aligned_projectors() {
        let zero = basis_vector(2, 0);
        let rho = StateVector::product(&zero, &zero).unwrap().density();
        let z = analyser_setting("z", 2, 0.0).unwrap();
        let s = ChshScenario::new(rho, z.clone(), z.clone(), z.clone(), z).unwrap();
        let c = correlators(&s).unwrap();
        assert!((c.postselected()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_zero_correlators() {
        assert_eq!(bell_parameter(&CorrelatorSet { pairs: vec![] }, false), 0.0);
    }

    #[test]
    fn collapsed_operator() {
        let [a, _, c, _] = dichotomic_family(3, 0.3, 0.9).unwrap();
        let op = bell_operator(&a, &a, &c, &c).unwrap();
        let two_ac = tensor(a.observable().as_matrix(), c.observable().as_matrix()).scale_real(2.0);
        assert!(op.as_matrix().max_abs_diff(&two_ac) < 1e-15);
        let ev = op.eigenvalues().unwrap();
        assert!(ev[0] <= 2.0 + 1e-12 && *ev.last().unwrap() >= -2.0 - 1e-12);
    }

    #[test]
    fn rejects_non_dichotomic() {
        let e = |i| basis_vector(3, i);
        let three = subspace_basis_measurement("t", &[e(0), e(1), e(2)]).unwrap();
        assert!(bell_operator(&three, &three, &three, &three).is_err());
    }

    #[test]
    fn anomalous_exceeds_tsirelson_somewhere() {
        let s = anomalous_s(0.5, LeakConvention::Leakage, PartyVariant::Symmetric).unwrap();
        assert!(s > 2.0 * 2f64.sqrt());
        let asym = anomalous_s(0.5, LeakConvention::Leakage, PartyVariant::Asymmetric).unwrap();
        assert!((asym - 2.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn conventions_agree_on_ratio() {
        let r = 0.4;
        let t = (1.0_f64 - r * r).sqrt();
        let a = anomalous_s(r, LeakConvention::Leakage, PartyVariant::Symmetric).unwrap();
        let b = anomalous_s(t, LeakConvention::Target, PartyVariant::Symmetric).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((leak_ratio(r, LeakConvention::Leakage) - leak_ratio(t, LeakConvention::Target)).abs() < 1e-12);
    }

    #[test]
    fn scan_rejects_bad_range() {
        let o = ScanOptions { lo: 0.5, hi: 0.4, ..Default::default() };
        assert!(anomalous_violation_scan(&o).is_err());
        let o = ScanOptions { lo: 0.0, ..Default::default() };
        assert!(anomalous_violation_scan(&o).is_err());
    }
}
