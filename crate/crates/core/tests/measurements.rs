mod common;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use bellscope::linalg::{inner, Complex, ComplexMatrix, HermitianMatrix};
use bellscope::measurements::{
    audit_fair_sampling, cglmp_basis, cglmp_vector, dichotomic_projector, mu_basis, mu_setting,
    subspace_basis_measurement, MeasurementSetJson, MeasurementSetting, Outcome, Party, DEFAULT_AUDIT_TOL,
};
use bellscope::states::{basis_vector, DensityMatrix};
use bellscope::QuantumState;
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn completion_defect(s: &MeasurementSetting) -> f64 {
    let mut total = s.no_detection().into_matrix();
    for o in s.outcomes() {
        total = total.checked_add(o.operator.as_matrix()).unwrap();
    }
    total.max_abs_diff(&ComplexMatrix::identity(s.dim()))
}

#[test]
fn dichotomic_projector_completes_to_identity() {
    let s = dichotomic_projector("x", &basis_vector(3, 0), 1.0).unwrap();
    assert_eq!(s.outcomes()[0].operator, HermitianMatrix::projector(&basis_vector(3, 0)));
    assert!(s.q().as_matrix().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);

    let mut phi = vec![Complex::ZERO; 4];
    phi[0] = Complex::real(FRAC_1_SQRT_2);
    phi[1] = Complex::real(FRAC_1_SQRT_2);
    let s = dichotomic_projector("y", &phi, 0.7).unwrap();
    let mut r = rng(3);
    for _ in 0..10 {
        let rho = DensityMatrix::mixture(&[(1.0, random_state(2, 2, &mut r))]).unwrap();
        let q = s.q();
        assert_close(rho.matrix().trace_product(&q).unwrap(), 1.0, 1e-12, "Tr(Q rho)");
    }
    for p in [0.0, -0.1, 1.1] {
        assert!(dichotomic_projector("z", &phi, p).is_err());
    }
}

#[test]
fn subspace_measurement_detection_operator() {
    let e = |i| basis_vector(4, i);
    let s = subspace_basis_measurement("a", &[e(0), e(1)]).unwrap();
    let ev = s.q().eigenvalues().unwrap();
    for (g, w) in ev.iter().zip([1.0, 1.0, 0.0, 0.0]) {
        assert_close(*g, w, 1e-12, "Q eigenvalue");
    }
    let full = subspace_basis_measurement("f", &[e(0), e(1), e(2), e(3)]).unwrap();
    assert!(full.q().as_matrix().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);

    let mut skew = e(0);
    skew[1] = Complex::ONE;
    assert!(subspace_basis_measurement("bad", &[e(0), skew]).is_err());
}

#[test]
fn mu_basis_literal_values() {
    let (p, m) = mu_basis(0.0, 0.6).unwrap();
    let want = [0.6, 0.0, 0.8, 0.0];
    for (g, w) in p.iter().zip(want) {
        assert_close(g.re, w, 1e-15, "mu+ amplitude");
        assert_eq!(g.im, 0.0);
    }
    assert_close(bellscope::linalg::norm(&p), 1.0, 1e-15, "norm");
    assert_close(bellscope::linalg::norm(&m), 1.0, 1e-15, "norm");
    assert!(mu_basis(0.0, 0.0).is_err());
    assert!(mu_basis(0.0, 1.5).is_err());
}

#[test]
fn mu_overlaps_closed_form() {
    for i in 0..12 {
        for j in 0..12 {
            for r in [0.1, 0.3, 0.5, 0.6166, 0.7] {
                let (t1, t2) = (i as f64 * PI / 6.0, j as f64 * PI / 6.0);
                let (a, _) = mu_basis(t1, r).unwrap();
                let (b, _) = mu_basis(t2, r).unwrap();
                let want = r * r * ((t1 - t2) / 2.0).cos() + (1.0 - r * r) * (t1 - t2).cos();
                let got = inner(&a, &b);
                assert_close(got.re, want, 1e-12, "<mu+|mu+'>");
                assert!(got.im.abs() < 1e-15);
            }
        }
    }
    // The pair is orthogonal on the first two components only.
    for r in [0.2, 0.6166, 1.0] {
        let (p, m) = mu_basis(0.7, r).unwrap();
        assert_close(inner(&p, &m).re, -(1.0 - r * r), 1e-12, "<mu+|mu->");
    }
}

#[test]
fn mu_settings_at_distinct_angles_fail_audit() {
    let r = 0.6166;
    let a = mu_setting("a", FRAC_PI_2, r).unwrap();
    let b = mu_setting("b", 0.0, r).unwrap();
    let rep = audit_fair_sampling(&[a, b], DEFAULT_AUDIT_TOL).unwrap();
    assert!(!rep.passed);
    assert!(rep.max_residual > 1e-3, "residual {}", rep.max_residual);
}

#[test]
fn cglmp_bases() {
    let s = cglmp_basis(Party::A, 0, 2).unwrap();
    let h = FRAC_1_SQRT_2;
    let plus = [Complex::real(h), Complex::real(h)];
    let minus = [Complex::real(h), Complex::real(-h)];
    assert!(s.outcomes()[0].operator.as_matrix().max_abs_diff(HermitianMatrix::projector(&plus).as_matrix()) < 1e-15);
    assert!(s.outcomes()[1].operator.as_matrix().max_abs_diff(HermitianMatrix::projector(&minus).as_matrix()) < 1e-15);

    for d in 2..=9 {
        for party in [Party::A, Party::B] {
            for a in 0..2 {
                let s = cglmp_basis(party, a, d).unwrap();
                assert!(s.q().as_matrix().max_abs_diff(&ComplexMatrix::identity(d)) < 1e-12);
                assert_eq!(s.values(), (0..d as i64).collect::<Vec<_>>());
                for v in 0..d {
                    let mine = cglmp_vector(party, a, d, v);
                    let oracle = oracle_analyser(party == Party::A, a, d, v);
                    for (x, y) in mine.iter().zip(&oracle) {
                        assert!((*x - *y).abs() < 1e-13);
                    }
                }
            }
        }
    }
    let v0 = cglmp_vector(Party::A, 0, 3, 0);
    let v1 = cglmp_vector(Party::A, 0, 3, 1);
    assert!(inner(&v0, &v1).abs() < 1e-12);
}

#[test]
fn cglmp_settings_pass_audit() {
    for d in 2..=8 {
        let a0 = cglmp_basis(Party::A, 0, d).unwrap();
        let a1 = cglmp_basis(Party::A, 1, d).unwrap();
        let rep = audit_fair_sampling(&[a0, a1], DEFAULT_AUDIT_TOL).unwrap();
        assert!(rep.passed);
        assert_close(rep.epsilon("A0").unwrap(), 1.0, 1e-12, "eps A0");
        assert_close(rep.epsilon("A1").unwrap(), 1.0, 1e-12, "eps A1");
        assert!(rep.reference_q.as_matrix().max_abs_diff(&ComplexMatrix::identity(d)) < 1e-12);
    }
}

#[test]
fn separable_scenario_settings_fail_audit() {
    let e = |i| basis_vector(4, i);
    let a = subspace_basis_measurement("A", &[e(0), e(1)]).unwrap();
    let b = subspace_basis_measurement("B", &[e(2), e(3)]).unwrap();
    let rep = audit_fair_sampling(&[a, b], DEFAULT_AUDIT_TOL).unwrap();
    assert!(!rep.passed);
    assert!(rep.max_residual > 0.5);
}

#[test]
fn dichotomic_weights_share_detection_operator() {
    let mut r = rng(17);
    let x = dichotomic_projector("p1", &random_unit_vector(3, &mut r), 1.0).unwrap();
    let y = dichotomic_projector("p05", &random_unit_vector(3, &mut r), 0.5).unwrap();
    let rep = audit_fair_sampling(&[x, y], DEFAULT_AUDIT_TOL).unwrap();
    assert!(rep.passed);
    assert_close(rep.epsilon("p1").unwrap() / rep.epsilon("p05").unwrap(), 1.0, 1e-12, "eps ratio");
}

#[test]
fn audit_rejects_mixed_dimensions() {
    let a = cglmp_basis(Party::A, 0, 2).unwrap();
    let b = cglmp_basis(Party::A, 0, 3).unwrap();
    assert!(audit_fair_sampling(&[a, b], DEFAULT_AUDIT_TOL).is_err());
}

#[test]
fn invalid_settings_rejected() {
    let e0 = basis_vector(2, 0);
    let over = vec![
        Outcome { value: 0, operator: HermitianMatrix::projector(&e0) },
        Outcome { value: 1, operator: HermitianMatrix::identity(2) },
    ];
    assert!(MeasurementSetting::new("over", over).is_err());
    let neg = vec![Outcome { value: 0, operator: HermitianMatrix::projector(&e0).scale(-0.5) }];
    assert!(MeasurementSetting::new("neg", neg).is_err());
    let dup = vec![
        Outcome { value: 0, operator: HermitianMatrix::projector(&e0).scale(0.5) },
        Outcome { value: 0, operator: HermitianMatrix::projector(&e0).scale(0.5) },
    ];
    assert!(MeasurementSetting::new("dup", dup).is_err());
}

#[test]
fn json_roundtrip() {
    let settings = vec![mu_setting("a", 0.3, 0.6).unwrap(), cglmp_basis(Party::B, 1, 4).unwrap()];
    let text = serde_json::to_string(&MeasurementSetJson::from_settings(&settings).unwrap()).unwrap();
    let back: MeasurementSetJson = serde_json::from_str(&text).unwrap();
    let back = back.into_settings().unwrap();
    assert_eq!(back.len(), 2);
    for (x, y) in settings.iter().zip(&back) {
        assert_eq!(x.label(), y.label());
        assert_eq!(x.realization(), y.realization());
        assert_eq!(x.values(), y.values());
        assert!(x.q().as_matrix().max_abs_diff(y.q().as_matrix()) < 1e-15);
    }

    let bad = r#"{"dim": 2, "settings": [{"label": "x", "outcomes": [{"value": 1, "matrix": [[[1,0]]]}]}]}"#;
    let err = serde_json::from_str::<MeasurementSetJson>(bad).unwrap().into_settings().unwrap_err();
    assert!(err.to_string().contains("settings['x'].outcomes[0]"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completion_sums_to_identity(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let s = random_lossy_setting("s", n, &mut r);
        prop_assert!(completion_defect(&s) < 1e-12);
        let t = random_dichotomic("t", n, &mut r);
        prop_assert!(completion_defect(&t) < 1e-12);
    }

    #[test]
    fn scaled_copies_pass(seed in any::<u64>(), n in 1usize..=6, k in 2usize..=5) {
        let mut r = rng(seed);
        let base = random_lossy_setting("base", n, &mut r);
        let cs: Vec<f64> = (0..k).map(|_| r.random_range(0.05..=1.0)).collect();
        let family: Vec<MeasurementSetting> =
            cs.iter().enumerate().map(|(i, c)| base.scaled(*c, format!("s{i}")).unwrap()).collect();
        let rep = audit_fair_sampling(&family, DEFAULT_AUDIT_TOL).unwrap();
        prop_assert!(rep.passed, "residual {}", rep.max_residual);
        let top = cs.iter().cloned().fold(0.0, f64::max);
        for (i, c) in cs.iter().enumerate() {
            let e = rep.epsilon(&format!("s{i}")).unwrap();
            prop_assert!((e - c / top).abs() < 1e-9, "eps {} vs {}", e, c / top);
        }
    }

    #[test]
    fn distinct_subspaces_fail(seed in any::<u64>(), n in 2usize..=6, overlap in any::<bool>()) {
        let mut r = rng(seed);
        let basis = random_basis(n, &mut r);
        let rank = r.random_range(1..=n / 2);
        // Either disjoint blocks or blocks sharing all but one vector.
        let first: Vec<_> = basis[..rank].to_vec();
        let second: Vec<_> = if overlap && rank < n {
            basis[..rank - 1].iter().chain(std::iter::once(&basis[rank])).cloned().collect()
        } else {
            basis[rank..2 * rank].to_vec()
        };
        let a = subspace_basis_measurement("a", &first).unwrap();
        let b = subspace_basis_measurement("b", &second).unwrap();
        let rep = audit_fair_sampling(&[a, b], DEFAULT_AUDIT_TOL).unwrap();
        prop_assert!(!rep.passed);
        prop_assert!(rep.max_residual > 0.1);
    }

    #[test]
    fn efficiencies_are_traces(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let s = random_lossy_setting("s", n, &mut r);
        let rho = DensityMatrix::mixture(&[(1.0, random_state(n, 1, &mut r))]).unwrap();
        let eff = rho.matrix().trace_product(&s.q()).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&eff));
        // Tr(Q rho) equals the sum of outcome weights.
        let sum: f64 = s.outcomes().iter().map(|o| rho.local_expectation(o.operator.as_matrix(), &ComplexMatrix::identity(1)).unwrap()).sum();
        prop_assert!((eff - sum).abs() < 1e-12);
    }
}
