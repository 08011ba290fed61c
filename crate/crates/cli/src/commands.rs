//! One function per verb. Each validates its arguments, delegates to the
//! library and packages the result as an [`Output`].

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use bellscope::cglmp::{self, CglmpResult};
use bellscope::chsh::{self, anomalous_violation_scan, ChshScenario, LeakConvention, PartyVariant, ScanOptions};
use bellscope::measurements::{audit_fair_sampling, FairSamplingReport, MeasurementSetJson, MeasurementSetting};
use bellscope::montecarlo::{
    estimate_bell, estimate_cglmp, simulate as run_plan, CountRecord, EstimatorMode, PairCounts, PlanJson,
};
use bellscope::Error;

use crate::output::{fmt_sig, Output, Table};
use crate::{CliError, Scenario};

const PAIR_NAMES: [&str; 4] = ["(a,c)", "(a,d)", "(b,c)", "(b,d)"];

/// Library errors raised while computing. Convergence and structure failures
/// are computation errors; anything the caller could have avoided is usage.
fn lib_err(e: Error) -> CliError {
    match e {
        Error::NonConvergence { .. } | Error::StructureViolation(_) | Error::ZeroCoincidence(_) => CliError::compute(e),
        Error::InvalidArgument(_) => CliError::usage(e.to_string()),
        _ => CliError::compute(e),
    }
}

fn to_json<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("library types serialise")
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn convention_name(c: LeakConvention) -> &'static str {
    match c {
        LeakConvention::Leakage => "leakage",
        LeakConvention::Target => "target",
    }
}

fn variant_name(v: PartyVariant) -> &'static str {
    match v {
        PartyVariant::Symmetric => "symmetric",
        PartyVariant::Asymmetric => "asymmetric",
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn chsh_demo(
    scenario: Scenario,
    r: Option<f64>,
    convention: LeakConvention,
    variant: PartyVariant,
) -> Result<Output, CliError> {
    if r.is_some() && !matches!(scenario, Scenario::AnomalousR) {
        return Err(CliError::usage("--r only applies to --scenario anomalous-r"));
    }
    let (name, r_used, s): (&str, Option<f64>, ChshScenario) = match scenario {
        Scenario::Standard => ("standard", None, chsh::standard().map_err(lib_err)?),
        Scenario::Separable4 => ("separable4", None, chsh::separable4().map_err(lib_err)?),
        Scenario::AnomalousR => {
            let r = match r {
                Some(r) if r > 0.0 && r < 1.0 => r,
                Some(r) => return Err(CliError::usage(format!("--r must lie in (0, 1), got {r}"))),
                None => {
                    let opts = ScanOptions { convention, variant, ..ScanOptions::default() };
                    anomalous_violation_scan(&opts).map_err(lib_err)?.r_star
                }
            };
            ("anomalous-r", Some(r), chsh::anomalous(r, convention, variant).map_err(lib_err)?)
        }
    };

    let corr = chsh::correlators(&s).map_err(lib_err)?;
    let s_exact = chsh::bell_parameter(&corr, false);
    let s_post = chsh::bell_parameter(&corr, true);
    let tol = bellscope::measurements::DEFAULT_AUDIT_TOL;
    let first = audit_fair_sampling(&s.first_party(), tol).map_err(lib_err)?;
    let second = audit_fair_sampling(&s.second_party(), tol).map_err(lib_err)?;
    let passed = first.passed && second.passed;
    let max_residual = first.max_residual.max(second.max_residual);

    let mut table = Table::new(&["pair", "E_exact", "E_postselected", "coincidence"]);
    for (name, p) in PAIR_NAMES.iter().zip(&corr.pairs) {
        table.push(vec![(*name).into(), p.exact.into(), p.postselected.into(), p.coincidence_total.into()]);
    }
    table.push(vec!["S".into(), s_exact.into(), s_post.into(), crate::output::Cell::Empty]);

    let mut headline = vec![format!("scenario: {name}")];
    if let Some(r) = r_used {
        headline.push(format!(
            "r: {} ({} convention, {})",
            fmt_sig(r, 6),
            convention_name(convention),
            variant_name(variant)
        ));
    }
    headline.push(format!("S exact: {}", fmt_sig(s_exact, 6)));
    headline.push(format!("S postselected: {}", fmt_sig(s_post, 6)));
    headline.push(format!("fair sampling: {} (max residual {})", verdict(passed), fmt_sig(max_residual, 6)));

    let json = json!({
        "scenario": name,
        "r": r_used,
        "convention": r_used.map(|_| convention_name(convention)),
        "variant": r_used.map(|_| variant_name(variant)),
        "s_exact": s_exact,
        "s_postselected": s_post,
        "correlators": PAIR_NAMES.iter().zip(&corr.pairs).map(|(n, p)| json!({
            "pair": n,
            "exact": p.exact,
            "postselected": p.postselected,
            "coincidence": p.coincidence_total,
        })).collect::<Vec<_>>(),
        "fair_sampling": {
            "verdict": verdict(passed),
            "first_party": to_json(&first),
            "second_party": to_json(&second),
        },
    });
    Ok(Output { json, table, headline })
}

/// Internal consistency of one table row.
fn row_problems(r: &CglmpResult) -> Vec<String> {
    let mut p = Vec::new();
    let norm: f64 = r.s1_vector_coeffs.iter().map(|c| c * c).sum();
    if r.s1 < r.s2 {
        p.push(format!("d={}: s1 < s2", r.d));
    }
    if r.s_bound > r.s1 + 1e-12 {
        p.push(format!("d={}: S_bound > s1", r.d));
    }
    if r.d >= 3 && r.s_bound < r.s2 - 1e-12 {
        p.push(format!("d={}: S_bound < s2", r.d));
    }
    if (norm - 1.0).abs() > 1e-10 {
        p.push(format!("d={}: eigenvector norm^2 {norm}", r.d));
    }
    if !r.s1_dominates_magnitude {
        p.push(format!("d={}: |lambda_min| exceeds s1", r.d));
    }
    p
}

pub fn cglmp_table(dmin: usize, dmax: usize, unchecked: bool) -> Result<(Output, Result<(), CliError>), CliError> {
    if dmin < 2 {
        return Err(CliError::usage(format!("--dmin must be at least 2, got {dmin}")));
    }
    if dmin > dmax {
        return Err(CliError::usage(format!("--dmin {dmin} exceeds --dmax {dmax}")));
    }
    if dmax > cglmp::MAX_VALIDATED_D && !unchecked {
        return Err(CliError::usage(format!(
            "--dmax {dmax} is beyond the validated range (max {}); pass --unchecked to proceed",
            cglmp::MAX_VALIDATED_D
        )));
    }
    let rows = cglmp::table(dmin, dmax, unchecked).map_err(lib_err)?;

    let mut table = Table::new(&["d", "s1", "s2", "S_me", "S_bound"]);
    let mut problems = Vec::new();
    for r in &rows {
        table.push(vec![r.d.into(), r.s1.into(), r.s2.into(), r.s_me.into(), r.s_bound.into()]);
        problems.extend(row_problems(r));
    }
    let status = if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::compute(format!("consistency check failed: {}", problems.join("; "))))
    };
    let json = json!({ "rows": to_json(&rows), "consistent": problems.is_empty() });
    Ok((Output { json, table, headline: Vec::new() }, status))
}

pub fn certify(d: usize, s: f64, sigma: f64) -> Result<Output, CliError> {
    if !(2..=cglmp::MAX_VALIDATED_D).contains(&d) {
        return Err(CliError::usage(format!("--d must lie in 2..={}, got {d}", cglmp::MAX_VALIDATED_D)));
    }
    if !s.is_finite() {
        return Err(CliError::usage(format!("--S must be finite, got {s}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CliError::usage(format!("--sigma must be a non-negative number, got {sigma}")));
    }
    let v = cglmp::certify(d, s, sigma).map_err(lib_err)?;
    let word = if v.certified { "CERTIFIED" } else { "NOT CERTIFIED" };
    let cmp = if v.certified { ">" } else { "<=" };
    let headline =
        vec![format!("{word}: S - sigma = {} {cmp} S_bound({d}) = {}", fmt_sig(s - sigma, 6), fmt_sig(v.s_bound, 6))];
    let mut table = Table::new(&["d", "S", "sigma", "S_bound", "q", "certified"]);
    table.push(vec![d.into(), s.into(), sigma.into(), v.s_bound.into(), v.q.into(), v.certified.into()]);
    Ok(Output { json: to_json(&v), table, headline })
}

fn audit_output(report: &FairSamplingReport) -> Output {
    let mut table = Table::new(&["label", "epsilon", "residual"]);
    for e in &report.per_setting_efficiency {
        table.push(vec![e.label.clone().into(), e.epsilon.into(), e.residual.into()]);
    }
    let headline = vec![format!(
        "fair sampling: {} (max residual {}, tolerance {})",
        verdict(report.passed),
        fmt_sig(report.max_residual, 6),
        fmt_sig(report.tolerance, 6)
    )];
    let mut json = to_json(report);
    json["verdict"] = verdict(report.passed).into();
    Output { json, table, headline }
}

pub fn audit(path: &Path, tol: f64) -> Result<Output, CliError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::usage(format!("--tol must be positive, got {tol}")));
    }
    let set: MeasurementSetJson = read_json(path)?;
    let settings: Vec<MeasurementSetting> =
        set.into_settings().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let report = audit_fair_sampling(&settings, tol).map_err(|e| match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch(_) => CliError::input(format!("{}: {e}", path.display())),
        e => lib_err(e),
    })?;
    Ok(audit_output(&report))
}

fn value_label(values: &[i64], i: usize) -> String {
    values.get(i).map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Dimension `d` if every pair has outcome values `0..d` on both sides.
fn cglmp_dimension(rec: &CountRecord) -> Option<usize> {
    let d = rec.pairs.first()?.first_values.len();
    let expect: Vec<i64> = (0..d as i64).collect();
    (d >= 2 && rec.pairs.iter().all(|p| p.first_values == expect && p.second_values == expect)).then_some(d)
}

fn dichotomic(rec: &CountRecord) -> bool {
    let pm = |v: &[i64]| !v.is_empty() && v.iter().all(|x| *x == 1 || *x == -1);
    rec.pairs.iter().all(|p| pm(&p.first_values) && pm(&p.second_values))
}

pub fn simulate(path: &Path) -> Result<Output, CliError> {
    let plan_json: PlanJson = read_json(path)?;
    let plan = plan_json.into_plan().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let rec = run_plan(&plan).map_err(|e| match e {
        Error::DimensionMismatch(_) => CliError::input(format!("{}: {e}", path.display())),
        e => lib_err(e),
    })?;

    let mut headline = vec![format!(
        "{} setting pairs, {} emissions each, seed {}",
        rec.pairs.len(),
        rec.emissions_per_pair,
        rec.seed
    )];
    let mut estimates = serde_json::Map::new();
    if rec.pairs.len() == 4 && dichotomic(&rec) {
        let per = estimate_bell(&rec, EstimatorMode::PerEmission).map_err(lib_err)?;
        headline.push(format!("S per-emission: {} +/- {}", fmt_sig(per.s, 6), fmt_sig(per.stderr, 6)));
        match estimate_bell(&rec, EstimatorMode::Postselected) {
            Ok(post) => {
                headline.push(format!("S postselected: {} +/- {}", fmt_sig(post.s, 6), fmt_sig(post.stderr, 6)));
                estimates.insert("chsh_postselected".into(), to_json(&post));
            }
            Err(Error::ZeroCoincidence(pair)) => {
                headline.push(format!("S postselected: undefined (no coincidences for {pair})"));
                estimates.insert("chsh_postselected".into(), Value::Null);
            }
            Err(e) => return Err(lib_err(e)),
        }
        estimates.insert("chsh_per_emission".into(), to_json(&per));
    } else if rec.pairs.len() == 4 {
        if let Some(d) = cglmp_dimension(&rec) {
            let (s, se) = estimate_cglmp(&rec, d).map_err(lib_err)?;
            headline.push(format!("S_{d}: {} +/- {}", fmt_sig(s, 6), fmt_sig(se, 6)));
            estimates.insert("cglmp".into(), json!({ "d": d, "s": s, "stderr": se }));
        }
    }

    let mut table = Table::new(&["first", "second", "first_value", "second_value", "count"]);
    for p in &rec.pairs {
        let (n1, n2) = (p.first_values.len(), p.second_values.len());
        let mut push = |i: usize, j: usize, count: u64| {
            table.push(vec![
                p.first_label.clone().into(),
                p.second_label.clone().into(),
                value_label(&p.first_values, i).into(),
                value_label(&p.second_values, j).into(),
                count.into(),
            ]);
        };
        for i in 0..n1 {
            for j in 0..n2 {
                push(i, j, p.coincidences[i][j]);
            }
        }
        for i in 0..n1 {
            push(i, n2, single_sided(p, Some(i), None));
        }
        for j in 0..n2 {
            push(n1, j, single_sided(p, None, Some(j)));
        }
        push(n1, n2, p.neither);
    }

    let json = json!({ "counts": to_json(&rec), "estimates": Value::Object(estimates) });
    Ok(Output { json, table, headline })
}

/// Emissions where only one side clicked, with the given outcome index.
fn single_sided(p: &PairCounts, first: Option<usize>, second: Option<usize>) -> u64 {
    p.runs
        .iter()
        .map(|run| {
            let (n1, n2) = (run.first.len(), run.second.len());
            let at = |a: usize, b: usize| run.counts[a * (n2 + 1) + b];
            match (first, second) {
                (Some(i), None) => run.first.iter().position(|&k| k == i).map_or(0, |a| at(a, n2)),
                (None, Some(j)) => run.second.iter().position(|&k| k == j).map_or(0, |b| at(n1, b)),
                _ => 0,
            }
        })
        .sum()
}

pub fn scan_r(
    steps: usize,
    lo: f64,
    hi: f64,
    convention: LeakConvention,
    variant: PartyVariant,
) -> Result<Output, CliError> {
    if steps < 2 {
        return Err(CliError::usage(format!("--steps must be at least 2, got {steps}")));
    }
    if !(lo > 0.0 && lo < hi && hi < 1.0) {
        return Err(CliError::usage(format!("need 0 < lo < hi < 1, got lo={lo}, hi={hi}")));
    }
    let opts =
        ScanOptions { lo, hi, step: (hi - lo) / (steps - 1) as f64, convention, variant, ..ScanOptions::default() };
    let scan = anomalous_violation_scan(&opts).map_err(lib_err)?;

    let mut table = Table::new(&["r", "S"]);
    for p in &scan.curve {
        table.push(vec![p.r.into(), p.s.into()]);
    }
    let headline = vec![format!(
        "maximum S = {} at r = {} ({} convention, {})",
        fmt_sig(scan.s_max, 6),
        fmt_sig(scan.r_star, 6),
        convention_name(convention),
        variant_name(variant)
    )];
    Ok(Output { json: to_json(&scan), table, headline })
}
