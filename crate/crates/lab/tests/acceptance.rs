//! Acceptance list: runs the suite once on the default config, prints one
//! line per criterion and re-judges every measured value against the
//! tolerances pinned here. Built without the test harness so the lines
//! are always shown.

use std::collections::BTreeMap;

use catenoid_lab::commands::{run, Command};
use catenoid_lab::{ExperimentConfig, LabError};
use serde_json::Value;

#[derive(Debug, Clone, Copy)]
enum Pin {
    Below(f64),
    AtMost(f64),
    AtLeast(f64),
    Equals(f64),
    Within(f64, f64),
    Finite,
}

impl Pin {
    fn holds(self, v: f64) -> bool {
        match self {
            Pin::Below(x) => v < x,
            Pin::AtMost(x) => v <= x,
            Pin::AtLeast(x) => v >= x,
            Pin::Equals(x) => v == x,
            Pin::Within(c, tol) => (v - c).abs() <= tol,
            Pin::Finite => v.is_finite(),
        }
    }
}

struct Criterion {
    id: u64,
    budget_seconds: f64,
    pins: &'static [(&'static str, Pin)],
}

const T_FINAL_SHOOTING: f64 = 40.0;

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        budget_seconds: 1.0,
        pins: &[
            ("closed-form first-integral residual", Pin::Below(1e-10)),
            ("z_values refinement order", Pin::AtLeast(1.9)),
            ("quadrature first-integral residual order", Pin::AtLeast(1.9)),
            ("|z| < S at every node", Pin::Equals(1.0)),
        ],
    },
    Criterion {
        id: 2,
        budget_seconds: 10.0,
        pins: &[
            ("order of |H1 nu0|_w", Pin::AtLeast(1.9)),
            ("order of |H0 phi_odd|_w", Pin::AtLeast(1.9)),
            ("order of |H0 phi_even|_w", Pin::AtLeast(1.9)),
        ],
    },
    Criterion {
        id: 3,
        budget_seconds: 30.0,
        pins: &[
            ("eigenvalues of H0 above 1e-6", Pin::Equals(1.0)),
            ("matrix vs shooting mu^2, relative", Pin::Below(1e-6)),
            ("eigenvalues of H1 above 1e-6", Pin::Equals(0.0)),
            ("eigenvalues of H2 above 1e-6", Pin::Equals(0.0)),
            ("eigenvalues of H3 above 1e-6", Pin::Equals(0.0)),
        ],
    },
    Criterion {
        id: 4,
        budget_seconds: 30.0,
        pins: &[
            ("factorization defect order", Pin::AtLeast(1.9)),
            ("partner eigenvalues above 1e-6", Pin::Equals(0.0)),
            ("sup |Vtilde|<rho>^4 on [20, 60]", Pin::Finite),
            ("round-trip error order", Pin::AtLeast(1.9)),
        ],
    },
    Criterion {
        id: 5,
        budget_seconds: 120.0,
        pins: &[
            ("relative energy drift over T=20", Pin::AtMost(1e-4)),
            ("convergence order (fitted)", Pin::AtLeast(1.9)),
            ("convergence order (finest pair)", Pin::AtLeast(1.9)),
            ("boundary-silence mismatched values", Pin::Equals(0.0)),
        ],
    },
    Criterion {
        id: 6,
        budget_seconds: 60.0,
        pins: &[
            ("growing seed |rate - mu|/mu", Pin::AtMost(0.01)),
            ("decaying seed |rate + mu|/mu", Pin::AtMost(0.01)),
        ],
    },
    Criterion {
        id: 7,
        budget_seconds: 180.0,
        pins: &[("LE integral growth from T=40 to T=80 (alpha=0.1)", Pin::Below(0.05))],
    },
    Criterion {
        id: 8,
        budget_seconds: 30.0,
        pins: &[
            ("max |Omega(u,v) + Omega(v,u)|", Pin::Equals(0.0)),
            ("max |Omega(u,u)|", Pin::Equals(0.0)),
            ("|Omega(Z_plus, Z_minus) - 1|", Pin::AtMost(1e-12)),
            ("max off-diagonal |d_ij|", Pin::Equals(0.0)),
            ("spread of diagonal d_ii", Pin::Equals(0.0)),
            ("d_ii increasing in R_ctf", Pin::Equals(1.0)),
            ("|d_ii(R -> inf) - improper integral|", Pin::AtMost(1e-6)),
        ],
    },
    Criterion {
        id: 9,
        budget_seconds: 600.0,
        pins: &[
            ("families", Pin::Equals(5.0)),
            ("max |b0* - analytic|/|analytic|", Pin::AtMost(1e-4)),
            ("max |a_plus|/lambda along trapped runs", Pin::AtMost(1.0)),
            ("trapped runs reach T", Pin::AtLeast(T_FINAL_SHOOTING - 1e-9)),
            ("escape samples with d(a+^2)/dt >= mu a+^2", Pin::AtLeast(0.95)),
        ],
    },
    Criterion {
        id: 10,
        budget_seconds: 600.0,
        pins: &[
            ("a=3, b=3 exponent at r=1", Pin::Within(-2.0, 0.15)),
            ("a=4, b=2.5 exponent at r=1", Pin::Within(-2.5, 0.15)),
            ("oracle u(30, 1) for a compact source", Pin::Equals(0.0)),
            ("grid vs oracle discrepancy order", Pin::AtLeast(1.9)),
        ],
    },
    Criterion {
        id: 11,
        budget_seconds: 180.0,
        pins: &[("fitted exponent of dyadic E1 minima / E2(0)", Pin::AtMost(-0.8))],
    },
];

/// Criteria shown unattainable at the fixed parameters; they must still be
/// measured and reported as FAIL, never skipped.
const UNATTAINABLE: &[u64] = &[7];

/// Whole default suite on one core.
const SUITE_BUDGET_SECONDS: f64 = 1800.0;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.output_dir = dir.path().to_path_buf();
    std::env::remove_var(catenoid_lab::config::OUTPUT_DIR_ENV);
    assert_eq!(cfg.shooting.t_final, T_FINAL_SHOOTING);
    assert_eq!(cfg.evolution.alpha, 0.1);

    let outcome = run(&Command::Suite, &cfg);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let timings: BTreeMap<String, f64> = serde_json::from_value(manifest["timings"].clone()).unwrap();

    assert_eq!(report["schema"], "catenoid-lab/report/v1");
    let measured = report["criteria"].as_array().unwrap();
    assert_eq!(measured.len(), CRITERIA.len());

    let mut failed = Vec::new();
    let mut problems = Vec::new();
    for (want, got) in CRITERIA.iter().zip(measured) {
        assert_eq!(got["id"].as_u64(), Some(want.id));
        assert_eq!(got["budget_seconds"].as_f64(), Some(want.budget_seconds));
        let checks = got["checks"].as_array().unwrap();
        let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
        let pinned: Vec<&str> = want.pins.iter().map(|p| p.0).collect();
        assert_eq!(names, pinned, "criterion {} checks", want.id);

        let secs = timings[&format!("criterion_{:02}", want.id)];
        let mut pass = secs < want.budget_seconds;
        let mut detail = Vec::new();
        for ((name, pin), c) in want.pins.iter().zip(checks) {
            let value = c["value"].as_f64().unwrap_or(f64::NAN);
            let ok = pin.holds(value);
            if ok != c["pass"].as_bool().unwrap() {
                problems.push(format!("criterion {} `{name}`: suite verdict disagrees with pin", want.id));
            }
            pass &= ok;
            detail.push(format!("{name} = {value:.6e} [{pin:?}]"));
        }
        if pass != got["pass"].as_bool().unwrap() && secs < want.budget_seconds {
            problems.push(format!("criterion {}: aggregate verdict disagrees", want.id));
        }
        println!(
            "criterion {:>2} {:<16} {}  ({secs:.2} s < {} s)  {}",
            want.id,
            got["title"].as_str().unwrap(),
            if pass { "PASS" } else { "FAIL" },
            want.budget_seconds,
            detail.join("; ")
        );
        if !pass {
            failed.push(want.id);
        }
    }
    let total = timings["total"];
    println!("suite total {total:.1} s < {SUITE_BUDGET_SECONDS} s");

    assert!(problems.is_empty(), "{problems:#?}");
    assert!(total < SUITE_BUDGET_SECONDS);
    match outcome {
        Err(LabError::CriteriaFailed { failed: n, .. }) => assert_eq!(n, failed.len()),
        Ok(_) => assert!(failed.is_empty()),
        Err(e) => panic!("suite did not complete: {e}"),
    }
    for id in UNATTAINABLE {
        if !failed.contains(id) {
            println!("criterion {id} is listed as unattainable but passed");
        }
    }
    let unexpected: Vec<u64> = failed.iter().copied().filter(|id| !UNATTAINABLE.contains(id)).collect();
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
