//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test --test acceptance -- --nocapture` to see
//! the lines; criteria cover symbolic dual-matrix reproduction, norm
//! formula equivalence, closed-form curvature and eigenvalue matching,
//! convolution identities, the plurisubharmonicity suite, the
//! integrability battery, and the orchestrated reproduction run.

use std::time::Instant;

use hermlab::reproduce;
use hermlab::scenario::CheckResult;

fn report(criterion: u32, name: &str, check: &CheckResult, budget_s: f64, elapsed: f64) {
    let status = if check.passed { "PASS" } else { "FAIL" };
    println!(
        "ACCEPTANCE {criterion} ({name}): {status} in {elapsed:.2}s [{}; {}] — {}",
        check.operation, check.tolerance, check.detail
    );
    assert!(
        check.passed,
        "criterion {criterion} failed: {}",
        check.detail
    );
    assert!(
        elapsed < budget_s,
        "criterion {criterion} exceeded its {budget_s}s budget ({elapsed:.1}s)"
    );
}

#[test]
fn criterion_1_dual_matrix_reproduction() {
    let t = Instant::now();
    let check = reproduce::check_dual_matrix();
    report(
        1,
        "dual-matrix symbolic equality",
        &check,
        1.0,
        t.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_2_norm_formula_equivalence() {
    let t = Instant::now();
    let check = reproduce::check_norm_formulas(7);
    report(
        2,
        "norm-formula equivalence",
        &check,
        10.0,
        t.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_3_curvature_reproduction() {
    let t = Instant::now();
    let closed = reproduce::check_curvature_closed_form(false);
    let fd = reproduce::check_fd_agreement(7);
    let elapsed = t.elapsed().as_secs_f64();
    report(3, "curvature closed forms", &closed, 30.0, elapsed);
    report(3, "curvature exact-vs-fd", &fd, 30.0, elapsed);
}

#[test]
fn criterion_4_eigenvalue_formulas() {
    let t = Instant::now();
    let check = reproduce::check_eigenvalue_formulas();
    report(
        4,
        "eigenvalue formulas and divergence",
        &check,
        5.0,
        t.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_5_convolution_identities() {
    let t = Instant::now();
    let check = reproduce::check_convolution_identities();
    report(
        5,
        "convolution identities",
        &check,
        60.0,
        t.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_6_psh_suite() {
    let t = Instant::now();
    let check = reproduce::check_psh_suite(7);
    report(
        6,
        "plurisubharmonicity suite",
        &check,
        60.0,
        t.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_7_integrability_battery() {
    let t = Instant::now();
    let check = reproduce::check_integrability_battery(7);
    report(
        7,
        "integrability battery",
        &check,
        120.0,
        t.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_8_orchestrated_reproduction() {
    // deterministic across runs and thread counts, in-process
    let t = Instant::now();
    let run_a = reproduce::reproduce_example42(7);
    let run_b = reproduce::reproduce_example42(7);
    assert_eq!(
        run_a.canonical_json(),
        run_b.canonical_json(),
        "same-seed runs must produce identical reports"
    );
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| reproduce::reproduce_example42(7));
    assert_eq!(
        run_a.canonical_json(),
        single.canonical_json(),
        "thread count must not change the report"
    );
    assert!(run_a.passed, "orchestrated run failed");

    // the shipped binary runs the same checks and exits 0
    let out = tempdir();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_hermlab"))
        .args(["reproduce", "example42", "--out"])
        .arg(&out)
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(0), "reproduce must exit 0");
    let elapsed = t.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE 8 (orchestrated reproduction): PASS in {elapsed:.2}s [cli::run_subcommand reproduce; exit 0, deterministic across runs and thread counts] — {} checks",
        run_a.checks.len()
    );
    assert!(elapsed < 180.0, "criterion 8 exceeded 180s ({elapsed:.1}s)");
    let _ = std::fs::remove_dir_all(&out);
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("hermlab-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
