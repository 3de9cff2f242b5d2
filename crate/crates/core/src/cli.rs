//! Command-line interface: scenario-driven sweeps with CSV/JSON artifacts
//! and the orchestrated reproduction run.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
//! 4 reproduction check failed. Verdicts (pass/fail of a positivity or
//! integrability probe) are data, not process failures.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Once;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::curvature::{self, BaseForm};
use crate::expr::{parse, ComplexPoint, HoloPolynomial, C64};
use crate::integrability::{eh_membership, reduce_membership, ShellParams};
use crate::metric::HolomorphicSection;
use crate::positivity::{self, griffiths_min_matrix, nakano_min_eigenvalue, RegFamily};
use crate::psh;
use crate::regularize::{convolve_dual, make_kernel};
use crate::reproduce;
use crate::scenario::{self, Scenario};
use crate::tol;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "hermlab",
    version,
    about = "Numerical laboratory for singular Hermitian metrics on holomorphic vector bundles"
)]
struct Cli {
    /// Worker threads for grid sweeps ("auto" for all cores).
    #[arg(long, global = true, default_value = "auto")]
    threads: String,
    /// Force single-threaded execution (same results, also checked by tests).
    #[arg(long, global = true, default_value_t = false)]
    single_thread: bool,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CurvatureMode {
    Exact,
    Fd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PositivityTest {
    Nakano,
    Griffiths,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PshWhich {
    Negativity,
    Positivity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Diag,
    Iso,
}

impl From<FamilyArg> for RegFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Diag => RegFamily::EpsDiag,
            FamilyArg::Iso => RegFamily::EpsIso,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the curvature form matrix over the scenario grid (CSV).
    Curvature {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value_t = CurvatureMode::Exact)]
        mode: CurvatureMode,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Nakano/Griffiths minima over a grid, or an ε-blowup scan (CSV).
    Positivity {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value_t = PositivityTest::Both)]
        test: PositivityTest,
        #[arg(long = "C", default_value_t = 0.0)]
        coupling: f64,
        /// Comma-separated ε list; switches to the blowup scan on the
        /// built-in regularization families.
        #[arg(long)]
        eps_list: Option<String>,
        #[arg(long, value_enum, default_value_t = FamilyArg::Diag)]
        family: FamilyArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plurisubharmonicity verdict for the scenario metric (JSON report).
    Psh {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value_t = PshWhich::Negativity)]
        which: PshWhich,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        degree: u32,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Local square-integrability verdict for a section (JSON report).
    Integrability {
        #[arg(long)]
        scenario: String,
        /// Section components as a JSON array, e.g. "[0, 1]" or "[\"z\",\"w\"]".
        #[arg(long)]
        section: String,
        /// Center as comma-separated floats: n values (real) or 2n (re,im pairs).
        #[arg(long)]
        center: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Smooth the scenario metric's dual by a mollifier kernel (CSV).
    Regularize {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0.3)]
        rho: f64,
        #[arg(long, default_value_t = 3)]
        power: u32,
    },
    /// Run the orchestrated reproduction checks for a built-in scenario.
    Reproduce {
        #[arg(default_value = "example42")]
        name: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

static POOL_INIT: Once = Once::new();

fn init_threads(threads: &str, single: bool) -> Result<(), String> {
    let n = if single {
        1
    } else if threads == "auto" {
        0 // rayon default
    } else {
        threads
            .parse::<usize>()
            .map_err(|_| format!("--threads expects a number or \"auto\", got {threads:?}"))?
    };
    if n > 0 {
        POOL_INIT.call_once(|| {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        });
    }
    Ok(())
}

/// Entry point used by both `main` and the integration tests.
pub fn run_subcommand(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exits
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Err(msg) = init_threads(&cli.threads, cli.single_thread) {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create output directory: {e}");
        return EXIT_CONFIG;
    }
    match run_command(&cli) {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            EXIT_NUMERICAL
        }
        Err(CliError::Io(e)) => {
            eprintln!("io error: {e}");
            EXIT_NUMERICAL
        }
    }
}

enum CliError {
    Config(String),
    Numerical(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn load_scenario(name: &str) -> Result<Scenario, CliError> {
    scenario::load(name).map_err(|e| CliError::Config(e.to_string()))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn point_cell(p: &ComplexPoint) -> String {
    // no commas: the cell must stay a single CSV column
    p.coords()
        .iter()
        .map(|c| format!("{:.6}{:+.6}i", c.re, c.im))
        .collect::<Vec<_>>()
        .join(";")
}

fn run_command(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Curvature {
            scenario,
            mode,
            seed,
        } => {
            let sc = load_scenario(scenario)?;
            let _ = seed;
            let n = sc.chart.n;
            let r = sc.metric.rank();
            let path = cli.out.join("curvature.csv");
            let mut file = std::fs::File::create(&path)?;
            let mut header = Vec::new();
            for k in 1..=n {
                header.push(format!("point_re_{k}"));
                header.push(format!("point_im_{k}"));
            }
            let nr = n * r;
            for i in 0..nr {
                for j in 0..nr {
                    header.push(format!("theta_nak_{i}_{j}_re"));
                    header.push(format!("theta_nak_{i}_{j}_im"));
                }
            }
            header.push("min_eigenvalue".into());
            writeln!(file, "{}", header.join(","))?;

            let mut written = 0usize;
            let mut skipped = 0usize;
            for x in sc.grid() {
                let curv = match mode {
                    CurvatureMode::Exact => curvature::curvature_exact(&sc.metric, &x),
                    CurvatureMode::Fd => {
                        curvature::curvature_fd(&sc.metric, &x, tol::FD_STEP, true)
                    }
                };
                let nak = curv.and_then(|c| curvature::nakano_matrix(&c, &sc.metric));
                let nak = match nak {
                    Ok(nak) => nak,
                    Err(_) => {
                        skipped += 1;
                        continue;
                    }
                };
                let mut row = Vec::new();
                for c in x.coords() {
                    row.push(fmt17(c.re));
                    row.push(fmt17(c.im));
                }
                for i in 0..nr {
                    for j in 0..nr {
                        row.push(fmt17(nak.matrix[(i, j)].re));
                        row.push(fmt17(nak.matrix[(i, j)].im));
                    }
                }
                row.push(fmt17(nakano_min_eigenvalue(&nak)));
                writeln!(file, "{}", row.join(","))?;
                written += 1;
            }
            if skipped > 0 {
                eprintln!("note: skipped {skipped} degenerate grid points");
            }
            println!("wrote {} rows to {}", written, path.display());
            if written == 0 {
                return Err(CliError::Numerical(
                    "no grid point could be evaluated (metric degenerate everywhere?)".into(),
                ));
            }
            Ok(EXIT_OK)
        }

        Command::Positivity {
            scenario,
            test,
            coupling,
            eps_list,
            family,
            seed,
        } => {
            let want_griffiths = matches!(test, PositivityTest::Griffiths | PositivityTest::Both);
            let sc = load_scenario(scenario)?;
            let seed = seed.unwrap_or(sc.file.seed);
            let path = cli.out.join("positivity.csv");
            let mut file = std::fs::File::create(&path)?;
            writeln!(file, "eps,C,point,min_eig,griffiths_min,passed")?;
            let mut all_passed = true;
            if let Some(list) = eps_list {
                let eps: Vec<f64> = list
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::Config(format!("bad --eps-list: {e}")))?;
                let center = sc.chart.center.clone();
                let fam: RegFamily = (*family).into();
                let scan = positivity::blowup_scan(fam, *coupling, &eps, &center)
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                for row in &scan.rows {
                    // Griffiths minimum of the same coupled matrix
                    let m = fam
                        .metric(row.eps)
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    let curv = curvature::curvature_exact(&m, &center)
                        .map_err(|e| CliError::Numerical(e.to_string()))?;
                    let nak = curvature::nakano_matrix(&curv, &m)
                        .map_err(|e| CliError::Numerical(e.to_string()))?;
                    let bounded = curvature::nakano_lower_bound_matrix(
                        &nak,
                        &m,
                        &center,
                        *coupling,
                        &BaseForm::identity(sc.chart.n),
                    )
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                    let griffiths = if want_griffiths {
                        fmt17(
                            griffiths_min_matrix(
                                &bounded.matrix,
                                sc.chart.n,
                                m.rank(),
                                tol::GRIFFITHS_RESTARTS,
                                tol::GRIFFITHS_ITERS,
                                seed,
                            )
                            .value,
                        )
                    } else {
                        String::new()
                    };
                    let scale = 1.0 + bounded.matrix.norm();
                    let passed = row.min_eig >= -tol::PSD_REL * scale;
                    all_passed &= passed;
                    writeln!(
                        file,
                        "{},{},{},{},{},{}",
                        row.eps,
                        coupling,
                        point_cell(&center),
                        fmt17(row.min_eig),
                        griffiths,
                        passed
                    )?;
                }
            } else {
                let mut evaluated = 0;
                for x in sc.grid() {
                    let curv = match curvature::curvature_exact(&sc.metric, &x) {
                        Ok(c) => c,
                        Err(_) => continue,
                    };
                    let nak = match curvature::nakano_matrix(&curv, &sc.metric) {
                        Ok(n) => n,
                        Err(_) => continue,
                    };
                    let bounded = curvature::nakano_lower_bound_matrix(
                        &nak,
                        &sc.metric,
                        &x,
                        *coupling,
                        &BaseForm::identity(sc.chart.n),
                    )
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                    let min_eig = nakano_min_eigenvalue(&bounded);
                    let griffiths = if want_griffiths {
                        fmt17(
                            griffiths_min_matrix(
                                &bounded.matrix,
                                sc.chart.n,
                                sc.metric.rank(),
                                tol::GRIFFITHS_RESTARTS,
                                tol::GRIFFITHS_ITERS,
                                seed,
                            )
                            .value,
                        )
                    } else {
                        String::new()
                    };
                    let scale = 1.0 + bounded.matrix.norm();
                    let passed = min_eig >= -tol::PSD_REL * scale;
                    all_passed &= passed;
                    evaluated += 1;
                    writeln!(
                        file,
                        "{},{},{},{},{},{}",
                        sc.file
                            .family_eps
                            .map(|e| e.to_string())
                            .unwrap_or_default(),
                        coupling,
                        point_cell(&x),
                        fmt17(min_eig),
                        griffiths,
                        passed
                    )?;
                }
                if evaluated == 0 {
                    return Err(CliError::Numerical(
                        "no grid point could be evaluated".into(),
                    ));
                }
            }
            println!(
                "positivity sweep written to {} ({})",
                path.display(),
                if all_passed {
                    "all points passed"
                } else {
                    "negative directions found"
                }
            );
            Ok(EXIT_OK)
        }

        Command::Psh {
            scenario,
            which,
            trials,
            degree,
            seed,
        } => {
            let sc = load_scenario(scenario)?;
            let seed = seed.unwrap_or(sc.file.seed);
            let tolerance = sc
                .file
                .tolerances
                .get("psh_tol")
                .copied()
                .unwrap_or(tol::PSH_TOL);
            let report = match which {
                PshWhich::Negativity => psh::negativity_verdict(
                    &sc.metric, &sc.chart, *degree, *trials, seed, tolerance,
                ),
                PshWhich::Positivity => {
                    match psh::positivity_verdict(
                        &sc.metric, &sc.chart, *degree, *trials, seed, tolerance,
                    ) {
                        Ok(r) => r,
                        Err(e) => return Err(CliError::Numerical(e.to_string())),
                    }
                }
            };
            let path = cli.out.join("psh_report.json");
            std::fs::write(&path, psh_report_json(&report))?;
            println!(
                "psh verdict: {} (worst violation {:?}) -> {}",
                if report.passed { "PASS" } else { "FAIL" },
                report.worst.as_ref().map(|w| w.violation),
                path.display()
            );
            Ok(EXIT_OK)
        }

        Command::Integrability {
            scenario,
            section,
            center,
            seed,
        } => {
            let sc = load_scenario(scenario)?;
            let seed = seed.unwrap_or(sc.file.seed);
            let n = sc.chart.n;
            let r = sc.metric.rank();
            let comps = parse_section_arg(section, n, r)?;
            let s = HolomorphicSection::new(comps);
            let center = parse_center_arg(center, n)?;
            let params = ShellParams::new(seed);
            let verdict = eh_membership(&sc.metric, &s, &center, &params)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let reduced = sc.metric.sections().ok().map(|sections| {
                reduce_membership(sections, &s, &center, &params)
                    .map(|r| {
                        serde_json::json!({
                            "overall": r.overall,
                            "numerators": r.numerators.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                            "weight_terms": r.weight_terms.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                            "term_verdicts": r.term_verdicts,
                        })
                    })
                    .map_err(|e| e.to_string())
            });
            let out = serde_json::json!({
                "scenario": sc.file.name,
                "section": section,
                "center": center.coords().iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
                "verdict": verdict,
                "reduced": match reduced {
                    Some(Ok(v)) => v,
                    Some(Err(e)) => serde_json::json!({ "error": e }),
                    None => serde_json::Value::Null,
                },
            });
            let path = cli.out.join("integrability.json");
            std::fs::write(&path, serde_json::to_string_pretty(&out).unwrap())?;
            println!(
                "integrability: {:?} (fitted exponent {:.3}, margin {:.3}) -> {}",
                verdict.classification,
                verdict.fitted_exponent,
                verdict.margin,
                path.display()
            );
            Ok(EXIT_OK)
        }

        Command::Regularize {
            scenario,
            rho,
            power,
        } => {
            let sc = load_scenario(scenario)?;
            let kernel = make_kernel(*rho, *power, 2 * sc.chart.n)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = sc.metric.rank();
            let needed_margin = rho / sc.chart.min_radius() + 0.05;
            let margin = sc.file.grid.margin.max(needed_margin);
            let grid = crate::util::chart_grid(&sc.chart, sc.file.grid.per_axis, margin);
            let path = cli.out.join("regularize.csv");
            let mut file = std::fs::File::create(&path)?;
            let mut header = Vec::new();
            for k in 1..=sc.chart.n {
                header.push(format!("point_re_{k}"));
                header.push(format!("point_im_{k}"));
            }
            for i in 0..r {
                for j in 0..r {
                    header.push(format!("smoothed_dual_{i}_{j}_re"));
                    header.push(format!("smoothed_dual_{i}_{j}_im"));
                }
            }
            header.push("identity_residual".into());
            writeln!(file, "{}", header.join(","))?;
            let dual_field = sc.metric.dual_field();
            for x in &grid {
                let smoothed = convolve_dual(&sc.metric, &kernel, x)
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                let base = dual_field.evaluate(x);
                let mut residual: f64 = 0.0;
                if base.is_ok() {
                    for i in 0..r {
                        for j in 0..r {
                            let shift = if i == j { kernel.eps_chi } else { 0.0 };
                            let want = base.entries[(i, j)] + C64::new(shift, 0.0);
                            residual = residual.max((smoothed[(i, j)] - want).norm());
                        }
                    }
                } else {
                    residual = f64::NAN;
                }
                let mut row = Vec::new();
                for c in x.coords() {
                    row.push(fmt17(c.re));
                    row.push(fmt17(c.im));
                }
                for i in 0..r {
                    for j in 0..r {
                        row.push(fmt17(smoothed[(i, j)].re));
                        row.push(fmt17(smoothed[(i, j)].im));
                    }
                }
                row.push(fmt17(residual));
                writeln!(file, "{}", row.join(","))?;
            }
            println!(
                "regularize sweep (rho={rho}, power={power}, eps_chi={:.6e}) written to {}",
                kernel.eps_chi,
                path.display()
            );
            Ok(EXIT_OK)
        }

        Command::Reproduce { name, seed } => {
            if name != "example42" {
                return Err(CliError::Config(format!(
                    "reproduce supports the built-in scenario \"example42\", got {name:?}"
                )));
            }
            let seed = seed.unwrap_or(7);
            let report = reproduce::reproduce_example42(seed);
            for check in &report.checks {
                println!(
                    "CHECK {:<28} {} [{}; {}]",
                    check.name,
                    if check.passed { "PASS" } else { "FAIL" },
                    check.operation,
                    check.tolerance
                );
                if !check.passed {
                    println!("      {}", check.detail);
                }
            }
            let path = cli.out.join("report.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap())?;
            println!(
                "report ({} checks, {} ms) -> {}",
                report.checks.len(),
                report.wall_time_ms,
                path.display()
            );
            if report.passed {
                println!("reproduction complete: all checks passed");
                Ok(EXIT_OK)
            } else {
                println!("reproduction FAILED");
                Ok(EXIT_CHECK_FAILED)
            }
        }
    }
}

fn parse_section_arg(text: &str, n: usize, r: usize) -> Result<Vec<HoloPolynomial>, CliError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("--section must be a JSON array: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| CliError::Config("--section must be a JSON array".into()))?;
    if items.len() != r {
        return Err(CliError::Config(format!(
            "--section needs {r} components, got {}",
            items.len()
        )));
    }
    items
        .iter()
        .map(|item| {
            let src = match item {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(v) => v.to_string(),
                other => {
                    return Err(CliError::Config(format!(
                        "section component must be an expression string or number, got {other}"
                    )));
                }
            };
            let p = parse(&src, n).map_err(|e| CliError::Config(e.to_string()))?;
            HoloPolynomial::new(p)
                .map_err(|_| CliError::Config(format!("component {src:?} is not holomorphic")))
        })
        .collect()
}

fn parse_center_arg(text: &str, n: usize) -> Result<ComplexPoint, CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("bad --center: {e}")))?;
    if parts.len() == n {
        Ok(ComplexPoint::new(
            parts.iter().map(|&re| C64::new(re, 0.0)).collect(),
        ))
    } else if parts.len() == 2 * n {
        Ok(ComplexPoint::new(
            parts.chunks(2).map(|c| C64::new(c[0], c[1])).collect(),
        ))
    } else {
        Err(CliError::Config(format!(
            "--center needs {n} or {} comma-separated floats, got {}",
            2 * n,
            parts.len()
        )))
    }
}

#[derive(Serialize)]
struct PshWitnessJson {
    point: Vec<[f64; 2]>,
    direction: Option<Vec<[f64; 2]>>,
    radius: Option<f64>,
    violation: f64,
    label: String,
}

fn psh_report_json(report: &psh::PshReport) -> String {
    let worst = report.worst.as_ref().map(|w| PshWitnessJson {
        point: w.point.coords().iter().map(|c| [c.re, c.im]).collect(),
        direction: w
            .direction
            .as_ref()
            .map(|d| d.iter().map(|c| [c.re, c.im]).collect()),
        radius: w.radius,
        violation: w.violation,
        label: w.label.clone(),
    });
    let out = serde_json::json!({
        "label": report.label,
        "passed": report.passed,
        "tol": report.tol,
        "points_tested": report.points_tested,
        "directions": report.directions,
        "radii": report.radii,
        "samples_checked": report.samples_checked,
        "infinite_centers": report.infinite_centers,
        "skipped": report.skipped,
        "worst": worst,
    });
    serde_json::to_string_pretty(&out).unwrap()
}

/// Helper for tests: run with string literals.
pub fn run(args: &[&str]) -> i32 {
    let owned: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    run_subcommand(&owned)
}
