//! Scenario definitions and run reports: the JSON schema shared by the
//! command-line interface, the built-in scenarios, and validation that
//! turns a scenario file into a chart plus metric field. Built-in
//! scenarios are stored as JSON text and go through the same parser path
//! as user files.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::expr::{parse, ComplexPoint, ExprError, HoloPolynomial, PolyMatrix, C64};
use crate::metric::{Chart, HermitianMatrixValue, HolomorphicSection, MetricField};

#[derive(thiserror::Error, Debug)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario at {pointer}: {msg}")]
    Invalid { pointer: String, msg: String },
    #[error(
        "unknown metric kind {0:?} (expected sections, dual_closed_form or pointwise_builtin)"
    )]
    UnknownMetricKind(String),
    #[error("unknown builtin {0:?}")]
    UnknownBuiltin(String),
    #[error("unsupported schema_version {0} (this tool reads version 1)")]
    SchemaVersion(u32),
}

fn invalid(pointer: impl Into<String>, msg: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Invalid {
        pointer: pointer.into(),
        msg: msg.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChartSpec {
    pub n: usize,
    pub center: Vec<[f64; 2]>,
    pub radius: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum BaseSpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
}

fn default_per_axis() -> usize {
    5
}

fn default_margin() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    #[serde(default = "default_per_axis")]
    pub per_axis: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            per_axis: default_per_axis(),
            margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub chart: ChartSpec,
    pub metric: MetricSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_eps: Option<f64>,
}

/// A fully validated scenario: the raw file plus the compiled chart and
/// metric field.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub chart: Chart,
    pub metric: MetricField,
}

impl Scenario {
    /// Canonical serialization; loading and saving a canonicalized file is
    /// byte-identical.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.file).expect("serializable");
        s.push('\n');
        s
    }

    pub fn grid(&self) -> Vec<ComplexPoint> {
        crate::util::chart_grid(&self.chart, self.file.grid.per_axis, self.file.grid.margin)
    }
}

pub const BUILTIN_EXAMPLE42: &str = r#"{
  "schema_version": 1,
  "name": "example42",
  "chart": { "n": 2, "center": [[0.0, 0.0], [0.0, 0.0]], "radius": [1.0, 1.0] },
  "metric": { "kind": "sections", "sections": [["1", "0"], ["z", "w"]], "base": "euclidean" },
  "grid": { "per_axis": 5, "margin": 0.2 },
  "seed": 7
}"#;

pub const BUILTIN_EUCLIDEAN_R2: &str = r#"{
  "schema_version": 1,
  "name": "euclidean_r2",
  "chart": { "n": 2, "center": [[0.0, 0.0], [0.0, 0.0]], "radius": [1.0, 1.0] },
  "metric": { "kind": "dual_closed_form", "entries": [["1", "0"], ["0", "1"]] },
  "grid": { "per_axis": 5, "margin": 0.2 },
  "seed": 7
}"#;

pub const BUILTIN_TORIC_TORUS_CHART: &str = r#"{
  "schema_version": 1,
  "name": "toric_torus_chart",
  "chart": { "n": 2, "center": [[1.0, 0.0], [1.0, 0.0]], "radius": [0.75, 0.75] },
  "metric": { "kind": "sections", "sections": [["z", "0"], ["0", "w"]], "base": "euclidean" },
  "grid": { "per_axis": 5, "margin": 0.2 },
  "seed": 7
}"#;

pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "example42" => Some(BUILTIN_EXAMPLE42),
        "euclidean_r2" => Some(BUILTIN_EUCLIDEAN_R2),
        "toric_torus_chart" => Some(BUILTIN_TORIC_TORUS_CHART),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["example42", "euclidean_r2", "toric_torus_chart"]
}

/// Load from a builtin name first, then fall back to a file path.
pub fn load(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    if let Some(text) = builtin(name_or_path) {
        return load_str(text);
    }
    let text = std::fs::read_to_string(name_or_path)?;
    load_str(&text)
}

pub fn load_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    compile(file)
}

fn parse_entry(
    src: &str,
    n: usize,
    pointer: String,
) -> Result<crate::expr::SesquiPolynomial, ScenarioError> {
    parse(src, n).map_err(|e: ExprError| invalid(pointer, e))
}

pub fn compile(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    if file.schema_version != 1 {
        return Err(ScenarioError::SchemaVersion(file.schema_version));
    }
    let n = file.chart.n;
    if n == 0 {
        return Err(invalid("/chart/n", "chart dimension must be positive"));
    }
    if file.chart.center.len() != n {
        return Err(invalid(
            "/chart/center",
            format!("expected {n} coordinates, got {}", file.chart.center.len()),
        ));
    }
    if file.chart.radius.len() != n {
        return Err(invalid(
            "/chart/radius",
            format!("expected {n} radii, got {}", file.chart.radius.len()),
        ));
    }
    if file.chart.radius.iter().any(|&r| r <= 0.0) {
        return Err(invalid("/chart/radius", "radii must be positive"));
    }
    let center = ComplexPoint::new(
        file.chart
            .center
            .iter()
            .map(|&[re, im]| C64::new(re, im))
            .collect(),
    );
    let chart = Chart::new(center, file.chart.radius.clone(), file.name.clone());

    let metric = match file.metric.kind.as_str() {
        "sections" => {
            let rows = file
                .metric
                .sections
                .as_ref()
                .ok_or_else(|| invalid("/metric/sections", "required for kind \"sections\""))?;
            if rows.is_empty() {
                return Err(invalid("/metric/sections", "need at least one section"));
            }
            let rank = rows[0].len();
            let mut sections = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                if row.len() != rank {
                    return Err(invalid(
                        format!("/metric/sections/{i}"),
                        format!("expected {rank} components"),
                    ));
                }
                let mut components = Vec::with_capacity(rank);
                for (j, src) in row.iter().enumerate() {
                    let pointer = format!("/metric/sections/{i}/{j}");
                    let p = parse_entry(src, n, pointer.clone())?;
                    components.push(HoloPolynomial::new(p).map_err(|e| invalid(pointer, e))?);
                }
                sections.push(HolomorphicSection::new(components));
            }
            let big_n = sections.len();
            let base = match &file.metric.base {
                None | Some(BaseSpec::Named(_)) => {
                    if let Some(BaseSpec::Named(name)) = &file.metric.base {
                        if name != "euclidean" {
                            return Err(invalid(
                                "/metric/base",
                                format!(
                                    "unknown base {name:?} (expected \"euclidean\" or a matrix)"
                                ),
                            ));
                        }
                    }
                    DMatrix::identity(big_n, big_n)
                }
                Some(BaseSpec::Matrix(rows)) => {
                    if rows.len() != big_n || rows.iter().any(|r| r.len() != big_n) {
                        return Err(invalid(
                            "/metric/base",
                            format!("base must be {big_n}×{big_n}"),
                        ));
                    }
                    DMatrix::from_fn(big_n, big_n, |i, j| C64::new(rows[i][j][0], rows[i][j][1]))
                }
            };
            MetricField::section_induced(sections, base).map_err(|e| invalid("/metric", e))?
        }
        "dual_closed_form" => {
            let rows = file.metric.entries.as_ref().ok_or_else(|| {
                invalid("/metric/entries", "required for kind \"dual_closed_form\"")
            })?;
            let r = rows.len();
            let mut entries = Vec::with_capacity(r);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != r {
                    return Err(invalid(
                        format!("/metric/entries/{i}"),
                        format!("expected {r} entries (square matrix)"),
                    ));
                }
                let mut out = Vec::with_capacity(r);
                for (j, src) in row.iter().enumerate() {
                    out.push(parse_entry(src, n, format!("/metric/entries/{i}/{j}"))?);
                }
                entries.push(out);
            }
            MetricField::closed_form_dual(PolyMatrix::from_rows(entries))
                .map_err(|e| invalid("/metric/entries", e))?
        }
        "pointwise_builtin" => {
            let name = file.metric.builtin.as_ref().ok_or_else(|| {
                invalid("/metric/builtin", "required for kind \"pointwise_builtin\"")
            })?;
            builtin_pointwise(name, n).ok_or_else(|| ScenarioError::UnknownBuiltin(name.clone()))?
        }
        other => return Err(ScenarioError::UnknownMetricKind(other.to_string())),
    };

    if metric.dim() != n {
        return Err(invalid(
            "/metric",
            format!("metric lives on dimension {}, chart has {n}", metric.dim()),
        ));
    }

    Ok(Scenario {
        file,
        chart,
        metric,
    })
}

/// Registry of opaque pointwise metrics usable from scenario files.
fn builtin_pointwise(name: &str, n: usize) -> Option<MetricField> {
    match name {
        // the dual matrix of the rank-2 quotient example, used as a metric
        "example42_dual" if n == 2 => Some(crate::metric::example42::dual_as_metric()),
        // canonical negativity-failing input: h₁₁ = 1 − |z|²/2
        "shrinking_bump_r2" if n == 2 => Some(MetricField::pointwise(2, 2, |x| {
            let z2 = x.coords()[0].norm_sqr();
            let mut m = DMatrix::<C64>::identity(2, 2);
            m[(0, 0)] = C64::new(1.0 - 0.5 * z2, 0.0);
            HermitianMatrixValue::from_raw(m)
        })),
        _ => None,
    }
}

/// One sub-check of an orchestrated run; names the operation and tolerance
/// it used so reports stay auditable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub operation: String,
    pub tolerance: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(
        name: &str,
        operation: &str,
        tolerance: &str,
        passed: bool,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            operation: operation.into(),
            tolerance: tolerance.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub wall_time_ms: u64,
}

impl RunReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            schema_version: 1,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: scenario.to_string(),
            seed,
            checks: Vec::new(),
            passed: true,
            wall_time_ms: 0,
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    /// Serialization with the wall time zeroed, for determinism checks.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_ms = 0;
        let mut s = serde_json::to_string_pretty(&copy).expect("serializable");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_compile() {
        for name in builtin_names() {
            let sc = load(name).unwrap();
            assert_eq!(&sc.file.name, name);
        }
    }

    #[test]
    fn example42_builtin_matches_module_constructor() {
        let sc = load("example42").unwrap();
        assert_eq!(sc.chart.n, 2);
        assert_eq!(sc.metric.rank(), 2);
        let loaded = sc.metric.dual_matrix().unwrap();
        let module = crate::metric::example42::dual_poly_matrix();
        assert_eq!(loaded, &module);
    }

    #[test]
    fn toric_chart_metric_is_diagonal() {
        let sc = load("toric_torus_chart").unwrap();
        let dual = sc.metric.dual_matrix().unwrap();
        assert!(dual.entry(0, 1).is_zero());
        assert_eq!(
            dual.entry(0, 0),
            &crate::expr::SesquiPolynomial::abs_sq_coord(2, 0)
        );
        // positively curved on the torus chart (dual entries are |z|², |w|²)
        let x = ComplexPoint::new(vec![C64::new(1.0, 0.1), C64::new(0.9, -0.2)]);
        assert!(sc.metric.evaluate(&x).is_ok());
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let sc = load("example42").unwrap();
        let canon = sc.canonical_json();
        let sc2 = load_str(&canon).unwrap();
        assert_eq!(canon, sc2.canonical_json());
    }

    #[test]
    fn validation_errors_carry_pointers() {
        let bad = r#"{
          "schema_version": 1,
          "name": "bad",
          "chart": { "n": 2, "center": [[0,0],[0,0]], "radius": [1.0, 1.0] },
          "metric": { "kind": "sections", "sections": [["1", "conj(z)"]] }
        }"#;
        match load_str(bad) {
            Err(ScenarioError::Invalid { pointer, .. }) => {
                assert_eq!(pointer, "/metric/sections/0/1")
            }
            other => panic!("expected pointer error, got {other:?}"),
        }

        let bad_kind = r#"{
          "schema_version": 1,
          "name": "bad",
          "chart": { "n": 1, "center": [[0,0]], "radius": [1.0] },
          "metric": { "kind": "mystery" }
        }"#;
        assert!(matches!(
            load_str(bad_kind),
            Err(ScenarioError::UnknownMetricKind(_))
        ));

        let bad_dim = r#"{
          "schema_version": 1,
          "name": "bad",
          "chart": { "n": 3, "center": [[0,0],[0,0]], "radius": [1.0, 1.0, 1.0] },
          "metric": { "kind": "dual_closed_form", "entries": [["1"]] }
        }"#;
        assert!(matches!(
            load_str(bad_dim),
            Err(ScenarioError::Invalid { .. })
        ));
    }

    #[test]
    fn grid_respects_margin_and_count() {
        let sc = load("example42").unwrap();
        let grid = sc.grid();
        assert_eq!(grid.len(), 25);
        for p in &grid {
            for (c, &r) in p.coords().iter().zip(&sc.chart.radius) {
                assert!(c.norm() <= r * 0.8 + 1e-12);
            }
        }
    }

    #[test]
    fn unknown_builtin_scenario() {
        assert!(matches!(
            load_str(
                r#"{
              "schema_version": 1,
              "name": "x",
              "chart": { "n": 2, "center": [[0,0],[0,0]], "radius": [1, 1] },
              "metric": { "kind": "pointwise_builtin", "builtin": "nope" }
            }"#
            ),
            Err(ScenarioError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn run_report_round_trips() {
        let mut r = RunReport::new("example42", 7);
        r.push(CheckResult::new("a", "op", "tol", true, "fine"));
        r.push(CheckResult::new("b", "op2", "tol2", false, "broken"));
        assert!(!r.passed);
        let text = r.canonical_json();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.checks.len(), 2);
        assert_eq!(back.canonical_json(), text);
    }

    #[test]
    fn schema_version_is_checked() {
        assert!(matches!(
            load_str(
                r#"{
              "schema_version": 2,
              "name": "x",
              "chart": { "n": 1, "center": [[0,0]], "radius": [1] },
              "metric": { "kind": "dual_closed_form", "entries": [["1"]] }
            }"#
            ),
            Err(ScenarioError::SchemaVersion(2))
        ));
    }
}
