//! Numerical plurisubharmonicity tests: the sub-mean-value inequality
//! along sampled complex lines, and a finite-difference Levi form check.
//! These drive the negativity/positivity verdicts for singular metrics,
//! where |s|²_h plays the role of the tested potential.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::expr::{ComplexPoint, C64};
use crate::metric::{norm_sq_detformula, Chart, HolomorphicSection, MetricField, NormValue};
use crate::positivity::min_eigenvalue;
use crate::tol;
use crate::util::mix_seed;

#[derive(thiserror::Error, Debug)]
pub enum PshError {
    #[error("dual metric is defined on only {defined:.0}% of the probe grid; positivity verdict needs a majority")]
    DualMostlyUndefined { defined: f64 },
    #[error("test radii must fit inside the chart")]
    RadiiTooLarge,
}

/// A real-valued field on the chart; values may be ±∞ (NaN means
/// undefined and the sample is skipped).
#[derive(Clone)]
pub struct ScalarField {
    pub label: String,
    dim: usize,
    eval: Arc<dyn Fn(&ComplexPoint) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

impl ScalarField {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        eval: impl Fn(&ComplexPoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &ComplexPoint) -> f64 {
        (self.eval)(x)
    }

    /// `x ↦ |s(x)|²_h`. Section-induced metrics with Euclidean base go
    /// through the determinant-ratio formula, which stays finite almost
    /// everywhere across the degenerate locus; other backends evaluate the
    /// matrix directly and map undefined values to +∞.
    pub fn norm_sq(m: &MetricField, s: &HolomorphicSection, label: impl Into<String>) -> Self {
        let m = m.clone();
        let s = s.clone();
        let dim = m.dim();
        let use_det = m.has_euclidean_base();
        Self::new(label, dim, move |x| {
            if use_det {
                let sv = match s.evaluate(x) {
                    Ok(sv) => sv,
                    Err(_) => return f64::NAN,
                };
                match norm_sq_detformula(m.sections().unwrap(), &sv, x) {
                    Ok(v) => v.to_extended(),
                    Err(_) => f64::NAN,
                }
            } else {
                let sv = match s.evaluate(x) {
                    Ok(sv) => sv,
                    Err(_) => return f64::NAN,
                };
                match m.norm_sq_direct(&sv, x) {
                    NormValue::Finite(v) => v,
                    NormValue::Infinite | NormValue::Undefined => f64::INFINITY,
                }
            }
        })
    }

    /// Natural logarithm of the field; zero maps to −∞.
    pub fn log(self) -> ScalarField {
        let inner = self.eval.clone();
        ScalarField {
            label: format!("log({})", self.label),
            dim: self.dim,
            eval: Arc::new(move |x| {
                let v = inner(x);
                if v.is_nan() {
                    f64::NAN
                } else if v <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    v.ln()
                }
            }),
        }
    }
}

/// The worst observed violation and where it happened.
#[derive(Debug, Clone)]
pub struct PshWitness {
    pub point: ComplexPoint,
    pub direction: Option<Vec<C64>>,
    pub radius: Option<f64>,
    /// Normalized violation (u(a) − mean)/(1+|u(a)|), or −λ_min/(1+‖H‖)
    /// for the Levi test.
    pub violation: f64,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct PshReport {
    pub label: String,
    pub points_tested: usize,
    pub directions: usize,
    pub radii: Vec<f64>,
    pub samples_checked: usize,
    pub infinite_centers: usize,
    pub skipped: usize,
    pub worst: Option<PshWitness>,
    pub tol: f64,
    pub passed: bool,
}

impl PshReport {
    fn from_violations(
        label: String,
        tol: f64,
        points: usize,
        directions: usize,
        radii: Vec<f64>,
        outcomes: Vec<SampleOutcome>,
    ) -> Self {
        let mut worst: Option<PshWitness> = None;
        let mut checked = 0;
        let mut infinite_centers = 0;
        let mut skipped = 0;
        for o in outcomes {
            match o {
                SampleOutcome::Checked(w) => {
                    checked += 1;
                    if worst.as_ref().is_none_or(|b| w.violation > b.violation) {
                        worst = Some(w);
                    }
                }
                SampleOutcome::InfiniteCenter => infinite_centers += 1,
                SampleOutcome::Skipped => skipped += 1,
            }
        }
        let passed = worst.as_ref().is_none_or(|w| w.violation <= tol);
        Self {
            label,
            points_tested: points,
            directions,
            radii,
            samples_checked: checked,
            infinite_centers,
            skipped,
            worst,
            tol,
            passed,
        }
    }
}

enum SampleOutcome {
    Checked(PshWitness),
    InfiniteCenter,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct SubmeanParams {
    pub points: usize,
    pub directions: usize,
    pub radii: Vec<f64>,
    pub circle_samples: usize,
    pub tol: f64,
    pub seed: u64,
}

impl SubmeanParams {
    /// Pinned defaults, radii scaled to the chart.
    pub fn for_chart(chart: &Chart, seed: u64) -> Self {
        let base = chart.min_radius();
        Self {
            points: tol::PSH_POINTS,
            directions: tol::PSH_DIRECTIONS,
            radii: tol::PSH_RADII_FRACTIONS.iter().map(|f| f * base).collect(),
            circle_samples: tol::PSH_CIRCLE_SAMPLES,
            tol: tol::PSH_TOL,
            seed,
        }
    }
}

fn sample_point_in(chart: &Chart, shrink: f64, rng: &mut ChaCha8Rng) -> ComplexPoint {
    let coords = chart
        .center
        .coords()
        .iter()
        .zip(&chart.radius)
        .map(|(c, &r)| {
            let rr = (r - shrink).max(0.0) * rng.gen_range(0.0f64..1.0).sqrt();
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            c + C64::from_polar(rr, th)
        })
        .collect();
    ComplexPoint::new(coords)
}

fn sample_unit_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|c| c / norm).collect();
        }
    }
}

/// Sub-mean-value test: for sampled centers a, unit directions ξ and radii
/// ρ, check u(a) ≤ mean_k u(a + ρ e^{2πik/m} ξ) + tol. Infinite values
/// follow the upper-semicontinuous conventions: +∞ on the circle or ±∞ at
/// the center make the sample vacuous.
pub fn submean_test(u: &ScalarField, chart: &Chart, p: &SubmeanParams) -> PshReport {
    let n = chart.n;
    let max_radius = p.radii.iter().cloned().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    // draw the whole sample plan up front so the evaluation loop can run
    // in parallel without touching the RNG
    let mut plan: Vec<(ComplexPoint, Vec<C64>)> = Vec::with_capacity(p.points * p.directions);
    for _ in 0..p.points {
        let a = sample_point_in(chart, max_radius, &mut rng);
        for _ in 0..p.directions {
            plan.push((a.clone(), sample_unit_direction(n, &mut rng)));
        }
    }

    let radii = p.radii.clone();
    let m = p.circle_samples;
    let tol_eff = p.tol;
    let outcomes: Vec<SampleOutcome> = plan
        .par_iter()
        .flat_map_iter(|(a, xi)| {
            let ua = u.value(a);
            let mut local = Vec::with_capacity(radii.len());
            if ua.is_nan() {
                local.push(SampleOutcome::Skipped);
                return local.into_iter();
            }
            if ua == f64::INFINITY {
                local.push(SampleOutcome::InfiniteCenter);
                return local.into_iter();
            }
            if ua == f64::NEG_INFINITY {
                local.push(SampleOutcome::Skipped);
                return local.into_iter();
            }
            for &rho in &radii {
                let mut values = Vec::with_capacity(m);
                let mut vacuous = false;
                for k in 0..m {
                    let th = std::f64::consts::TAU * k as f64 / m as f64;
                    let rot = C64::from_polar(rho, th);
                    let coords = a
                        .coords()
                        .iter()
                        .zip(xi)
                        .map(|(c, d)| c + rot * d)
                        .collect();
                    let v = u.value(&ComplexPoint::new(coords));
                    if v == f64::INFINITY || v.is_nan() || v == f64::NEG_INFINITY {
                        // +∞ strengthens the inequality; ±∞/NaN samples
                        // are measure-zero artifacts either way
                        vacuous = true;
                        break;
                    }
                    values.push(v);
                }
                if vacuous || values.is_empty() {
                    local.push(SampleOutcome::Skipped);
                    continue;
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let violation = (ua - mean) / (1.0 + ua.abs());
                if violation > tol_eff {
                    // a single circle sample close to a log pole can drag
                    // the discrete mean far below the true mean; confirm
                    // the violation against an upward-biased trimmed mean
                    // before counting it (the trim can only veto)
                    let mut sorted = values.clone();
                    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let drop = (values.len() / 20).max(1);
                    let trimmed: f64 =
                        sorted[drop..].iter().sum::<f64>() / (values.len() - drop) as f64;
                    let trimmed_violation = (ua - trimmed) / (1.0 + ua.abs());
                    if trimmed_violation <= tol_eff {
                        local.push(SampleOutcome::Skipped);
                        continue;
                    }
                }
                local.push(SampleOutcome::Checked(PshWitness {
                    point: a.clone(),
                    direction: Some(xi.clone()),
                    radius: Some(rho),
                    violation,
                    label: u.label.clone(),
                }));
            }
            local.into_iter()
        })
        .collect();

    PshReport::from_violations(
        u.label.clone(),
        p.tol,
        p.points,
        p.directions,
        p.radii.clone(),
        outcomes,
    )
}

#[derive(Debug, Clone)]
pub struct LeviParams {
    pub points: usize,
    pub step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl LeviParams {
    pub fn for_chart(_chart: &Chart, seed: u64) -> Self {
        Self {
            points: tol::PSH_POINTS,
            step: tol::FD_STEP,
            tol: 1e-5,
            seed,
        }
    }
}

/// Finite-difference complex Hessian ∂²u/∂z_i∂z̄_j; passes when the
/// smallest eigenvalue stays above −tol at every sampled point. Points
/// whose stencil hits a non-finite value are skipped.
pub fn levi_test(u: &ScalarField, chart: &Chart, p: &LeviParams) -> PshReport {
    let _ = chart.n;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let margin = 3.0 * p.step * (1.0 + chart.min_radius());
    let centers: Vec<ComplexPoint> = (0..p.points)
        .map(|_| sample_point_in(chart, margin, &mut rng))
        .collect();

    let outcomes: Vec<SampleOutcome> = centers
        .par_iter()
        .map(|a| match levi_min_eig(u, a, p.step) {
            Some((lambda, scale)) => {
                let violation = -lambda / (1.0 + scale);
                SampleOutcome::Checked(PshWitness {
                    point: a.clone(),
                    direction: None,
                    radius: None,
                    violation,
                    label: u.label.clone(),
                })
            }
            None => SampleOutcome::Skipped,
        })
        .collect();

    PshReport::from_violations(u.label.clone(), p.tol, p.points, 0, vec![], outcomes)
}

/// Min eigenvalue of the FD Levi form and the matrix scale, or None when
/// the stencil is unusable.
pub fn levi_min_eig(u: &ScalarField, a: &ComplexPoint, step: f64) -> Option<(f64, f64)> {
    let n = a.dim();
    let eval = |coords: Vec<C64>| u.value(&ComplexPoint::new(coords));
    let shift = |mut coords: Vec<C64>, axis: usize, re: f64, im: f64| {
        coords[axis] += C64::new(re, im);
        coords
    };
    let base = a.coords().to_vec();
    let h: Vec<f64> = base.iter().map(|c| step * (1.0 + c.norm())).collect();

    // second partial in one real coordinate
    let second = |axis: usize, imag: bool| -> f64 {
        let d = h[axis];
        let (re, im) = if imag { (0.0, d) } else { (d, 0.0) };
        let plus = eval(shift(base.clone(), axis, re, im));
        let minus = eval(shift(base.clone(), axis, -re, -im));
        let center = eval(base.clone());
        (plus - 2.0 * center + minus) / (d * d)
    };
    // mixed partial across two real coordinates
    let mixed = |ax1: usize, im1: bool, ax2: usize, im2: bool| -> f64 {
        let d1 = h[ax1];
        let d2 = h[ax2];
        let off = |s1: f64, s2: f64| {
            let mut c = base.clone();
            let (re1, imv1) = if im1 { (0.0, s1 * d1) } else { (s1 * d1, 0.0) };
            c = shift(c, ax1, re1, imv1);
            let (re2, imv2) = if im2 { (0.0, s2 * d2) } else { (s2 * d2, 0.0) };
            c = shift(c, ax2, re2, imv2);
            eval(c)
        };
        (off(1.0, 1.0) - off(1.0, -1.0) - off(-1.0, 1.0) + off(-1.0, -1.0)) / (4.0 * d1 * d2)
    };

    let mut hess = nalgebra::DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (dxx, dyy, dxy, dyx) = if i == j {
                (
                    second(i, false),
                    second(i, true),
                    mixed(i, false, i, true),
                    mixed(i, true, i, false),
                )
            } else {
                (
                    mixed(i, false, j, false),
                    mixed(i, true, j, true),
                    mixed(i, false, j, true),
                    mixed(i, true, j, false),
                )
            };
            if ![dxx, dyy, dxy, dyx].iter().all(|v| v.is_finite()) {
                return None;
            }
            hess[(i, j)] = C64::new((dxx + dyy) / 4.0, (dxy - dyx) / 4.0);
        }
    }
    let herm = (hess.clone() + hess.adjoint()).scale(0.5);
    let scale = herm.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Some((min_eigenvalue(&herm), scale))
}

/// Negativity verdict: the sub-mean test applied to |s|²_h for the
/// coordinate basis sections plus seeded random sections of bounded
/// degree, aggregated over all of them.
pub fn negativity_verdict(
    m: &MetricField,
    chart: &Chart,
    degree: u32,
    trials: usize,
    seed: u64,
    tol: f64,
) -> PshReport {
    let r = m.rank();
    let n = m.dim();
    let mut sections: Vec<(String, HolomorphicSection)> = Vec::new();
    for i in 0..r {
        let mut v = vec![C64::new(0.0, 0.0); r];
        v[i] = C64::new(1.0, 0.0);
        sections.push((format!("e{}", i + 1), HolomorphicSection::constant(n, &v)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xa11c));
    for t in 0..trials {
        sections.push((
            format!("random{t}"),
            HolomorphicSection::random(n, r, degree, &mut rng),
        ));
    }

    let mut aggregate: Option<PshReport> = None;
    for (idx, (label, s)) in sections.iter().enumerate() {
        let field = ScalarField::norm_sq(m, s, format!("|{label}|^2_h"));
        let mut params = SubmeanParams::for_chart(chart, mix_seed(seed, idx as u64 + 1));
        params.tol = tol;
        let report = submean_test(&field, chart, &params);
        aggregate = Some(match aggregate {
            None => report,
            Some(mut agg) => {
                agg.points_tested += report.points_tested;
                agg.samples_checked += report.samples_checked;
                agg.infinite_centers += report.infinite_centers;
                agg.skipped += report.skipped;
                agg.passed &= report.passed;
                let worse = match (&agg.worst, &report.worst) {
                    (Some(a), Some(b)) => b.violation > a.violation,
                    (None, Some(_)) => true,
                    _ => false,
                };
                if worse {
                    agg.worst = report.worst;
                }
                agg
            }
        });
    }
    let mut out = aggregate.expect("at least the basis sections");
    out.label = format!("negativity of {} sections", sections.len());
    out
}

/// Positivity verdict: negativity of the dual field. Requires the dual to
/// be defined on a majority of a probe grid.
pub fn positivity_verdict(
    m: &MetricField,
    chart: &Chart,
    degree: u32,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<PshReport, PshError> {
    let dual = m.dual_field();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xd0a1));
    let probes = 100;
    let defined = (0..probes)
        .filter(|_| {
            let x = sample_point_in(chart, 0.0, &mut rng);
            dual.evaluate(&x).is_ok()
        })
        .count();
    let fraction = defined as f64 / probes as f64;
    if fraction <= 0.5 {
        return Err(PshError::DualMostlyUndefined {
            defined: fraction * 100.0,
        });
    }
    let mut report = negativity_verdict(&dual, chart, degree, trials, seed, tol);
    report.label = format!("positivity via dual ({})", report.label);
    Ok(report)
}
