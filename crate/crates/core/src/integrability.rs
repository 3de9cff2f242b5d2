//! Local square-integrability probes: Monte-Carlo integrals over dyadic
//! shells around a center, a decay-rate classifier, and the reduction of
//! bundle-norm integrability to per-determinant weight conditions.
//!
//! The integrands here are squared section norms, which blow up like
//! 1/|f|² across complex hypersurfaces. A shell crossed by such a divisor
//! has an *infinite* integral while every Monte-Carlo average of it stays
//! finite, so each shell also carries a tail-index estimate (Hill, top 1%
//! of samples); shells whose tail index sits at or below one are treated
//! as non-finite, which forces the divergent verdict that plain rate
//! fitting would miss.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::{ComplexPoint, PolyMatrix, C64};
use crate::metric::{HolomorphicSection, MetricField};
use crate::psh::ScalarField;
use crate::tol;
use crate::util::mix_seed;

#[derive(thiserror::Error, Debug)]
pub enum IntegrabilityError {
    #[error("all samples were non-finite on shell k = {k}")]
    AllSamplesNonFinite { k: i32 },
    #[error("need at least 5 shells to classify (got {0})")]
    TooFewShells(usize),
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Convergent,
    Divergent,
    Inconclusive,
}

/// One dyadic shell estimate with its stability diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellEstimate {
    pub k: i32,
    /// Monte-Carlo estimate of the integral over the shell.
    pub estimate: f64,
    pub samples_used: usize,
    pub samples_nonfinite: usize,
    /// Hill tail-index estimate over the top 1% of samples; None when the
    /// sample distribution has no usable tail (bounded or constant).
    pub tail_alpha: Option<f64>,
    /// Largest single sample's share of the sample sum.
    pub max_share: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegrabilityVerdict {
    pub classification: Classification,
    /// Dyadic decay exponent: shell integrals behave like 2^(−e·k).
    /// Reported as 0 when shells are unstable (their true values are not
    /// finite, i.e. the sequence does not decay).
    pub fitted_exponent: f64,
    /// Distance from the decision boundary: rate band for the fit path,
    /// tail-index gap for the instability path.
    pub margin: f64,
    pub shells_used: usize,
    pub unstable_shells: bool,
    pub shells: Vec<ShellEstimate>,
}

#[derive(Debug, Clone, Copy)]
pub struct ShellParams {
    pub k_min: i32,
    pub k_max: i32,
    pub samples_per_shell: usize,
    pub seed: u64,
}

impl ShellParams {
    pub fn new(seed: u64) -> Self {
        Self {
            k_min: tol::SHELL_K_MIN,
            k_max: tol::SHELL_K_MAX,
            samples_per_shell: tol::SHELL_SAMPLES,
            seed,
        }
    }
}

fn ball_volume(dim_real: usize, radius: f64) -> f64 {
    // π^n / n! · r^{2n} for dim_real = 2n
    let n = dim_real / 2;
    let mut v = 1.0;
    for i in 1..=n {
        v *= std::f64::consts::PI / i as f64;
    }
    v * radius.powi(dim_real as i32)
}

fn standard_normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (-2.0 * u1.ln()).sqrt();
    (r * u2.cos(), r * u2.sin())
}

/// Uniform sample from the annulus r_in ≤ |x| ≤ r_out in ℝ^{2n}, radius
/// stratified in volume coordinates.
fn sample_annulus(
    center: &ComplexPoint,
    r_in: f64,
    r_out: f64,
    stratum: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> ComplexPoint {
    let n = center.dim();
    let d = 2 * n;
    let (si, s_total) = stratum;
    let lo = r_in.powi(d as i32);
    let hi = r_out.powi(d as i32);
    let width = (hi - lo) / s_total as f64;
    let u = lo + width * (si as f64 + rng.gen_range(0.0f64..1.0));
    let t = u.powf(1.0 / d as f64);
    // direction via normalized Gaussians
    let mut g = Vec::with_capacity(d);
    while g.len() < d {
        let (a, b) = standard_normal_pair(rng);
        g.push(a);
        if g.len() < d {
            g.push(b);
        }
    }
    let norm: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let coords = center
        .coords()
        .iter()
        .enumerate()
        .map(|(k, c)| c + C64::new(t * g[2 * k] / norm, t * g[2 * k + 1] / norm))
        .collect();
    ComplexPoint::new(coords)
}

const STRATA: usize = 16;

/// Monte-Carlo shell integrals I_k over the annuli
/// {2^{−k−1} ≤ |x − center| ≤ 2^{−k}}, one fixed sub-seed per shell so
/// that parallel evaluation cannot change results.
pub fn shell_integrate(
    g: &ScalarField,
    center: &ComplexPoint,
    params: &ShellParams,
) -> Result<Vec<ShellEstimate>, IntegrabilityError> {
    let ks: Vec<i32> = (params.k_min..=params.k_max).collect();
    let estimates: Vec<Result<ShellEstimate, IntegrabilityError>> = ks
        .par_iter()
        .map(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(params.seed, k as u64));
            let r_out = 2.0f64.powi(-k);
            let r_in = 0.5 * r_out;
            let m = params.samples_per_shell;
            let mut values = Vec::with_capacity(m);
            let mut nonfinite = 0usize;
            for i in 0..m {
                let x = sample_annulus(center, r_in, r_out, (i % STRATA, STRATA), &mut rng);
                let v = g.value(&x);
                if v.is_finite() && v >= 0.0 {
                    values.push(v);
                } else {
                    nonfinite += 1;
                }
            }
            if values.is_empty() {
                return Err(IntegrabilityError::AllSamplesNonFinite { k });
            }
            let d = 2 * center.dim();
            let volume = ball_volume(d, r_out) - ball_volume(d, r_in);
            let sum: f64 = values.iter().sum();
            let mean = sum / values.len() as f64;
            let max = values.iter().cloned().fold(0.0, f64::max);
            Ok(ShellEstimate {
                k,
                estimate: volume * mean,
                samples_used: values.len(),
                samples_nonfinite: nonfinite,
                tail_alpha: hill_tail_index(&mut values),
                max_share: if sum > 0.0 { max / sum } else { 0.0 },
            })
        })
        .collect();
    estimates.into_iter().collect()
}

/// Hill estimator over the top 1% (at least 50) order statistics; None
/// when the threshold is zero or the exceedance ratios vanish.
fn hill_tail_index(values: &mut [f64]) -> Option<f64> {
    let m = values.len();
    let k_tail = (m / 100).max(50).min(m.saturating_sub(1));
    if k_tail == 0 {
        return None;
    }
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let threshold = values[k_tail];
    if threshold <= 0.0 {
        return None;
    }
    let sum_log: f64 = values[..k_tail].iter().map(|v| (v / threshold).ln()).sum();
    if sum_log <= 1e-12 {
        return None;
    }
    Some(k_tail as f64 / sum_log)
}

/// Classify shell estimates: a least-squares fit of log I_k against k
/// decides geometric decay or growth, near-flat non-decaying sums are
/// log-divergent, and unstable shells (tail index ≤ the pinned bound on
/// the small-radius half) force divergence since their true integrals are
/// not finite.
pub fn classify(shells: &[ShellEstimate]) -> Result<IntegrabilityVerdict, IntegrabilityError> {
    if shells.len() < 5 {
        return Err(IntegrabilityError::TooFewShells(shells.len()));
    }

    // instability check on the small-radius half
    let half = &shells[shells.len() / 2..];
    let mut alphas: Vec<f64> = half.iter().filter_map(|s| s.tail_alpha).collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let unstable = alphas.len() >= 3 && {
        let median = alphas[alphas.len() / 2];
        median <= tol::SHELL_TAIL_ALPHA
    };
    if unstable {
        let median = alphas[alphas.len() / 2];
        return Ok(IntegrabilityVerdict {
            classification: Classification::Divergent,
            fitted_exponent: 0.0,
            margin: tol::SHELL_TAIL_ALPHA - median,
            shells_used: shells.len(),
            unstable_shells: true,
            shells: shells.to_vec(),
        });
    }

    let positive: Vec<(f64, f64)> = shells
        .iter()
        .filter(|s| s.estimate > 0.0)
        .map(|s| (s.k as f64, s.estimate.ln()))
        .collect();
    if positive.len() < shells.len() / 2 {
        // almost-everywhere-zero integrand: nothing to diverge
        return Ok(IntegrabilityVerdict {
            classification: Classification::Convergent,
            fitted_exponent: f64::INFINITY,
            margin: f64::INFINITY,
            shells_used: shells.len(),
            unstable_shells: false,
            shells: shells.to_vec(),
        });
    }

    let n = positive.len() as f64;
    let mean_k: f64 = positive.iter().map(|(k, _)| k).sum::<f64>() / n;
    let mean_y: f64 = positive.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = positive.iter().map(|(k, _)| (k - mean_k).powi(2)).sum();
    let sxy: f64 = positive
        .iter()
        .map(|(k, y)| (k - mean_k) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let residual_var: f64 = positive
        .iter()
        .map(|(k, y)| (y - mean_y - slope * (k - mean_k)).powi(2))
        .sum::<f64>()
        / n;
    let exponent = -slope / std::f64::consts::LN_2;
    let band = tol::SHELL_RATE_BAND;

    let (classification, margin) = if exponent > band {
        (Classification::Convergent, exponent - band)
    } else if exponent < -band {
        (Classification::Divergent, -exponent - band)
    } else if residual_var.sqrt() <= 1.0 {
        // flat, coherent shells: harmonic-like divergence
        (Classification::Divergent, band - exponent.abs())
    } else {
        (Classification::Inconclusive, 0.0)
    };
    Ok(IntegrabilityVerdict {
        classification,
        fitted_exponent: exponent,
        margin,
        shells_used: shells.len(),
        unstable_shells: false,
        shells: shells.to_vec(),
    })
}

/// |s|²_h ∈ L¹ near `center`: shell integration plus classification of the
/// squared norm field.
///
/// For section-induced metrics the field is the determinant-ratio norm
/// with Euclidean base regardless of the actual constant base h₀: any
/// admissible base is squeezed between constant multiples of the
/// Euclidean one, so the verdict is base-independent, while the ratio
/// stays finite almost everywhere across the degenerate locus (a direct
/// matrix evaluation would truncate the integrand's tail there).
pub fn eh_membership(
    m: &MetricField,
    s: &HolomorphicSection,
    center: &ComplexPoint,
    params: &ShellParams,
) -> Result<IntegrabilityVerdict, IntegrabilityError> {
    let field = match m.sections() {
        Ok(sections) => {
            let sections = sections.to_vec();
            let s = s.clone();
            ScalarField::new("|s|^2_h (det ratio)", m.dim(), move |x| {
                let sv = match s.evaluate(x) {
                    Ok(sv) => sv,
                    Err(_) => return f64::NAN,
                };
                match crate::metric::norm_sq_detformula(&sections, &sv, x) {
                    Ok(v) => v.to_extended(),
                    Err(_) => f64::NAN,
                }
            })
        }
        Err(_) => ScalarField::norm_sq(m, s, "|s|^2_h"),
    };
    let shells = shell_integrate(&field, center, params)?;
    classify(&shells)
}

/// The reduction of membership to determinant conditions: numerators are
/// the dets of s against all (r−1)-subsets of the sections, the weight is
/// the sum of squared r-subset dets, and each ratio is classified
/// separately.
#[derive(Debug)]
pub struct ReducedMembership {
    pub numerators: Vec<crate::expr::HoloPolynomial>,
    pub weight_terms: Vec<crate::expr::HoloPolynomial>,
    pub term_verdicts: Vec<IntegrabilityVerdict>,
    pub overall: Classification,
}

pub fn reduce_membership(
    sections: &[HolomorphicSection],
    s: &HolomorphicSection,
    center: &ComplexPoint,
    params: &ShellParams,
) -> Result<ReducedMembership, IntegrabilityError> {
    let r = sections[0].rank();
    let n = sections[0].dim();
    let big_n = sections.len();
    assert_eq!(s.rank(), r);

    let column_matrix = |cols: Vec<&HolomorphicSection>| -> PolyMatrix {
        let rows = (0..r)
            .map(|i| {
                cols.iter()
                    .map(|sec| sec.components()[i].as_sesqui().clone())
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        PolyMatrix::from_rows(rows)
    };

    let mut numerators = Vec::new();
    for subset in crate::util::combinations(big_n, r - 1) {
        let mut cols = vec![s];
        cols.extend(subset.iter().map(|&i| &sections[i]));
        let det = column_matrix(cols).determinant();
        let det = crate::expr::HoloPolynomial::new(det)
            .expect("determinant of holomorphic entries is holomorphic");
        numerators.push(det);
    }
    let mut weight_terms = Vec::new();
    for subset in crate::util::combinations(big_n, r) {
        let cols = subset.iter().map(|&i| &sections[i]).collect();
        let det = column_matrix(cols).determinant();
        let det = crate::expr::HoloPolynomial::new(det)
            .expect("determinant of holomorphic entries is holomorphic");
        weight_terms.push(det);
    }

    let weights = weight_terms.clone();
    let mut term_verdicts = Vec::with_capacity(numerators.len());
    for (idx, num) in numerators.iter().enumerate() {
        let num = num.clone();
        let weights = weights.clone();
        let field = ScalarField::new(format!("term{idx}"), n, move |x| {
            let numerator = match num.evaluate(x) {
                Ok(v) => v.norm_sqr(),
                Err(_) => return f64::NAN,
            };
            let mut den = 0.0;
            for w in &weights {
                match w.evaluate(x) {
                    Ok(v) => den += v.norm_sqr(),
                    Err(_) => return f64::NAN,
                }
            }
            if den == 0.0 {
                if numerator == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                numerator / den
            }
        });
        let sub = ShellParams {
            seed: mix_seed(params.seed, 0x7e00 + idx as u64),
            ..*params
        };
        let shells = shell_integrate(&field, center, &sub)?;
        term_verdicts.push(classify(&shells)?);
    }

    let overall = if term_verdicts
        .iter()
        .all(|v| v.classification == Classification::Convergent)
    {
        Classification::Convergent
    } else if term_verdicts
        .iter()
        .any(|v| v.classification == Classification::Divergent)
    {
        Classification::Divergent
    } else {
        Classification::Inconclusive
    };

    Ok(ReducedMembership {
        numerators,
        weight_terms,
        term_verdicts,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::HoloPolynomial;
    use crate::metric::example42;
    use crate::util::rel_err;

    fn radial_field(n: usize, two_a: f64) -> ScalarField {
        ScalarField::new(format!("1/|x|^{two_a}"), n, move |x| {
            let r2: f64 = x.coords().iter().map(|c| c.norm_sqr()).sum();
            if r2 == 0.0 {
                f64::INFINITY
            } else {
                r2.powf(-two_a / 2.0)
            }
        })
    }

    #[test]
    fn constant_field_shells_match_annulus_area() {
        let g = ScalarField::new("1", 1, |_| 1.0);
        let params = ShellParams {
            samples_per_shell: 10_000,
            ..ShellParams::new(5)
        };
        let shells = shell_integrate(&g, &ComplexPoint::origin(1), &params).unwrap();
        for s in &shells {
            let want = 0.75 * std::f64::consts::PI * 4.0f64.powi(-s.k);
            assert!(
                rel_err(s.estimate, want) < 0.02,
                "k={}: {}",
                s.k,
                s.estimate
            );
        }
        let verdict = classify(&shells).unwrap();
        assert_eq!(verdict.classification, Classification::Convergent);
    }

    #[test]
    fn log_divergent_field_has_flat_shells() {
        // 1/|z|² on ℂ: each dyadic shell contributes 2π ln 2
        let g = radial_field(1, 2.0);
        let shells = shell_integrate(&g, &ComplexPoint::origin(1), &ShellParams::new(6)).unwrap();
        let want = std::f64::consts::TAU * std::f64::consts::LN_2;
        for s in &shells {
            assert!(
                rel_err(s.estimate, want) < 0.05,
                "k={}: {}",
                s.k,
                s.estimate
            );
        }
        let verdict = classify(&shells).unwrap();
        assert_eq!(verdict.classification, Classification::Divergent);
        assert!(verdict.fitted_exponent.abs() < tol::SHELL_RATE_BAND);
    }

    #[test]
    fn inverse_abs_shells_decay_geometrically() {
        // 1/|z| on ℂ: I_k = π·2^{−k}
        let g = radial_field(1, 1.0);
        let shells = shell_integrate(&g, &ComplexPoint::origin(1), &ShellParams::new(7)).unwrap();
        for s in &shells {
            let want = std::f64::consts::PI * 2.0f64.powi(-s.k);
            assert!(rel_err(s.estimate, want) < 0.05, "k={}", s.k);
        }
        let verdict = classify(&shells).unwrap();
        assert_eq!(verdict.classification, Classification::Convergent);
        assert!((verdict.fitted_exponent - 1.0).abs() < 0.05);
    }

    #[test]
    fn radial_battery_n1() {
        let expect = [
            (0.5, Classification::Convergent),
            (0.9, Classification::Convergent),
            (1.0, Classification::Divergent),
            (1.5, Classification::Divergent),
        ];
        for (a, want) in expect {
            let g = radial_field(1, 2.0 * a);
            let shells =
                shell_integrate(&g, &ComplexPoint::origin(1), &ShellParams::new(11)).unwrap();
            let verdict = classify(&shells).unwrap();
            assert_eq!(verdict.classification, want, "a = {a}");
        }
    }

    #[test]
    fn radial_battery_n2() {
        // on ℂ² the cut sits at a = 2
        for (a, want) in [
            (1.5, Classification::Convergent),
            (2.0, Classification::Divergent),
            (2.5, Classification::Divergent),
        ] {
            let g = radial_field(2, 2.0 * a);
            let shells =
                shell_integrate(&g, &ComplexPoint::origin(2), &ShellParams::new(13)).unwrap();
            let verdict = classify(&shells).unwrap();
            assert_eq!(verdict.classification, want, "a = {a}");
        }
    }

    #[test]
    fn divisor_singularity_is_caught_by_tail_index() {
        // (1+|z|²)/|w|² around a center on {w = 0}: every shell crosses
        // the divisor, the true shell integrals are all infinite, and the
        // naive decay fit would say "convergent"
        let g = ScalarField::new("(1+|z|^2)/|w|^2", 2, |x| {
            let w2 = x.coords()[1].norm_sqr();
            if w2 == 0.0 {
                f64::INFINITY
            } else {
                (1.0 + x.coords()[0].norm_sqr()) / w2
            }
        });
        let shells = shell_integrate(&g, &ComplexPoint::origin(2), &ShellParams::new(17)).unwrap();
        let verdict = classify(&shells).unwrap();
        assert_eq!(verdict.classification, Classification::Divergent);
        assert!(verdict.unstable_shells);
        // the raw fit alone would have been fooled
        assert!(
            shells
                .iter()
                .filter(|s| s.tail_alpha.is_some_and(|a| a < 1.2))
                .count()
                >= shells.len() / 2
        );
    }

    #[test]
    fn example_membership_battery() {
        let m = example42::metric();
        let center = ComplexPoint::origin(2);
        let params = ShellParams::new(23);
        let n = 2;
        let z = HoloPolynomial::coord(n, 0);
        let w = HoloPolynomial::coord(n, 1);
        let zero = HoloPolynomial::zero(n);
        let one = HoloPolynomial::one(n);

        let e2 = HolomorphicSection::new(vec![zero.clone(), one.clone()]);
        let v = eh_membership(&m, &e2, &center, &params).unwrap();
        assert_eq!(v.classification, Classification::Divergent);

        let zw = HolomorphicSection::new(vec![zero.clone(), w.clone()]);
        let v = eh_membership(&m, &zw, &center, &params).unwrap();
        assert_eq!(v.classification, Classification::Convergent);

        let e1 = HolomorphicSection::new(vec![one.clone(), zero.clone()]);
        let v = eh_membership(&m, &e1, &center, &params).unwrap();
        assert_eq!(v.classification, Classification::Convergent);
        let _ = z;
    }

    #[test]
    fn reduction_on_example_sections() {
        let sections = example42::sections();
        let center = ComplexPoint::origin(2);
        let params = ShellParams::new(29);
        let n = 2;
        let zero = HoloPolynomial::zero(n);
        let one = HoloPolynomial::one(n);

        // s = (0,1): numerators {−1, −z}, weight {w}; divergent
        let e2 = HolomorphicSection::new(vec![zero.clone(), one.clone()]);
        let red = reduce_membership(&sections, &e2, &center, &params).unwrap();
        assert_eq!(red.numerators.len(), 2);
        assert_eq!(red.weight_terms.len(), 1);
        assert_eq!(red.overall, Classification::Divergent);
        let printed: Vec<String> = red.numerators.iter().map(|p| p.to_string()).collect();
        assert!(printed[0].contains("-1"), "{printed:?}");

        // s = s₁: numerators {0, w}; |w|²/|w|² = 1, convergent
        let s1 = sections[0].clone();
        let red = reduce_membership(&sections, &s1, &center, &params).unwrap();
        assert!(red.numerators[0].is_zero());
        assert_eq!(red.overall, Classification::Convergent);
    }

    #[test]
    fn line_bundle_reduction_battery() {
        let n = 1;
        let center = ComplexPoint::origin(1);
        let params = ShellParams::new(31);
        let z = HoloPolynomial::coord(n, 0);
        let one = HoloPolynomial::one(n);
        // sections = [z^a]; member s = z^b ⇔ b − a > −1
        for (a, b, want) in [
            (1u32, 0u32, Classification::Divergent),
            (1, 1, Classification::Convergent),
        ] {
            let sa = HolomorphicSection::new(vec![pow_poly(&z, a, &one)]);
            let sb = HolomorphicSection::new(vec![pow_poly(&z, b, &one)]);
            let red = reduce_membership(std::slice::from_ref(&sa), &sb, &center, &params).unwrap();
            assert_eq!(red.overall, want, "a={a} b={b}");
            // both routes agree
            let m =
                MetricField::section_induced(vec![sa], crate::metric::identity_base(1)).unwrap();
            let v = eh_membership(&m, &sb, &center, &params).unwrap();
            assert_eq!(v.classification, want, "direct route a={a} b={b}");
        }
    }

    fn pow_poly(z: &HoloPolynomial, e: u32, one: &HoloPolynomial) -> HoloPolynomial {
        let mut acc = one.clone();
        for _ in 0..e {
            acc = &acc * z;
        }
        acc
    }

    #[test]
    fn base_scaling_preserves_verdicts() {
        // replacing h₀ by c·h₀ rescales every norm but flips no verdict
        let sections = example42::sections();
        let center = ComplexPoint::origin(2);
        let params = ShellParams::new(41);
        let scaled_base = crate::metric::identity_base(2).scale(2.5);
        let m1 = MetricField::section_induced(sections.clone(), crate::metric::identity_base(2))
            .unwrap();
        let m2 = MetricField::section_induced(sections, scaled_base).unwrap();
        let n = 2;
        let one = HoloPolynomial::one(n);
        let zero = HoloPolynomial::zero(n);
        let w = HoloPolynomial::coord(n, 1);
        for s in [
            HolomorphicSection::new(vec![zero.clone(), one.clone()]),
            HolomorphicSection::new(vec![zero.clone(), w.clone()]),
            HolomorphicSection::new(vec![one.clone(), zero.clone()]),
        ] {
            let a = eh_membership(&m1, &s, &center, &params).unwrap();
            let b = eh_membership(&m2, &s, &center, &params).unwrap();
            assert_eq!(a.classification, b.classification);
        }
    }

    #[test]
    fn determinism_across_runs() {
        let g = radial_field(1, 1.0);
        let a = shell_integrate(&g, &ComplexPoint::origin(1), &ShellParams::new(37)).unwrap();
        let b = shell_integrate(&g, &ComplexPoint::origin(1), &ShellParams::new(37)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.estimate, y.estimate);
        }
    }

    #[test]
    fn all_nonfinite_samples_error() {
        let g = ScalarField::new("nan", 1, |_| f64::NAN);
        let params = ShellParams {
            k_min: 3,
            k_max: 8,
            samples_per_shell: 50,
            seed: 1,
        };
        assert!(matches!(
            shell_integrate(&g, &ComplexPoint::origin(1), &params),
            Err(IntegrabilityError::AllSamplesNonFinite { k: 3 })
        ));
    }

    #[test]
    fn too_few_shells_is_an_error() {
        let g = ScalarField::new("1", 1, |_| 1.0);
        let params = ShellParams {
            k_min: 3,
            k_max: 5,
            samples_per_shell: 100,
            seed: 1,
        };
        let shells = shell_integrate(&g, &ComplexPoint::origin(1), &params).unwrap();
        assert!(matches!(
            classify(&shells),
            Err(IntegrabilityError::TooFewShells(3))
        ));
    }
}
