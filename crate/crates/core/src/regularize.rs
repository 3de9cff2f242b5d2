//! Mollification of scalar fields and metric duals by compactly supported
//! radial polynomial bumps. Convolving a radial unit-mass kernel with
//! `|z_k|²` adds the constant ε_χ = ∫χ(p)|p₁|²dλ(p), and leaves mixed
//! terms like z·w̄ unchanged; those identities are what the smoothing
//! checks pin down.

use nalgebra::DMatrix;

use crate::expr::{ComplexPoint, C64};
use crate::metric::{transpose_inverse, Chart, HermitianMatrixValue, MetricField};
use crate::psh::ScalarField;
use crate::tol;

#[derive(thiserror::Error, Debug)]
pub enum RegularizeError {
    #[error("kernel radius and power must satisfy ρ > 0, p ≥ 3 (got ρ = {rho}, p = {power})")]
    BadParams { rho: f64, power: u32 },
    #[error("kernel dimension must be a positive even number of real coordinates (got {0})")]
    OddDimension(usize),
    #[error(
        "radial quadrature did not converge (node-count refinement changed the value by {0:.3e})"
    )]
    QuadratureNonConvergence(f64),
    #[error("convolution support leaves the chart (margin {margin:.3} < kernel radius {rho:.3})")]
    MarginViolation { margin: f64, rho: f64 },
    #[error("integrand is non-finite on the kernel support; convolve the dual of a metric, not a singular metric itself")]
    SingularIntegrand,
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Radial bump kernel χ(p) = c·(1 − |p|²/ρ²)^p on the ball |p| ≤ ρ of
/// ℝ^dim_real, normalized to unit mass. Carries a precomputed tensor
/// quadrature rule over the support whose weights sum to exactly one.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub rho: f64,
    pub power: u32,
    pub dim_real: usize,
    /// Normalization constant from radial quadrature.
    pub normalization: f64,
    /// ε_χ = ∫ χ(p) |p₁|² dλ(p), the shift picked up by |z_k|² under
    /// convolution.
    pub eps_chi: f64,
    /// In-ball tensor nodes (real offsets) and their unit-sum weights.
    nodes: Vec<(Vec<f64>, f64)>,
}

fn surface_area(d: usize) -> f64 {
    // 2π^{d/2}/Γ(d/2) for even d: Γ(k) = (k−1)!
    let k = d / 2;
    let mut gamma = 1.0;
    for i in 1..k {
        gamma *= i as f64;
    }
    2.0 * std::f64::consts::PI.powi(k as i32) / gamma
}

fn radial_integral(rho: f64, power: u32, d: usize, extra_t2: bool, n_nodes: usize) -> f64 {
    let (xs, ws) = gauss_legendre(n_nodes);
    let mut acc = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let t = 0.5 * rho * (x + 1.0);
        let wt = 0.5 * rho * w;
        let bump = (1.0 - t * t / (rho * rho)).powi(power as i32);
        let mut val = bump * t.powi(d as i32 - 1);
        if extra_t2 {
            val *= t * t;
        }
        acc += wt * val;
    }
    acc
}

/// Build a kernel: the normalization and ε_χ come from radial quadrature
/// (exact for the polynomial profile), the convolution rule is tensor
/// Gauss–Legendre over the support cube, zeroed outside the ball and
/// renormalized to unit discrete mass.
pub fn make_kernel(rho: f64, power: u32, dim_real: usize) -> Result<Kernel, RegularizeError> {
    if rho <= 0.0 || power < 3 {
        return Err(RegularizeError::BadParams { rho, power });
    }
    if dim_real == 0 || !dim_real.is_multiple_of(2) {
        return Err(RegularizeError::OddDimension(dim_real));
    }
    let sigma = surface_area(dim_real);
    let mass0 = radial_integral(rho, power, dim_real, false, tol::KERNEL_RADIAL_NODES);
    let mass1 = radial_integral(rho, power, dim_real, false, tol::KERNEL_RADIAL_NODES + 16);
    let drift = (mass0 - mass1).abs() / mass1.abs();
    if drift > 1e-10 {
        return Err(RegularizeError::QuadratureNonConvergence(drift));
    }
    let c = 1.0 / (sigma * mass0);
    // mean of |p₁|²/|p|² over the sphere is 2/d
    let eps_chi = c
        * sigma
        * (2.0 / dim_real as f64)
        * radial_integral(rho, power, dim_real, true, tol::KERNEL_RADIAL_NODES);

    let (xs, ws) = gauss_legendre(tol::KERNEL_NODES_PER_AXIS);
    let axis_nodes: Vec<f64> = xs.iter().map(|x| x * rho).collect();
    let axis_weights: Vec<f64> = ws.iter().map(|w| w * rho).collect();
    let mut nodes = Vec::new();
    let mut idx = vec![0usize; dim_real];
    loop {
        let mut point = Vec::with_capacity(dim_real);
        let mut weight = 1.0;
        let mut r2 = 0.0;
        for (axis, &i) in idx.iter().enumerate() {
            let x = axis_nodes[i];
            point.push(x);
            weight *= axis_weights[i];
            r2 += x * x;
            let _ = axis;
        }
        if r2 < rho * rho {
            let chi = c * (1.0 - r2 / (rho * rho)).powi(power as i32);
            nodes.push((point, weight * chi));
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == dim_real {
                break;
            }
            idx[axis] += 1;
            if idx[axis] < axis_nodes.len() {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
        if axis == dim_real {
            break;
        }
    }
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut nodes {
        *w /= total;
    }
    Ok(Kernel {
        rho,
        power,
        dim_real,
        normalization: c,
        eps_chi,
        nodes,
    })
}

impl Kernel {
    pub fn profile(&self, t: f64) -> f64 {
        if t >= self.rho {
            0.0
        } else {
            self.normalization * (1.0 - t * t / (self.rho * self.rho)).powi(self.power as i32)
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn offsets_complex(&self) -> impl Iterator<Item = (Vec<C64>, f64)> + '_ {
        self.nodes.iter().map(|(p, w)| {
            let coords = p
                .chunks(2)
                .map(|c| C64::new(c[0], c[1]))
                .collect::<Vec<_>>();
            (coords, *w)
        })
    }

    fn check_margin(&self, chart: &Chart, x: &ComplexPoint) -> Result<(), RegularizeError> {
        for ((xk, ck), &rk) in x
            .coords()
            .iter()
            .zip(chart.center.coords())
            .zip(&chart.radius)
        {
            let margin = rk - (xk - ck).norm();
            if margin < self.rho - 1e-12 {
                return Err(RegularizeError::MarginViolation {
                    margin,
                    rho: self.rho,
                });
            }
        }
        Ok(())
    }
}

/// (χ * u)(x) = Σ ω_i u(x − p_i) over the precomputed rule. The node set
/// is symmetric under p ↦ −p with equal weights, so polynomial identities
/// hold to quadrature accuracy.
pub fn convolve_scalar(
    u: &ScalarField,
    kernel: &Kernel,
    x: &ComplexPoint,
    chart: &Chart,
) -> Result<f64, RegularizeError> {
    assert_eq!(
        kernel.dim_real,
        2 * u.dim(),
        "kernel/field dimension mismatch"
    );
    kernel.check_margin(chart, x)?;
    let mut acc = 0.0;
    for (offset, w) in kernel.offsets_complex() {
        let coords = x.coords().iter().zip(&offset).map(|(c, p)| c - p).collect();
        let v = u.value(&ComplexPoint::new(coords));
        if !v.is_finite() {
            return Err(RegularizeError::SingularIntegrand);
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Entrywise convolution of the dual matrix, then transpose-inverse: the
/// smoothed metric value. The dual entries of the supported backends are
/// polynomial, hence bounded on the support; a singular smoothed dual is
/// flagged as degenerate.
pub fn convolve_metric(
    m: &MetricField,
    kernel: &Kernel,
    x: &ComplexPoint,
    chart: &Chart,
) -> Result<HermitianMatrixValue, RegularizeError> {
    assert_eq!(
        kernel.dim_real,
        2 * m.dim(),
        "kernel/metric dimension mismatch"
    );
    kernel.check_margin(chart, x)?;
    let smoothed = convolve_dual(m, kernel, x)?;
    match transpose_inverse(&smoothed) {
        Some(h) => Ok(HermitianMatrixValue::from_raw(h)),
        None => Ok(HermitianMatrixValue::degenerate(m.rank())),
    }
}

/// The smoothed dual matrix itself, Σ ω_i D(x − p_i).
pub fn convolve_dual(
    m: &MetricField,
    kernel: &Kernel,
    x: &ComplexPoint,
) -> Result<DMatrix<C64>, RegularizeError> {
    let r = m.rank();
    let dual = m.dual_field();
    let mut acc: DMatrix<C64> = DMatrix::zeros(r, r);
    for (offset, w) in kernel.offsets_complex() {
        let coords = x.coords().iter().zip(&offset).map(|(c, p)| c - p).collect();
        let d = dual.evaluate(&ComplexPoint::new(coords));
        if !d.is_ok() {
            return Err(RegularizeError::SingularIntegrand);
        }
        acc += d.entries.scale(w);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::metric::example42;
    use crate::psh::{submean_test, SubmeanParams};
    use crate::util::chart_grid;

    fn scalar(src: &str, n: usize) -> ScalarField {
        let p = parse(src, n).unwrap();
        ScalarField::new(src.to_string(), n, move |x| p.evaluate(x).unwrap().re)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (xs, ws) = gauss_legendre(8);
        // ∫_{-1}^{1} x^k dx
        for k in 0..16u32 {
            let got: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(k as i32)).sum();
            let want = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            assert!((got - want).abs() < 1e-13, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn kernel_mass_on_fine_grid() {
        for (rho, p, d) in [(0.3, 3u32, 4usize), (0.15, 4, 4), (0.3, 3, 2)] {
            let k = make_kernel(rho, p, d).unwrap();
            // re-integrate on a finer tensor grid
            let (xs, ws) = gauss_legendre(36);
            let mut mass = 0.0;
            let mut idx = vec![0usize; d];
            'outer: loop {
                let mut weight = 1.0;
                let mut r2 = 0.0;
                for (axis, &i) in idx.iter().enumerate() {
                    let x = xs[i] * rho;
                    weight *= ws[i] * rho;
                    r2 += x * x;
                    let _ = axis;
                }
                mass += weight * k.profile(r2.sqrt());
                let mut axis = 0;
                loop {
                    if axis == d {
                        break 'outer;
                    }
                    idx[axis] += 1;
                    if idx[axis] < xs.len() {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
            }
            assert!(
                (mass - 1.0).abs() < 1e-6,
                "mass {mass} for rho={rho} p={p} d={d}"
            );
        }
    }

    #[test]
    fn eps_chi_symmetry_split() {
        // in ℂ², |p₁|² and |p₂|² contribute equally: ε_χ = ½∫χ|p|²
        let k = make_kernel(0.3, 3, 4).unwrap();
        let sigma = surface_area(4);
        let total_second_moment = k.normalization * sigma * radial_integral(0.3, 3, 4, true, 48);
        assert!((k.eps_chi - 0.5 * total_second_moment).abs() < 1e-8);
        // closed form for this profile: ρ²/6
        assert!((k.eps_chi - 0.09 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn eps_chi_shrinks_with_radius() {
        let e: Vec<f64> = [0.4, 0.2, 0.1]
            .iter()
            .map(|&r| make_kernel(r, 3, 4).unwrap().eps_chi)
            .collect();
        assert!(e[0] > e[1] && e[1] > e[2]);
    }

    #[test]
    fn bad_kernel_params_rejected() {
        assert!(make_kernel(0.0, 3, 4).is_err());
        assert!(make_kernel(0.3, 2, 4).is_err());
        assert!(make_kernel(0.3, 3, 3).is_err());
    }

    #[test]
    fn convolution_identities() {
        let chart = Chart::unit_polydisc(2, "conv");
        for (rho, p) in [(0.3, 3u32), (0.15, 4)] {
            let k = make_kernel(rho, p, 4).unwrap();
            let abs_z = scalar("z*conj(z)", 2);
            let cross_re = scalar("0.5*z*conj(w) + 0.5*w*conj(z)", 2); // Re(z w̄)
            let cross_im = scalar("-0.5*i*z*conj(w) + 0.5*i*w*conj(z)", 2); // Im(z w̄)
            let const_one = ScalarField::new("1", 2, |_| 1.0);
            for x in chart_grid(&chart, 3, 0.5) {
                let got = convolve_scalar(&abs_z, &k, &x, &chart).unwrap();
                let want = x.coords()[0].norm_sqr() + k.eps_chi;
                assert!((got - want).abs() < 1e-6, "χ*|z|²: {got} vs {want}");

                let zw = x.coords()[0] * x.coords()[1].conj();
                let gre = convolve_scalar(&cross_re, &k, &x, &chart).unwrap();
                let gim = convolve_scalar(&cross_im, &k, &x, &chart).unwrap();
                assert!((gre - zw.re).abs() < 1e-6, "Re z w̄ changed");
                assert!((gim - zw.im).abs() < 1e-6, "Im z w̄ changed");

                let one = convolve_scalar(&const_one, &k, &x, &chart).unwrap();
                assert!((one - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn margin_violation_detected() {
        let chart = Chart::unit_polydisc(2, "conv");
        let k = make_kernel(0.3, 3, 4).unwrap();
        let u = scalar("z*conj(z)", 2);
        let near_edge = ComplexPoint::new(vec![C64::new(0.9, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(
            convolve_scalar(&u, &k, &near_edge, &chart),
            Err(RegularizeError::MarginViolation { .. })
        ));
    }

    #[test]
    fn smoothed_dual_is_dual_plus_eps_identity() {
        let chart = Chart::unit_polydisc(2, "conv");
        let m = example42::metric();
        let dual = example42::dual_poly_matrix();
        for (rho, p) in [(0.3, 3u32), (0.15, 4)] {
            let k = make_kernel(rho, p, 4).unwrap();
            for x in chart_grid(&chart, 7, 0.5) {
                let smoothed = convolve_dual(&m, &k, &x).unwrap();
                let base = dual.evaluate(&x).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        let want = base[(i, j)]
                            + if i == j {
                                C64::new(k.eps_chi, 0.0)
                            } else {
                                C64::new(0.0, 0.0)
                            };
                        let gap = (smoothed[(i, j)] - want).norm();
                        assert!(gap < 1e-6, "entry ({i},{j}) gap {gap}");
                    }
                }
            }
        }
    }

    #[test]
    fn smoothed_metric_at_origin() {
        let chart = Chart::unit_polydisc(2, "conv");
        let m = example42::metric();
        let k = make_kernel(0.3, 3, 4).unwrap();
        let h = convolve_metric(&m, &k, &ComplexPoint::origin(2), &chart).unwrap();
        assert!(h.is_ok());
        // transpose-inverse of diag(1+ε, ε)
        assert!((h.entries[(0, 0)].re - 1.0 / (1.0 + k.eps_chi)).abs() < 1e-6);
        assert!((h.entries[(1, 1)].re - 1.0 / k.eps_chi).abs() < 1e-3 * (1.0 / k.eps_chi));
        assert!(h.entries[(0, 1)].norm() < 1e-6);
    }

    #[test]
    fn constant_metric_unchanged() {
        let dual = crate::expr::PolyMatrix::from_rows(vec![
            vec![parse("2", 2).unwrap(), parse("i", 2).unwrap()],
            vec![parse("-i", 2).unwrap(), parse("3", 2).unwrap()],
        ]);
        let m = MetricField::closed_form_dual(dual).unwrap();
        let k = make_kernel(0.3, 3, 4).unwrap();
        let x = ComplexPoint::new(vec![C64::new(0.2, 0.1), C64::new(-0.1, 0.3)]);
        let got = convolve_dual(&m, &k, &x).unwrap();
        let want = m.dual_matrix().unwrap().evaluate(&x).unwrap();
        assert!((&got - &want).iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn convolution_is_linear_and_preserves_hermitian() {
        let chart = Chart::unit_polydisc(2, "conv");
        let k = make_kernel(0.3, 3, 4).unwrap();
        let u = scalar("z*conj(z)", 2);
        let v = scalar("w*conj(w) + 2", 2);
        let combo = scalar("3*z*conj(z) - 0.5*w*conj(w) - 1", 2);
        let x = ComplexPoint::new(vec![C64::new(0.1, 0.2), C64::new(-0.2, 0.1)]);
        let cu = convolve_scalar(&u, &k, &x, &chart).unwrap();
        let cv = convolve_scalar(&v, &k, &x, &chart).unwrap();
        let cc = convolve_scalar(&combo, &k, &x, &chart).unwrap();
        assert!((cc - (3.0 * cu - 0.5 * (cv - 2.0) - 1.0)).abs() < 1e-10);

        let m = example42::metric();
        let d = convolve_dual(&m, &k, &x).unwrap();
        let defect = (&d - d.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(defect < 1e-14);
    }

    #[test]
    fn smoothing_preserves_psh() {
        let chart = Chart::unit_polydisc(1, "conv");
        let k = make_kernel(0.2, 3, 2).unwrap();
        for src in ["z*conj(z)", "z*conj(z) + 0.5*z^3 + 0.5*conj(z)^3"] {
            let u = scalar(src, 1);
            let inner = Chart::new(ComplexPoint::origin(1), vec![0.5], "inner");
            let smoothed = {
                let k = k.clone();
                let chart_outer = chart.clone();
                ScalarField::new(format!("χ*({src})"), 1, move |x| {
                    convolve_scalar(&u, &k, x, &chart_outer).unwrap_or(f64::NAN)
                })
            };
            let mut params = SubmeanParams::for_chart(&inner, 31);
            params.points = 40;
            params.directions = 4;
            let report = submean_test(&smoothed, &inner, &params);
            assert!(report.passed, "{src}: {:?}", report.worst);
        }
    }
}
