//! Hermitian metrics on trivialized rank-`r` bundles over a chart.
//!
//! A [`MetricField`] evaluates to a (possibly degenerate) nonnegative
//! Hermitian matrix at each chart point. Three backends are supported:
//! quotient metrics induced by holomorphic sections, closed-form dual
//! matrices with exact sesquilinear entries, and opaque pointwise
//! evaluators. Vector norms can be computed either through the evaluated
//! matrix or through the determinant-ratio formula, which stays finite
//! almost everywhere even across the degenerate locus.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::expr::{ComplexPoint, ExprError, HoloPolynomial, PolyMatrix, SesquiPolynomial, C64};
use crate::tol;
use crate::util::combinations;

#[derive(thiserror::Error, Debug)]
pub enum MetricError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("need at least rank-many sections (N = {n_sections}, r = {rank})")]
    TooFewSections { n_sections: usize, rank: usize },
    #[error(
        "sections do not generically generate the bundle (all rank-size minors vanish identically)"
    )]
    NotGenericallyGenerating,
    #[error("base matrix must be Hermitian positive definite")]
    BadBase,
    #[error("dual matrix must be square and symbolically Hermitian")]
    BadDualMatrix,
    #[error("operation requires the {expected} backend")]
    WrongBackend { expected: &'static str },
    #[error("operation requires the Euclidean base metric")]
    NonEuclideanBase,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("regularization parameter must be positive (got {0})")]
    NonPositiveEps(f64),
}

/// A holomorphic section of the trivialized bundle, one polynomial per
/// fiber component.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphicSection {
    components: Vec<HoloPolynomial>,
}

impl HolomorphicSection {
    pub fn new(components: Vec<HoloPolynomial>) -> Self {
        assert!(!components.is_empty());
        let n = components[0].dim();
        assert!(components.iter().all(|c| c.dim() == n));
        Self { components }
    }

    pub fn constant(n: usize, values: &[C64]) -> Self {
        Self::new(
            values
                .iter()
                .map(|&v| HoloPolynomial::constant(n, v))
                .collect(),
        )
    }

    /// Seeded random section: every component carries all monomials of
    /// total degree ≤ `degree` with coefficients uniform on the unit disc.
    pub fn random(n: usize, rank: usize, degree: u32, rng: &mut impl Rng) -> Self {
        let mut components = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut p = SesquiPolynomial::zero(n);
            for expo in monomials_up_to(n, degree) {
                let (re, im) = random_unit_disc(rng);
                let mut term = SesquiPolynomial::constant(n, C64::new(re, im));
                for (k, &e) in expo.iter().enumerate() {
                    term = &term * &SesquiPolynomial::coord(n, k).pow(e);
                }
                p = &p + &term;
            }
            components.push(HoloPolynomial::new(p).expect("built from coordinates"));
        }
        Self::new(components)
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[HoloPolynomial] {
        &self.components
    }

    pub fn evaluate(&self, x: &ComplexPoint) -> Result<Vec<C64>, ExprError> {
        self.components.iter().map(|c| c.evaluate(x)).collect()
    }
}

fn monomials_up_to(n: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for prefix in &out {
            let used: u32 = prefix.iter().sum();
            for e in 0..=degree.saturating_sub(used) {
                let mut v = prefix.clone();
                v.push(e);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn random_unit_disc(rng: &mut impl Rng) -> (f64, f64) {
    loop {
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        if re * re + im * im <= 1.0 {
            return (re, im);
        }
    }
}

/// Polydisc chart: center, per-axis radii, label.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub n: usize,
    pub center: ComplexPoint,
    pub radius: Vec<f64>,
    pub label: String,
}

impl Chart {
    pub fn new(center: ComplexPoint, radius: Vec<f64>, label: impl Into<String>) -> Self {
        assert_eq!(center.dim(), radius.len());
        assert!(
            radius.iter().all(|&r| r > 0.0),
            "chart radii must be positive"
        );
        Self {
            n: center.dim(),
            center,
            radius,
            label: label.into(),
        }
    }

    pub fn unit_polydisc(n: usize, label: impl Into<String>) -> Self {
        Self::new(ComplexPoint::origin(n), vec![1.0; n], label)
    }

    pub fn contains(&self, x: &ComplexPoint) -> bool {
        x.coords()
            .iter()
            .zip(self.center.coords())
            .zip(&self.radius)
            .all(|((z, c), &r)| (z - c).norm() <= r)
    }

    /// Smallest per-axis radius, the scale for sampling radii.
    pub fn min_radius(&self) -> f64 {
        self.radius.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MetricStatus {
    Ok,
    Degenerate,
    Undefined,
}

/// The value of a metric at a point: an `r×r` Hermitian matrix plus a
/// status flag for the degenerate locus.
#[derive(Debug, Clone)]
pub struct HermitianMatrixValue {
    pub entries: DMatrix<C64>,
    pub status: MetricStatus,
    pub hermitian_defect: f64,
}

impl HermitianMatrixValue {
    /// Symmetrize a raw matrix and record the Hermitian defect. Non-finite
    /// entries or a large defect yield `Undefined`.
    pub fn from_raw(m: DMatrix<C64>) -> Self {
        if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Self::undefined(m.nrows());
        }
        let adj = m.adjoint();
        let defect = (&m - &adj).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let sym = (&m + &adj).scale(0.5);
        let scale = 1.0 + sym.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let status = if defect < tol::HERMITIAN_SOFT * scale {
            MetricStatus::Ok
        } else {
            MetricStatus::Undefined
        };
        Self {
            entries: sym,
            status,
            hermitian_defect: defect,
        }
    }

    pub fn degenerate(r: usize) -> Self {
        Self {
            entries: DMatrix::zeros(r, r),
            status: MetricStatus::Degenerate,
            hermitian_defect: 0.0,
        }
    }

    pub fn undefined(r: usize) -> Self {
        Self {
            entries: DMatrix::zeros(r, r),
            status: MetricStatus::Undefined,
            hermitian_defect: 0.0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == MetricStatus::Ok
    }

    pub fn rank(&self) -> usize {
        self.entries.nrows()
    }
}

/// Result of a norm computation; infinite values are explicit rather than
/// encoded as floating-point overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormValue {
    Finite(f64),
    Infinite,
    Undefined,
}

impl NormValue {
    /// Collapse to an extended real for integration purposes.
    pub fn to_extended(self) -> f64 {
        match self {
            NormValue::Finite(v) => v,
            NormValue::Infinite | NormValue::Undefined => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            NormValue::Finite(v) => Some(v),
            _ => None,
        }
    }
}

type PointwiseEval = Arc<dyn Fn(&ComplexPoint) -> HermitianMatrixValue + Send + Sync>;

/// Metric backends. The dual matrix of a section-induced metric is
/// precomputed at construction since every evaluation goes through it.
#[derive(Clone)]
pub enum MetricBackend {
    SectionInduced {
        sections: Vec<HolomorphicSection>,
        base: DMatrix<C64>,
        dual: PolyMatrix,
    },
    ClosedFormDual {
        dual: PolyMatrix,
    },
    PointwiseNumeric {
        rank: usize,
        dim: usize,
        eval: PointwiseEval,
    },
}

impl std::fmt::Debug for MetricBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricBackend::SectionInduced { sections, .. } => f
                .debug_struct("SectionInduced")
                .field("n_sections", &sections.len())
                .finish(),
            MetricBackend::ClosedFormDual { dual } => f
                .debug_struct("ClosedFormDual")
                .field("rank", &dual.nrows())
                .finish(),
            MetricBackend::PointwiseNumeric { rank, dim, .. } => f
                .debug_struct("PointwiseNumeric")
                .field("rank", rank)
                .field("dim", dim)
                .finish(),
        }
    }
}

/// Optional scalar prefactor `num/den` multiplying the metric value.
#[derive(Debug, Clone)]
pub struct ScaleFactor {
    pub num: SesquiPolynomial,
    pub den: SesquiPolynomial,
}

/// A Hermitian-matrix-valued function on a chart, possibly degenerate or
/// infinite on a null set.
#[derive(Debug, Clone)]
pub struct MetricField {
    backend: MetricBackend,
    scale: Option<ScaleFactor>,
}

impl MetricField {
    /// Quotient metric induced by global sections and a constant Hermitian
    /// positive-definite base metric. The dual matrix
    /// `D_jk = Σ_{i,l} (h₀⁻¹)_{li} f_{i,j} conj(f_{l,k})` is computed
    /// symbolically; for the Euclidean base it reduces to
    /// `Σ_i f_{i,j} conj(f_{i,k})`.
    pub fn section_induced(
        sections: Vec<HolomorphicSection>,
        base: DMatrix<C64>,
    ) -> Result<Self, MetricError> {
        let n_sections = sections.len();
        assert!(n_sections > 0, "need at least one section");
        let rank = sections[0].rank();
        if sections.iter().any(|s| s.rank() != rank) {
            return Err(MetricError::Shape(
                "sections must share the fiber rank".into(),
            ));
        }
        if n_sections < rank {
            return Err(MetricError::TooFewSections { n_sections, rank });
        }
        if base.nrows() != n_sections || base.ncols() != n_sections {
            return Err(MetricError::BadBase);
        }
        let base_inv = hermitian_pd_inverse(&base).ok_or(MetricError::BadBase)?;
        let dual = gram_dual_matrix(&sections, &base_inv);
        // generic generation is exact: det D ≡ 0 iff the sections never span
        if dual.determinant().is_zero() {
            return Err(MetricError::NotGenericallyGenerating);
        }
        Ok(Self {
            backend: MetricBackend::SectionInduced {
                sections,
                base,
                dual,
            },
            scale: None,
        })
    }

    /// Metric given through a closed-form dual matrix with exact entries.
    /// Requires exact symbolic Hermitian symmetry.
    pub fn closed_form_dual(dual: PolyMatrix) -> Result<Self, MetricError> {
        if dual.nrows() != dual.ncols() || !dual.is_hermitian_symbolic() {
            return Err(MetricError::BadDualMatrix);
        }
        Ok(Self {
            backend: MetricBackend::ClosedFormDual { dual },
            scale: None,
        })
    }

    /// Metric backed by an opaque pointwise evaluator. The evaluator must
    /// be pure and stateless.
    pub fn pointwise(
        rank: usize,
        dim: usize,
        eval: impl Fn(&ComplexPoint) -> HermitianMatrixValue + Send + Sync + 'static,
    ) -> Self {
        Self {
            backend: MetricBackend::PointwiseNumeric {
                rank,
                dim,
                eval: Arc::new(eval),
            },
            scale: None,
        }
    }

    /// Attach a scalar prefactor `num/den`; the factor must evaluate to a
    /// positive real wherever the metric is used.
    pub fn with_scale(mut self, num: SesquiPolynomial, den: SesquiPolynomial) -> Self {
        self.scale = Some(ScaleFactor { num, den });
        self
    }

    pub fn scale(&self) -> Option<&ScaleFactor> {
        self.scale.as_ref()
    }

    pub fn backend(&self) -> &MetricBackend {
        &self.backend
    }

    pub fn rank(&self) -> usize {
        match &self.backend {
            MetricBackend::SectionInduced { sections, .. } => sections[0].rank(),
            MetricBackend::ClosedFormDual { dual } => dual.nrows(),
            MetricBackend::PointwiseNumeric { rank, .. } => *rank,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.backend {
            MetricBackend::SectionInduced { sections, .. } => sections[0].dim(),
            MetricBackend::ClosedFormDual { dual } => dual.dim(),
            MetricBackend::PointwiseNumeric { dim, .. } => *dim,
        }
    }

    /// The symbolic dual matrix, available for the two closed-form backends.
    pub fn dual_matrix(&self) -> Result<&PolyMatrix, MetricError> {
        match &self.backend {
            MetricBackend::SectionInduced { dual, .. } | MetricBackend::ClosedFormDual { dual } => {
                Ok(dual)
            }
            MetricBackend::PointwiseNumeric { .. } => Err(MetricError::WrongBackend {
                expected: "SectionInduced or ClosedFormDual",
            }),
        }
    }

    pub fn sections(&self) -> Result<&[HolomorphicSection], MetricError> {
        match &self.backend {
            MetricBackend::SectionInduced { sections, .. } => Ok(sections),
            _ => Err(MetricError::WrongBackend {
                expected: "SectionInduced",
            }),
        }
    }

    pub fn has_euclidean_base(&self) -> bool {
        match &self.backend {
            MetricBackend::SectionInduced { base, .. } => {
                let n = base.nrows();
                (0..n).all(|i| {
                    (0..n).all(|j| {
                        let want = if i == j { 1.0 } else { 0.0 };
                        base[(i, j)] == Complex64::new(want, 0.0)
                    })
                })
            }
            _ => false,
        }
    }

    fn scale_value(&self, x: &ComplexPoint) -> Option<f64> {
        let sf = self.scale.as_ref()?;
        let num = sf.num.evaluate(x).ok()?;
        let den = sf.den.evaluate(x).ok()?;
        let v = num / den;
        let ok = v.re.is_finite() && v.re > 0.0 && v.im.abs() <= 1e-12 * (1.0 + v.re.abs());
        Some(if ok { v.re } else { f64::NAN })
    }

    /// Evaluate the metric matrix at a point. For the closed-form backends
    /// this is the transposed inverse of the dual matrix; the singular
    /// locus is flagged as `Degenerate`, never extrapolated.
    pub fn evaluate(&self, x: &ComplexPoint) -> HermitianMatrixValue {
        assert_eq!(x.dim(), self.dim(), "point dimension mismatch");
        let r = self.rank();
        let mut value = match &self.backend {
            MetricBackend::SectionInduced { dual, .. } | MetricBackend::ClosedFormDual { dual } => {
                let d = match dual.evaluate(x) {
                    Ok(d) => d,
                    Err(_) => return HermitianMatrixValue::undefined(r),
                };
                match transpose_inverse(&d) {
                    Some(h) => HermitianMatrixValue::from_raw(h),
                    None => HermitianMatrixValue::degenerate(r),
                }
            }
            MetricBackend::PointwiseNumeric { eval, .. } => eval(x),
        };
        if let Some(factor) = self.scale_value(x) {
            if factor.is_nan() {
                return HermitianMatrixValue::undefined(r);
            }
            value.entries.scale_mut(factor);
        }
        value
    }

    /// `|s|²_h = ᵗs h(x) s̄` through the evaluated matrix.
    pub fn norm_sq_direct(&self, s: &[C64], x: &ComplexPoint) -> NormValue {
        assert_eq!(s.len(), self.rank(), "vector rank mismatch");
        let h = self.evaluate(x);
        match h.status {
            MetricStatus::Ok => {
                let v = sesquilinear_form(&h.entries, s, s);
                debug_assert!(
                    v.im.abs() <= 1e-10 * (1.0 + v.re.abs()),
                    "norm should be real"
                );
                NormValue::Finite(v.re.max(0.0))
            }
            MetricStatus::Degenerate => NormValue::Undefined,
            MetricStatus::Undefined => NormValue::Undefined,
        }
    }

    /// The induced metric on the dual bundle, `x ↦ ᵗh(x)⁻¹`, as a pointwise
    /// field. For the closed-form backends this evaluates the stored dual
    /// matrix exactly instead of inverting twice.
    pub fn dual_field(&self) -> MetricField {
        let r = self.rank();
        let n = self.dim();
        match &self.backend {
            MetricBackend::SectionInduced { dual, .. } | MetricBackend::ClosedFormDual { dual } => {
                let dual = dual.clone();
                let scale = self.scale.clone();
                MetricField::pointwise(r, n, move |x| {
                    let mut v = match dual.evaluate(x) {
                        Ok(d) => HermitianMatrixValue::from_raw(d),
                        Err(_) => return HermitianMatrixValue::undefined(r),
                    };
                    if let Some(sf) = &scale {
                        let num = sf.num.evaluate(x);
                        let den = sf.den.evaluate(x);
                        match (num, den) {
                            (Ok(num), Ok(den)) => {
                                let f = num / den;
                                if f.re.is_finite() && f.re > 0.0 {
                                    v.entries.scale_mut(1.0 / f.re);
                                } else {
                                    return HermitianMatrixValue::undefined(r);
                                }
                            }
                            _ => return HermitianMatrixValue::undefined(r),
                        }
                    }
                    v
                })
            }
            MetricBackend::PointwiseNumeric { .. } => {
                let inner = self.clone();
                MetricField::pointwise(r, n, move |x| {
                    let h = inner.evaluate(x);
                    if !h.is_ok() {
                        return HermitianMatrixValue::undefined(r);
                    }
                    match transpose_inverse(&h.entries) {
                        Some(d) => HermitianMatrixValue::from_raw(d),
                        None => HermitianMatrixValue::degenerate(r),
                    }
                })
            }
        }
    }

    /// Pullback along a bundle map given by a polynomial matrix `phi` with
    /// shape (target rank × source rank): `⟨s,t⟩_{φ*h} = ⟨φ(s),φ(t)⟩_h`,
    /// i.e. the value matrix is `ᵗφ(x) · h(x) · conj(φ(x))`.
    pub fn pullback(&self, phi: &PolyMatrix) -> Result<MetricField, MetricError> {
        if phi.nrows() != self.rank() {
            return Err(MetricError::Shape(format!(
                "bundle map has {} rows, target rank is {}",
                phi.nrows(),
                self.rank()
            )));
        }
        if phi.dim() != self.dim() {
            return Err(MetricError::Shape("chart dimension mismatch".into()));
        }
        let source_rank = phi.ncols();
        let target = self.clone();
        let phi = phi.clone();
        let n = self.dim();
        Ok(MetricField::pointwise(source_rank, n, move |x| {
            let h = target.evaluate(x);
            if !h.is_ok() {
                return HermitianMatrixValue {
                    entries: DMatrix::zeros(source_rank, source_rank),
                    status: h.status,
                    hermitian_defect: 0.0,
                };
            }
            let p = match phi.evaluate(x) {
                Ok(p) => p,
                Err(_) => return HermitianMatrixValue::undefined(source_rank),
            };
            let pulled = p.transpose() * &h.entries * p.map(|c| c.conj());
            HermitianMatrixValue::from_raw(pulled)
        }))
    }
}

/// `ᵗs · M · t̄`, the pairing convention used for all Hermitian forms here.
pub fn sesquilinear_form(m: &DMatrix<C64>, s: &[C64], t: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..t.len() {
            acc += s[i] * m[(i, j)] * t[j].conj();
        }
    }
    acc
}

fn hermitian_pd_inverse(m: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let adj = m.adjoint();
    let defect = (m - &adj).iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = 1.0 + m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if defect > tol::HERMITIAN_SOFT * scale {
        return None;
    }
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return None;
    }
    m.clone().try_inverse()
}

/// Transposed inverse with a relative degeneracy threshold on |det|.
pub fn transpose_inverse(d: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let r = d.nrows();
    let maxabs = d.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let thr = tol::DEGENERACY_REL * (1.0 + maxabs).powi(r as i32);
    let det = d.determinant();
    if det.norm() <= thr {
        return None;
    }
    d.clone().try_inverse().map(|inv| inv.transpose())
}

/// Dual (Gram) matrix `D = ᵗF · ᵗ(h₀⁻¹) · F̄` built symbolically; only the
/// upper triangle is computed and the lower one is its exact conjugate, so
/// symbolic Hermitian symmetry holds by construction.
fn gram_dual_matrix(sections: &[HolomorphicSection], base_inv: &DMatrix<C64>) -> PolyMatrix {
    let r = sections[0].rank();
    let n = sections[0].dim();
    let big_n = sections.len();
    let mut dual = PolyMatrix::zero(n, r, r);
    for j in 0..r {
        for k in j..r {
            let mut acc = SesquiPolynomial::zero(n);
            for i in 0..big_n {
                for l in 0..big_n {
                    let weight = base_inv[(l, i)];
                    if weight == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let f_ij = sections[i].components()[j].as_sesqui();
                    let f_lk_conj = sections[l].components()[k].as_sesqui().conj();
                    acc = &acc + &(f_ij * &f_lk_conj).scale(weight);
                }
            }
            dual.set(j, k, acc.clone());
            if k != j {
                dual.set(k, j, acc.conj());
            }
        }
    }
    dual
}

/// Norm through the determinant-ratio formula for section-induced metrics
/// with Euclidean base:
/// numerator = Σ over (r−1)-subsets |det(s, s_{i₁}, …, s_{i_{r−1}})|²,
/// denominator = Σ over r-subsets |det(s_{j₁}, …, s_{j_r})|².
pub fn norm_sq_detformula(
    sections: &[HolomorphicSection],
    s_at_x: &[C64],
    x: &ComplexPoint,
) -> Result<NormValue, MetricError> {
    let r = sections[0].rank();
    let big_n = sections.len();
    if big_n < r {
        return Err(MetricError::TooFewSections {
            n_sections: big_n,
            rank: r,
        });
    }
    if s_at_x.len() != r {
        return Err(MetricError::Shape("vector rank mismatch".into()));
    }
    let values: Vec<Vec<C64>> = sections
        .iter()
        .map(|s| s.evaluate(x))
        .collect::<Result<_, _>>()?;

    let mut numerator = 0.0;
    for subset in combinations(big_n, r - 1) {
        let mut m = DMatrix::zeros(r, r);
        for i in 0..r {
            m[(i, 0)] = s_at_x[i];
        }
        for (c, &idx) in subset.iter().enumerate() {
            for i in 0..r {
                m[(i, c + 1)] = values[idx][i];
            }
        }
        numerator += m.determinant().norm_sqr();
    }

    let mut denominator = 0.0;
    for subset in combinations(big_n, r) {
        let mut m = DMatrix::zeros(r, r);
        for (c, &idx) in subset.iter().enumerate() {
            for i in 0..r {
                m[(i, c)] = values[idx][i];
            }
        }
        denominator += m.determinant().norm_sqr();
    }

    if denominator == 0.0 {
        if numerator == 0.0 {
            return Ok(NormValue::Undefined);
        }
        return Ok(NormValue::Infinite);
    }
    let ratio = numerator / denominator;
    if ratio.is_finite() {
        Ok(NormValue::Finite(ratio))
    } else {
        Ok(NormValue::Infinite)
    }
}

/// Sum of squared moduli of all rank-size minors of the section matrix —
/// equals `det(h(x)⁻¹)` for the Euclidean base.
pub fn minor_sum(sections: &[HolomorphicSection], x: &ComplexPoint) -> Result<f64, MetricError> {
    let r = sections[0].rank();
    let values: Vec<Vec<C64>> = sections
        .iter()
        .map(|s| s.evaluate(x))
        .collect::<Result<_, _>>()?;
    let mut den = 0.0;
    for subset in combinations(sections.len(), r) {
        let mut m = DMatrix::zeros(r, r);
        for (c, &idx) in subset.iter().enumerate() {
            for i in 0..r {
                m[(i, c)] = values[idx][i];
            }
        }
        den += m.determinant().norm_sqr();
    }
    Ok(den)
}

/// Row-major matrix printing with 17 significant digits.
pub fn print_matrix(m: &DMatrix<C64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let c = m[(i, j)];
            out.push_str(&format!("{:.16e}{:+.16e}i", c.re, c.im));
        }
        out.push('\n');
    }
    out
}

pub fn identity_base(n: usize) -> DMatrix<C64> {
    DMatrix::identity(n, n)
}

/// The built-in rank-2 quotient-metric scenario on ℂ²: sections
/// `s₁ = (1,0)`, `s₂ = (z,w)` with the Euclidean base, plus its two
/// one-parameter regularization families.
pub mod example42 {
    use super::*;
    use crate::expr::parse;

    pub fn sections() -> Vec<HolomorphicSection> {
        let one = HoloPolynomial::one(2);
        let zero = HoloPolynomial::zero(2);
        let z = HoloPolynomial::coord(2, 0);
        let w = HoloPolynomial::coord(2, 1);
        vec![
            HolomorphicSection::new(vec![one, zero]),
            HolomorphicSection::new(vec![z, w]),
        ]
    }

    /// The quotient metric itself (section-induced backend).
    pub fn metric() -> MetricField {
        MetricField::section_induced(sections(), identity_base(2)).expect("valid by construction")
    }

    /// The closed-form dual matrix [[|z|²+1, z·w̄], [w·z̄, |w|²]].
    pub fn dual_poly_matrix() -> PolyMatrix {
        let e11 = parse("z*conj(z) + 1", 2).unwrap();
        let e12 = parse("z*conj(w)", 2).unwrap();
        let e22 = parse("w*conj(w)", 2).unwrap();
        PolyMatrix::from_rows(vec![vec![e11, e12.clone()], vec![e12.conj(), e22]])
    }

    /// The dual matrix used *as* a metric (the metric induced on the dual
    /// bundle); entries are polynomial, so this field is globally smooth.
    pub fn dual_as_metric() -> MetricField {
        let dual = dual_poly_matrix();
        MetricField::pointwise(2, 2, move |x| match dual.evaluate(x) {
            Ok(d) => HermitianMatrixValue::from_raw(d),
            Err(_) => HermitianMatrixValue::undefined(2),
        })
    }

    /// Regularization that adds ε only to the last diagonal dual entry.
    pub fn family_eps_diag(eps: f64) -> Result<MetricField, MetricError> {
        if eps <= 0.0 {
            return Err(MetricError::NonPositiveEps(eps));
        }
        let mut dual = dual_poly_matrix();
        let bumped = &dual.entry(1, 1).clone() + &SesquiPolynomial::constant(2, C64::new(eps, 0.0));
        dual.set(1, 1, bumped);
        MetricField::closed_form_dual(dual)
    }

    /// Isotropic regularization ε·I — the family produced by mollifying
    /// the dual matrix with a radial kernel.
    pub fn family_eps_iso(eps: f64) -> Result<MetricField, MetricError> {
        if eps <= 0.0 {
            return Err(MetricError::NonPositiveEps(eps));
        }
        let mut dual = dual_poly_matrix();
        for k in 0..2 {
            let bumped =
                &dual.entry(k, k).clone() + &SesquiPolynomial::constant(2, C64::new(eps, 0.0));
            dual.set(k, k, bumped);
        }
        MetricField::closed_form_dual(dual)
    }

    /// The five closed-form fields of the scenario at a given ε, together
    /// with the duals of the two regularizations.
    pub struct ClosedForms {
        pub metric: MetricField,
        pub dual_metric: MetricField,
        pub eps_diag: MetricField,
        pub eps_iso: MetricField,
        pub dual_of_eps_diag: MetricField,
        pub dual_of_eps_iso: MetricField,
    }

    pub fn closed_forms(eps: f64) -> Result<ClosedForms, MetricError> {
        let eps_diag = family_eps_diag(eps)?;
        let eps_iso = family_eps_iso(eps)?;
        Ok(ClosedForms {
            metric: metric(),
            dual_metric: dual_as_metric(),
            dual_of_eps_diag: eps_diag.dual_field(),
            dual_of_eps_iso: eps_iso.dual_field(),
            eps_diag,
            eps_iso,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pt(coords: &[(f64, f64)]) -> ComplexPoint {
        ComplexPoint::new(coords.iter().map(|&(re, im)| c(re, im)).collect())
    }

    #[test]
    fn dual_matrix_of_example_is_the_closed_form() {
        let m = example42::metric();
        let dual = m.dual_matrix().unwrap();
        let want = example42::dual_poly_matrix();
        assert_eq!(dual, &want);
        assert!(dual.is_hermitian_symbolic());
    }

    #[test]
    fn dual_of_standard_basis_is_identity() {
        let sections = vec![
            HolomorphicSection::constant(2, &[c(1.0, 0.0), c(0.0, 0.0)]),
            HolomorphicSection::constant(2, &[c(0.0, 0.0), c(1.0, 0.0)]),
        ];
        let m = MetricField::section_induced(sections, identity_base(2)).unwrap();
        let d = m.dual_matrix().unwrap();
        assert_eq!(d.entry(0, 0), &SesquiPolynomial::one(2));
        assert_eq!(d.entry(1, 1), &SesquiPolynomial::one(2));
        assert!(d.entry(0, 1).is_zero());
        assert!(d.entry(1, 0).is_zero());
    }

    #[test]
    fn dual_of_diagonal_sections() {
        // s₁=(z,0), s₂=(0,w) → D = diag(|z|², |w|²)
        let z = HoloPolynomial::coord(2, 0);
        let w = HoloPolynomial::coord(2, 1);
        let zero = HoloPolynomial::zero(2);
        let sections = vec![
            HolomorphicSection::new(vec![z, zero.clone()]),
            HolomorphicSection::new(vec![zero, w]),
        ];
        let m = MetricField::section_induced(sections, identity_base(2)).unwrap();
        let d = m.dual_matrix().unwrap();
        assert_eq!(d.entry(0, 0), &SesquiPolynomial::abs_sq_coord(2, 0));
        assert_eq!(d.entry(1, 1), &SesquiPolynomial::abs_sq_coord(2, 1));
        assert!(d.entry(0, 1).is_zero());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn example_metric_at_one_one() {
        let m = example42::metric();
        let h = m.evaluate(&pt(&[(1.0, 0.0), (1.0, 0.0)]));
        assert!(h.is_ok());
        let want = [[c(1.0, 0.0), c(-1.0, 0.0)], [c(-1.0, 0.0), c(2.0, 0.0)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.entries[(i, j)] - want[i][j]).norm() < 1e-12);
            }
        }
        // norms straight off the displayed matrix
        assert!(
            (m.norm_sq_direct(&[c(1.0, 0.0), c(0.0, 0.0)], &pt(&[(1.0, 0.0), (1.0, 0.0)]))
                .finite()
                .unwrap()
                - 1.0)
                .abs()
                < 1e-12
        );
        assert!(
            (m.norm_sq_direct(&[c(0.0, 0.0), c(1.0, 0.0)], &pt(&[(1.0, 0.0), (1.0, 0.0)]))
                .finite()
                .unwrap()
                - 2.0)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn example_metric_degenerates_on_w_zero() {
        let m = example42::metric();
        let h = m.evaluate(&pt(&[(1.0, 0.0), (0.0, 0.0)]));
        assert_eq!(h.status, MetricStatus::Degenerate);
        assert_eq!(
            m.norm_sq_direct(&[c(1.0, 0.0), c(0.0, 0.0)], &pt(&[(1.0, 0.0), (0.0, 0.0)])),
            NormValue::Undefined
        );
    }

    #[test]
    fn zero_vector_has_zero_norm() {
        let m = example42::metric();
        let v = m.norm_sq_direct(&[c(0.0, 0.0), c(0.0, 0.0)], &pt(&[(0.3, 0.1), (0.5, -0.2)]));
        assert_eq!(v, NormValue::Finite(0.0));
    }

    #[test]
    fn detformula_on_example() {
        let sections = example42::sections();
        let x = pt(&[(1.0, 0.0), (1.0, 0.0)]);
        let v = norm_sq_detformula(&sections, &[c(1.0, 0.0), c(0.0, 0.0)], &x).unwrap();
        assert!((v.finite().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detformula_zero_denominator() {
        let sections = example42::sections();
        let x = pt(&[(0.5, 0.0), (0.0, 0.0)]); // on {w = 0}
                                               // generic vector: infinite norm
        let v = norm_sq_detformula(&sections, &[c(0.0, 0.0), c(1.0, 0.0)], &x).unwrap();
        assert_eq!(v, NormValue::Infinite);
        // vector in the span of the surviving section: 0/0, undefined
        let v = norm_sq_detformula(&sections, &[c(1.0, 0.0), c(0.0, 0.0)], &x).unwrap();
        assert_eq!(v, NormValue::Undefined);
    }

    #[test]
    fn detformula_matches_direct_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut tested = 0;
        while tested < 100 {
            let n = rng.gen_range(1..=2usize);
            let r = rng.gen_range(1..=3usize);
            let big_n = rng.gen_range(r..=r + 3);
            let sections: Vec<_> = (0..big_n)
                .map(|_| HolomorphicSection::random(n, r, 2, &mut rng))
                .collect();
            let m = match MetricField::section_induced(sections.clone(), identity_base(big_n)) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let x = ComplexPoint::new(
                (0..n)
                    .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            );
            let dual_det = m.dual_matrix().unwrap().evaluate(&x).unwrap().determinant();
            if dual_det.norm() <= 1e-8 {
                continue;
            }
            let s: Vec<C64> = (0..r)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let direct = m.norm_sq_direct(&s, &x).finite().unwrap();
            let detf = norm_sq_detformula(&sections, &s, &x)
                .unwrap()
                .finite()
                .unwrap();
            assert!(
                (direct - detf).abs() <= 1e-9 * (1.0 + direct.abs()),
                "direct {direct} vs detformula {detf}"
            );
            // determinant identity: det(h⁻¹) = Σ |det(r-subsets)|²
            let h = m.evaluate(&x);
            let det_h_inv = 1.0 / h.entries.determinant().re;
            let minors = minor_sum(&sections, &x).unwrap();
            assert!(
                (det_h_inv - minors).abs() <= 1e-9 * (1.0 + minors.abs()),
                "det identity: {det_h_inv} vs {minors}"
            );
            tested += 1;
        }
    }

    #[test]
    fn rank_one_reduces_to_weight() {
        // N = 1, r = 1, f = z²: |s|²_h = |s|²/|z²|²
        let f = HoloPolynomial::new(parse("z^2", 1).unwrap()).unwrap();
        let sections = vec![HolomorphicSection::new(vec![f])];
        let x = pt(&[(0.5, 0.25)]);
        let s = [c(0.3, -0.4)];
        let v = norm_sq_detformula(&sections, &s, &x)
            .unwrap()
            .finite()
            .unwrap();
        let z = c(0.5, 0.25);
        let want = s[0].norm_sqr() / z.powu(2).norm_sqr();
        assert!((v - want).abs() < 1e-12 * (1.0 + want));
    }

    #[test]
    fn base_scaling_scales_norms_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sections = example42::sections();
        let m1 = MetricField::section_induced(sections.clone(), identity_base(2)).unwrap();
        let m2 = MetricField::section_induced(sections, identity_base(2).scale(2.5)).unwrap();
        for _ in 0..20 {
            let x = pt(&[
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ]);
            let s = [
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ];
            match (m1.norm_sq_direct(&s, &x), m2.norm_sq_direct(&s, &x)) {
                (NormValue::Finite(a), NormValue::Finite(b)) => {
                    assert!((b - 2.5 * a).abs() <= 1e-12 * (1.0 + b.abs()));
                }
                (a, b) => assert_eq!(std::mem::discriminant(&a), std::mem::discriminant(&b)),
            }
        }
    }

    #[test]
    fn pullback_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = example42::metric();
        // random polynomial bundle map ℂ² → ℂ² over the chart
        let phi = PolyMatrix::from_rows(vec![
            vec![parse("1 + z", 2).unwrap(), parse("w^2", 2).unwrap()],
            vec![parse("i*w", 2).unwrap(), parse("2 - z*w", 2).unwrap()],
        ]);
        let pulled = m.pullback(&phi).unwrap();
        for _ in 0..100 {
            let x = pt(&[
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ]);
            let s = [
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ];
            let phi_x = phi.evaluate(&x).unwrap();
            let phi_s: Vec<C64> = (0..2)
                .map(|i| phi_x[(i, 0)] * s[0] + phi_x[(i, 1)] * s[1])
                .collect();
            match (pulled.norm_sq_direct(&s, &x), m.norm_sq_direct(&phi_s, &x)) {
                (NormValue::Finite(a), NormValue::Finite(b)) => {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
                }
                (a, b) => assert_eq!(std::mem::discriminant(&a), std::mem::discriminant(&b)),
            }
        }
    }

    #[test]
    fn identity_pullback_preserves_values() {
        let m = example42::metric();
        let id = PolyMatrix::from_rows(vec![
            vec![parse("1", 2).unwrap(), parse("0", 2).unwrap()],
            vec![parse("0", 2).unwrap(), parse("1", 2).unwrap()],
        ]);
        let pulled = m.pullback(&id).unwrap();
        let x = pt(&[(0.4, 0.1), (0.7, -0.3)]);
        let a = m.evaluate(&x);
        let b = pulled.evaluate(&x);
        assert!((&a.entries - &b.entries).iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn constant_double_pullback_scales_by_four() {
        let m = example42::metric();
        let two = PolyMatrix::from_rows(vec![
            vec![parse("2", 2).unwrap(), parse("0", 2).unwrap()],
            vec![parse("0", 2).unwrap(), parse("2", 2).unwrap()],
        ]);
        let pulled = m.pullback(&two).unwrap();
        let x = pt(&[(0.4, 0.1), (0.7, -0.3)]);
        let s = [c(0.3, 0.2), c(-0.1, 0.5)];
        let a = m.norm_sq_direct(&s, &x).finite().unwrap();
        let b = pulled.norm_sq_direct(&s, &x).finite().unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn closed_forms_at_origin() {
        let eps = 0.25;
        let forms = example42::closed_forms(eps).unwrap();
        let origin = ComplexPoint::origin(2);
        // dual of eps_diag at origin → diag(1, ε)
        let d1 = forms.dual_of_eps_diag.evaluate(&origin);
        assert!((d1.entries[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((d1.entries[(1, 1)] - c(eps, 0.0)).norm() < 1e-12);
        // dual of eps_iso at origin → diag(1+ε, ε)
        let d2 = forms.dual_of_eps_iso.evaluate(&origin);
        assert!((d2.entries[(0, 0)] - c(1.0 + eps, 0.0)).norm() < 1e-12);
        assert!((d2.entries[(1, 1)] - c(eps, 0.0)).norm() < 1e-12);
        // the regularized metrics are positive definite at a probe grid
        for &(a, b) in &[(0.0, 0.0), (0.5, -0.5), (1.0, 1.0)] {
            let h = forms.eps_iso.evaluate(&pt(&[(a, b), (b, a)]));
            assert!(h.is_ok());
            let eig = h.entries.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn eps_must_be_positive() {
        assert!(example42::family_eps_diag(0.0).is_err());
        assert!(example42::family_eps_iso(-0.1).is_err());
    }

    #[test]
    fn hermitian_symmetry_of_evaluations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = example42::metric();
        for _ in 0..50 {
            let x = pt(&[
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ]);
            let h = m.evaluate(&x);
            if h.is_ok() {
                let scale = 1.0 + h.entries.iter().map(|c| c.norm()).fold(0.0, f64::max);
                assert!(h.hermitian_defect < tol::HERMITIAN_SOFT * scale);
            }
        }
    }

    #[test]
    fn degenerate_everywhere_sections_are_rejected() {
        // two copies of the same direction never span ℂ²
        let z = HoloPolynomial::coord(2, 0);
        let zero = HoloPolynomial::zero(2);
        let sections = vec![
            HolomorphicSection::new(vec![z.clone(), zero.clone()]),
            HolomorphicSection::new(vec![&z + &z, zero]),
        ];
        assert!(matches!(
            MetricField::section_induced(sections, identity_base(2)),
            Err(MetricError::NotGenericallyGenerating)
        ));
    }

    #[test]
    fn dual_field_of_example_is_polynomial_dual() {
        let m = example42::metric();
        let dual = m.dual_field();
        let x = pt(&[(0.3, -0.2), (0.8, 0.1)]);
        let d = dual.evaluate(&x);
        let want = example42::dual_poly_matrix().evaluate(&x).unwrap();
        assert!(d.is_ok());
        assert!((&d.entries - &want).iter().all(|c| c.norm() < 1e-12));
        // defined even on the singular locus of the metric itself
        let on_locus = dual.evaluate(&pt(&[(0.3, 0.0), (0.0, 0.0)]));
        assert!(on_locus.is_ok());
    }
}
