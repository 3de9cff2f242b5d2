//! Exact algebra for sesquilinear polynomials: finite sums of terms
//! `c · z^α · z̄^β` in chart coordinates `z_1..z_n`, with exact Wirtinger
//! differentiation. These carry metric entries, holomorphic sections and
//! every closed-form matrix used elsewhere in the crate.

mod parse;

pub use parse::parse;

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("coordinate index {index} exceeds chart dimension {dim}")]
    CoordOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polynomial is not holomorphic: a term carries conjugate exponents")]
    NotHolomorphic,
}

/// A point of the chart, `z ∈ ℂⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoint {
    coords: Vec<C64>,
}

impl ComplexPoint {
    pub fn new(coords: Vec<C64>) -> Self {
        assert!(
            coords.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
            "chart point must have finite coordinates"
        );
        Self { coords }
    }

    pub fn from_re(coords: &[f64]) -> Self {
        Self::new(coords.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn origin(n: usize) -> Self {
        Self::new(vec![C64::new(0.0, 0.0); n])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn coord(&self, k: usize) -> C64 {
        self.coords[k]
    }

    /// Euclidean distance to another point of the same chart.
    pub fn distance(&self, other: &ComplexPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Exponent pair `(α, β)` of a single term `z^α z̄^β`.
///
/// Ordered graded-lexicographically on the concatenated exponent vector,
/// which fixes the canonical term order used for storage, evaluation and
/// printing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    holo: Vec<u32>,
    anti: Vec<u32>,
}

impl Monomial {
    pub fn new(holo: Vec<u32>, anti: Vec<u32>) -> Self {
        assert_eq!(holo.len(), anti.len(), "exponent vectors must share length");
        Self { holo, anti }
    }

    pub fn constant(n: usize) -> Self {
        Self::new(vec![0; n], vec![0; n])
    }

    pub fn dim(&self) -> usize {
        self.holo.len()
    }

    pub fn holo_exponents(&self) -> &[u32] {
        &self.holo
    }

    pub fn anti_exponents(&self) -> &[u32] {
        &self.anti
    }

    pub fn degree(&self) -> u32 {
        self.holo.iter().sum::<u32>() + self.anti.iter().sum::<u32>()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            holo: self
                .holo
                .iter()
                .zip(&other.holo)
                .map(|(a, b)| a + b)
                .collect(),
            anti: self
                .anti
                .iter()
                .zip(&other.anti)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn conj(&self) -> Monomial {
        Monomial {
            holo: self.anti.clone(),
            anti: self.holo.clone(),
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.holo.cmp(&other.holo))
            .then_with(|| self.anti.cmp(&other.anti))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A sesquilinear polynomial Σ c·z^α·z̄^β in canonical form: no zero
/// coefficients, no duplicate monomials, terms in graded-lex order.
#[derive(Debug, Clone, PartialEq)]
pub struct SesquiPolynomial {
    n: usize,
    terms: BTreeMap<Monomial, C64>,
}

impl SesquiPolynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: C64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::constant(n), c);
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, C64::new(1.0, 0.0))
    }

    /// The coordinate function `z_k` (zero-based `k`).
    pub fn coord(n: usize, k: usize) -> Self {
        assert!(k < n);
        let mut holo = vec![0; n];
        holo[k] = 1;
        let mut p = Self::zero(n);
        p.add_term(Monomial::new(holo, vec![0; n]), C64::new(1.0, 0.0));
        p
    }

    /// The conjugate coordinate `z̄_k`.
    pub fn coord_conj(n: usize, k: usize) -> Self {
        Self::coord(n, k).conj()
    }

    /// `|z_k|²`, a recurring building block.
    pub fn abs_sq_coord(n: usize, k: usize) -> Self {
        &Self::coord(n, k) * &Self::coord_conj(n, k)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// True when every term has vanishing conjugate exponents.
    pub fn is_holomorphic(&self) -> bool {
        self.terms.keys().all(|m| m.anti.iter().all(|&b| b == 0))
    }

    fn add_term(&mut self, m: Monomial, c: C64) {
        debug_assert_eq!(m.dim(), self.n);
        if c == C64::new(0.0, 0.0) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                // drop exact cancellations to keep the form canonical
                if *e.get() == C64::new(0.0, 0.0) {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    /// Exact evaluation; terms are summed in canonical order.
    pub fn evaluate(&self, x: &ComplexPoint) -> Result<C64, ExprError> {
        if x.dim() != self.n {
            return Err(ExprError::DimensionMismatch {
                expected: self.n,
                got: x.dim(),
            });
        }
        let mut acc = C64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut t = *c;
            for (k, &a) in m.holo.iter().enumerate() {
                if a > 0 {
                    t *= x.coords[k].powu(a);
                }
            }
            for (k, &b) in m.anti.iter().enumerate() {
                if b > 0 {
                    t *= x.coords[k].conj().powu(b);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Wirtinger derivative ∂/∂z_k: acts on holomorphic exponents only.
    pub fn wirtinger_d(&self, k: usize) -> SesquiPolynomial {
        assert!(k < self.n, "coordinate index out of range");
        let mut out = SesquiPolynomial::zero(self.n);
        for (m, c) in &self.terms {
            let a = m.holo[k];
            if a == 0 {
                continue;
            }
            let mut holo = m.holo.clone();
            holo[k] = a - 1;
            out.add_term(Monomial::new(holo, m.anti.clone()), c * a as f64);
        }
        out
    }

    /// Wirtinger derivative ∂/∂z̄_k: acts on conjugate exponents only.
    pub fn wirtinger_dbar(&self, k: usize) -> SesquiPolynomial {
        assert!(k < self.n, "coordinate index out of range");
        let mut out = SesquiPolynomial::zero(self.n);
        for (m, c) in &self.terms {
            let b = m.anti[k];
            if b == 0 {
                continue;
            }
            let mut anti = m.anti.clone();
            anti[k] = b - 1;
            out.add_term(Monomial::new(m.holo.clone(), anti), c * b as f64);
        }
        out
    }

    /// Complex conjugate: swaps α↔β and conjugates coefficients.
    pub fn conj(&self) -> SesquiPolynomial {
        let mut out = SesquiPolynomial::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.conj(), c.conj());
        }
        out
    }

    pub fn scale(&self, c: C64) -> SesquiPolynomial {
        let mut out = SesquiPolynomial::zero(self.n);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn pow(&self, e: u32) -> SesquiPolynomial {
        let mut out = SesquiPolynomial::one(self.n);
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Canonical printing: terms in canonical order, coefficients with 17
    /// significant digits, parseable back by [`parse`].
    pub fn print_canonical(&self) -> String {
        format!("{self}")
    }
}

impl std::ops::Add for &SesquiPolynomial {
    type Output = SesquiPolynomial;
    fn add(self, rhs: &SesquiPolynomial) -> SesquiPolynomial {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }
}

impl std::ops::Sub for &SesquiPolynomial {
    type Output = SesquiPolynomial;
    fn sub(self, rhs: &SesquiPolynomial) -> SesquiPolynomial {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -*c);
        }
        out
    }
}

impl std::ops::Mul for &SesquiPolynomial {
    type Output = SesquiPolynomial;
    fn mul(self, rhs: &SesquiPolynomial) -> SesquiPolynomial {
        assert_eq!(self.n, rhs.n);
        let mut out = SesquiPolynomial::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl std::ops::Neg for &SesquiPolynomial {
    type Output = SesquiPolynomial;
    fn neg(self) -> SesquiPolynomial {
        self.scale(C64::new(-1.0, 0.0))
    }
}

fn fmt_float(x: f64) -> String {
    // 17 significant digits round-trip f64 exactly.
    let s = format!("{x:.16e}");
    s
}

fn fmt_coeff(c: C64) -> String {
    if c.im == 0.0 {
        fmt_float(c.re)
    } else if c.re == 0.0 {
        format!("{}i", fmt_float(c.im))
    } else {
        format!("({}+{}i)", fmt_float(c.re), fmt_float(c.im))
    }
}

impl fmt::Display for SesquiPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", fmt_coeff(*c))?;
            for (k, &a) in m.holo.iter().enumerate() {
                if a == 1 {
                    write!(f, "*z{}", k + 1)?;
                } else if a > 1 {
                    write!(f, "*z{}^{}", k + 1, a)?;
                }
            }
            for (k, &b) in m.anti.iter().enumerate() {
                if b == 1 {
                    write!(f, "*conj(z{})", k + 1)?;
                } else if b > 1 {
                    write!(f, "*conj(z{})^{}", k + 1, b)?;
                }
            }
        }
        Ok(())
    }
}

/// A polynomial with no conjugate exponents: components of holomorphic
/// sections and the determinant functions derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct HoloPolynomial(SesquiPolynomial);

impl HoloPolynomial {
    pub fn new(p: SesquiPolynomial) -> Result<Self, ExprError> {
        if p.is_holomorphic() {
            Ok(Self(p))
        } else {
            Err(ExprError::NotHolomorphic)
        }
    }

    pub fn zero(n: usize) -> Self {
        Self(SesquiPolynomial::zero(n))
    }

    pub fn one(n: usize) -> Self {
        Self(SesquiPolynomial::one(n))
    }

    pub fn constant(n: usize, c: C64) -> Self {
        Self(SesquiPolynomial::constant(n, c))
    }

    pub fn coord(n: usize, k: usize) -> Self {
        Self(SesquiPolynomial::coord(n, k))
    }

    pub fn as_sesqui(&self) -> &SesquiPolynomial {
        &self.0
    }

    pub fn into_sesqui(self) -> SesquiPolynomial {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn evaluate(&self, x: &ComplexPoint) -> Result<C64, ExprError> {
        self.0.evaluate(x)
    }

    /// `|f|²` as a sesquilinear polynomial.
    pub fn abs_sq(&self) -> SesquiPolynomial {
        &self.0 * &self.0.conj()
    }
}

impl std::ops::Add for &HoloPolynomial {
    type Output = HoloPolynomial;
    fn add(self, rhs: &HoloPolynomial) -> HoloPolynomial {
        HoloPolynomial(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &HoloPolynomial {
    type Output = HoloPolynomial;
    fn sub(self, rhs: &HoloPolynomial) -> HoloPolynomial {
        HoloPolynomial(&self.0 - &rhs.0)
    }
}

impl std::ops::Mul for &HoloPolynomial {
    type Output = HoloPolynomial;
    fn mul(self, rhs: &HoloPolynomial) -> HoloPolynomial {
        HoloPolynomial(&self.0 * &rhs.0)
    }
}

impl fmt::Display for HoloPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Rectangular matrix of sesquilinear polynomials, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<SesquiPolynomial>,
}

impl PolyMatrix {
    pub fn from_rows(rows: Vec<Vec<SesquiPolynomial>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        assert!(rows.iter().all(|row| row.len() == c));
        Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn zero(n: usize, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![SesquiPolynomial::zero(n); rows * cols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &SesquiPolynomial {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: SesquiPolynomial) {
        self.data[i * self.cols + j] = p;
    }

    pub fn dim(&self) -> usize {
        self.data.first().map(|p| p.dim()).unwrap_or(0)
    }

    /// Entrywise Wirtinger ∂/∂z_k.
    pub fn wirtinger_d(&self, k: usize) -> PolyMatrix {
        self.map(|p| p.wirtinger_d(k))
    }

    /// Entrywise Wirtinger ∂/∂z̄_k.
    pub fn wirtinger_dbar(&self, k: usize) -> PolyMatrix {
        self.map(|p| p.wirtinger_dbar(k))
    }

    pub fn map(&self, f: impl Fn(&SesquiPolynomial) -> SesquiPolynomial) -> PolyMatrix {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Conjugate transpose, exact on coefficients.
    pub fn conj_transpose(&self) -> PolyMatrix {
        let mut out = PolyMatrix::zero(self.dim(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.entry(i, j).conj());
            }
        }
        out
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut out = PolyMatrix::zero(self.dim(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.entry(i, j).clone());
            }
        }
        out
    }

    /// Exact symbolic Hermitian symmetry: `M_{kj} = conj(M_{jk})` as
    /// canonical forms.
    pub fn is_hermitian_symbolic(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if self.entry(j, i) != &self.entry(i, j).conj() {
                    return false;
                }
            }
        }
        true
    }

    pub fn evaluate(&self, x: &ComplexPoint) -> Result<nalgebra::DMatrix<C64>, ExprError> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self.entry(i, j).evaluate(x)?;
            }
        }
        Ok(m)
    }

    /// Symbolic determinant by cofactor expansion (small matrices only).
    pub fn determinant(&self) -> SesquiPolynomial {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.dim();
        match self.rows {
            0 => SesquiPolynomial::one(n),
            1 => self.entry(0, 0).clone(),
            _ => {
                let mut acc = SesquiPolynomial::zero(n);
                for j in 0..self.cols {
                    let minor = self.minor(0, j);
                    let term = &(self.entry(0, j).clone()) * &minor.determinant();
                    if j % 2 == 0 {
                        acc = &acc + &term;
                    } else {
                        acc = &acc - &term;
                    }
                }
                acc
            }
        }
    }

    fn minor(&self, row: usize, col: usize) -> PolyMatrix {
        let mut rows = Vec::with_capacity(self.rows - 1);
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let mut r = Vec::with_capacity(self.cols - 1);
            for j in 0..self.cols {
                if j == col {
                    continue;
                }
                r.push(self.entry(i, j).clone());
            }
            rows.push(r);
        }
        PolyMatrix::from_rows(rows)
    }
}
