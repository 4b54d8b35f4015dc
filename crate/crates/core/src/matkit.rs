//! Dense complex matrix kernel.
//!
//! Everything downstream talks about null spaces, column spaces and
//! Moore-Penrose inverses, so this module owns the rank decisions. All
//! predicates take explicit [`Tolerances`]; comparisons are relative to the
//! operator norm, `‖X − Y‖ ≤ eq_atol · (1 + max(‖X‖, ‖Y‖))`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decomp;
use crate::error::{Error, Result};

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Condition bound above which a denominator is treated as singular.
pub const MAX_DENOMINATOR_COND: f64 = 1e12;
const MIN_DENOMINATOR_DET: f64 = 1e-300;

/// Complex dense matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct CMatrix(DMatrix<Complex64>);

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    pub fn scalar(value: Complex64) -> Self {
        CMatrix(DMatrix::from_element(1, 1, value))
    }

    pub fn real_scalar(value: f64) -> Self {
        Self::scalar(Complex64::new(value, 0.0))
    }

    /// `value · I_n`.
    pub fn scaled_identity(n: usize, value: Complex64) -> Self {
        CMatrix(DMatrix::identity(n, n) * value)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row slices of real numbers.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let m = Self::from_fn(r, c, |i, j| rows[i][j]);
        m.ensure_finite()?;
        Ok(m)
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { Complex64::new(values[i], 0.0) } else { C0 })
    }

    /// Row-major real and imaginary parts.
    pub fn from_parts(rows: usize, cols: usize, re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != rows * cols || im.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for a {rows}x{cols} matrix, got re={} im={}",
                rows * cols,
                re.len(),
                im.len()
            )));
        }
        let m = Self::from_fn(rows, cols, |i, j| Complex64::new(re[i * cols + j], im[i * cols + j]));
        m.ensure_finite()?;
        Ok(m)
    }

    pub fn from_dmatrix(m: DMatrix<Complex64>) -> Self {
        CMatrix(m)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.0[(i, j)] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain("matrix has non-finite entries".into()))
        }
    }

    pub fn adjoint(&self) -> Self {
        CMatrix(self.0.adjoint())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        CMatrix(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `(A + A*) / 2`.
    pub fn re_part(&self) -> Self {
        CMatrix((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// `(A − A*) / 2i`.
    pub fn im_part(&self) -> Self {
        CMatrix((&self.0 - self.0.adjoint()) * Complex64::new(0.0, -0.5))
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        if !self.is_finite() {
            return f64::NAN;
        }
        decomp::svd(&self.0).sigma[0]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn block(&self, row: usize, col: usize, rows: usize, cols: usize) -> Self {
        CMatrix(self.0.view((row, col), (rows, cols)).into_owned())
    }

    pub fn set_block(&mut self, row: usize, col: usize, block: &CMatrix) {
        self.0.view_mut((row, col), block.shape()).copy_from(&block.0);
    }

    /// Splits a `2q × 2q` matrix into its four `q × q` blocks.
    pub fn quadrants(&self) -> Result<[CMatrix; 4]> {
        let (r, c) = self.shape();
        if r != c || r % 2 != 0 {
            return Err(Error::Shape(format!("cannot split {r}x{c} into q x q blocks")));
        }
        let q = r / 2;
        Ok([self.block(0, 0, q, q), self.block(0, q, q, q), self.block(q, 0, q, q), self.block(q, q, q, q)])
    }

    pub fn from_quadrants(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> Self {
        let q = a.rows();
        let mut out = CMatrix::zeros(2 * q, 2 * q);
        out.set_block(0, 0, a);
        out.set_block(0, q, b);
        out.set_block(q, 0, c);
        out.set_block(q, q, d);
        out
    }

    pub fn determinant(&self) -> Complex64 {
        self.0.clone().determinant()
    }

    /// Row-major real parts.
    pub fn re_row_major(&self) -> Vec<f64> {
        self.row_major().map(|c| c.re).collect()
    }

    /// Row-major imaginary parts.
    pub fn im_row_major(&self) -> Vec<f64> {
        self.row_major().map(|c| c.im).collect()
    }

    fn row_major(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.rows()).flat_map(move |i| (0..self.cols()).map(move |j| self.0[(i, j)]))
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix{}x{}[", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols() {
                let c = self.0[(i, j)];
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6e}{:+.6e}i", c.re, c.im)?;
            }
        }
        write!(f, "]")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

impl Add for CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 + rhs.0)
    }
}

impl Sub for CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 - rhs.0)
    }
}

impl Mul for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 * rhs.0)
    }
}

impl Neg for CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-self.0)
    }
}

#[derive(Serialize, Deserialize)]
struct CMatrixWire {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CMatrixWire { rows: self.rows(), cols: self.cols(), re: self.re_row_major(), im: self.im_row_major() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = CMatrixWire::deserialize(deserializer)?;
        CMatrix::from_parts(wire.rows, wire.cols, &wire.re, &wire.im).map_err(serde::de::Error::custom)
    }
}

/// Numerical thresholds shared by every predicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative singular-value cutoff for rank decisions.
    pub rank_rtol: f64,
    /// Eigenvalue floor for semidefiniteness.
    pub psd_atol: f64,
    /// Floor for matrix comparisons.
    pub eq_atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rank_rtol: 1e-10, psd_atol: 1e-9, eq_atol: 1e-9 }
    }
}

impl Tolerances {
    pub fn new(rank_rtol: f64, psd_atol: f64, eq_atol: f64) -> Result<Self> {
        let tol = Tolerances { rank_rtol, psd_atol, eq_atol };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rank_rtol", self.rank_rtol), ("psd_atol", self.psd_atol), ("eq_atol", self.eq_atol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Tolerance(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }

    /// Named presets: `default`, `strict`, `loose`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "strict" => Some(Tolerances { rank_rtol: 1e-12, psd_atol: 1e-11, eq_atol: 1e-11 }),
            "loose" => Some(Tolerances { rank_rtol: 1e-8, psd_atol: 1e-7, eq_atol: 1e-7 }),
            _ => None,
        }
    }
}

fn svd(m: &CMatrix) -> Result<decomp::Svd> {
    m.ensure_finite()?;
    Ok(decomp::svd(&m.0))
}

fn cutoff(sigma: &[f64], tol: &Tolerances, floor: f64) -> f64 {
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    (tol.rank_rtol * smax).max(floor)
}

/// Moore-Penrose pseudoinverse; singular values at or below
/// `rank_rtol · σ_max` are treated as zero.
pub fn pinv(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    pinv_with_floor(m, tol, 0.0)
}

/// Like [`pinv`], with an additional absolute singular-value floor. Used
/// where the relevant scale is set by surrounding data rather than by `m`
/// itself (e.g. Schur complements that should vanish exactly).
pub fn pinv_with_floor(m: &CMatrix, tol: &Tolerances, floor: f64) -> Result<CMatrix> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(CMatrix::zeros(c, r));
    }
    let s = svd(m)?;
    let cut = cutoff(&s.sigma, tol, floor);
    let k = s.sigma.len();
    let mut out = DMatrix::<Complex64>::zeros(c, r);
    for idx in 0..k {
        let sv = s.sigma[idx];
        if sv <= cut || sv == 0.0 {
            continue;
        }
        let inv = 1.0 / sv;
        // V Σ⁺ U*: column idx of V is the adjoint of row idx of V*.
        let v_col = s.v.column(idx);
        let u_col = s.u.column(idx);
        out += (v_col * u_col.adjoint()) * Complex64::new(inv, 0.0);
    }
    Ok(CMatrix(out))
}

/// Drops the singular values at or below `floor`; returns the input
/// unchanged when none are dropped.
pub fn truncate_below(m: &CMatrix, floor: f64) -> Result<CMatrix> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(m.clone());
    }
    let s = svd(m)?;
    if s.sigma.iter().all(|&v| v > floor) {
        return Ok(m.clone());
    }
    let mut out = DMatrix::<Complex64>::zeros(m.rows(), m.cols());
    for (idx, &sv) in s.sigma.iter().enumerate() {
        if sv > floor {
            out += (s.u.column(idx) * s.v.column(idx).adjoint()) * Complex64::new(sv, 0.0);
        }
    }
    Ok(CMatrix(out))
}

pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    if m.0.is_empty() {
        return Ok(Vec::new());
    }
    Ok(svd(m)?.sigma)
}

pub fn rank(m: &CMatrix, tol: &Tolerances) -> Result<usize> {
    rank_with_floor(m, tol, 0.0)
}

pub fn rank_with_floor(m: &CMatrix, tol: &Tolerances, floor: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let cut = cutoff(&s, tol, floor);
    Ok(s.iter().filter(|&&v| v > cut && v > 0.0).count())
}

/// `‖x − y‖ ≤ atol · (1 + max(‖x‖, ‖y‖))`.
pub fn approx_eq(x: &CMatrix, y: &CMatrix, atol: f64) -> bool {
    if x.shape() != y.shape() {
        return false;
    }
    rel_diff(x, y) <= atol
}

/// `‖x − y‖ / (1 + max(‖x‖, ‖y‖))`.
pub fn rel_diff(x: &CMatrix, y: &CMatrix) -> f64 {
    (x - y).op_norm() / (1.0 + x.op_norm().max(y.op_norm()))
}

fn require_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what} needs a square matrix, got {}x{}", m.rows(), m.cols())))
    }
}

/// Eigenvalues of the Hermitian part `(M + M*)/2`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    require_square(m, "hermitian_eigenvalues")?;
    m.ensure_finite()?;
    if m.rows() == 0 {
        return Ok(Vec::new());
    }
    Ok(decomp::hermitian_eigenvalues(&m.re_part().0))
}

pub fn is_hermitian(m: &CMatrix, tol: &Tolerances) -> Result<bool> {
    require_square(m, "is_hermitian")?;
    let norm = m.op_norm();
    Ok((m - &m.adjoint()).op_norm() <= tol.eq_atol * (1.0 + norm))
}

pub fn is_psd(m: &CMatrix, tol: &Tolerances) -> Result<bool> {
    definiteness(m, tol, false)
}

pub fn is_pd(m: &CMatrix, tol: &Tolerances) -> Result<bool> {
    definiteness(m, tol, true)
}

fn definiteness(m: &CMatrix, tol: &Tolerances, strict: bool) -> Result<bool> {
    if !is_hermitian(m, tol)? {
        return Ok(false);
    }
    if m.rows() == 0 {
        return Ok(true);
    }
    let scale = 1.0 + m.op_norm();
    let min = hermitian_eigenvalues(m)?[0];
    Ok(if strict { min > tol.psd_atol * scale } else { min >= -tol.psd_atol * scale })
}

/// `N(a) ⊆ N(b)`, decided by `b a⁺ a = b`.
pub fn kernel_contained(a: &CMatrix, b: &CMatrix, tol: &Tolerances) -> Result<bool> {
    if a.cols() != b.cols() {
        return Err(Error::Shape(format!("kernel_contained: column counts differ ({} vs {})", a.cols(), b.cols())));
    }
    let proj = &pinv(a, tol)? * a;
    let diff = &(b * &proj) - b;
    Ok(diff.op_norm() <= tol.eq_atol * (1.0 + b.op_norm()))
}

/// `R(c) ⊆ R(a)`, decided by `a a⁺ c = c`.
pub fn range_contained(c: &CMatrix, a: &CMatrix, tol: &Tolerances) -> Result<bool> {
    if a.rows() != c.rows() {
        return Err(Error::Shape(format!("range_contained: row counts differ ({} vs {})", c.rows(), a.rows())));
    }
    let proj = a * &pinv(a, tol)?;
    let diff = &(&proj * c) - c;
    Ok(diff.op_norm() <= tol.eq_atol * (1.0 + c.op_norm()))
}

/// EP (range-Hermitian) test: `M M⁺ = M⁺ M`.
pub fn is_ep(m: &CMatrix, tol: &Tolerances) -> Result<bool> {
    require_square(m, "is_ep")?;
    let p = pinv(m, tol)?;
    Ok((&(m * &p) - &(&p * m)).op_norm() <= tol.eq_atol)
}

/// Orthonormal basis of `R(a*)` as the columns of a `cols(a) × rank` matrix.
pub fn orthonormal_range_basis(a: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    orthonormal_range_basis_with_floor(a, tol, 0.0)
}

pub fn orthonormal_range_basis_with_floor(a: &CMatrix, tol: &Tolerances, floor: f64) -> Result<CMatrix> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::EmptyBasis("matrix has no entries".into()));
    }
    let s = svd(a)?;
    let cut = cutoff(&s.sigma, tol, floor);
    let mut order: Vec<usize> = (0..s.sigma.len()).filter(|&i| s.sigma[i] > cut && s.sigma[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::EmptyBasis("matrix is numerically zero".into()));
    }
    order.sort_by(|&i, &j| s.sigma[j].total_cmp(&s.sigma[i]));
    let n = a.cols();
    let mut u = CMatrix::zeros(n, order.len());
    for (col, &idx) in order.iter().enumerate() {
        let v_col = s.v.column(idx);
        for i in 0..n {
            u.set(i, col, v_col[i]);
        }
    }
    Ok(u)
}

/// Inverse with a condition check; `Err(cond)` when the matrix is singular
/// for practical purposes.
pub fn checked_inverse(m: &CMatrix) -> std::result::Result<CMatrix, f64> {
    let n = m.rows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    if !m.is_finite() {
        return Err(f64::INFINITY);
    }
    let s = singular_values(m).map_err(|_| f64::INFINITY)?;
    let smax = s[0];
    let smin = *s.last().unwrap();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let lu = m.0.clone().lu();
    let det = lu.determinant();
    if cond > MAX_DENOMINATOR_COND || det.norm() < MIN_DENOMINATOR_DET {
        return Err(cond);
    }
    lu.try_inverse().map(CMatrix).ok_or(cond)
}
