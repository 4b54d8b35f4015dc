//! Function-side Schur transforms, elementary matrix polynomials, matrix
//! linear fractional transformations and resolvent products.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herglotz::{Expr, HerglotzExpr};
use crate::matkit::{self, CMatrix, Tolerances};
use crate::seqkit::{self, MatrixSeq, SchurHead};

/// `−A(zI + F⁺A) + B` at one point.
pub fn schur_plus_value(a: &CMatrix, b: &CMatrix, fz: &CMatrix, z: Complex64, tol: &Tolerances) -> Result<CMatrix> {
    let q = a.rows();
    let inner = &CMatrix::scaled_identity(q, z) + &(&matkit::pinv(fz, tol)? * a);
    Ok(&(-(a * &inner)) + b)
}

/// `−A(zI + A⁺(F − B))⁺` at one point. With `certified` the inner matrix is
/// inverted exactly and a singular one is an error.
pub fn schur_minus_value(
    a: &CMatrix,
    b: &CMatrix,
    fz: &CMatrix,
    z: Complex64,
    certified: bool,
    tol: &Tolerances,
) -> Result<CMatrix> {
    let q = a.rows();
    let inner = &CMatrix::scaled_identity(q, z) + &(&matkit::pinv(a, tol)? * &(fz - b));
    let inv = if certified {
        matkit::checked_inverse(&inner).map_err(|cond| Error::SingularDenominator { z: Some(z), cond })?
    } else {
        matkit::pinv(&inner, tol)?
    };
    Ok(-(a * &inv))
}

fn require_pair(f: &HerglotzExpr, a: &CMatrix, b: &CMatrix) -> Result<()> {
    let q = f.q();
    if a.shape() != (q, q) || b.shape() != (q, q) {
        return Err(Error::Shape(format!("transform parameters must be {q}x{q} to match the function")));
    }
    Ok(())
}

/// `F^(+;A,B)`; `b = None` means `B = 0`.
pub fn schur_plus(f: Expr, a: &CMatrix, b: Option<&CMatrix>) -> Result<Expr> {
    let b = b.cloned().unwrap_or_else(|| CMatrix::zeros(a.rows(), a.cols()));
    require_pair(&f, a, &b)?;
    Ok(Arc::new(HerglotzExpr::SchurPlus { a: a.clone(), b, f }))
}

/// `F^(−;A,B)`; `b = None` means `B = 0`. The node is certified for an exact
/// inverse when `A ≽ 0`, `B` is Hermitian and `N(A) ⊆ N(B)`.
pub fn schur_minus(f: Expr, a: &CMatrix, b: Option<&CMatrix>, tol: &Tolerances) -> Result<Expr> {
    let b = b.cloned().unwrap_or_else(|| CMatrix::zeros(a.rows(), a.cols()));
    require_pair(&f, a, &b)?;
    let certified = matkit::is_psd(a, tol)? && matkit::is_hermitian(&b, tol)? && matkit::kernel_contained(a, &b, tol)?;
    Ok(Arc::new(HerglotzExpr::SchurMinus { a: a.clone(), b, f, certified }))
}

/// `(aX + b)(cX + d)⁻¹` for `E = [[a, b], [c, d]]`.
pub fn lft(e: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let [a, b, c, d] = e.quadrants()?;
    if x.shape() != a.shape() {
        return Err(Error::Shape(format!(
            "LFT argument is {}x{}, expected {}x{}",
            x.rows(),
            x.cols(),
            a.rows(),
            a.cols()
        )));
    }
    let num = &(&a * x) + &b;
    let den = &(&c * x) + &d;
    let inv = matkit::checked_inverse(&den).map_err(|cond| Error::SingularDenominator { z: None, cond })?;
    Ok(&num * &inv)
}

fn w_value(a: &CMatrix, a_pinv: &CMatrix, b: &CMatrix, z: Complex64) -> CMatrix {
    let q = a.rows();
    let top_left = &CMatrix::scaled_identity(q, z) - &(b * a_pinv);
    let bottom_right = &CMatrix::identity(q) - &(a_pinv * a);
    CMatrix::from_quadrants(&top_left, a, &(-a_pinv), &bottom_right)
}

fn v_value(a: &CMatrix, a_pinv: &CMatrix, b: &CMatrix, z: Complex64) -> CMatrix {
    let q = a.rows();
    let bottom_right = &CMatrix::scaled_identity(q, z) - &(a_pinv * b);
    CMatrix::from_quadrants(&CMatrix::zeros(q, q), &(-a), a_pinv, &bottom_right)
}

/// `W_{A,B}(z) = [[zI − BA⁺, A], [−A⁺, I − A⁺A]]`.
pub fn w_poly(a: &CMatrix, b: Option<&CMatrix>, z: Complex64, tol: &Tolerances) -> Result<CMatrix> {
    let b = b.cloned().unwrap_or_else(|| CMatrix::zeros(a.rows(), a.cols()));
    Ok(w_value(a, &matkit::pinv(a, tol)?, &b, z))
}

/// `V_{A,B}(z) = [[0, −A], [A⁺, zI − A⁺B]]`.
pub fn v_poly(a: &CMatrix, b: Option<&CMatrix>, z: Complex64, tol: &Tolerances) -> Result<CMatrix> {
    let b = b.cloned().unwrap_or_else(|| CMatrix::zeros(a.rows(), a.cols()));
    Ok(v_value(a, &matkit::pinv(a, tol)?, &b, z))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorKind {
    /// `V_{A,B}`.
    #[serde(rename = "V")]
    V,
    /// `v_A = V_{A,0}`.
    #[serde(rename = "v")]
    SmallV,
    /// `W_{A,B}`.
    #[serde(rename = "W")]
    W,
    /// `w_A = W_{A,0}`.
    #[serde(rename = "w")]
    SmallW,
}

/// One elementary factor; `A⁺` is computed once at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactorWire")]
pub struct Factor {
    pub kind: FactorKind,
    #[serde(rename = "A")]
    pub a: CMatrix,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<CMatrix>,
    #[serde(skip)]
    a_pinv: CMatrix,
}

#[derive(Deserialize)]
struct FactorWire {
    kind: FactorKind,
    #[serde(rename = "A")]
    a: CMatrix,
    #[serde(rename = "B", default)]
    b: Option<CMatrix>,
}

impl TryFrom<FactorWire> for Factor {
    type Error = Error;
    fn try_from(w: FactorWire) -> Result<Self> {
        Factor::new(w.kind, w.a, w.b, &Tolerances::default())
    }
}

impl Factor {
    pub fn new(kind: FactorKind, a: CMatrix, b: Option<CMatrix>, tol: &Tolerances) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape("factor parameter A must be square".into()));
        }
        let b = match kind {
            FactorKind::SmallV | FactorKind::SmallW => None,
            FactorKind::V | FactorKind::W => Some(b.unwrap_or_else(|| CMatrix::zeros(a.rows(), a.cols()))),
        };
        if let Some(b) = &b {
            if b.shape() != a.shape() {
                return Err(Error::Shape("factor parameters A and B differ in size".into()));
            }
        }
        let a_pinv = matkit::pinv(&a, tol)?;
        Ok(Factor { kind, a, b, a_pinv })
    }

    pub fn eval(&self, z: Complex64) -> CMatrix {
        let zero;
        let b = match &self.b {
            Some(b) => b,
            None => {
                zero = CMatrix::zeros(self.a.rows(), self.a.cols());
                &zero
            }
        };
        match self.kind {
            FactorKind::V | FactorKind::SmallV => v_value(&self.a, &self.a_pinv, b, z),
            FactorKind::W | FactorKind::SmallW => w_value(&self.a, &self.a_pinv, b, z),
        }
    }
}

/// Product of elementary factors, evaluated left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ResolventWire")]
pub struct ResolventPoly {
    m: usize,
    q: usize,
    factors: Vec<Factor>,
}

#[derive(Deserialize)]
struct ResolventWire {
    m: usize,
    q: usize,
    factors: Vec<Factor>,
}

impl TryFrom<ResolventWire> for ResolventPoly {
    type Error = Error;
    fn try_from(w: ResolventWire) -> Result<Self> {
        ResolventPoly::new(w.m, w.q, w.factors)
    }
}

impl ResolventPoly {
    pub fn new(m: usize, q: usize, factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Shape("a resolvent needs at least one factor".into()));
        }
        if factors.iter().any(|f| f.a.rows() != q) {
            return Err(Error::Shape(format!("every factor must have block size {q}")));
        }
        Ok(ResolventPoly { m, q, factors })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn eval(&self, z: Complex64) -> CMatrix {
        let mut iter = self.factors.iter();
        let first = iter.next().expect("non-empty by construction").eval(z);
        iter.fold(first, |acc, f| &acc * &f.eval(z))
    }
}

fn heads_for(seq: &MatrixSeq, m: usize, tol: &Tolerances) -> Result<Vec<SchurHead>> {
    if m > seq.kappa() {
        return Err(Error::Range(format!("resolvent of order {m} needs κ ≥ {m}, κ = {}", seq.kappa())));
    }
    seqkit::schur_heads(&seq.truncate(m)?, tol)
}

fn paired(kind: FactorKind, head: &SchurHead, tol: &Tolerances) -> Result<Factor> {
    let b = head.s1.clone().expect("paired factor needs s_1^(k)");
    Factor::new(kind, head.s0.clone(), Some(b), tol)
}

/// `V^(m)` of the sequence truncated to `(s_0, …, s_m)`.
pub fn resolvent_v(seq: &MatrixSeq, m: usize, tol: &Tolerances) -> Result<ResolventPoly> {
    let heads = heads_for(seq, m, tol)?;
    let n = m / 2;
    let mut factors = Vec::with_capacity(n + 1);
    if m % 2 == 0 {
        for head in &heads[..n] {
            factors.push(paired(FactorKind::V, head, tol)?);
        }
        factors.push(Factor::new(FactorKind::SmallV, heads[n].s0.clone(), None, tol)?);
    } else {
        for head in &heads[..=n] {
            factors.push(paired(FactorKind::V, head, tol)?);
        }
    }
    ResolventPoly::new(m, seq.q(), factors)
}

/// `W^(m)` of the sequence truncated to `(s_0, …, s_m)`.
pub fn resolvent_w(seq: &MatrixSeq, m: usize, tol: &Tolerances) -> Result<ResolventPoly> {
    let heads = heads_for(seq, m, tol)?;
    let n = m / 2;
    let mut factors = Vec::with_capacity(n + 1);
    if m % 2 == 0 {
        factors.push(Factor::new(FactorKind::SmallW, heads[n].s0.clone(), None, tol)?);
        for head in heads[..n].iter().rev() {
            factors.push(paired(FactorKind::W, head, tol)?);
        }
    } else {
        for head in heads[..=n].iter().rev() {
            factors.push(paired(FactorKind::W, head, tol)?);
        }
    }
    ResolventPoly::new(m, seq.q(), factors)
}

/// Which truncated problem a chain belongs to: `κ = 2n` or `κ = 2n + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(kappa: usize) -> Self {
        if kappa % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

fn chain_heads(seq: &MatrixSeq, steps: usize, parity: Parity, tol: &Tolerances) -> Result<Vec<SchurHead>> {
    let needed = match parity {
        Parity::Even => 2 * steps,
        Parity::Odd => 2 * steps + 1,
    };
    if needed > seq.kappa() {
        return Err(Error::Range(format!("{steps}-step {parity:?} chain needs κ ≥ {needed}, κ = {}", seq.kappa())));
    }
    let mut heads = seqkit::schur_heads(&seq.truncate(needed)?, tol)?;
    heads.truncate(steps + 1);
    Ok(heads)
}

/// Forward Schur-Nevanlinna chain. Even: `F^(+;s_0^(n))` after the paired
/// transforms for `k < n`. Odd: paired transforms for `k ≤ n`. The
/// innermost transform uses `k = 0`.
pub fn sn_chain_forward(seq: &MatrixSeq, f: Expr, steps: usize, parity: Parity, tol: &Tolerances) -> Result<Expr> {
    let heads = chain_heads(seq, steps, parity, tol)?;
    let mut cur = f;
    for (k, head) in heads.iter().enumerate() {
        let b = if parity == Parity::Even && k == steps { None } else { head.s1.as_ref() };
        cur = schur_plus(cur, &head.s0, b)?;
    }
    Ok(cur)
}

/// [`sn_chain_forward`] applied to a single value `x = F(z)`.
pub fn sn_chain_forward_value(
    seq: &MatrixSeq,
    x: &CMatrix,
    z: Complex64,
    steps: usize,
    parity: Parity,
    tol: &Tolerances,
) -> Result<CMatrix> {
    let heads = chain_heads(seq, steps, parity, tol)?;
    let mut cur = x.clone();
    for (k, head) in heads.iter().enumerate() {
        let zero;
        let b = if parity == Parity::Even && k == steps {
            zero = CMatrix::zeros(seq.q(), seq.q());
            &zero
        } else {
            head.s1.as_ref().expect("paired head")
        };
        cur = schur_plus_value(&head.s0, b, &cur, z, tol)?;
    }
    Ok(cur)
}

/// Backward chain, the inverse of [`sn_chain_forward`]: the innermost
/// transform uses `k = n`, the outermost `k = 0`.
pub fn sn_chain_backward(seq: &MatrixSeq, g: Expr, steps: usize, parity: Parity, tol: &Tolerances) -> Result<Expr> {
    let heads = chain_heads(seq, steps, parity, tol)?;
    let mut cur = g;
    for (k, head) in heads.iter().enumerate().rev() {
        let b = if parity == Parity::Even && k == steps { None } else { head.s1.as_ref() };
        cur = schur_minus(cur, &head.s0, b, tol)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MolecularMeasure;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn one() -> CMatrix {
        CMatrix::real_scalar(1.0)
    }

    fn scalar_at(f: &HerglotzExpr, z: Complex64) -> Complex64 {
        f.eval(z).unwrap().get(0, 0)
    }

    fn zs() -> Vec<Complex64> {
        vec![c(0.0, 1.0), c(1.5, 0.5), c(-3.0, 2.0), c(0.2, 10.0)]
    }

    fn dirac(t: f64) -> Expr {
        HerglotzExpr::stieltjes(MolecularMeasure::scalar(&[(t, 1.0)]).unwrap())
    }

    #[test]
    fn schur_plus_examples() {
        let t = tol();
        let f = schur_plus(dirac(0.0), &one(), None).unwrap();
        for z in zs() {
            assert!(scalar_at(&f, z).norm() < 1e-14);
        }
        let b0 = CMatrix::real_scalar(2.5);
        let f = schur_plus(dirac(0.7), &CMatrix::real_scalar(0.0), Some(&b0)).unwrap();
        for z in zs() {
            assert!((scalar_at(&f, z) - c(2.5, 0.0)).norm() < 1e-14);
        }
        let alpha = 2.0;
        let f = schur_plus(HerglotzExpr::constant(CMatrix::real_scalar(alpha), &t).unwrap(), &one(), None).unwrap();
        for z in zs() {
            assert!((scalar_at(&f, z) - (-1.0 / alpha - z)).norm() < 1e-14);
        }
    }

    #[test]
    fn schur_minus_examples() {
        let t = tol();
        let f = schur_minus(HerglotzExpr::zero(1), &one(), None, &t).unwrap();
        for z in zs() {
            assert!((scalar_at(&f, z) + 1.0 / z).norm() < 1e-14);
        }
        let b = CMatrix::real_scalar(0.75);
        let f = schur_minus(HerglotzExpr::zero(1), &one(), Some(&b), &t).unwrap();
        for z in zs() {
            assert!((scalar_at(&f, z) + 1.0 / (z - 0.75)).norm() < 1e-14);
        }
        // F = B + zβ gives −(1/z)(1 + β)⁻¹.
        let beta = 0.5;
        let g = HerglotzExpr::sum(vec![
            HerglotzExpr::constant(b.clone(), &t).unwrap(),
            HerglotzExpr::linear(CMatrix::real_scalar(beta), &t).unwrap(),
        ])
        .unwrap();
        let f = schur_minus(g, &one(), Some(&b), &t).unwrap();
        for z in zs() {
            assert!((scalar_at(&f, z) + 1.0 / (z * (1.0 + beta))).norm() < 1e-14);
        }
    }

    #[test]
    fn lft_examples() {
        let x = CMatrix::from_rows(&[vec![c(1.0, 2.0), c(0.5, 0.0)], vec![c(-1.0, 0.0), c(0.0, 3.0)]]).unwrap();
        assert!(matkit::approx_eq(&lft(&CMatrix::identity(4), &x).unwrap(), &x, 1e-15));

        let z = c(0.3, 1.7);
        let v = v_poly(&one(), None, z, &tol()).unwrap();
        let val = lft(&v, &CMatrix::real_scalar(0.0)).unwrap().get(0, 0);
        assert!((val + 1.0 / z).norm() < 1e-15);

        let singular = CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(lft(&singular, &CMatrix::real_scalar(1.0)), Err(Error::SingularDenominator { .. })));
    }

    #[test]
    fn polynomial_examples() {
        let t = tol();
        let z = c(-0.4, 2.2);
        let v = v_poly(&one(), None, z, &t).unwrap();
        let expected = CMatrix::from_rows(&[vec![c(0.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), z]]).unwrap();
        assert_eq!(v, expected);

        let q = 2;
        let w = w_poly(&CMatrix::zeros(q, q), None, z, &t).unwrap();
        let expected = CMatrix::from_quadrants(
            &CMatrix::scaled_identity(q, z),
            &CMatrix::zeros(q, q),
            &CMatrix::zeros(q, q),
            &CMatrix::identity(q),
        );
        assert_eq!(w, expected);
    }

    #[test]
    fn w_times_v_is_upper_triangular() {
        let t = tol();
        let a = CMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 0.5]]);
        let b = CMatrix::from_real_rows(&[&[0.3, -1.0], &[-1.0, 0.7]]);
        let z = c(0.6, 1.1);
        let prod = &w_poly(&a, Some(&b), z, &t).unwrap() * &v_poly(&a, Some(&b), z, &t).unwrap();
        let [tl, tr, bl, br] = prod.quadrants().unwrap();
        let ap = matkit::pinv(&a, &t).unwrap();
        assert!(bl.max_abs() < 1e-12);
        assert!(matkit::approx_eq(&tl, &(&a * &ap), 1e-12));
        let ptr = &(&(&b * &ap) * &a) - &(&(&a * &ap) * &b);
        assert!(matkit::approx_eq(&tr, &ptr, 1e-12));
        let proj = &ap * &a;
        let pbr = &proj + &(&CMatrix::identity(2) - &proj).scale(z);
        assert!(matkit::approx_eq(&br, &pbr, 1e-12));
    }

    #[test]
    fn resolvent_examples() {
        let t = tol();
        let z = c(0.25, 0.8);
        let v0 = resolvent_v(&MatrixSeq::scalar(&[1.0]).unwrap(), 0, &t).unwrap();
        assert_eq!(v0.eval(z), v_poly(&one(), None, z, &t).unwrap());

        let v2 = resolvent_v(&MatrixSeq::scalar(&[1.0, 0.0, 0.0]).unwrap(), 2, &t).unwrap();
        let expected = CMatrix::from_rows(&[vec![c(0.0, 0.0), -z], vec![c(0.0, 0.0), z * z]]).unwrap();
        assert!(matkit::approx_eq(&v2.eval(z), &expected, 1e-15));

        let b = 0.4;
        let v1 = resolvent_v(&MatrixSeq::scalar(&[1.0, b]).unwrap(), 1, &t).unwrap();
        let expected = CMatrix::from_rows(&[vec![c(0.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), z - b]]).unwrap();
        assert!(matkit::approx_eq(&v1.eval(z), &expected, 1e-15));

        assert!(matches!(resolvent_v(&MatrixSeq::scalar(&[1.0]).unwrap(), 1, &t), Err(Error::Range(_))));
    }

    #[test]
    fn resolvent_json_roundtrip() {
        let t = tol();
        let seq = MatrixSeq::scalar(&[1.0, 0.5, 1.0, 0.2]).unwrap();
        let v = resolvent_v(&seq, 3, &t).unwrap();
        let text = serde_json::to_string(&v).unwrap();
        assert!(text.contains("\"kind\":\"V\""));
        let back: ResolventPoly = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        let w = resolvent_w(&seq, 2, &t).unwrap();
        let text = serde_json::to_string(&w).unwrap();
        assert!(text.contains("\"kind\":\"w\"") && !text.contains("\"B\":null"));
        assert_eq!(serde_json::from_str::<ResolventPoly>(&text).unwrap(), w);
    }

    #[test]
    fn chain_examples() {
        let t = tol();
        let b = -0.6;
        let f = sn_chain_forward(&MatrixSeq::scalar(&[1.0]).unwrap(), dirac(0.0), 0, Parity::Even, &t).unwrap();
        let g = sn_chain_forward(&MatrixSeq::scalar(&[1.0, b]).unwrap(), dirac(b), 0, Parity::Odd, &t).unwrap();
        for z in zs() {
            assert!(scalar_at(&f, z).norm() < 1e-14);
            assert!(scalar_at(&g, z).norm() < 1e-14);
        }

        let sym = MolecularMeasure::scalar(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let seq = sym.moments_prefix(3);
        let f2 = sn_chain_forward(&seq, HerglotzExpr::stieltjes(sym), 0, Parity::Odd, &t).unwrap();
        let v = f2.eval(c(0.0, 2.0)).unwrap();
        assert!(v.is_finite() && v.get(0, 0).im >= -1e-12);

        let back =
            sn_chain_backward(&MatrixSeq::scalar(&[1.0]).unwrap(), HerglotzExpr::zero(1), 0, Parity::Even, &t).unwrap();
        let back_odd =
            sn_chain_backward(&MatrixSeq::scalar(&[1.0, b]).unwrap(), HerglotzExpr::zero(1), 0, Parity::Odd, &t)
                .unwrap();
        let det = sn_chain_backward(
            &MatrixSeq::scalar(&[1.0, 0.0, 0.0]).unwrap(),
            HerglotzExpr::zero(1),
            1,
            Parity::Even,
            &t,
        );
        for z in zs() {
            assert!((scalar_at(&back, z) + 1.0 / z).norm() < 1e-14);
            assert!((scalar_at(&back_odd, z) + 1.0 / (z - b)).norm() < 1e-14);
        }
        // (1, 0, 0): the last head vanishes, so the innermost transform maps
        // every parameter to the same function −1/z.
        let det = det.unwrap();
        for z in zs() {
            assert!((scalar_at(&det, z) + 1.0 / z).norm() < 1e-14);
        }
    }
}
