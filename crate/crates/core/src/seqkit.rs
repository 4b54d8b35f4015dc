//! Matrix sequences, block Hankel structure and the algebraic Schur algorithm.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{self, CMatrix, Tolerances};
use crate::measures::{self, MolecularMeasure};

/// Finite sequence `(s_0, …, s_κ)` of `q × q` matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeqWire")]
pub struct MatrixSeq {
    q: usize,
    items: Vec<CMatrix>,
}

#[derive(Deserialize)]
struct SeqWire {
    q: usize,
    items: Vec<CMatrix>,
}

impl TryFrom<SeqWire> for MatrixSeq {
    type Error = Error;
    fn try_from(w: SeqWire) -> Result<Self> {
        MatrixSeq::new(w.q, w.items)
    }
}

impl MatrixSeq {
    pub fn new(q: usize, items: Vec<CMatrix>) -> Result<Self> {
        if q == 0 {
            return Err(Error::Shape("matrix size q must be at least 1".into()));
        }
        if items.is_empty() {
            return Err(Error::Shape("a sequence needs at least s_0".into()));
        }
        for (j, s) in items.iter().enumerate() {
            if s.shape() != (q, q) {
                return Err(Error::Shape(format!("item {j} is {}x{}, expected {q}x{q}", s.rows(), s.cols())));
            }
            s.ensure_finite()?;
        }
        Ok(MatrixSeq { q, items })
    }

    /// Scalar sequence from real values.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(1, values.iter().map(|&v| CMatrix::real_scalar(v)).collect())
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Last index `κ`.
    pub fn kappa(&self) -> usize {
        self.items.len() - 1
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[CMatrix] {
        &self.items
    }

    pub fn get(&self, j: usize) -> Result<&CMatrix> {
        self.items.get(j).ok_or_else(|| Error::Range(format!("s_{j} requested but κ = {}", self.kappa())))
    }

    /// `(s_0, …, s_m)`.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m > self.kappa() {
            return Err(Error::Range(format!("cannot truncate to {m}, κ = {}", self.kappa())));
        }
        Ok(MatrixSeq { q: self.q, items: self.items[..=m].to_vec() })
    }

    /// Appends `s_{κ+1}`.
    pub fn extended(&self, next: CMatrix) -> Result<Self> {
        let mut items = self.items.clone();
        items.push(next);
        Self::new(self.q, items)
    }

    fn check_span(&self, l: usize, m: usize) -> Result<()> {
        if l > m || m > self.kappa() {
            return Err(Error::Range(format!("block span {l}..={m} invalid for κ = {}", self.kappa())));
        }
        Ok(())
    }

    /// Block column `(s_l; …; s_m)`.
    pub fn y(&self, l: usize, m: usize) -> Result<CMatrix> {
        self.check_span(l, m)?;
        let q = self.q;
        let mut out = CMatrix::zeros((m - l + 1) * q, q);
        for (i, j) in (l..=m).enumerate() {
            out.set_block(i * q, 0, &self.items[j]);
        }
        Ok(out)
    }

    /// Block row `(s_l, …, s_m)`.
    pub fn z(&self, l: usize, m: usize) -> Result<CMatrix> {
        self.check_span(l, m)?;
        let q = self.q;
        let mut out = CMatrix::zeros(q, (m - l + 1) * q);
        for (i, j) in (l..=m).enumerate() {
            out.set_block(0, i * q, &self.items[j]);
        }
        Ok(out)
    }

    fn hankel_from(&self, n: usize, shift: usize) -> CMatrix {
        let q = self.q;
        let mut out = CMatrix::zeros((n + 1) * q, (n + 1) * q);
        for j in 0..=n {
            for k in 0..=n {
                out.set_block(j * q, k * q, &self.items[j + k + shift]);
            }
        }
        out
    }

    /// `H_n = [s_{j+k}]_{j,k=0..n}`; needs `2n ≤ κ`.
    pub fn hankel(&self, n: usize) -> Result<CMatrix> {
        if 2 * n > self.kappa() {
            return Err(Error::Range(format!("H_{n} needs κ ≥ {}, κ = {}", 2 * n, self.kappa())));
        }
        Ok(self.hankel_from(n, 0))
    }

    /// `K_n = [s_{j+k+1}]_{j,k=0..n}`; needs `2n + 1 ≤ κ`.
    pub fn shifted_hankel(&self, n: usize) -> Result<CMatrix> {
        if 2 * n + 1 > self.kappa() {
            return Err(Error::Range(format!("K_{n} needs κ ≥ {}, κ = {}", 2 * n + 1, self.kappa())));
        }
        Ok(self.hankel_from(n, 1))
    }

    /// Largest operator norm among the items.
    pub fn scale(&self) -> f64 {
        self.items.iter().map(CMatrix::op_norm).fold(0.0, f64::max)
    }
}

/// Reciprocal sequence: `s♯_0 = s_0⁺`, `s♯_k = −s_0⁺ Σ_{j<k} s_{k−j} s♯_j`.
pub fn reciprocal(seq: &MatrixSeq, tol: &Tolerances) -> Result<MatrixSeq> {
    reciprocal_with_floor(seq, tol, 0.0)
}

fn reciprocal_with_floor(seq: &MatrixSeq, tol: &Tolerances, floor: f64) -> Result<MatrixSeq> {
    let head_pinv = matkit::pinv_with_floor(&seq.items[0], tol, floor)?;
    let mut out: Vec<CMatrix> = Vec::with_capacity(seq.len());
    out.push(head_pinv.clone());
    for k in 1..seq.len() {
        let mut acc = CMatrix::zeros(seq.q, seq.q);
        for (j, rec) in out.iter().enumerate() {
            acc = acc + &seq.items[k - j] * rec;
        }
        out.push(-(&head_pinv * &acc));
    }
    Ok(MatrixSeq { q: seq.q, items: out })
}

/// One transform step applied to `cur`, the `i`-th transform of `source`.
/// When every output item lies below the rank floor of the source moment it
/// derives from, the transform vanishes in exact arithmetic and is returned
/// as exact zeros. Later tests would otherwise judge rounding noise against
/// its own scale.
fn first_transform(cur: &MatrixSeq, source: &MatrixSeq, i: usize, tol: &Tolerances) -> Result<MatrixSeq> {
    if cur.kappa() < 2 {
        return Err(Error::Range(format!("the Schur transform needs κ ≥ 2, κ = {}", cur.kappa())));
    }
    let rec = reciprocal_with_floor(cur, tol, head_floor(source, i, tol))?;
    let s0 = &cur.items[0];
    let mut items: Vec<CMatrix> = (0..=cur.kappa() - 2).map(|j| -(&(s0 * &rec.items[j + 2]) * s0)).collect();
    let vanishes = items
        .iter()
        .enumerate()
        .all(|(j, m)| m.op_norm() <= tol.rank_rtol * (1.0 + source.items[2 * i + 2 + j].op_norm()));
    if vanishes {
        items.iter_mut().for_each(|m| *m = CMatrix::zeros(cur.q, cur.q));
    }
    Ok(MatrixSeq { q: cur.q, items })
}

/// Absolute rank floor used when inverting `s_0^(k)`. The heads of repeated
/// transforms are Schur complements, and their size is governed by
/// `s_{2k}` of the source, not by the head itself.
fn head_floor(seq: &MatrixSeq, k: usize, tol: &Tolerances) -> f64 {
    tol.rank_rtol * (1.0 + seq.items[2 * k].op_norm())
}

/// `k`-th Schur transform (length `κ − 2k + 1`).
pub fn schur_transform(seq: &MatrixSeq, k: usize, tol: &Tolerances) -> Result<MatrixSeq> {
    if 2 * k > seq.kappa() {
        return Err(Error::Range(format!("{k}-th Schur transform needs κ ≥ {}, κ = {}", 2 * k, seq.kappa())));
    }
    let mut cur = seq.clone();
    for i in 0..k {
        cur = first_transform(&cur, seq, i, tol)?;
    }
    Ok(cur)
}

/// Leading terms `s_0^(k)`, `s_1^(k)` of the `k`-th Schur transform.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchurHead {
    /// `s_0^(k)` with singular values below the rank floor removed.
    pub s0: CMatrix,
    /// `s_1^(k)`, present when `2k + 1 ≤ κ`.
    pub s1: Option<CMatrix>,
}

/// Heads for every `k` with `2k ≤ κ`.
///
/// A head that should vanish on some subspace usually carries rounding
/// noise there; that noise is projected out with the same floor the
/// transform itself uses, so the heads can be inverted safely downstream.
pub fn schur_heads(seq: &MatrixSeq, tol: &Tolerances) -> Result<Vec<SchurHead>> {
    let mut out = Vec::new();
    let mut cur = seq.clone();
    let mut k = 0;
    loop {
        let floor = head_floor(seq, k, tol);
        out.push(SchurHead { s0: matkit::truncate_below(&cur.items[0], floor)?, s1: cur.items.get(1).cloned() });
        if cur.kappa() < 2 {
            break;
        }
        cur = first_transform(&cur, seq, k, tol)?;
        k += 1;
    }
    Ok(out)
}

/// Intermediates of the canonical Hankel parametrization at level `n`.
#[derive(Clone, Debug, Serialize)]
pub struct HankelLevel {
    pub n: usize,
    pub hankel: CMatrix,
    pub shifted_hankel: Option<CMatrix>,
    pub m_term: CMatrix,
    pub n_term: CMatrix,
    pub sigma: CMatrix,
    pub lambda: CMatrix,
    /// `L_n = s_{2n} − z_{n,2n−1} H_{n−1}⁺ y_{n,2n−1}`.
    pub schur_complement: CMatrix,
}

/// Canonical Hankel parametrization `(C_k)`, `(D_k)` with intermediates.
#[derive(Clone, Debug, Serialize)]
pub struct HankelParam {
    /// `C_1, C_2, …` (stored from index 0).
    pub c: Vec<CMatrix>,
    /// `D_0, D_1, …`.
    pub d: Vec<CMatrix>,
    pub levels: Vec<HankelLevel>,
}

impl HankelParam {
    /// `C_k` for `k ≥ 1`.
    pub fn c_at(&self, k: usize) -> Option<&CMatrix> {
        k.checked_sub(1).and_then(|i| self.c.get(i))
    }
}

/// Computes `Λ_n` and `L_n` for `n ≥ 1` from `H_{n−1}⁺`.
fn level(seq: &MatrixSeq, n: usize, tol: &Tolerances) -> Result<HankelLevel> {
    let q = seq.q;
    let hankel = seq.hankel(n)?;
    let shifted_hankel = seq.shifted_hankel(n).ok();
    if n == 0 {
        let zero = CMatrix::zeros(q, q);
        return Ok(HankelLevel {
            n,
            hankel,
            shifted_hankel,
            m_term: zero.clone(),
            n_term: zero.clone(),
            sigma: zero.clone(),
            lambda: zero,
            schur_complement: seq.items[0].clone(),
        });
    }
    let p = matkit::pinv(&seq.hankel(n - 1)?, tol)?;
    let k_prev = seq.shifted_hankel(n - 1)?;
    let za = seq.z(n, 2 * n - 1)?;
    let ya = seq.y(n, 2 * n - 1)?;
    let za_p = &za * &p;
    let p_ya = &p * &ya;
    let m_term = &za_p * &seq.y(n + 1, 2 * n)?;
    let n_term = &(&seq.z(n + 1, 2 * n)? * &p) * &ya;
    let sigma = &(&za_p * &k_prev) * &p_ya;
    let lambda = &(&m_term + &n_term) - &sigma;
    let schur_complement = &seq.items[2 * n] - &(&za_p * &ya);
    Ok(HankelLevel { n, hankel, shifted_hankel, m_term, n_term, sigma, lambda, schur_complement })
}

pub fn canonical_param(seq: &MatrixSeq, tol: &Tolerances) -> Result<HankelParam> {
    let kappa = seq.kappa();
    let levels = (0..=kappa / 2).map(|n| level(seq, n, tol)).collect::<Result<Vec<_>>>()?;
    let c = (1..).take_while(|k| 2 * k - 1 <= kappa).map(|k| &seq.items[2 * k - 1] - &levels[k - 1].lambda).collect();
    let d = levels.iter().map(|l| l.schur_complement.clone()).collect();
    Ok(HankelParam { c, d, levels })
}

/// `L_n` only, for `2n ≤ κ`.
pub fn schur_complement(seq: &MatrixSeq, n: usize, tol: &Tolerances) -> Result<CMatrix> {
    if n == 0 {
        return seq.get(0).cloned();
    }
    if 2 * n > seq.kappa() {
        return Err(Error::Range(format!("L_{n} needs κ ≥ {}", 2 * n)));
    }
    let p = matkit::pinv(&seq.hankel(n - 1)?, tol)?;
    let ya = seq.y(n, 2 * n - 1)?;
    Ok(&seq.items[2 * n] - &(&(&seq.z(n, 2 * n - 1)? * &p) * &ya))
}

/// Every `H_n` with `2n ≤ κ` is PSD.
pub fn is_hnnd(seq: &MatrixSeq, tol: &Tolerances) -> Result<bool> {
    for n in 0..=seq.kappa() / 2 {
        if !matkit::is_psd(&seq.hankel(n)?, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every `H_n` with `2n ≤ κ` is positive definite.
pub fn is_hpd(seq: &MatrixSeq, tol: &Tolerances) -> Result<bool> {
    for n in 0..=seq.kappa() / 2 {
        if !matkit::is_pd(&seq.hankel(n)?, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The one-step extension used to decide extendability of an even-length
/// sequence: `s_{2n+1} = Λ_n`, `s_{2n+2} = z_{n+1,2n+1} H_n⁺ y_{n+1,2n+1}`.
pub fn canonical_extension(seq: &MatrixSeq, tol: &Tolerances) -> Result<MatrixSeq> {
    let kappa = seq.kappa();
    if kappa % 2 != 0 {
        return Err(Error::Contract("canonical extension needs an even κ".into()));
    }
    let n = kappa / 2;
    let ext = seq.extended(extension_block(seq, n, tol)?)?;
    let top = top_completion(&ext, n, tol)?;
    ext.extended(top)
}

/// Hermitian part of `Λ_n`. For extendable data `Λ_n` is Hermitian, but on
/// ill-conditioned `H_{n−1}` its computed value is not; the PSD test of the
/// extended matrix still decides, so symmetrizing never creates a false
/// witness.
fn extension_block(seq: &MatrixSeq, n: usize, tol: &Tolerances) -> Result<CMatrix> {
    let lambda = level(seq, n, tol)?.lambda;
    Ok((&lambda + &lambda.adjoint()).scale_real(0.5))
}

/// `z_{n+1,2n+1} H_n⁺ y_{n+1,2n+1}` for a sequence with `κ = 2n + 1`.
fn top_completion(seq: &MatrixSeq, n: usize, tol: &Tolerances) -> Result<CMatrix> {
    let p = matkit::pinv(&seq.hankel(n)?, tol)?;
    Ok(&(&seq.z(n + 1, 2 * n + 1)? * &p) * &seq.y(n + 1, 2 * n + 1)?)
}

/// Whether the sequence admits a one-step extension with a PSD block Hankel
/// matrix.
///
/// For odd `κ = 2n + 1` this is decided exactly: `H_n ≽ 0`, `s_{2n+1}`
/// Hermitian and `R(y_{n+1,2n+1}) ⊆ R(H_n)`. For even `κ = 2n` the
/// canonical extension is tested.
pub fn is_hnnd_extendable(seq: &MatrixSeq, tol: &Tolerances) -> Result<bool> {
    let kappa = seq.kappa();
    let n = kappa / 2;
    if !is_hnnd(seq, tol)? {
        return Ok(false);
    }
    let odd = if kappa % 2 == 1 { seq.clone() } else { seq.extended(extension_block(seq, n, tol)?)? };
    if !odd_extendable(&odd, n, tol)? {
        return Ok(false);
    }
    let top = top_completion(&odd, n, tol)?;
    matkit::is_psd(&odd.extended(top)?.hankel(n + 1)?, tol)
}

fn odd_extendable(seq: &MatrixSeq, n: usize, tol: &Tolerances) -> Result<bool> {
    Ok(matkit::is_hermitian(&seq.items[2 * n + 1], tol)?
        && matkit::range_contained(&seq.y(n + 1, 2 * n + 1)?, &seq.hankel(n)?, tol)?)
}

/// `N(s_0) ⊆ N(s_j)` and `R(s_j) ⊆ R(s_0)` for every `j`.
pub fn is_first_term_dominated(seq: &MatrixSeq, tol: &Tolerances) -> Result<bool> {
    let s0 = &seq.items[0];
    for s in &seq.items[1..] {
        if !matkit::kernel_contained(s0, s, tol)? || !matkit::range_contained(s, s0, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Random molecular measure together with its first `κ + 1` moments.
///
/// The measure has between one and `atom_budget` atoms in `[−2, 2]` with
/// random PSD masses of random rank, so the sequence is always extendable.
pub fn random_extendable_seq(
    q: usize,
    kappa: usize,
    atom_budget: usize,
    rng_seed: u64,
) -> Result<(MatrixSeq, MolecularMeasure)> {
    if q == 0 || atom_budget == 0 {
        return Err(Error::Domain("need q ≥ 1 and at least one atom".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sigma = measures::random_measure(q, atom_budget, &measures::GeneratorOptions::default(), &mut rng)?;
    Ok((sigma.moments_prefix(kappa), sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn scalars(seq: &MatrixSeq) -> Vec<f64> {
        seq.items().iter().map(|m| m.get(0, 0).re).collect()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn hankel_assembly() {
        let s = MatrixSeq::scalar(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.hankel(1).unwrap(), CMatrix::identity(2));
        assert!(matches!(s.hankel(2), Err(Error::Range(_))));

        let s = MatrixSeq::scalar(&[1.0, 0.0]).unwrap();
        assert_eq!(s.shifted_hankel(0).unwrap(), CMatrix::real_scalar(0.0));

        let s = MatrixSeq::scalar(&[2.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(s.hankel(1).unwrap(), CMatrix::diag_real(&[2.0, 2.0]));
    }

    #[test]
    fn block_vectors() {
        let s = MatrixSeq::scalar(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.y(1, 3).unwrap(), CMatrix::from_real_rows(&[&[2.0], &[3.0], &[4.0]]));
        assert_eq!(s.z(0, 1).unwrap(), CMatrix::from_real_rows(&[&[1.0, 2.0]]));
        assert!(s.y(2, 4).is_err());
    }

    #[test]
    fn reciprocal_examples() {
        let r = reciprocal(&MatrixSeq::scalar(&[1.0, 0.0, 1.0]).unwrap(), &tol()).unwrap();
        assert!(close(&scalars(&r), &[1.0, 0.0, -1.0]));

        let r = reciprocal(&MatrixSeq::scalar(&[2.0, 0.0, 2.0, 0.0]).unwrap(), &tol()).unwrap();
        assert!(close(&scalars(&r), &[0.5, 0.0, -0.5, 0.0]));

        let id = MatrixSeq::new(2, vec![CMatrix::identity(2), CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)]).unwrap();
        assert_eq!(reciprocal(&id, &tol()).unwrap(), id);
    }

    #[test]
    fn schur_transform_examples() {
        let t = tol();
        let s = MatrixSeq::scalar(&[1.0, 0.0, 1.0]).unwrap();
        assert!(close(&scalars(&schur_transform(&s, 1, &t).unwrap()), &[1.0]));
        let s = MatrixSeq::scalar(&[1.0, 0.0, 0.0]).unwrap();
        assert!(close(&scalars(&schur_transform(&s, 1, &t).unwrap()), &[0.0]));
        assert_eq!(schur_transform(&s, 0, &t).unwrap(), s);
        assert!(matches!(schur_transform(&s, 2, &t), Err(Error::Range(_))));
    }

    #[test]
    fn canonical_param_examples() {
        let t = tol();
        let p = canonical_param(&MatrixSeq::scalar(&[1.0, 0.0, 1.0]).unwrap(), &t).unwrap();
        assert!(close(&p.c.iter().map(|m| m.get(0, 0).re).collect::<Vec<_>>(), &[0.0]));
        assert!(close(&p.d.iter().map(|m| m.get(0, 0).re).collect::<Vec<_>>(), &[1.0, 1.0]));

        let p = canonical_param(&MatrixSeq::scalar(&[1.0, 0.0, 0.0]).unwrap(), &t).unwrap();
        assert!(close(&p.d.iter().map(|m| m.get(0, 0).re).collect::<Vec<_>>(), &[1.0, 0.0]));
        assert_eq!(p.c_at(1).unwrap().get(0, 0).re, 0.0);

        let p = canonical_param(&MatrixSeq::scalar(&[3.0]).unwrap(), &t).unwrap();
        assert!(p.c.is_empty());
        assert_eq!(p.d, vec![CMatrix::real_scalar(3.0)]);
    }

    #[test]
    fn canonical_param_matches_schur_heads_on_a_measure() {
        let t = tol();
        let s = MatrixSeq::scalar(&[1.0, 0.5, 1.5, 0.25, 2.0]).unwrap();
        let p = canonical_param(&s, &t).unwrap();
        let heads = schur_heads(&s, &t).unwrap();
        for (k, head) in heads.iter().enumerate() {
            assert!(matkit::approx_eq(&p.d[k], &head.s0, 1e-12), "D_{k}");
            if let Some(s1) = &head.s1 {
                assert!(matkit::approx_eq(p.c_at(k + 1).unwrap(), s1, 1e-12), "C_{}", k + 1);
            }
        }
    }

    #[test]
    fn hankel_definiteness() {
        let t = tol();
        let s = MatrixSeq::scalar(&[1.0, 0.0, 1.0]).unwrap();
        assert!(is_hnnd(&s, &t).unwrap() && is_hpd(&s, &t).unwrap());
        assert!(!is_hnnd(&MatrixSeq::scalar(&[1.0, 2.0, 1.0]).unwrap(), &t).unwrap());
        let z = MatrixSeq::scalar(&[0.0, 0.0, 0.0]).unwrap();
        assert!(is_hnnd(&z, &t).unwrap() && !is_hpd(&z, &t).unwrap());
    }

    #[test]
    fn extendability_examples() {
        let t = tol();
        let s = MatrixSeq::scalar(&[1.0, 0.0, 1.0]).unwrap();
        assert!(is_hnnd_extendable(&s, &t).unwrap());
        let ext = canonical_extension(&s, &t).unwrap();
        assert!(close(&scalars(&ext), &[1.0, 0.0, 1.0, 0.0, 1.0]));

        assert!(!is_hnnd_extendable(&MatrixSeq::scalar(&[0.0, 1.0]).unwrap(), &t).unwrap());
        assert!(is_hnnd_extendable(&MatrixSeq::scalar(&[1.0]).unwrap(), &t).unwrap());
        assert!(is_hnnd_extendable(&MatrixSeq::scalar(&[0.0]).unwrap(), &t).unwrap());
        assert!(!is_hnnd_extendable(&MatrixSeq::scalar(&[-1.0]).unwrap(), &t).unwrap());
        // Positive definite but not extendable: the kernel of H_1 must be
        // respected by s_3 and there is no room left.
        assert!(!is_hnnd_extendable(&MatrixSeq::scalar(&[1.0, 0.0, 0.0, 0.0, 1.0]).unwrap(), &t).unwrap());
        // Odd length with a non-Hermitian last term.
        let bad =
            MatrixSeq::new(1, vec![CMatrix::real_scalar(1.0), CMatrix::scalar(num_complex::Complex64::new(0.0, 1.0))])
                .unwrap();
        assert!(!is_hnnd_extendable(&bad, &t).unwrap());
    }

    #[test]
    fn first_term_domination() {
        let t = tol();
        let zero_one = MatrixSeq::new(2, vec![CMatrix::zeros(2, 2), CMatrix::identity(2)]).unwrap();
        assert!(!is_first_term_dominated(&zero_one, &t).unwrap());
        let d = CMatrix::diag_real(&[1.0, 0.0]);
        let same = MatrixSeq::new(2, vec![d.clone(), d]).unwrap();
        assert!(is_first_term_dominated(&same, &t).unwrap());
    }

    #[test]
    fn generator_is_deterministic_and_extendable() {
        let t = tol();
        let (a, ma) = random_extendable_seq(2, 5, 3, 11).unwrap();
        let (b, mb) = random_extendable_seq(2, 5, 3, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        assert!(is_hnnd_extendable(&a, &t).unwrap());
        assert!(is_first_term_dominated(&a, &t).unwrap());
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let s = MatrixSeq::scalar(&[1.0, 0.0, 1.0]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<MatrixSeq>(&text).unwrap(), s);
        let bad = r#"{"q":2,"items":[{"rows":1,"cols":1,"re":[1.0],"im":[0.0]}]}"#;
        assert!(serde_json::from_str::<MatrixSeq>(bad).is_err());
    }
}
