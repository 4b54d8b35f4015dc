//! Parametrization of all solutions of a truncated moment problem.
//!
//! For data `(s_0, …, s_κ)` with `κ = 2n` or `2n + 1`, every solution is
//! `F = S_{V^(κ)}(U f U*)` where `V^(κ)` is the resolvent product, `U` an
//! isometry onto the range of the last Schur complement `L_n` and `f` a
//! parameter of size `r = rank L_n`. When `L_n = 0` the solution is unique.
//! The parameter of a given solution is recovered through the forward
//! Schur-Nevanlinna chain instead of inverting the LFT.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herglotz::{Expr, HerglotzExpr};
use crate::matkit::{self, CMatrix, Tolerances};
use crate::measures::{self, MolecularMeasure};
use crate::seqkit::{self, MatrixSeq};
use crate::transforms::{self, Parity, ResolventPoly};
use crate::verify;

/// `L_n` counts as zero when `‖L_n‖ ≤ DETERMINACY_RTOL · (1 + ‖s_{2n}‖)`.
pub const DETERMINACY_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct Problem {
    seq: MatrixSeq,
    parity: Parity,
    n: usize,
    /// `L_n` from the canonical Hankel parametrization.
    schur_complement: CMatrix,
    /// `s_0^(n)` as used by the resolvent factors.
    last_head: CMatrix,
    /// Isometry onto `R(L_n)`, `q × r`.
    basis: CMatrix,
    resolvent: ResolventPoly,
    #[serde(skip)]
    tol: Tolerances,
}

/// Validates extendability and prepares the resolvent and parameter slot.
pub fn open_problem(seq: &MatrixSeq, tol: &Tolerances) -> Result<Problem> {
    tol.validate()?;
    if !seqkit::is_hnnd_extendable(seq, tol)? {
        return Err(Error::NotExtendable("the data admit no nonnegative Hermitian measure".into()));
    }
    open_problem_unchecked(seq, tol)
}

/// [`open_problem`] without the extendability test. Results are meaningful
/// only for extendable data; used to probe how solutions react to bad data.
pub fn open_problem_unchecked(seq: &MatrixSeq, tol: &Tolerances) -> Result<Problem> {
    tol.validate()?;
    let kappa = seq.kappa();
    let n = kappa / 2;
    let parity = Parity::of(kappa);
    let schur_complement = seqkit::schur_complement(seq, n, tol)?;
    let heads = seqkit::schur_heads(seq, tol)?;
    let last_head = heads[n].s0.clone();
    let scale = 1.0 + seq.items()[2 * n].op_norm();
    let q = seq.q();
    let basis = if last_head.op_norm() <= DETERMINACY_RTOL * scale {
        CMatrix::zeros(q, 0)
    } else {
        matkit::orthonormal_range_basis_with_floor(&last_head, tol, tol.rank_rtol * scale)?
    };
    let resolvent = transforms::resolvent_v(seq, kappa, tol)?;
    Ok(Problem { seq: seq.clone(), parity, n, schur_complement, last_head, basis, resolvent, tol: *tol })
}

impl Problem {
    pub fn seq(&self) -> &MatrixSeq {
        &self.seq
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.seq.q()
    }

    pub fn schur_complement(&self) -> &CMatrix {
        &self.schur_complement
    }

    pub fn last_head(&self) -> &CMatrix {
        &self.last_head
    }

    /// `U`, an isometry onto `R(L_n)`.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Size of the parameter, `rank L_n`.
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn is_determinate(&self) -> bool {
        self.rank() == 0
    }

    pub fn resolvent(&self) -> &ResolventPoly {
        &self.resolvent
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Which branch of the parametrization produced a solution.
    pub fn path(&self) -> &'static str {
        match (self.parity, self.is_determinate()) {
            (Parity::Even, false) => "even parametrization",
            (Parity::Odd, false) => "odd parametrization",
            (Parity::Even, true) => "even determinate",
            (Parity::Odd, true) => "odd determinate",
        }
    }
}

/// `F = S_{V^(κ)}(U f U*)`. For a determinate problem `f` must have size 0.
pub fn solve(p: &Problem, f: Expr) -> Result<Expr> {
    if f.q() != p.rank() {
        return Err(Error::Contract(format!("parameter has size {}, the problem needs size {}", f.q(), p.rank())));
    }
    let inner = HerglotzExpr::compressed(p.basis.clone(), f, &p.tol)?;
    Ok(std::sync::Arc::new(HerglotzExpr::LftByResolvent { v: p.resolvent.clone(), f: inner }))
}

/// The unique solution `v₁₂ v₂₂⁻¹` of a determinate problem.
pub fn determinate_solution(p: &Problem) -> Result<Expr> {
    if !p.is_determinate() {
        return Err(Error::Contract(format!("the problem is not determinate (rank L_n = {})", p.rank())));
    }
    Ok(std::sync::Arc::new(HerglotzExpr::LftByResolvent { v: p.resolvent.clone(), f: HerglotzExpr::zero(p.q()) }))
}

/// `f = U* F^(chain) U`, the parameter that [`solve`] maps to `F`.
pub fn recover_parameter(p: &Problem, f: Expr) -> Result<Expr> {
    if f.q() != p.q() {
        return Err(Error::Contract(format!("solution has size {}, the problem has size {}", f.q(), p.q())));
    }
    if p.is_determinate() {
        return Ok(HerglotzExpr::zero(0));
    }
    let chain = transforms::sn_chain_forward(&p.seq, f, p.n, p.parity, &p.tol)?;
    HerglotzExpr::congruence(p.basis.clone(), chain)
}

/// Relative size of the probes in [`recovery_sensitivity`]: above rounding,
/// below every rank cutoff, so the probes see what evaluation errors see.
const PROBE_SIZE: f64 = 1e-11;
const PROBES: usize = 4;

/// Gain of the recovery map at the values of `sol` on `grid`: the largest
/// change of the recovered parameter value per unit relative change of the
/// solution value, probed along a few fixed pseudo-random directions.
/// Recovery errors are roughly this times the relative evaluation error of
/// `sol`.
pub fn recovery_sensitivity(p: &Problem, sol: &HerglotzExpr, grid: &[num_complex::Complex64]) -> Result<f64> {
    if p.is_determinate() {
        return Ok(0.0);
    }
    let q = p.q();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let directions: Vec<CMatrix> = (0..PROBES)
        .map(|_| {
            let e = CMatrix::from_fn(q, q, |_, _| {
                num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            e.scale_real(1.0 / e.op_norm())
        })
        .collect();
    let mut worst: f64 = 0.0;
    for &z in grid {
        let x = sol.eval_with(z, &p.tol)?;
        let chain = |x: &CMatrix| transforms::sn_chain_forward_value(&p.seq, x, z, p.n, p.parity, &p.tol);
        let base = chain(&x)?;
        let h = PROBE_SIZE * x.op_norm().max(f64::MIN_POSITIVE);
        for e in &directions {
            let delta = &chain(&(&x + &e.scale_real(h)))? - &base;
            let gain = (&(&p.basis.adjoint() * &delta) * &p.basis).op_norm() / PROBE_SIZE;
            worst = worst.max(gain);
        }
    }
    Ok(worst)
}

/// Members of the parameter classes used for testing and the CLI.
#[derive(Clone, Debug, PartialEq)]
pub enum GalleryKind {
    Zero,
    /// `(c + i d) I` with `d ≥ 0`; even problems only.
    Const {
        c: f64,
        d: f64,
    },
    Stieltjes(MolecularMeasure),
}

impl GalleryKind {
    pub fn name(&self) -> &'static str {
        match self {
            GalleryKind::Zero => "zero",
            GalleryKind::Const { .. } => "constant",
            GalleryKind::Stieltjes(_) => "stieltjes",
        }
    }
}

/// Builds a gallery parameter of size `r` for a problem of the given parity.
pub fn gallery_parameter(kind: &GalleryKind, r: usize, parity: Parity, tol: &Tolerances) -> Result<Expr> {
    match kind {
        GalleryKind::Zero => Ok(HerglotzExpr::zero(r)),
        GalleryKind::Const { c, d } => {
            if parity == Parity::Odd {
                return Err(Error::Contract(
                    "constant parameters with nonzero value are not in the odd parameter class".into(),
                ));
            }
            HerglotzExpr::constant(CMatrix::scaled_identity(r, num_complex::Complex64::new(*c, *d)), tol)
        }
        GalleryKind::Stieltjes(sigma) => {
            if sigma.q() != r {
                return Err(Error::Shape(format!("measure has size {}, parameter needs {r}", sigma.q())));
            }
            Ok(HerglotzExpr::stieltjes(sigma.clone()))
        }
    }
}

/// Draws a gallery parameter of size `r` at random; `Zero` when `r = 0`.
pub fn random_gallery_kind<R: Rng>(r: usize, parity: Parity, rng: &mut R) -> Result<GalleryKind> {
    if r == 0 {
        return Ok(GalleryKind::Zero);
    }
    let choices = if parity == Parity::Even { 3 } else { 2 };
    Ok(match rng.gen_range(0..choices) {
        0 => GalleryKind::Zero,
        1 => GalleryKind::Stieltjes(measures::random_measure(r, 3, &measures::GeneratorOptions::default(), rng)?),
        _ => GalleryKind::Const { c: rng.gen_range(-1.5..1.5), d: rng.gen_range(0.0..1.5) },
    })
}

/// Pointwise bound for `recover(solve(f))` against `f`.
pub const ROUNDTRIP_ATOL: f64 = 1e-8;
/// Two distinct gallery parameters must give solutions at least this far
/// apart somewhere on the grid.
pub const SEPARATION_MIN: f64 = 1e-4;
/// Instances with a larger [`recovery_sensitivity`] are redrawn.
pub const MAX_SENSITIVITY: f64 = 1e4;
const MAX_DRAWS: usize = 1000;

/// Outcome of one generated solve/recover roundtrip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub seed: u64,
    /// Data sets drawn until an indeterminate, well-conditioned one appeared.
    pub draws: usize,
    pub seq: MatrixSeq,
    pub parity: Parity,
    pub rank: usize,
    pub sensitivity: f64,
    pub parameter: String,
    /// `max ‖recover(solve(f))(z) − f(z)‖` over [`verify::parameter_z_grid`].
    pub max_residual: f64,
    /// `max ‖solve(0)(z) − solve(g)(z)‖` for a Stieltjes parameter `g`.
    pub separation: f64,
    pub passed: bool,
    pub path: String,
}

/// Draws moment data of `atom_budget`-atomic measures and a gallery
/// parameter until the problem is indeterminate and recovery is no more
/// sensitive than [`MAX_SENSITIVITY`], then checks `recover ∘ solve` on a
/// random gallery parameter and injectivity against a second parameter.
/// Deterministic in `seed`.
pub fn roundtrip(q: usize, kappa: usize, atom_budget: usize, seed: u64, tol: &Tolerances) -> Result<RoundtripReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for draw in 1..=MAX_DRAWS {
        let (seq, _) = seqkit::random_extendable_seq(q, kappa, atom_budget, rng.gen())?;
        // Moments of a genuine measure can still fail the test when a rank
        // decision is ambiguous at the working tolerance; such draws are
        // skipped like ill-conditioned ones.
        let p = match open_problem(&seq, tol) {
            Err(Error::NotExtendable(_)) => continue,
            other => other?,
        };
        if p.is_determinate() {
            continue;
        }
        let kind = random_gallery_kind(p.rank(), p.parity(), &mut rng)?;
        let f = gallery_parameter(&kind, p.rank(), p.parity(), tol)?;
        let grid = verify::parameter_z_grid();
        let sol = solve(&p, f.clone())?;
        let sensitivity = recovery_sensitivity(&p, &sol, &grid)?;
        if sensitivity > MAX_SENSITIVITY {
            continue;
        }
        let back = recover_parameter(&p, sol)?;
        let max_residual = verify::compare(&back, &f, &grid, ROUNDTRIP_ATOL, tol)?.max_diff;
        let other = GalleryKind::Stieltjes(measures::random_measure(
            p.rank(),
            3,
            &measures::GeneratorOptions::default(),
            &mut rng,
        )?);
        let g = gallery_parameter(&other, p.rank(), p.parity(), tol)?;
        let separation =
            verify::compare(&*solve(&p, HerglotzExpr::zero(p.rank()))?, &*solve(&p, g)?, &grid, SEPARATION_MIN, tol)?
                .max_diff;
        return Ok(RoundtripReport {
            seed,
            draws: draw,
            parity: p.parity(),
            rank: p.rank(),
            sensitivity,
            parameter: kind.name().to_string(),
            max_residual,
            separation,
            passed: max_residual <= ROUNDTRIP_ATOL && separation >= SEPARATION_MIN,
            path: p.path().to_string(),
            seq,
        });
    }
    Err(Error::Domain(format!(
        "no indeterminate problem with recovery sensitivity ≤ {MAX_SENSITIVITY:e} in {MAX_DRAWS} draws \
         (q = {q}, κ = {kappa}, {atom_budget} atoms)"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn zs() -> Vec<Complex64> {
        vec![c(0.0, 1.0), c(1.5, 0.5), c(-3.0, 2.0), c(0.2, 10.0)]
    }

    fn at(f: &HerglotzExpr, z: Complex64) -> Complex64 {
        f.eval(z).unwrap().get(0, 0)
    }

    #[test]
    fn open_problem_examples() {
        let t = tol();
        let p = open_problem(&MatrixSeq::scalar(&[1.0, 0.0, 1.0]).unwrap(), &t).unwrap();
        assert_eq!((p.parity(), p.n(), p.rank()), (Parity::Even, 1, 1));
        assert!((p.schur_complement().get(0, 0).re - 1.0).abs() < 1e-15);

        let p = open_problem(&MatrixSeq::scalar(&[1.0, 0.0, 0.0]).unwrap(), &t).unwrap();
        assert!(p.is_determinate());

        assert!(matches!(open_problem(&MatrixSeq::scalar(&[0.0, 1.0]).unwrap(), &t), Err(Error::NotExtendable(_))));
    }

    #[test]
    fn solve_examples() {
        let t = tol();
        let p = open_problem(&MatrixSeq::scalar(&[1.0]).unwrap(), &t).unwrap();
        let f = solve(&p, HerglotzExpr::zero(1)).unwrap();
        let a = 0.8;
        let g = solve(&p, HerglotzExpr::constant(CMatrix::real_scalar(a), &t).unwrap()).unwrap();
        let b = -0.3;
        let pb = open_problem(&MatrixSeq::scalar(&[1.0, b]).unwrap(), &t).unwrap();
        let h = solve(&pb, HerglotzExpr::zero(1)).unwrap();
        for z in zs() {
            assert!((at(&f, z) + 1.0 / z).norm() < 1e-14);
            assert!((at(&g, z) + 1.0 / (z + a)).norm() < 1e-14);
            assert!((at(&h, z) + 1.0 / (z - b)).norm() < 1e-14);
        }
        assert!(matches!(solve(&p, HerglotzExpr::zero(2)), Err(Error::Contract(_))));
    }

    #[test]
    fn determinate_examples() {
        let t = tol();
        let p = open_problem(&MatrixSeq::scalar(&[1.0, 0.0, 0.0]).unwrap(), &t).unwrap();
        let f = determinate_solution(&p).unwrap();
        let p1 = open_problem(&MatrixSeq::scalar(&[1.0, 1.0, 1.0]).unwrap(), &t).unwrap();
        let g = determinate_solution(&p1).unwrap();
        for z in zs() {
            assert!((at(&f, z) + 1.0 / z).norm() < 1e-14);
            assert!((at(&g, z) + 1.0 / (z - 1.0)).norm() < 1e-14);
        }
        let p2 = open_problem(&MatrixSeq::scalar(&[2.0, 0.0, 2.0, 0.0]).unwrap(), &t).unwrap();
        assert!(matches!(determinate_solution(&p2), Err(Error::Contract(_))));
    }

    #[test]
    fn recover_examples() {
        let t = tol();
        let p = open_problem(&MatrixSeq::scalar(&[1.0]).unwrap(), &t).unwrap();
        let d0 = HerglotzExpr::stieltjes(MolecularMeasure::scalar(&[(0.0, 1.0)]).unwrap());
        let f = recover_parameter(&p, d0).unwrap();
        let b = 0.9;
        let pb = open_problem(&MatrixSeq::scalar(&[1.0, b]).unwrap(), &t).unwrap();
        let db = HerglotzExpr::stieltjes(MolecularMeasure::scalar(&[(b, 1.0)]).unwrap());
        let g = recover_parameter(&pb, db).unwrap();
        for z in zs() {
            assert!(at(&f, z).norm() < 1e-14);
            assert!(at(&g, z).norm() < 1e-14);
        }

        let sym = MolecularMeasure::scalar(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let p = open_problem(&sym.moments_prefix(3), &t).unwrap();
        assert_eq!(p.rank(), 1);
        let sol = HerglotzExpr::stieltjes(sym);
        let param = recover_parameter(&p, sol.clone()).unwrap();
        let again = solve(&p, param).unwrap();
        for z in zs() {
            assert!((at(&again, z) - at(&sol, z)).norm() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_is_deterministic_and_passes() {
        let t = tol();
        let a = roundtrip(2, 4, 5, 1, &t).unwrap();
        assert!(a.passed, "{a:?}");
        assert_eq!(a, roundtrip(2, 4, 5, 1, &t).unwrap());
        assert!(roundtrip(1, 8, 1, 3, &t).is_err());
    }

    #[test]
    fn gallery_rules() {
        let t = tol();
        assert!(gallery_parameter(&GalleryKind::Const { c: 1.0, d: 0.5 }, 2, Parity::Odd, &t).is_err());
        let f = gallery_parameter(&GalleryKind::Const { c: 1.0, d: 0.5 }, 2, Parity::Even, &t).unwrap();
        assert_eq!(f.q(), 2);
    }
}
