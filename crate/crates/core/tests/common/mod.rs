#![allow(dead_code)]

use momentforge::herglotz::{Expr, HerglotzExpr};
use momentforge::measures::{self, Atom, MolecularMeasure};
use momentforge::{CMatrix, Tolerances};
use num_complex::Complex64;
use rand::Rng;

pub fn tol() -> Tolerances {
    Tolerances::default()
}

pub fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// `rows × cols` matrix of rank `min(rank, rows, cols)` built as a product of
/// two random factors.
pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rank: usize, rng: &mut R) -> CMatrix {
    if rank == 0 {
        return CMatrix::zeros(rows, cols);
    }
    let a = CMatrix::from_fn(rows, rank, |_, _| random_complex(rng));
    let b = CMatrix::from_fn(rank, cols, |_, _| random_complex(rng));
    &a * &b
}

pub fn random_hermitian<R: Rng>(q: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(q, q, |_, _| random_complex(rng));
    (&g + &g.adjoint()).scale_real(0.5)
}

/// PSD matrix of the given rank; rank 0 gives the zero matrix.
pub fn random_psd<R: Rng>(q: usize, rank: usize, rng: &mut R) -> CMatrix {
    if rank == 0 {
        CMatrix::zeros(q, q)
    } else {
        measures::random_psd(q, rank, rng)
    }
}

/// Measure with exactly `count` atoms spread over `[−2, 2]` and positive
/// definite masses.
pub fn full_measure<R: Rng>(q: usize, count: usize, rng: &mut R) -> MolecularMeasure {
    let atoms = (0..count)
        .map(|i| {
            let base = if count == 1 { 0.0 } else { -2.0 + 4.0 * i as f64 / (count - 1) as f64 };
            let t = base + rng.gen_range(-0.1..0.1);
            let mass = &measures::random_psd(q, q, rng) + &CMatrix::identity(q).scale_real(0.1);
            Atom { t, mass }
        })
        .collect();
    MolecularMeasure::new(q, atoms, &tol()).expect("valid measure")
}

/// `max_z ‖f(z) − g(z)‖`.
pub fn max_diff(f: &HerglotzExpr, g: &HerglotzExpr, grid: &[Complex64]) -> f64 {
    grid.iter().map(|&z| (&f.eval(z).unwrap() - &g.eval(z).unwrap()).op_norm()).fold(0.0, f64::max)
}

pub fn stieltjes(sigma: &MolecularMeasure) -> Expr {
    HerglotzExpr::stieltjes(sigma.clone())
}

/// Property-test settings with a fixed RNG seed, so every run samples the
/// same cases and a failure always reproduces.
pub fn prop_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x6d66),
        failure_persistence: None,
        ..proptest::test_runner::Config::default()
    }
}
