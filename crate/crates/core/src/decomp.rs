//! Jacobi decompositions for small dense complex matrices.
//!
//! nalgebra's implicit-shift SVD occasionally returns factors that do not
//! reproduce the input on rank-deficient Hankel matrices. Jacobi methods are
//! slower but accurate to working precision on every input at the sizes used
//! here, including tiny singular values.

use nalgebra::DMatrix;
use num_complex::Complex64;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U Σ V*` with `k = min(rows, cols)` singular values, sorted
/// in descending order. Columns of `U` belonging to zero singular values are
/// zero.
pub(crate) struct Svd {
    pub u: DMatrix<Complex64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<Complex64>,
}

/// Real rotation `(c, s)` that diagonalizes `[[a, g], [g, b]]` with `g > 0`.
fn rotation(a: f64, b: f64, g: f64) -> (f64, f64) {
    let tau = (b - a) / (2.0 * g);
    let t = if tau >= 0.0 { 1.0 / (tau + (1.0 + tau * tau).sqrt()) } else { -1.0 / (-tau + (1.0 + tau * tau).sqrt()) };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t)
}

/// Applies `col_p ← c col_p − s col_q`, `col_q ← s col_p + c col_q` after
/// multiplying column `q` by `phase`.
fn rotate_cols(m: &mut DMatrix<Complex64>, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, q)] * phase;
        m[(i, p)] = x * c - y * s;
        m[(i, q)] = x * s + y * c;
    }
}

fn one_sided(a: &DMatrix<Complex64>) -> Svd {
    let (rows, cols) = a.shape();
    let mut g = a.clone();
    let mut v = DMatrix::<Complex64>::identity(cols, cols);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = g.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = g.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = g.column(p).iter().zip(g.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let gn = gamma.norm();
                if gn == 0.0 || gn <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / gn).conj();
                let (c, s) = rotation(alpha, beta, gn);
                rotate_cols(&mut g, p, q, c, s, phase);
                rotate_cols(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..cols).map(|j| g.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let mut u = DMatrix::<Complex64>::zeros(rows, cols);
    let mut v_sorted = DMatrix::<Complex64>::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[src];
        if s > 0.0 {
            u.set_column(dst, &(g.column(src) / Complex64::new(s, 0.0)));
        }
        v_sorted.set_column(dst, &v.column(src));
    }
    sigma = order.iter().map(|&i| sigma[i]).collect();
    Svd { u, sigma, v: v_sorted }
}

pub(crate) fn svd(a: &DMatrix<Complex64>) -> Svd {
    if a.nrows() >= a.ncols() {
        one_sided(a)
    } else {
        let t = one_sided(&a.adjoint());
        let k = t.sigma.len();
        Svd { u: t.v.columns(0, k).into_owned(), sigma: t.sigma, v: t.u }
    }
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the upper triangle
/// and the real diagonal are read.
pub(crate) fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let n = h.nrows();
    let mut m = h.clone();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)].re.powi(2)).sum();
        if off <= (f64::EPSILON * f64::EPSILON) * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let hpq = m[(p, q)];
                let gn = hpq.norm();
                if gn == 0.0 {
                    continue;
                }
                let phase = (hpq / gn).conj();
                let (c, s) = rotation(m[(p, p)].re, m[(q, q)].re, gn);
                // Columns: H J with column q pre-multiplied by the phase.
                rotate_cols(&mut m, p, q, c, s, phase);
                // Rows: J* H, the adjoint of the column step.
                let pc = phase.conj();
                for j in 0..n {
                    let x = m[(p, j)];
                    let y = m[(q, j)] * pc;
                    m[(p, j)] = x * c - y * s;
                    m[(q, j)] = x * s + y * c;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}
