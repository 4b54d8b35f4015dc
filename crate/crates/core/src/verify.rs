//! Verification through asymptotic expansions.
//!
//! A function `F` solves the moment problem for `(s_0, …, s_κ)` exactly when
//! the residual
//!
//! ```text
//! F⟨k⟩(z) = z^{k+1} F(z) + Σ_{j=0}^{k+1} z^{k+1−j} s_{j−1},   s_{−1} = 0,
//! ```
//!
//! tends to zero in every sector `δ ≤ arg z ≤ π − δ`. [`hn_check`] samples
//! that residual along rays, [`extract_moments`] recovers the expansion
//! coefficients directly, and [`compare`] measures pointwise agreement.
//!
//! In double precision the residual can only be resolved while
//! `|z|^{k+1}‖F(z)‖` stays within about 13 digits of it, so each sample
//! carries a rounding floor and verdicts use only resolved samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::herglotz::HerglotzExpr;
use crate::matkit::{CMatrix, Tolerances};
use crate::measures::require_upper;
use crate::seqkit::MatrixSeq;

/// `F⟨k⟩(z)` for `−1 ≤ k ≤ κ`, with `s_{−1}` given separately.
pub fn hn_transform(
    f: &HerglotzExpr,
    s_minus1: Option<&CMatrix>,
    seq: &MatrixSeq,
    k: i64,
    z: Complex64,
    tol: &Tolerances,
) -> Result<CMatrix> {
    require_upper(z)?;
    let fz = f.eval_with(z, tol)?;
    residual_from_value(&fz, s_minus1, seq, k, z)
}

fn residual_from_value(
    fz: &CMatrix,
    s_minus1: Option<&CMatrix>,
    seq: &MatrixSeq,
    k: i64,
    z: Complex64,
) -> Result<CMatrix> {
    if k < -1 || k > seq.kappa() as i64 {
        return Err(Error::Range(format!("residual order {k} outside -1..={}", seq.kappa())));
    }
    if fz.shape() != (seq.q(), seq.q()) {
        return Err(Error::Shape("function and data differ in size".into()));
    }
    let w = z.inv();
    // Horner in 1/z: s_0/z + s_1/z² + … + s_k/z^{k+1}.
    let mut tail = CMatrix::zeros(seq.q(), seq.q());
    for j in (0..=k).rev() {
        tail = (&tail + &seq.items()[j as usize]).scale(w);
    }
    let mut inner = fz + &tail;
    if let Some(s) = s_minus1 {
        inner = &inner + s;
    }
    Ok(inner.scale(z.powi((k + 1) as i32)))
}

/// Bound on the relative error of one function evaluation.
pub const EVAL_REL_ERROR: f64 = 2.0 * f64::EPSILON;

/// Decay classification of a residual curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Decaying,
    Stagnant,
    Diverging,
}

#[derive(Clone, Debug, Serialize)]
pub struct Thresholds {
    /// Log-log slope at or below which a curve counts as decaying.
    pub decay_slope: f64,
    /// Log-log slope at or above which a curve counts as diverging.
    pub diverge_slope: f64,
    /// A sample is resolved when its residual exceeds this multiple of its
    /// rounding floor.
    pub noise_factor: f64,
    pub eval_rel_error: f64,
    /// Number of trailing resolved samples used for the slope.
    pub slope_points: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            decay_slope: -0.3,
            diverge_slope: 0.5,
            noise_factor: 10.0,
            eval_rel_error: EVAL_REL_ERROR,
            slope_points: 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RayCurve {
    pub theta: f64,
    pub residuals: Vec<f64>,
    pub floors: Vec<f64>,
    pub resolved: Vec<bool>,
    /// `None` when fewer than two samples are resolved.
    pub slope: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderReport {
    pub k: usize,
    pub rays: Vec<RayCurve>,
    /// Worst verdict over the rays.
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub kappa: usize,
    pub rays: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub thresholds: Thresholds,
    pub orders: Vec<OrderReport>,
    /// Decaying only if every order is decaying on every ray.
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<Extraction>,
}

impl AsymptoticReport {
    pub fn verdict_at(&self, k: usize) -> Option<Verdict> {
        self.orders.iter().find(|o| o.k == k).map(|o| o.verdict)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Decaying
    }
}

/// The three rays `π/6`, `π/2`, `5π/6`.
pub fn default_rays() -> Vec<f64> {
    vec![PI / 6.0, PI / 2.0, 5.0 * PI / 6.0]
}

/// Growth radius of the data, `max_j (‖s_j‖/‖s_0‖)^{1/j}`; at least 1.
pub fn data_radius(seq: &MatrixSeq) -> f64 {
    let s0 = seq.items()[0].op_norm();
    if s0 == 0.0 {
        return 1.0;
    }
    seq.items().iter().enumerate().skip(1).map(|(j, s)| (s.op_norm() / s0).powf(1.0 / j as f64)).fold(1.0, f64::max)
}

/// `2ρ · 10^{i/4}`, `i = 0..=20`, with `ρ` from [`data_radius`].
pub fn default_r_grid(seq: &MatrixSeq) -> Vec<f64> {
    let base = 2.0 * data_radius(seq);
    (0..=20).map(|i| base * 10f64.powf(i as f64 / 4.0)).collect()
}

fn classify(slope: f64, th: &Thresholds) -> Verdict {
    if slope <= th.decay_slope {
        Verdict::Decaying
    } else if slope >= th.diverge_slope {
        Verdict::Diverging
    } else {
        Verdict::Stagnant
    }
}

fn worst(a: Verdict, b: Verdict) -> Verdict {
    let rank = |v: Verdict| match v {
        Verdict::Decaying => 0,
        Verdict::Stagnant => 1,
        Verdict::Diverging => 2,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

fn fit_slope(r: &[f64], v: &[f64]) -> f64 {
    let x: Vec<f64> = r.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Samples `‖F⟨k⟩(r e^{iθ})‖` for `k = 0..=κ` and classifies its decay.
///
/// Only samples above `noise_factor` times their rounding floor count. A
/// curve without two resolved samples is reported as decaying, since it is
/// indistinguishable from zero at working precision. Otherwise the verdict
/// follows the log-log slope of the last `slope_points` resolved samples.
pub fn hn_check(
    f: &HerglotzExpr,
    seq: &MatrixSeq,
    rays: &[f64],
    r_grid: &[f64],
    thresholds: &Thresholds,
    tol: &Tolerances,
) -> Result<AsymptoticReport> {
    if rays.iter().any(|&t| !(t > 0.0 && t < PI)) {
        return Err(Error::Domain("rays must lie strictly between 0 and π".into()));
    }
    if r_grid.len() < 2 || r_grid.windows(2).any(|w| !(w[1] > w[0])) || r_grid[0] <= 0.0 {
        return Err(Error::Domain("r grid must be positive and strictly increasing".into()));
    }
    let kappa = seq.kappa();
    let norms: Vec<f64> = seq.items().iter().map(CMatrix::op_norm).collect();
    let mut curves: Vec<Vec<RayCurve>> = (0..=kappa).map(|_| Vec::new()).collect();
    for &theta in rays {
        let mut per_k: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); kappa + 1];
        for &r in r_grid {
            let z = Complex64::from_polar(r, theta);
            let fz = f.eval_with(z, tol)?;
            let fnorm = fz.op_norm();
            for (k, slot) in per_k.iter_mut().enumerate() {
                let res = residual_from_value(&fz, None, seq, k as i64, z)?.op_norm();
                let data: f64 = (0..=k).map(|j| r.powi((k - j) as i32) * norms[j]).sum();
                let floor = thresholds.eval_rel_error * r.powi(k as i32 + 1) * fnorm + f64::EPSILON * data;
                slot.0.push(res);
                slot.1.push(floor);
            }
        }
        for (k, (residuals, floors)) in per_k.into_iter().enumerate() {
            let resolved: Vec<bool> =
                residuals.iter().zip(&floors).map(|(res, fl)| *res > thresholds.noise_factor * fl).collect();
            let idx: Vec<usize> = (0..residuals.len()).filter(|&i| resolved[i]).collect();
            let (slope, verdict) = if idx.len() < 2 {
                (None, Verdict::Decaying)
            } else {
                let tail = &idx[idx.len().saturating_sub(thresholds.slope_points)..];
                let rs: Vec<f64> = tail.iter().map(|&i| r_grid[i]).collect();
                let vs: Vec<f64> = tail.iter().map(|&i| residuals[i]).collect();
                let s = fit_slope(&rs, &vs);
                (Some(s), classify(s, thresholds))
            };
            curves[k].push(RayCurve { theta, residuals, floors, resolved, slope, verdict });
        }
    }
    let orders: Vec<OrderReport> = curves
        .into_iter()
        .enumerate()
        .map(|(k, rays)| {
            let verdict = rays.iter().fold(Verdict::Decaying, |acc, c| worst(acc, c.verdict));
            OrderReport { k, rays, verdict }
        })
        .collect();
    let verdict = orders.iter().fold(Verdict::Decaying, |acc, o| worst(acc, o.verdict));
    Ok(AsymptoticReport {
        kappa,
        rays: rays.to_vec(),
        r_grid: r_grid.to_vec(),
        thresholds: thresholds.clone(),
        orders,
        verdict,
        moments: None,
    })
}

/// Settings for [`extract_moments`].
#[derive(Clone, Debug, Serialize)]
pub struct ExtractOptions {
    /// Sample points per circle; must exceed `m + 2` comfortably.
    pub samples: usize,
    /// Circle radii, strictly increasing. Consecutive radii are compared, so
    /// a ratio near 2 works best.
    pub radii: Vec<f64>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { samples: 64, radii: (0..14).map(|i| 0.5 * 2f64.powi(i)).collect() }
    }
}

/// Expansion coefficients `F(z) ≈ γ − Σ_j s_j z^{−(j+1)}` with per-term
/// residuals.
#[derive(Clone, Debug, Serialize)]
pub struct Extraction {
    pub moments: MatrixSeq,
    /// Constant term `γ = lim F(iy)`.
    pub gamma: CMatrix,
    /// `‖ŝ_j(R) − ŝ_j(2R)‖` for the chosen radius `R`.
    pub residuals: Vec<f64>,
    pub radius: f64,
}

impl Extraction {
    /// Largest `‖ŝ_j − s_j‖ / (1 + ‖s_j‖)` against reference data.
    pub fn relative_error(&self, reference: &MatrixSeq) -> f64 {
        self.moments
            .items()
            .iter()
            .zip(reference.items())
            .map(|(a, b)| (a - b).op_norm() / (1.0 + b.op_norm()))
            .fold(0.0, f64::max)
    }
}

struct RadiusFit {
    gamma: CMatrix,
    moments: Vec<CMatrix>,
    /// Largest coefficient of `(z/R)^i`, `i = 2..=4`, relative to `max ‖F‖`
    /// on the circle. Zero up to aliasing outside all singularities; of
    /// order one when a pole lies outside the circle.
    inner: f64,
    /// Largest `‖F‖` on the circle; sets the rounding level of the sums.
    fmax: f64,
}

impl RadiusFit {
    /// Rounding allowance for `ŝ_j`, `j ≥ −1` (with `j = −1` for `γ`).
    fn noise(&self, radius: f64, j: i32) -> f64 {
        NOISE_FACTOR * f64::EPSILON * self.fmax * radius.powi(j + 1)
    }
}

/// Fits with a larger relative `inner` part describe another annulus.
const MAX_INNER: f64 = 1e-8;

/// Fits agree when they differ by less than this relative amount plus the
/// rounding allowance.
const AGREE_RTOL: f64 = 1e-7;
const NOISE_FACTOR: f64 = 10.0;

/// Laurent coefficients from a full circle of radius `R` by the discrete
/// Fourier sum `b_i = N⁻¹ Σ_l F(z_l) e^{i·iθ_l}`, so that
/// `F(z) = Σ_i b_i (R/z)^i` and `s_j = −b_{j+1} R^{j+1}`.
fn fit_at_radius(f: &HerglotzExpr, m: usize, radius: f64, samples: usize, tol: &Tolerances) -> Result<RadiusFit> {
    let q = f.q();
    let mut coef = vec![CMatrix::zeros(q, q); m + 2];
    let mut positive = vec![CMatrix::zeros(q, q); 3];
    let mut fmax: f64 = 0.0;
    for l in 0..samples {
        let theta = 2.0 * PI * (l as f64 + 0.5) / samples as f64;
        let fz = f.eval_continued(Complex64::from_polar(radius, theta), tol)?;
        fmax = fmax.max(fz.op_norm());
        for (i, c) in coef.iter_mut().enumerate() {
            *c = &*c + &fz.scale(Complex64::from_polar(1.0, i as f64 * theta));
        }
        for (i, c) in positive.iter_mut().enumerate() {
            *c = &*c + &fz.scale(Complex64::from_polar(1.0, -((i + 2) as f64) * theta));
        }
    }
    let norm = Complex64::new(1.0 / samples as f64, 0.0);
    let inner = positive.iter().map(|c| c.op_norm() / samples as f64).fold(0.0, f64::max) / fmax.max(f64::MIN_POSITIVE);
    let gamma = coef[0].scale(norm);
    let moments = (0..=m).map(|j| coef[j + 1].scale(norm * -radius.powi(j as i32 + 1))).collect();
    Ok(RadiusFit { gamma, moments, inner, fmax })
}

/// Recovers `s_0, …, s_m` from the expansion of `F` at infinity.
///
/// The coefficients are read off by Fourier sums on full circles of radius
/// `R` from `opts.radii`, evaluating the formula of `F` continued to the
/// lower half-plane. Outside the singularities the sums are exact up to
/// aliasing of order `(T/R)^samples`, where `T` bounds the poles. Circles
/// with a pole outside are recognized by their positive-power coefficients
/// and skipped. Poles of tiny residue are not; they are found as jumps
/// between consecutive radii beyond the rounding allowance, and the first
/// agreeing pair after the last jump wins. The per-term discrepancy is
/// reported as the residual.
pub fn extract_moments(f: &HerglotzExpr, m: usize, opts: &ExtractOptions, tol: &Tolerances) -> Result<Extraction> {
    let radii = &opts.radii;
    if radii.len() < 2 || radii[0] <= 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("extraction needs at least two positive, increasing radii".into()));
    }
    if opts.samples < 2 * (m + 2) {
        return Err(Error::Domain(format!("{} samples cannot resolve {} coefficients", opts.samples, m + 2)));
    }
    let q = f.q();
    let fits: Vec<Option<RadiusFit>> = radii
        .iter()
        .map(|&r| match fit_at_radius(f, m, r, opts.samples, tol) {
            Ok(fit) if fit.inner <= MAX_INNER => Ok(Some(fit)),
            Ok(_) => Ok(None),
            Err(Error::SingularDenominator { .. }) | Err(Error::NumericFailure(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    // Every annulus between singularities has its own expansion, and
    // crossing a singularity shows up as a jump between consecutive radii
    // beyond rounding. The expansion at infinity starts after the last jump.
    let mut pairs: Vec<(usize, bool, f64, Vec<f64>)> = Vec::new();
    for i in 0..radii.len() - 1 {
        let (Some(a), Some(b)) = (&fits[i], &fits[i + 1]) else {
            continue;
        };
        let rb = radii[i + 1];
        let diffs: Vec<f64> = (0..=m).map(|j| (&a.moments[j] - &b.moments[j]).op_norm()).collect();
        let dg = (&a.gamma - &b.gamma).op_norm();
        if !dg.is_finite() || diffs.iter().any(|d| !d.is_finite()) {
            continue;
        }
        let agree = dg <= AGREE_RTOL * (1.0 + a.gamma.op_norm()) + b.noise(rb, -1)
            && diffs
                .iter()
                .enumerate()
                .all(|(j, d)| *d <= AGREE_RTOL * (1.0 + a.moments[j].op_norm()) + b.noise(rb, j as i32));
        let score = diffs
            .iter()
            .enumerate()
            .map(|(j, d)| d / (1.0 + a.moments[j].op_norm()))
            .fold(dg / (1.0 + a.gamma.op_norm()), f64::max);
        pairs.push((i, agree, score, diffs));
    }
    let start = pairs.iter().rposition(|p| !p.1).map_or(0, |k| k + 1);
    let best = if start < pairs.len() {
        Some(pairs.swap_remove(start))
    } else {
        pairs.into_iter().min_by(|a, b| a.2.total_cmp(&b.2))
    }
    .map(|(i, _, s, d)| (i, s, d));
    let (i, _, residuals) =
        best.ok_or_else(|| Error::NumericFailure("no pair of radii produced a finite expansion fit".into()))?;
    let fit = fits[i].as_ref().expect("chosen fit exists");
    Ok(Extraction {
        moments: MatrixSeq::new(q, fit.moments.clone())?,
        gamma: fit.gamma.clone(),
        residuals,
        radius: radii[i],
    })
}

/// Pointwise agreement of two functions.
#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub max_diff: f64,
    pub worst_re: f64,
    pub worst_im: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn compare(
    f: &HerglotzExpr,
    g: &HerglotzExpr,
    z_grid: &[Complex64],
    atol: f64,
    tol: &Tolerances,
) -> Result<CompareReport> {
    if f.q() != g.q() {
        return Err(Error::Shape("functions differ in size".into()));
    }
    let mut max_diff = 0.0;
    let mut worst = Complex64::new(0.0, 0.0);
    for &z in z_grid {
        let d = (&f.eval_with(z, tol)? - &g.eval_with(z, tol)?).op_norm();
        if d > max_diff || z_grid.len() == 1 {
            max_diff = d;
            worst = z;
        }
    }
    Ok(CompareReport { max_diff, worst_re: worst.re, worst_im: worst.im, tol: atol, passed: max_diff <= atol })
}

/// `|z|` geometric on `[r_min, r_max]` with `radii` values, times the angles.
pub fn z_grid(r_min: f64, r_max: f64, radii: usize, angles: &[f64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(radii * angles.len());
    for i in 0..radii {
        let t = if radii > 1 { i as f64 / (radii - 1) as f64 } else { 0.0 };
        let r = r_min * (r_max / r_min).powf(t);
        for &a in angles {
            out.push(Complex64::from_polar(r, a));
        }
    }
    out
}

/// Twelve points: four radii in `[0.5, 50]` on the three default rays.
pub fn default_z_grid() -> Vec<Complex64> {
    z_grid(0.5, 50.0, 4, &default_rays())
}

/// Twelve points with `|z| ∈ [0.25, 2]` on the default rays. A solution
/// carries its parameter at relative order `|z|^{−(κ+1)}`, so parameters are
/// compared inside the data scale where that term is above rounding.
pub fn parameter_z_grid() -> Vec<Complex64> {
    z_grid(0.25, 2.0, 4, &default_rays())
}
