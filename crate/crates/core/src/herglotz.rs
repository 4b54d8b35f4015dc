//! Matrix functions on the open upper half-plane as evaluable expression
//! trees.
//!
//! Leaves are explicit Herglotz-Nevanlinna functions (constants, linear
//! terms, Nevanlinna triples, Stieltjes transforms). Inner nodes compose
//! them: sums, congruences, `−F⁺`, the two Schur transforms, linear
//! fractional transformations by a resolvent polynomial and compressions
//! `U f U*`. Trees share subexpressions through [`Arc`], and [`eval`]
//! memoizes each node once per call.
//!
//! Class membership is never enforced beyond the hard invariants checked by
//! the constructors; [`class_diagnostics`] produces numerical evidence.
//!
//! [`eval`]: HerglotzExpr::eval

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{self, CMatrix, Tolerances};
use crate::measures::{require_upper, MolecularMeasure};
use crate::transforms::{self, ResolventPoly};
use crate::verify;

pub type Expr = Arc<HerglotzExpr>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum HerglotzExpr {
    Zero {
        q: usize,
    },
    Const {
        #[serde(rename = "A")]
        a: CMatrix,
    },
    Linear {
        beta: CMatrix,
    },
    /// `α + zβ + Σ (1 + tz)/(t − z) ν_k`.
    NevTriple {
        alpha: CMatrix,
        beta: CMatrix,
        nu: MolecularMeasure,
    },
    StieltjesOf {
        sigma: MolecularMeasure,
    },
    /// `γ + Σ (|t| + 1)/(t − z) μ_k`.
    GammaMu {
        gamma: CMatrix,
        mu: MolecularMeasure,
    },
    Sum {
        terms: Vec<Expr>,
    },
    /// `A* F A`.
    Congruence {
        #[serde(rename = "A")]
        a: CMatrix,
        #[serde(rename = "F")]
        f: Expr,
    },
    /// `−F⁺`.
    NegPinv {
        #[serde(rename = "F")]
        f: Expr,
    },
    /// `−A(zI + F⁺A) + B`.
    SchurPlus {
        #[serde(rename = "A")]
        a: CMatrix,
        #[serde(rename = "B")]
        b: CMatrix,
        #[serde(rename = "F")]
        f: Expr,
    },
    /// `−A(zI + A⁺(F − B))⁺`; with `certified` the inner matrix is inverted
    /// exactly and a singular value is an error.
    SchurMinus {
        #[serde(rename = "A")]
        a: CMatrix,
        #[serde(rename = "B")]
        b: CMatrix,
        #[serde(rename = "F")]
        f: Expr,
        #[serde(default)]
        certified: bool,
    },
    #[serde(rename = "LFTByResolvent")]
    LftByResolvent {
        #[serde(rename = "V")]
        v: ResolventPoly,
        #[serde(rename = "F")]
        f: Expr,
    },
    /// `U f U*`.
    Compressed {
        #[serde(rename = "U")]
        u: CMatrix,
        f: Expr,
    },
}

fn require_size(what: &str, m: &CMatrix, q: usize) -> Result<()> {
    if m.shape() == (q, q) {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what} is {}x{}, expected {q}x{q}", m.rows(), m.cols())))
    }
}

fn require_square(what: &str, m: &CMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what} must be square")))
    }
}

impl HerglotzExpr {
    pub fn zero(q: usize) -> Expr {
        Arc::new(HerglotzExpr::Zero { q })
    }

    /// Constant `A` with `Im A ≽ 0`.
    pub fn constant(a: CMatrix, tol: &Tolerances) -> Result<Expr> {
        require_square("constant", &a)?;
        if !matkit::is_psd(&a.im_part(), tol)? {
            return Err(Error::Domain("constant needs Im A ≽ 0".into()));
        }
        Ok(Arc::new(HerglotzExpr::Const { a }))
    }

    /// `z ↦ zβ` with `β ≽ 0`.
    pub fn linear(beta: CMatrix, tol: &Tolerances) -> Result<Expr> {
        if !matkit::is_psd(&beta, tol)? {
            return Err(Error::Domain("linear term needs β ≽ 0".into()));
        }
        Ok(Arc::new(HerglotzExpr::Linear { beta }))
    }

    pub fn nev_triple(alpha: CMatrix, beta: CMatrix, nu: MolecularMeasure, tol: &Tolerances) -> Result<Expr> {
        require_square("α", &alpha)?;
        let q = alpha.rows();
        require_size("β", &beta, q)?;
        if nu.q() != q {
            return Err(Error::Shape("ν has the wrong size".into()));
        }
        if !matkit::is_hermitian(&alpha, tol)? {
            return Err(Error::Domain("α must be Hermitian".into()));
        }
        if !matkit::is_psd(&beta, tol)? {
            return Err(Error::Domain("β must be PSD".into()));
        }
        Ok(Arc::new(HerglotzExpr::NevTriple { alpha, beta, nu }))
    }

    pub fn stieltjes(sigma: MolecularMeasure) -> Expr {
        Arc::new(HerglotzExpr::StieltjesOf { sigma })
    }

    pub fn gamma_mu(gamma: CMatrix, mu: MolecularMeasure, tol: &Tolerances) -> Result<Expr> {
        require_size("γ", &gamma, mu.q())?;
        if !matkit::is_hermitian(&gamma, tol)? {
            return Err(Error::Domain("γ must be Hermitian".into()));
        }
        Ok(Arc::new(HerglotzExpr::GammaMu { gamma, mu }))
    }

    pub fn sum(terms: Vec<Expr>) -> Result<Expr> {
        let q = terms.first().map(|t| t.q()).ok_or_else(|| Error::Shape("empty sum".into()))?;
        if terms.iter().any(|t| t.q() != q) {
            return Err(Error::Shape("sum terms differ in size".into()));
        }
        Ok(Arc::new(HerglotzExpr::Sum { terms }))
    }

    pub fn congruence(a: CMatrix, f: Expr) -> Result<Expr> {
        if a.rows() != f.q() {
            return Err(Error::Shape(format!("congruence factor has {} rows, function has size {}", a.rows(), f.q())));
        }
        Ok(Arc::new(HerglotzExpr::Congruence { a, f }))
    }

    pub fn neg_pinv(f: Expr) -> Expr {
        Arc::new(HerglotzExpr::NegPinv { f })
    }

    /// `U f U*` for an isometry `U` (`U*U = I`).
    pub fn compressed(u: CMatrix, f: Expr, tol: &Tolerances) -> Result<Expr> {
        if u.cols() != f.q() {
            return Err(Error::Shape(format!("isometry has {} columns, parameter has size {}", u.cols(), f.q())));
        }
        let gram = &u.adjoint() * &u;
        if !matkit::approx_eq(&gram, &CMatrix::identity(u.cols()), tol.eq_atol) {
            return Err(Error::Domain("compression needs U*U = I".into()));
        }
        Ok(Arc::new(HerglotzExpr::Compressed { u, f }))
    }

    /// Output size.
    pub fn q(&self) -> usize {
        match self {
            HerglotzExpr::Zero { q } => *q,
            HerglotzExpr::Const { a } => a.rows(),
            HerglotzExpr::Linear { beta } => beta.rows(),
            HerglotzExpr::NevTriple { alpha, .. } => alpha.rows(),
            HerglotzExpr::StieltjesOf { sigma } => sigma.q(),
            HerglotzExpr::GammaMu { gamma, .. } => gamma.rows(),
            HerglotzExpr::Sum { terms } => terms[0].q(),
            HerglotzExpr::Congruence { a, .. } => a.cols(),
            HerglotzExpr::NegPinv { f } => f.q(),
            HerglotzExpr::SchurPlus { a, .. } | HerglotzExpr::SchurMinus { a, .. } => a.rows(),
            HerglotzExpr::LftByResolvent { v, .. } => v.q(),
            HerglotzExpr::Compressed { u, .. } => u.rows(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HerglotzExpr::Zero { .. } => "Zero",
            HerglotzExpr::Const { .. } => "Const",
            HerglotzExpr::Linear { .. } => "Linear",
            HerglotzExpr::NevTriple { .. } => "NevTriple",
            HerglotzExpr::StieltjesOf { .. } => "StieltjesOf",
            HerglotzExpr::GammaMu { .. } => "GammaMu",
            HerglotzExpr::Sum { .. } => "Sum",
            HerglotzExpr::Congruence { .. } => "Congruence",
            HerglotzExpr::NegPinv { .. } => "NegPinv",
            HerglotzExpr::SchurPlus { .. } => "SchurPlus",
            HerglotzExpr::SchurMinus { .. } => "SchurMinus",
            HerglotzExpr::LftByResolvent { .. } => "LFTByResolvent",
            HerglotzExpr::Compressed { .. } => "Compressed",
        }
    }

    /// Re-checks every constructor invariant in the tree. Deserialized
    /// expressions should pass through here before use.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        match self {
            HerglotzExpr::Zero { .. } | HerglotzExpr::StieltjesOf { .. } => Ok(()),
            HerglotzExpr::Const { a } => HerglotzExpr::constant(a.clone(), tol).map(drop),
            HerglotzExpr::Linear { beta } => HerglotzExpr::linear(beta.clone(), tol).map(drop),
            HerglotzExpr::NevTriple { alpha, beta, nu } => {
                HerglotzExpr::nev_triple(alpha.clone(), beta.clone(), nu.clone(), tol).map(drop)
            }
            HerglotzExpr::GammaMu { gamma, mu } => HerglotzExpr::gamma_mu(gamma.clone(), mu.clone(), tol).map(drop),
            HerglotzExpr::Sum { terms } => {
                HerglotzExpr::sum(terms.clone())?;
                terms.iter().try_for_each(|t| t.validate(tol))
            }
            HerglotzExpr::Congruence { a, f } => {
                HerglotzExpr::congruence(a.clone(), f.clone())?;
                f.validate(tol)
            }
            HerglotzExpr::NegPinv { f } => f.validate(tol),
            HerglotzExpr::SchurPlus { a, b, f } | HerglotzExpr::SchurMinus { a, b, f, .. } => {
                require_size("A", a, f.q())?;
                require_size("B", b, f.q())?;
                f.validate(tol)
            }
            HerglotzExpr::LftByResolvent { v, f } => {
                if v.q() != f.q() {
                    return Err(Error::Shape("resolvent and argument differ in size".into()));
                }
                f.validate(tol)
            }
            HerglotzExpr::Compressed { u, f } => {
                HerglotzExpr::compressed(u.clone(), f.clone(), tol)?;
                f.validate(tol)
            }
        }
    }

    /// Parses and validates a JSON expression.
    pub fn from_json(text: &str, tol: &Tolerances) -> Result<Expr> {
        let expr: HerglotzExpr = serde_json::from_str(text)?;
        expr.validate(tol)?;
        Ok(Arc::new(expr))
    }

    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        self.eval_with(z, &Tolerances::default())
    }

    pub fn eval_with(&self, z: Complex64, tol: &Tolerances) -> Result<CMatrix> {
        require_upper(z)?;
        self.eval_continued(z, tol)
    }

    /// Evaluates the defining formula at any `z` where it is finite,
    /// including the lower half-plane. For rational and molecular
    /// expressions this is the analytic continuation across the real axis
    /// away from the poles, which is what coefficient extraction at
    /// infinity needs.
    pub fn eval_continued(&self, z: Complex64, tol: &Tolerances) -> Result<CMatrix> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain(format!("z = {z} is not finite")));
        }
        let mut memo = HashMap::new();
        self.eval_node(z, tol, &mut memo)
    }

    fn eval_child(child: &Expr, z: Complex64, tol: &Tolerances, memo: &mut HashMap<usize, CMatrix>) -> Result<CMatrix> {
        let key = Arc::as_ptr(child) as usize;
        if let Some(hit) = memo.get(&key) {
            return Ok(hit.clone());
        }
        let value = child.eval_node(z, tol, memo)?;
        memo.insert(key, value.clone());
        Ok(value)
    }

    fn eval_node(&self, z: Complex64, tol: &Tolerances, memo: &mut HashMap<usize, CMatrix>) -> Result<CMatrix> {
        let value = match self {
            HerglotzExpr::Zero { q } => CMatrix::zeros(*q, *q),
            HerglotzExpr::Const { a } => a.clone(),
            HerglotzExpr::Linear { beta } => beta.scale(z),
            HerglotzExpr::NevTriple { alpha, beta, nu } => {
                let integral = nu.kernel_sum(|t| {
                    let t = Complex64::new(t, 0.0);
                    (1.0 + t * z) / (t - z)
                });
                &(alpha + &beta.scale(z)) + &integral
            }
            HerglotzExpr::StieltjesOf { sigma } => sigma.kernel_sum(|t| (Complex64::new(t, 0.0) - z).inv()),
            HerglotzExpr::GammaMu { gamma, mu } => {
                let integral = mu.kernel_sum(|t| Complex64::new(t.abs() + 1.0, 0.0) / (Complex64::new(t, 0.0) - z));
                gamma + &integral
            }
            HerglotzExpr::Sum { terms } => {
                let mut acc = CMatrix::zeros(self.q(), self.q());
                for t in terms {
                    acc = acc + Self::eval_child(t, z, tol, memo)?;
                }
                acc
            }
            HerglotzExpr::Congruence { a, f } => {
                let fz = Self::eval_child(f, z, tol, memo)?;
                &(&a.adjoint() * &fz) * a
            }
            HerglotzExpr::NegPinv { f } => -matkit::pinv(&Self::eval_child(f, z, tol, memo)?, tol)?,
            HerglotzExpr::SchurPlus { a, b, f } => {
                let fz = Self::eval_child(f, z, tol, memo)?;
                transforms::schur_plus_value(a, b, &fz, z, tol)?
            }
            HerglotzExpr::SchurMinus { a, b, f, certified } => {
                let fz = Self::eval_child(f, z, tol, memo)?;
                transforms::schur_minus_value(a, b, &fz, z, *certified, tol)?
            }
            HerglotzExpr::LftByResolvent { v, f } => {
                let fz = Self::eval_child(f, z, tol, memo)?;
                transforms::lft(&v.eval(z), &fz).map_err(|e| with_point(e, z))?
            }
            HerglotzExpr::Compressed { u, f } => {
                let fz = Self::eval_child(f, z, tol, memo)?;
                &(u * &fz) * &u.adjoint()
            }
        };
        if !value.is_finite() {
            return Err(Error::NumericFailure(format!("{} node produced non-finite values at z = {z}", self.kind())));
        }
        Ok(value)
    }
}

fn with_point(e: Error, z: Complex64) -> Error {
    match e {
        Error::SingularDenominator { cond, .. } => Error::SingularDenominator { z: Some(z), cond },
        other => other,
    }
}

/// Geometric grid `start · ratio^k`, `k = 0..count`.
pub fn geometric_grid(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * ratio.powi(k as i32)).collect()
}

/// Default grid for limits along the imaginary axis: `10²` to `10⁶` in
/// half decades.
pub fn default_y_grid() -> Vec<f64> {
    geometric_grid(1e2, 10f64.sqrt(), 9)
}

/// Extrapolated limit with the size of the last extrapolation step.
#[derive(Clone, Debug, Serialize)]
pub struct Limit {
    pub value: CMatrix,
    pub residual: f64,
}

fn check_grid(grid: &[f64], min_len: usize) -> Result<()> {
    if grid.len() < min_len {
        return Err(Error::Domain(format!("grid needs at least {min_len} points")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        return Err(Error::Domain("grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Limit of `g(y)` as `y → ∞`, modelling `g = c₀ + c₁/y + c₂/y²` on the
/// last three grid points and reporting the change against the previous
/// three.
pub fn richardson_limit(grid: &[f64], values: &[CMatrix]) -> Result<Limit> {
    check_grid(grid, 3)?;
    let fit = |i: usize| -> CMatrix {
        // Lagrange extrapolation to h = 0 with h = 1/y.
        let h: Vec<f64> = (i..i + 3).map(|k| 1.0 / grid[k]).collect();
        let mut acc = CMatrix::zeros(values[i].rows(), values[i].cols());
        for a in 0..3 {
            let mut w = 1.0;
            for b in 0..3 {
                if a != b {
                    w *= h[b] / (h[b] - h[a]);
                }
            }
            acc = acc + values[i + a].scale_real(w);
        }
        acc
    };
    let last = fit(grid.len() - 3);
    let residual = if grid.len() >= 4 {
        (&last - &fit(grid.len() - 4)).op_norm()
    } else {
        (&last - &values[grid.len() - 1]).op_norm()
    };
    Ok(Limit { value: last, residual })
}

fn eval_on_axis(f: &HerglotzExpr, grid: &[f64], tol: &Tolerances) -> Result<Vec<CMatrix>> {
    grid.iter().map(|&y| f.eval_with(Complex64::new(0.0, y), tol)).collect()
}

/// `α̂ = Re F(i)` and `β̂ = lim F(iy)/(iy)`.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaBeta {
    pub alpha: CMatrix,
    pub beta: Limit,
}

pub fn nevanlinna_alpha_beta(f: &HerglotzExpr, y_grid: &[f64], tol: &Tolerances) -> Result<AlphaBeta> {
    check_grid(y_grid, 3)?;
    let alpha = f.eval_with(Complex64::new(0.0, 1.0), tol)?.re_part();
    let ratios: Vec<CMatrix> = eval_on_axis(f, y_grid, tol)?
        .into_iter()
        .zip(y_grid)
        .map(|(v, &y)| v.scale(Complex64::new(0.0, y).inv()))
        .collect();
    Ok(AlphaBeta { alpha, beta: richardson_limit(y_grid, &ratios)? })
}

/// `lim F(iy)` together with a convergence flag.
#[derive(Clone, Debug, Serialize)]
pub struct GammaLimit {
    pub limit: Limit,
    pub converged: bool,
}

/// Relative residual above which a limit is reported as not converged.
pub const LIMIT_RTOL: f64 = 1e-6;

pub fn gamma_limit(f: &HerglotzExpr, y_grid: &[f64], tol: &Tolerances) -> Result<GammaLimit> {
    let values = eval_on_axis(f, y_grid, tol)?;
    let limit = richardson_limit(y_grid, &values)?;
    let converged = limit.residual <= LIMIT_RTOL * (1.0 + limit.value.op_norm());
    Ok(GammaLimit { limit, converged })
}

/// Function classes that diagnostics can gather evidence for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum ClassTag {
    /// Herglotz-Nevanlinna functions.
    Herglotz,
    /// `‖F(iy)‖/y → 0`.
    DecayMinus2,
    /// `∫ y⁻¹ ‖Im F(iy)‖ dy < ∞` on `[1, ∞)`.
    IntegrableMinus1,
    /// Integrable class with `lim F(iy) = 0`.
    VanishingMinus1,
    /// Stieltjes transforms of finite measures: `y‖F(iy)‖` bounded.
    Stieltjes,
    /// Solutions of a moment problem with `κ + 1` moments.
    Moments { kappa: usize },
    /// Parameter class of even problems with reference matrix `A`.
    ParamEven {
        #[serde(rename = "A")]
        a: CMatrix,
    },
    /// Parameter class of odd problems with reference matrix `A`.
    ParamOdd {
        #[serde(rename = "A")]
        a: CMatrix,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub tag: ClassTag,
    pub checks: Vec<Check>,
    /// `fail` if any check fails, else `inconclusive` if any is, else `pass`.
    pub verdict: Status,
}

fn check(name: &str, status: Status, value: f64, detail: String) -> Check {
    Check { name: name.to_string(), status, value, detail }
}

fn pass_fail(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Evidence that `F` belongs to the class named by `tag`. The grid should
/// cover `[1, Y]` geometrically; only finitely many points are ever looked
/// at, so a pass is evidence and never a proof.
pub fn class_diagnostics(
    f: &HerglotzExpr,
    tag: &ClassTag,
    grid: &[f64],
    tol: &Tolerances,
) -> Result<DiagnosticsReport> {
    check_grid(grid, 3)?;
    let values = eval_on_axis(f, grid, tol)?;
    let mut checks = vec![herglotz_check(f, grid, &values, tol)?];
    match tag {
        ClassTag::Herglotz => {}
        ClassTag::DecayMinus2 => checks.push(decay_check(grid, &values)),
        ClassTag::IntegrableMinus1 => checks.push(integrability_check(grid, &values)),
        ClassTag::VanishingMinus1 => {
            checks.push(integrability_check(grid, &values));
            checks.push(vanishing_check(f, tol)?);
        }
        ClassTag::Stieltjes => checks.push(stieltjes_check(grid, &values)),
        ClassTag::Moments { kappa } => {
            checks.push(integrability_check(grid, &values));
            checks.push(vanishing_check(f, tol)?);
            checks.push(moments_check(f, *kappa, tol)?);
        }
        ClassTag::ParamEven { a } => {
            checks.push(decay_check(grid, &values));
            checks.push(kernel_check(a, f, tol)?);
        }
        ClassTag::ParamOdd { a } => {
            checks.push(integrability_check(grid, &values));
            checks.push(vanishing_check(f, tol)?);
            checks.push(kernel_check(a, f, tol)?);
        }
    }
    let verdict = if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else if checks.iter().any(|c| c.status == Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    Ok(DiagnosticsReport { tag: tag.clone(), checks, verdict })
}

fn herglotz_check(f: &HerglotzExpr, grid: &[f64], on_axis: &[CMatrix], tol: &Tolerances) -> Result<Check> {
    let mut worst = f64::INFINITY;
    let mut samples: Vec<CMatrix> = on_axis.to_vec();
    for &y in grid {
        for x in [-2.0 * y, -0.5, 0.5, 2.0 * y] {
            samples.push(f.eval_with(Complex64::new(x, y), tol)?);
        }
    }
    let mut ok = true;
    for v in &samples {
        let im = v.im_part();
        let min = matkit::hermitian_eigenvalues(&im)?.first().copied().unwrap_or(0.0);
        worst = worst.min(min / (1.0 + v.op_norm()));
        ok &= matkit::is_psd(&im, tol)?;
    }
    Ok(check(
        "imaginary part PSD",
        pass_fail(ok),
        if worst.is_finite() { worst } else { 0.0 },
        format!("{} samples; value is the smallest scaled eigenvalue", samples.len()),
    ))
}

fn decay_check(grid: &[f64], values: &[CMatrix]) -> Check {
    let first = values[0].op_norm() / grid[0];
    let last = values[values.len() - 1].op_norm() / grid[grid.len() - 1];
    let ok = last <= (1e-2 * first).max(1e-12);
    check(
        "norm(F(iy))/y decays",
        pass_fail(ok),
        last,
        format!("first {first:.3e}, last {last:.3e}; needs last <= 1e-2 first"),
    )
}

fn integrability_check(grid: &[f64], values: &[CMatrix]) -> Check {
    // ∫ y⁻¹ g(y) dy = ∫ g d(log y) with g = ‖Im F(iy)‖.
    let g: Vec<f64> = values.iter().map(|v| v.im_part().op_norm()).collect();
    let mut integral = 0.0;
    for k in 1..grid.len() {
        integral += 0.5 * (g[k] + g[k - 1]) * (grid[k] / grid[k - 1]).ln();
    }
    let n = grid.len();
    let g_last = g[n - 1];
    let g_prev = g[n - 2];
    if g_last <= 1e-14 * (1.0 + g[0]) {
        return check(
            "integrability of norm(Im F(iy))/y",
            Status::Pass,
            integral,
            "imaginary part vanishes at the end of the grid".into(),
        );
    }
    let slope = (g_last / g_prev.max(f64::MIN_POSITIVE)).ln() / (grid[n - 1] / grid[n - 2]).ln();
    let (status, detail) = if slope <= -0.5 {
        let tail = g_last / slope.abs();
        (Status::Pass, format!("end slope {slope:.2}, tail bound {tail:.3e}"))
    } else if slope >= -0.1 {
        (Status::Fail, format!("end slope {slope:.2}: integrand does not decay, integral grows like log y"))
    } else {
        (Status::Inconclusive, format!("end slope {slope:.2}"))
    };
    check("integrability of norm(Im F(iy))/y", status, integral, detail)
}

fn vanishing_check(f: &HerglotzExpr, tol: &Tolerances) -> Result<Check> {
    let g = gamma_limit(f, &default_y_grid(), tol)?;
    let norm = g.limit.value.op_norm();
    let scale = f.eval_with(Complex64::new(0.0, 1.0), tol)?.op_norm();
    let status = if !g.converged { Status::Inconclusive } else { pass_fail(norm <= 1e-6 * (1.0 + scale)) };
    Ok(check("lim F(iy) = 0", status, norm, format!("extrapolation residual {:.3e}", g.limit.residual)))
}

fn stieltjes_check(grid: &[f64], values: &[CMatrix]) -> Check {
    let scaled: Vec<f64> = grid.iter().zip(values).map(|(y, v)| y * v.op_norm()).collect();
    let half = (scaled.len() / 2).max(1);
    let early = scaled[..half].iter().copied().fold(0.0, f64::max);
    let last = scaled[scaled.len() - 1];
    check(
        "y norm(F(iy)) bounded",
        pass_fail(last <= 2.0 * early + 1e-12),
        last,
        format!("early max {early:.3e}, last {last:.3e}; needs last <= 2 early"),
    )
}

fn kernel_check(a: &CMatrix, f: &HerglotzExpr, tol: &Tolerances) -> Result<Check> {
    let fi = f.eval_with(Complex64::new(0.0, 1.0), tol)?;
    if fi.shape() != a.shape() {
        return Err(Error::Shape("reference matrix and function differ in size".into()));
    }
    let ok = matkit::kernel_contained(a, &fi, tol)?;
    let proj = &matkit::pinv(a, tol)? * a;
    let leak = (&(&fi * &proj) - &fi).op_norm();
    Ok(check("N(A) within N(F(i))", pass_fail(ok), leak, "value is norm(F(i) A⁺A − F(i))".into()))
}

fn moments_check(f: &HerglotzExpr, kappa: usize, tol: &Tolerances) -> Result<Check> {
    let ex = verify::extract_moments(f, kappa, &verify::ExtractOptions::default(), tol)?;
    let hnnd = crate::seqkit::is_hnnd(&ex.moments, &Tolerances::preset("loose").unwrap())?;
    let worst = ex.residuals.iter().copied().fold(0.0, f64::max);
    let status = if !hnnd {
        Status::Fail
    } else if worst > 1e-3 * (1.0 + ex.moments.scale()) {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    Ok(check(
        "expansion coefficients form a Hankel PSD sequence",
        status,
        worst,
        format!("extracted {} coefficients; value is the worst residual", kappa + 1),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn scalar(f: &HerglotzExpr, z: Complex64) -> Complex64 {
        f.eval(z).unwrap().get(0, 0)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(HerglotzExpr::zero(2).eval(c(1.0, 1.0)).unwrap(), CMatrix::zeros(2, 2));

        let nu = MolecularMeasure::scalar(&[(0.0, 1.0)]).unwrap();
        let triple =
            HerglotzExpr::nev_triple(CMatrix::real_scalar(0.0), CMatrix::real_scalar(0.0), nu.clone(), &tol()).unwrap();
        assert!((scalar(&triple, c(0.0, 1.0)) - c(0.0, 1.0)).norm() < 1e-15);

        let np = HerglotzExpr::neg_pinv(HerglotzExpr::stieltjes(nu));
        for z in [c(0.3, 0.7), c(-2.0, 5.0)] {
            assert!((scalar(&np, z) - z).norm() < 1e-13);
        }
        assert!(matches!(np.eval(c(0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn constructors_enforce_invariants() {
        let t = tol();
        assert!(HerglotzExpr::constant(CMatrix::scalar(c(1.0, -1.0)), &t).is_err());
        assert!(HerglotzExpr::constant(CMatrix::scalar(c(1.0, 1.0)), &t).is_ok());
        assert!(HerglotzExpr::linear(CMatrix::real_scalar(-1.0), &t).is_err());
        assert!(HerglotzExpr::gamma_mu(CMatrix::scalar(c(0.0, 1.0)), MolecularMeasure::empty(1), &t).is_err());
        let u = CMatrix::from_real_rows(&[&[1.0], &[1.0]]);
        assert!(HerglotzExpr::compressed(u, HerglotzExpr::zero(1), &t).is_err());
        let u = CMatrix::from_real_rows(&[&[1.0], &[0.0]]);
        assert!(HerglotzExpr::compressed(u, HerglotzExpr::zero(1), &t).is_ok());
        assert!(HerglotzExpr::sum(vec![HerglotzExpr::zero(1), HerglotzExpr::zero(2)]).is_err());
    }

    #[test]
    fn alpha_beta_examples() {
        let t = tol();
        let grid = default_y_grid();
        let beta = CMatrix::diag_real(&[2.0, 0.5]);
        let ab = nevanlinna_alpha_beta(&HerglotzExpr::linear(beta.clone(), &t).unwrap(), &grid, &t).unwrap();
        assert!(ab.alpha.max_abs() < 1e-15);
        assert!(matkit::approx_eq(&ab.beta.value, &beta, 1e-14));

        let a = CMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, -3.0]]);
        let ab = nevanlinna_alpha_beta(&HerglotzExpr::constant(a.clone(), &t).unwrap(), &grid, &t).unwrap();
        assert!(matkit::approx_eq(&ab.alpha, &a, 1e-15));
        assert!(ab.beta.value.max_abs() < 1e-12);

        let s = HerglotzExpr::stieltjes(MolecularMeasure::scalar(&[(0.0, 1.0)]).unwrap());
        let ab = nevanlinna_alpha_beta(&s, &grid, &t).unwrap();
        assert!(ab.alpha.max_abs() < 1e-15);
        assert!(ab.beta.value.max_abs() < 1e-12);
    }

    #[test]
    fn gamma_limit_examples() {
        let t = tol();
        let grid = default_y_grid();
        let g = gamma_limit(&HerglotzExpr::zero(1), &grid, &t).unwrap();
        assert!(g.converged && g.limit.value.max_abs() == 0.0);

        let s = HerglotzExpr::stieltjes(MolecularMeasure::scalar(&[(1.0, 1.0)]).unwrap());
        let g = gamma_limit(&s, &grid, &t).unwrap();
        assert!(g.converged && g.limit.value.max_abs() < 1e-10);

        let gamma = CMatrix::from_real_rows(&[&[1.0, 0.5], &[0.5, -2.0]]);
        let mu = MolecularMeasure::dirac(0.5, CMatrix::identity(2), &t).unwrap();
        let gm = HerglotzExpr::gamma_mu(gamma.clone(), mu, &t).unwrap();
        let g = gamma_limit(&gm, &grid, &t).unwrap();
        assert!(g.converged);
        assert!(matkit::approx_eq(&g.limit.value, &gamma, 1e-10));
    }

    #[test]
    fn diagnostics_examples() {
        let t = tol();
        let grid = geometric_grid(1.0, 10f64.sqrt(), 13);
        let a = CMatrix::diag_real(&[1.0, 0.0]);
        let r = class_diagnostics(&HerglotzExpr::zero(2), &ClassTag::ParamOdd { a }, &grid, &t).unwrap();
        assert_eq!(r.verdict, Status::Pass, "{r:?}");

        let ci = HerglotzExpr::constant(CMatrix::scalar(c(0.0, 1.0)), &t).unwrap();
        let r = class_diagnostics(&ci, &ClassTag::IntegrableMinus1, &grid, &t).unwrap();
        assert_eq!(r.verdict, Status::Fail, "{r:?}");

        let sigma = MolecularMeasure::scalar(&[(-1.0, 0.3), (0.5, 0.7)]).unwrap();
        let r = class_diagnostics(&HerglotzExpr::stieltjes(sigma), &ClassTag::Stieltjes, &grid, &t).unwrap();
        assert_eq!(r.verdict, Status::Pass, "{r:?}");

        let lin = HerglotzExpr::linear(CMatrix::real_scalar(1.0), &t).unwrap();
        let r = class_diagnostics(&lin, &ClassTag::DecayMinus2, &grid, &t).unwrap();
        assert_eq!(r.verdict, Status::Fail);
    }

    #[test]
    fn memoization_shares_subexpressions() {
        let s = HerglotzExpr::stieltjes(MolecularMeasure::scalar(&[(0.0, 1.0)]).unwrap());
        let twice = HerglotzExpr::sum(vec![s.clone(), s]).unwrap();
        let v = scalar(&twice, c(0.0, 2.0));
        assert!((v - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn json_roundtrip() {
        let t = tol();
        let sigma = MolecularMeasure::scalar(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let inner = HerglotzExpr::sum(vec![
            HerglotzExpr::stieltjes(sigma),
            HerglotzExpr::constant(CMatrix::scalar(c(0.5, 0.25)), &t).unwrap(),
        ])
        .unwrap();
        let expr = HerglotzExpr::neg_pinv(inner);
        let text = serde_json::to_string(&expr).unwrap();
        assert!(text.contains("\"kind\":\"NegPinv\""));
        let back = HerglotzExpr::from_json(&text, &t).unwrap();
        assert_eq!(*back, *expr);

        let bad = r#"{"kind":"Const","A":{"rows":1,"cols":1,"re":[0.0],"im":[-1.0]}}"#;
        assert!(HerglotzExpr::from_json(bad, &t).is_err());
    }
}
