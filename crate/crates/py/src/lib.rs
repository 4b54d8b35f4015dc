//! Python bindings. Values cross the boundary as JSON strings in the same
//! schemas the CLI reads and writes, so results can be fed back in.
//!
//! The `ops` module holds the plain Rust functions; the `#[pyfunction]`
//! wrappers only convert errors.

// Triggered by the pyo3 0.22 function macros, not by this code.
#![allow(clippy::useless_conversion)]

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use mf::Error;

pub mod ops {
    use super::*;
    use mf::herglotz::Expr;
    use mf::verify::{self, ExtractOptions, Thresholds};
    use mf::{measures, seqkit, solver, transforms};
    use mf::{HerglotzExpr, MatrixSeq, Result, Tolerances};
    use serde_json::json;

    pub fn tolerances(profile: &str) -> Result<Tolerances> {
        Tolerances::preset(profile).ok_or_else(|| Error::Contract(format!("unknown tolerance profile {profile:?}")))
    }

    fn seq(text: &str) -> Result<MatrixSeq> {
        Ok(serde_json::from_str(text)?)
    }

    fn func(text: &str, tol: &Tolerances) -> Result<Expr> {
        HerglotzExpr::from_json(text, tol)
    }

    fn dump<T: serde::Serialize + ?Sized>(v: &T) -> Result<String> {
        Ok(serde_json::to_string(v)?)
    }

    pub fn generate(q: usize, kappa: usize, atoms: usize, seed: u64) -> Result<String> {
        let sigma = measures::seeded_measure(q, atoms, seed)?;
        dump(&json!({ "measure": sigma, "moments": sigma.moments_prefix(kappa) }))
    }

    pub fn check(s: &str, tol: &Tolerances) -> Result<bool> {
        seqkit::is_hnnd_extendable(&seq(s)?, tol)
    }

    pub fn schur_transform(s: &str, k: usize, tol: &Tolerances) -> Result<String> {
        dump(&seqkit::schur_transform(&seq(s)?, k, tol)?)
    }

    pub fn resolvent(s: &str, m: Option<usize>, w: bool, tol: &Tolerances) -> Result<String> {
        let seq = seq(s)?;
        let m = m.unwrap_or(seq.kappa());
        let poly = if w { transforms::resolvent_w(&seq, m, tol)? } else { transforms::resolvent_v(&seq, m, tol)? };
        dump(&poly)
    }

    pub fn solve(s: &str, param: Option<&str>, tol: &Tolerances) -> Result<String> {
        let p = solver::open_problem(&seq(s)?, tol)?;
        let f = match param {
            Some(text) => func(text, tol)?,
            None => HerglotzExpr::zero(p.rank()),
        };
        dump(&*solver::solve(&p, f)?)
    }

    pub fn recover(s: &str, f: &str, tol: &Tolerances) -> Result<String> {
        let p = solver::open_problem(&seq(s)?, tol)?;
        dump(&*solver::recover_parameter(&p, func(f, tol)?)?)
    }

    pub fn determinate(s: &str, tol: &Tolerances) -> Result<String> {
        let p = solver::open_problem(&seq(s)?, tol)?;
        dump(&*solver::determinate_solution(&p)?)
    }

    pub fn verify(s: &str, f: &str, tol: &Tolerances) -> Result<bool> {
        let seq = seq(s)?;
        let f = func(f, tol)?;
        let report = verify::hn_check(
            &f,
            &seq,
            &verify::default_rays(),
            &verify::default_r_grid(&seq),
            &Thresholds::default(),
            tol,
        )?;
        Ok(report.passed())
    }

    pub fn moments(f: &str, m: usize, tol: &Tolerances) -> Result<String> {
        let ex = verify::extract_moments(&*func(f, tol)?, m, &ExtractOptions::default(), tol)?;
        dump(&ex)
    }

    pub fn evaluate(f: &str, z: Complex64, tol: &Tolerances) -> Result<String> {
        dump(&func(f, tol)?.eval(z)?)
    }

    pub fn roundtrip(q: usize, kappa: usize, seed: u64, tol: &Tolerances) -> Result<String> {
        dump(&solver::roundtrip(q, kappa, kappa / 2 + 3, seed, tol)?)
    }

}

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NumericFailure(_) | Error::SingularDenominator { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn tol(profile: &str) -> PyResult<mf::Tolerances> {
    ops::tolerances(profile).map_err(py_err)
}

/// Random molecular measure and its first `kappa + 1` moments, as JSON.
#[pyfunction]
#[pyo3(signature = (q, kappa, atoms, seed))]
fn generate(q: usize, kappa: usize, atoms: usize, seed: u64) -> PyResult<String> {
    ops::generate(q, kappa, atoms, seed).map_err(py_err)
}

/// Whether the sequence has a nonnegative definite Hankel extension.
#[pyfunction]
#[pyo3(signature = (seq, profile = "default"))]
fn check(seq: &str, profile: &str) -> PyResult<bool> {
    ops::check(seq, &tol(profile)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (seq, k, profile = "default"))]
fn schur_transform(seq: &str, k: usize, profile: &str) -> PyResult<String> {
    ops::schur_transform(seq, k, &tol(profile)?).map_err(py_err)
}

/// Resolvent polynomial V (or W with `w=True`) of order `m` (default κ).
#[pyfunction]
#[pyo3(signature = (seq, m = None, w = false, profile = "default"))]
fn resolvent(seq: &str, m: Option<usize>, w: bool, profile: &str) -> PyResult<String> {
    ops::resolvent(seq, m, w, &tol(profile)?).map_err(py_err)
}

/// Solution for `param` (the zero parameter when omitted).
#[pyfunction]
#[pyo3(signature = (seq, param = None, profile = "default"))]
fn solve(seq: &str, param: Option<&str>, profile: &str) -> PyResult<String> {
    ops::solve(seq, param, &tol(profile)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (seq, func, profile = "default"))]
fn recover(seq: &str, func: &str, profile: &str) -> PyResult<String> {
    ops::recover(seq, func, &tol(profile)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (seq, profile = "default"))]
fn determinate(seq: &str, profile: &str) -> PyResult<String> {
    ops::determinate(seq, &tol(profile)?).map_err(py_err)
}

/// Asymptotic check of `func` against the moments on the default rays.
#[pyfunction]
#[pyo3(signature = (seq, func, profile = "default"))]
fn verify(seq: &str, func: &str, profile: &str) -> PyResult<bool> {
    ops::verify(seq, func, &tol(profile)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (func, m, profile = "default"))]
fn moments(func: &str, m: usize, profile: &str) -> PyResult<String> {
    ops::moments(func, m, &tol(profile)?).map_err(py_err)
}

/// Value of `func` at `z` as a CMatrix JSON string.
#[pyfunction]
#[pyo3(signature = (func, z, profile = "default"))]
fn evaluate(func: &str, z: Complex64, profile: &str) -> PyResult<String> {
    ops::evaluate(func, z, &tol(profile)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (q, kappa, seed, profile = "default"))]
fn roundtrip(q: usize, kappa: usize, seed: u64, profile: &str) -> PyResult<String> {
    ops::roundtrip(q, kappa, seed, &tol(profile)?).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "momentforge")]
fn momentforge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(schur_transform, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(determinate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(roundtrip, m)?)?;
    Ok(())
}
