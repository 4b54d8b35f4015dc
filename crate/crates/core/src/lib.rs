//! Truncated matricial Hamburger moment problems.
//!
//! The crate is layered bottom-up:
//!
//! * [`matkit`] holds dense complex matrices, pseudoinverses and the
//!   range/kernel predicate algebra.
//! * [`seqkit`] works on finite matrix sequences: block Hankel matrices, the
//!   algebraic Schur algorithm and Hankel membership tests.
//! * [`measures`] provides finitely atomic matrix measures, the exact oracle
//!   for moments and Stieltjes transforms.
//! * [`herglotz`] is an evaluable expression tree for matrix functions on the
//!   upper half-plane.
//! * [`transforms`] implements the function-side Schur transforms, the
//!   elementary matrix polynomials and resolvent products.
//! * [`solver`] parametrizes all solutions of a problem and recovers the
//!   parameter of a given solution.
//! * [`verify`] checks solutions through their asymptotic expansion.

mod decomp;
pub mod error;
pub mod herglotz;
pub mod matkit;
pub mod measures;
pub mod seqkit;
pub mod solver;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
pub use herglotz::HerglotzExpr;
pub use matkit::{CMatrix, Tolerances};
pub use measures::MolecularMeasure;
pub use seqkit::MatrixSeq;
pub use solver::Problem;
pub use transforms::ResolventPoly;
