//! Finitely atomic nonnegative Hermitian matrix measures.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{self, CMatrix, Tolerances};
use crate::seqkit::MatrixSeq;

/// Positions closer than this are merged into a single atom.
pub const MERGE_DISTANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub mass: CMatrix,
}

/// `σ = Σ_k M_k δ_{t_k}` with PSD masses, sorted by position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureWire")]
pub struct MolecularMeasure {
    q: usize,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct MeasureWire {
    q: usize,
    atoms: Vec<Atom>,
}

impl TryFrom<MeasureWire> for MolecularMeasure {
    type Error = Error;
    fn try_from(w: MeasureWire) -> Result<Self> {
        MolecularMeasure::new(w.q, w.atoms, &Tolerances::default())
    }
}

impl MolecularMeasure {
    pub fn new(q: usize, atoms: Vec<Atom>, tol: &Tolerances) -> Result<Self> {
        if q == 0 {
            return Err(Error::Shape("matrix size q must be at least 1".into()));
        }
        for atom in &atoms {
            if atom.mass.shape() != (q, q) {
                return Err(Error::Shape(format!(
                    "atom mass is {}x{}, expected {q}x{q}",
                    atom.mass.rows(),
                    atom.mass.cols()
                )));
            }
            if !atom.t.is_finite() {
                return Err(Error::Domain(format!("atom position {} is not finite", atom.t)));
            }
            if !matkit::is_psd(&atom.mass, tol)? {
                return Err(Error::Domain(format!("mass at t = {} is not Hermitian PSD", atom.t)));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if (atom.t - last.t).abs() <= MERGE_DISTANCE => {
                    last.mass = &last.mass + &atom.mass;
                }
                _ => merged.push(atom),
            }
        }
        Ok(MolecularMeasure { q, atoms: merged })
    }

    pub fn empty(q: usize) -> Self {
        MolecularMeasure { q, atoms: Vec::new() }
    }

    /// Single atom `mass · δ_t`.
    pub fn dirac(t: f64, mass: CMatrix, tol: &Tolerances) -> Result<Self> {
        let q = mass.rows();
        Self::new(q, vec![Atom { t, mass }], tol)
    }

    /// Scalar measure from `(position, weight)` pairs.
    pub fn scalar(points: &[(f64, f64)]) -> Result<Self> {
        let atoms = points.iter().map(|&(t, w)| Atom { t, mass: CMatrix::real_scalar(w) }).collect();
        Self::new(1, atoms, &Tolerances::default())
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `σ(ℝ)`.
    pub fn total_mass(&self) -> CMatrix {
        self.moment(0)
    }

    /// `Σ_k t_k^j M_k`.
    pub fn moment(&self, j: usize) -> CMatrix {
        self.atoms.iter().fold(CMatrix::zeros(self.q, self.q), |acc, a| acc + a.mass.scale_real(a.t.powi(j as i32)))
    }

    pub fn moments_prefix(&self, kappa: usize) -> MatrixSeq {
        MatrixSeq::new(self.q, (0..=kappa).map(|j| self.moment(j)).collect())
            .expect("moments of a validated measure are well formed")
    }

    /// Stieltjes transform `Σ_k (t_k − z)⁻¹ M_k`.
    pub fn stieltjes_eval(&self, z: Complex64) -> Result<CMatrix> {
        require_upper(z)?;
        Ok(self.kernel_sum(|t| (Complex64::new(t, 0.0) - z).inv()))
    }

    /// `Σ_k kernel(t_k) M_k`.
    pub fn kernel_sum(&self, kernel: impl Fn(f64) -> Complex64) -> CMatrix {
        self.atoms.iter().fold(CMatrix::zeros(self.q, self.q), |acc, a| acc + a.mass.scale(kernel(a.t)))
    }

    /// Pushes every mass through `a* M a`.
    pub fn congruence(&self, a: &CMatrix) -> Result<Self> {
        if a.rows() != self.q {
            return Err(Error::Shape("congruence factor has the wrong row count".into()));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|atom| Atom { t: atom.t, mass: (&(&a.adjoint() * &atom.mass) * a).re_part() })
            .collect();
        Ok(MolecularMeasure { q: a.cols(), atoms })
    }
}

pub(crate) fn require_upper(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("z = {z} is not in the open upper half-plane")))
    }
}

/// Knobs for [`random_measure`].
#[derive(Clone, Debug)]
pub struct GeneratorOptions {
    /// Atoms lie in `[−position_bound, position_bound]`.
    pub position_bound: f64,
    pub min_separation: f64,
    /// Masses with operator norm below this are redrawn.
    pub min_mass_norm: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions { position_bound: 2.0, min_separation: 0.25, min_mass_norm: 0.05 }
    }
}

fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random PSD `q × q` matrix `G G* / r` of rank `r ≤ q`.
pub fn random_psd<R: Rng>(q: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(q, rank, |_, _| random_complex(rng));
    (&g * &g.adjoint()).scale_real(1.0 / rank as f64).re_part()
}

/// Draws between one and `atom_budget` atoms with random-rank masses.
pub fn random_measure<R: Rng>(
    q: usize,
    atom_budget: usize,
    opts: &GeneratorOptions,
    rng: &mut R,
) -> Result<MolecularMeasure> {
    if atom_budget == 0 {
        return Err(Error::Domain("the atom budget must be at least 1".into()));
    }
    let count = rng.gen_range(1..=atom_budget);
    random_measure_with_atoms(q, count, opts, rng)
}

/// [`random_measure_with_atoms`] with default options, driven by a ChaCha8
/// stream seeded with `seed`.
pub fn seeded_measure(q: usize, count: usize, seed: u64) -> Result<MolecularMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_measure_with_atoms(q, count, &GeneratorOptions::default(), &mut rng)
}

/// Exactly `count` atoms, at least `min_separation` apart, with random-rank
/// masses.
pub fn random_measure_with_atoms<R: Rng>(
    q: usize,
    count: usize,
    opts: &GeneratorOptions,
    rng: &mut R,
) -> Result<MolecularMeasure> {
    if q == 0 {
        return Err(Error::Domain("matrix size q must be at least 1".into()));
    }
    let mut positions: Vec<f64> = Vec::with_capacity(count);
    let mut attempts = 0;
    while positions.len() < count {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::Domain(format!(
                "cannot place {count} atoms with separation {} in [-{b}, {b}]",
                opts.min_separation,
                b = opts.position_bound
            )));
        }
        let t = rng.gen_range(-opts.position_bound..=opts.position_bound);
        if positions.iter().all(|p| (p - t).abs() >= opts.min_separation) {
            positions.push(t);
        }
    }
    let atoms = positions
        .into_iter()
        .map(|t| {
            let mass = loop {
                let rank = rng.gen_range(1..=q);
                let m = random_psd(q, rank, rng);
                if m.op_norm() >= opts.min_mass_norm {
                    break m;
                }
            };
            Atom { t, mass }
        })
        .collect();
    MolecularMeasure::new(q, atoms, &Tolerances::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn moments_of_simple_measures() {
        let t = Tolerances::default();
        let delta0 = MolecularMeasure::dirac(0.0, CMatrix::identity(2), &t).unwrap();
        assert_eq!(delta0.moment(0), CMatrix::identity(2));
        assert_eq!(delta0.moment(3), CMatrix::zeros(2, 2));

        let sym = MolecularMeasure::scalar(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let m: Vec<f64> = (0..5).map(|j| sym.moment(j).get(0, 0).re).collect();
        assert_eq!(m, vec![1.0, 0.0, 1.0, 0.0, 1.0]);

        let p = CMatrix::diag_real(&[1.0, 0.0]);
        let one = MolecularMeasure::dirac(1.0, p.clone(), &t).unwrap();
        for j in 0..6 {
            assert_eq!(one.moment(j), p);
        }
    }

    #[test]
    fn moments_prefix_examples() {
        let t = Tolerances::default();
        let d = MolecularMeasure::scalar(&[(0.0, 1.0)]).unwrap();
        assert_eq!(d.moments_prefix(2), MatrixSeq::scalar(&[1.0, 0.0, 0.0]).unwrap());
        let sym = MolecularMeasure::scalar(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(sym.moments_prefix(3), MatrixSeq::scalar(&[1.0, 0.0, 1.0, 0.0]).unwrap());
        let p = CMatrix::diag_real(&[1.0, 0.0]);
        let m = MolecularMeasure::dirac(0.0, p.clone(), &t).unwrap();
        assert_eq!(m.moments_prefix(1), MatrixSeq::new(2, vec![p, CMatrix::zeros(2, 2)]).unwrap());
    }

    #[test]
    fn stieltjes_examples() {
        let d0 = MolecularMeasure::scalar(&[(0.0, 1.0)]).unwrap();
        let v = d0.stieltjes_eval(c(0.0, 1.0)).unwrap();
        assert!((v.get(0, 0) - c(0.0, 1.0)).norm() < 1e-15);

        let d1 = MolecularMeasure::scalar(&[(1.0, 1.0)]).unwrap();
        let z = c(0.3, 2.0);
        let v = d1.stieltjes_eval(z).unwrap();
        assert!((v.get(0, 0) - (c(1.0, 0.0) - z).inv()).norm() < 1e-15);

        let e = MolecularMeasure::empty(3);
        assert_eq!(e.stieltjes_eval(z).unwrap(), CMatrix::zeros(3, 3));
        assert!(matches!(e.stieltjes_eval(c(1.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(e.stieltjes_eval(c(1.0, -1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn construction_merges_and_validates() {
        let m = MolecularMeasure::scalar(&[(1.0, 1.0), (1.0 + 1e-13, 2.0), (-1.0, 1.0)]).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert_eq!(m.atoms()[1].mass, CMatrix::real_scalar(3.0));
        assert!(MolecularMeasure::scalar(&[(0.0, -1.0)]).is_err());
        assert!(MolecularMeasure::scalar(&[(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn herglotz_and_reflection() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t = Tolerances::default();
        let sigma = random_measure(3, 4, &GeneratorOptions::default(), &mut rng).unwrap();
        for &z in &[c(0.0, 0.1), c(-1.5, 1.0), c(4.0, 0.01)] {
            let v = sigma.stieltjes_eval(z).unwrap();
            assert!(matkit::is_psd(&v.im_part(), &t).unwrap());
            let reflected = sigma.kernel_sum(|s| (Complex64::new(s, 0.0) - z.conj()).inv());
            assert!(matkit::approx_eq(&v.adjoint(), &reflected, 1e-14));
        }
    }

    #[test]
    fn json_roundtrip() {
        let m = MolecularMeasure::scalar(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"t\":-1.0"));
        assert_eq!(serde_json::from_str::<MolecularMeasure>(&text).unwrap(), m);
        let bad = r#"{"q":1,"atoms":[{"t":0.0,"mass":{"rows":1,"cols":1,"re":[-1.0],"im":[0.0]}}]}"#;
        assert!(serde_json::from_str::<MolecularMeasure>(bad).is_err());
    }
}
