mod common;

use common::*;
use momentforge::herglotz::{Expr, HerglotzExpr};
use momentforge::matkit::{self, Tolerances};
use momentforge::measures::{self, GeneratorOptions, MolecularMeasure};
use momentforge::seqkit::{self, MatrixSeq};
use momentforge::solver::{self, Problem};
use momentforge::transforms::{self, ResolventPoly};
use momentforge::verify::{self, ExtractOptions, Thresholds, Verdict};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn problem(q: usize, kappa: usize, seed: u64) -> (MatrixSeq, MolecularMeasure, Problem) {
    let (seq, sigma) = seqkit::random_extendable_seq(q, kappa, 3, seed).unwrap();
    let p = solver::open_problem(&seq, &tol()).unwrap();
    (seq, sigma, p)
}

fn gallery_solution(p: &Problem, seed: u64) -> Expr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = solver::random_gallery_kind(p.rank(), p.parity(), &mut rng).unwrap();
    let f = solver::gallery_parameter(&kind, p.rank(), p.parity(), p.tolerances()).unwrap();
    solver::solve(p, f).unwrap()
}

fn json_roundtrip<T>(value: &T) -> T
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    serde_json::from_str(&serde_json::to_string(value).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(prop_config(32))]

    #[test]
    fn solutions_share_kernel_and_range_with_s0(q in 1usize..=3, kappa in 0usize..=5, seed: u64) {
        let (seq, _, p) = problem(q, kappa, seed);
        let sol = gallery_solution(&p, seed);
        let loose = Tolerances::new(1e-10, 1e-9, 1e-7).unwrap();
        let s0 = &seq.items()[0];
        for z in verify::default_z_grid() {
            let fz = sol.eval(z).unwrap();
            prop_assert!(matkit::kernel_contained(s0, &fz, &loose).unwrap());
            prop_assert!(matkit::kernel_contained(&fz, s0, &loose).unwrap());
            prop_assert!(matkit::range_contained(&fz, s0, &loose).unwrap());
            prop_assert!(matkit::range_contained(s0, &fz, &loose).unwrap());
        }
    }

    #[test]
    fn roundtrip_recovers_the_parameter(q in 1usize..=2, kappa in 0usize..=5, seed: u64) {
        let t = tol();
        let a = solver::roundtrip(q, kappa, kappa / 2 + 3, seed, &t).unwrap();
        prop_assert!(a.passed, "residual {:.3e}, separation {:.3e}", a.max_residual, a.separation);
        prop_assert!(a.max_residual <= solver::ROUNDTRIP_ATOL);
        let b = solver::roundtrip(q, kappa, kappa / 2 + 3, seed, &t).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn determinacy_decides_uniqueness(q in 1usize..=2, kappa in 0usize..=5, seed: u64) {
        let (_, _, p) = problem(q, kappa, seed);
        if p.is_determinate() {
            let one = HerglotzExpr::zero(1);
            prop_assert!(solver::solve(&p, one).is_err());
            let unique = solver::determinate_solution(&p).unwrap();
            let via_solve = solver::solve(&p, HerglotzExpr::zero(0)).unwrap();
            prop_assert!(max_diff(&unique, &via_solve, &verify::default_z_grid()) <= 1e-12);
        } else {
            prop_assert!(solver::determinate_solution(&p).is_err());
            let a = solver::solve(&p, HerglotzExpr::zero(p.rank())).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tau = measures::random_measure(p.rank(), 3, &GeneratorOptions::default(), &mut rng).unwrap();
            let b = solver::solve(&p, stieltjes(&tau)).unwrap();
            prop_assert!(max_diff(&a, &b, &verify::parameter_z_grid()) > solver::SEPARATION_MIN);
        }
    }

    #[test]
    fn stieltjes_oracle_decays_and_yields_its_moments(q in 1usize..=3, kappa in 0usize..=6, seed: u64) {
        let t = tol();
        let (seq, sigma) = seqkit::random_extendable_seq(q, kappa, 4, seed).unwrap();
        let f = stieltjes(&sigma);
        let report = verify::hn_check(
            &f,
            &seq,
            &verify::default_rays(),
            &verify::default_r_grid(&seq),
            &Thresholds::default(),
            &t,
        )
        .unwrap();
        prop_assert_eq!(report.verdict, Verdict::Decaying);
        for order in &report.orders {
            prop_assert!(order.rays.iter().all(|c| c.verdict == order.verdict), "rays disagree at k = {}", order.k);
        }
        let ex = verify::extract_moments(&f, kappa, &ExtractOptions::default(), &t).unwrap();
        prop_assert!(ex.relative_error(&seq) <= 1e-3);
        prop_assert!(ex.gamma.op_norm() <= 1e-6);
    }

    #[test]
    fn json_roundtrips_are_lossless(q in 1usize..=3, kappa in 1usize..=5, seed: u64) {
        let (seq, sigma, p) = problem(q, kappa, seed);
        prop_assert_eq!(&json_roundtrip(&seq), &seq);
        prop_assert_eq!(&json_roundtrip(&sigma), &sigma);
        let sol = gallery_solution(&p, seed);
        prop_assert_eq!(&json_roundtrip(&*sol), &*sol);
        let v: ResolventPoly = transforms::resolvent_v(&seq, kappa, &tol()).unwrap();
        prop_assert_eq!(&json_roundtrip(&v), &v);
    }
}
