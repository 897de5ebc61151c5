use num_complex::Complex64;
use proptest::prelude::*;

use anderson_core::cmv::{cmv_spectrum, cmv_truncation, exceptional_check, szego_log_norms, szego_step, Boundary, VerblunskyWindow};
use anderson_core::ensemble::{one_step_bound, sample_window, sample_window_stream, support_constants, DistributionSpec, WordWindow};
use anderson_core::localization::{center_count, dynloc_kernel, eigenrecords_on};
use anderson_core::lyapunov::{avalanche_check_scaled, furstenberg_check, SpectralParameter, AVALANCHE_C};
use anderson_core::mat2::{op_norm, su11_check, Mat2, ScaledMat2};
use anderson_core::schrodinger::{f_n, green_table, product_of, transfer_product, FiniteOperator};
use anderson_core::spectral::{eig_sym_tridiag, thouless_eval, IDSGrid};
use anderson_core::tridiag::sturm_count;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn potentials(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..max_len)
}

fn disk_point() -> impl Strategy<Value = Complex64> {
    (0.0f64..0.97, -3.2f64..3.2).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn scaled_products_stay_unimodular(entries in prop::collection::vec((0.2f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..120)) {
        let mut p = ScaledMat2::<f64>::identity();
        for (a, b, c) in &entries {
            let m = Mat2::new(*a, *b, *c, (1.0 + b * c) / a);
            p = ScaledMat2::from_mat(&m).unwrap().mul(&p).unwrap();
        }
        // det(e^L · body) = 1 means det(body) = e^{−2L}
        let target = (-2.0 * p.logmag).exp();
        prop_assert!((p.body.det() - target).abs() <= 1e-9 * entries.len() as f64 * target.max(1.0));
    }

    #[test]
    fn norm_of_inverse(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0) {
        let m = Mat2::new(a, b, c, d);
        prop_assume!(m.det().abs() > 1e-3);
        let inv = m.inverse().unwrap();
        prop_assert!(op_norm(&m).unwrap() * op_norm(&inv).unwrap() >= 1.0 - 1e-12);
        let s = m.det().abs().sqrt();
        let u = Mat2::new(a / s, b / s, c / s, d / s);
        let (n1, n2) = (op_norm(&u).unwrap(), op_norm(&u.inverse().unwrap()).unwrap());
        prop_assert!((n1 - n2).abs() <= 1e-10 * n1);
    }

    #[test]
    fn scaled_multiplication_is_associative(v in prop::collection::vec(-3.0f64..3.0, 30), e in -4.0f64..4.0) {
        let a = product_of(e, &v[..10]);
        let b = product_of(e, &v[10..20]);
        let c = product_of(e, &v[20..]);
        let left = c.mul(&b).unwrap().mul(&a).unwrap();
        let right = c.mul(&b.mul(&a).unwrap()).unwrap();
        prop_assert!((left.logmag - right.logmag).abs() <= 1e-12 * left.logmag.abs().max(1.0));
    }

    #[test]
    fn szego_steps_are_su11(alpha in disk_point(), t in -3.2f64..3.2) {
        let (_, m) = szego_step(Complex64::from_polar(1.0, t), alpha).unwrap();
        prop_assert!(su11_check(&m));
    }

    #[test]
    fn sampling_is_split_invariant(origin in -1000i64..1000, len in 2i64..200, cut in 1i64..199, seed: u64) {
        prop_assume!(cut < len);
        let d = DistributionSpec::real_atoms(&[(-1.0, 0.2), (0.5, 0.5), (2.0, 0.3)]).unwrap();
        let whole: WordWindow<f64> = sample_window(&d, origin, len, seed).unwrap();
        let a: WordWindow<f64> = sample_window(&d, origin, cut, seed).unwrap();
        let b: WordWindow<f64> = sample_window(&d, origin + cut, len - cut, seed).unwrap();
        let joined: Vec<u64> = a.values.iter().chain(&b.values).map(|x| x.to_bits()).collect();
        prop_assert_eq!(joined, whole.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert!(whole.values.iter().all(|x| [-1.0, 0.5, 2.0].contains(x)));
    }

    #[test]
    fn transfer_determinant_is_one(v in potentials(300), e in -5.0f64..5.0) {
        let w = WordWindow::from_values(0, v.clone());
        for n in [1, v.len() / 2 + 1, v.len()] {
            let m = transfer_product(e, &w, 0, n as i64).unwrap();
            let body_det = m.body.det();
            let target = (-2.0 * m.logmag).exp();
            prop_assert!((body_det - target).abs() <= 1e-9 * n as f64 * target.max(1.0));
        }
    }

    #[test]
    fn f_n_is_lipschitz(seed: u64, n in 1i64..=12, e in -3.0f64..3.0, de in -1e-3f64..1e-3) {
        let d = DistributionSpec::bernoulli(0.0, 1.0).unwrap();
        let kappa = support_constants(&d).unwrap().kappa;
        let (e1, e2) = (e, (e + de).clamp(-kappa, kappa));
        let gamma = one_step_bound(&d).unwrap();
        let w: WordWindow<f64> = sample_window(&d, 0, n, seed).unwrap();
        let gap = (f_n(e1, &w, 0, n).unwrap() - f_n(e2, &w, 0, n).unwrap()).abs();
        prop_assert!(gap <= gamma.powi(n as i32 - 1) * (e1 - e2).abs() + 1e-14);
    }

    #[test]
    fn green_bounded_by_transfer_norms(v in potentials(40), e in -5.0f64..5.0) {
        let n = v.len() as i64;
        let w = WordWindow::from_values(0, v.clone());
        let Ok(t) = green_table(e, &w, 0, n - 1) else { return Ok(()) };
        let op = FiniteOperator::restrict(&w, 0, n - 1).unwrap();
        let lu = op.shifted_lu(e);
        let log_det = lu.det().abs().ln();
        for j in 0..n {
            for k in j..n {
                let left = if j == 0 { 0.0 } else { transfer_product(e, &w, 0, j).unwrap().logmag };
                let right = if k == n - 1 { 0.0 } else { transfer_product(e, &w, k + 1, n - 1 - k).unwrap().logmag };
                let g = t.get(j, k).abs();
                prop_assert!(g.ln() <= left + right - log_det + 1e-9, "({j},{k})");
            }
        }
    }

    #[test]
    fn avalanche_reversal_with_transpose(seed: u64, n in 3usize..8) {
        let d = DistributionSpec::bernoulli(0.0, 3.0).unwrap();
        let w: WordWindow<f64> = sample_window(&d, 0, (n * 15) as i64, seed).unwrap();
        let chain: Vec<ScaledMat2<f64>> = w.values.chunks(15).map(|b| product_of(1.5, b)).collect();
        let lambda = chain.iter().map(|m| m.logmag).fold(f64::INFINITY, f64::min).exp();
        let a = avalanche_check_scaled(&chain, lambda, AVALANCHE_C).unwrap();
        let flipped: Vec<ScaledMat2<f64>> = chain.iter().rev().map(|m| m.transpose()).collect();
        let b = avalanche_check_scaled(&flipped, lambda, AVALANCHE_C).unwrap();
        let with_identity: Vec<ScaledMat2<f64>> = chain.iter().map(|m| ScaledMat2::identity().mul(m).unwrap()).collect();
        let c = avalanche_check_scaled(&with_identity, lambda, AVALANCHE_C).unwrap();
        prop_assert!((a.lhs - b.lhs).abs() <= 1e-9 && (a.lhs - c.lhs).abs() <= 1e-9);
    }

    #[test]
    fn sturm_counts_match_eigenvalues(v in potentials(60), e in -5.0f64..5.0) {
        let off = vec![1.0; v.len() - 1];
        let s = eig_sym_tridiag(&v, &off, None, false).unwrap();
        let below = s.values.iter().filter(|&&x| x < e).count();
        let near = s.values.iter().any(|x| (x - e).abs() < 1e-9);
        prop_assume!(!near);
        prop_assert_eq!(sturm_count(&v, &off, e), below);
    }

    #[test]
    fn truncations_interlace(v in prop::collection::vec(-3.0f64..3.0, 2..60)) {
        let n = v.len();
        let big = eig_sym_tridiag(&v, &vec![1.0; n - 1], None, false).unwrap().values;
        let small = eig_sym_tridiag(&v[..n - 1], &vec![1.0; n - 2], None, false).unwrap().values;
        // strict in exact arithmetic; gaps can fall below the eigenvalue accuracy
        let tol = 1e-10;
        for k in 0..n - 1 {
            prop_assert!(big[k] <= small[k] + tol && small[k] <= big[k + 1] + tol);
        }
    }

    #[test]
    fn thouless_average_is_concave_off_spectrum(spec in prop::collection::vec(-2.0f64..2.0, 1..50), x in 2.1f64..6.0, h in 1e-3f64..0.1) {
        let mut spec = spec;
        spec.sort_by(f64::total_cmp);
        for e in [x, -x] {
            let f = |t: f64| thouless_eval(t, &spec).unwrap().value;
            let second = (f(e + h) - 2.0 * f(e) + f(e - h)) / (h * h);
            prop_assert!(second <= 1e-9 * (1.0 + 1.0 / (h * h)));
        }
        let grid = IDSGrid::from_spectrum(&spec, (0..41).map(|i| -3.0 + 0.15 * i as f64).collect());
        prop_assert!(grid.values.windows(2).all(|p| p[0] <= p[1]));
        prop_assert_eq!(*grid.values.last().unwrap(), 1.0);
    }

    #[test]
    fn furstenberg_verdict_ignores_atom_order(mut atoms in prop::collection::vec(-2.0f64..2.0, 2..5), e in -3.0f64..3.0) {
        atoms.dedup();
        prop_assume!(atoms.len() >= 2);
        let a = furstenberg_check(&DistributionSpec::uniform_atoms(&atoms).unwrap(), SpectralParameter::Energy(e)).unwrap();
        atoms.reverse();
        atoms.rotate_left(1);
        let b = furstenberg_check(&DistributionSpec::uniform_atoms(&atoms).unwrap(), SpectralParameter::Energy(e)).unwrap();
        prop_assert_eq!((a.noncompact, a.strongly_irreducible, a.contracting), (b.noncompact, b.strongly_irreducible, b.contracting));
    }

    #[test]
    fn cmv_truncations_are_unitary(alphas in prop::collection::vec(disk_point(), 3..30), t1 in -3.2f64..3.2, t2 in -3.2f64..3.2) {
        let w = VerblunskyWindow::new(-1, alphas.clone(), false).unwrap();
        let hi = alphas.len() as i64 - 3;
        let t = cmv_truncation(&w, 0, hi, Boundary::Phase(Complex64::from_polar(1.0, t1)), Boundary::Phase(Complex64::from_polar(1.0, t2))).unwrap();
        prop_assert!(t.unitarity_residual() <= 1e-12);
    }

    #[test]
    fn szego_and_su11_norms_agree(alphas in prop::collection::vec(disk_point(), 1..40), t in -3.2f64..3.2) {
        let z = Complex64::from_polar(1.0, t);
        let s = szego_log_norms(z, &alphas, &[alphas.len()])[0];
        let mut m = ScaledMat2::<Complex64>::identity();
        for a in &alphas {
            m = ScaledMat2::from_mat(&szego_step(z, *a).unwrap().1).unwrap().mul(&m).unwrap();
        }
        prop_assert!((s - m.logmag).abs() <= 1e-12 * s.abs().max(1.0));
    }

    #[test]
    fn exceptional_verdicts_are_rotation_invariant(atoms in prop::collection::vec(disk_point(), 2..5), theta in -3.2f64..3.2) {
        let d = DistributionSpec::uniform_complex_atoms(&atoms);
        prop_assume!(d.is_ok());
        let Ok(a) = exceptional_check(&d.unwrap()) else { return Ok(()) };
        let rot = Complex64::from_polar(1.0, theta);
        let turned: Vec<Complex64> = atoms.iter().map(|x| x * rot).collect();
        let b = exceptional_check(&DistributionSpec::uniform_complex_atoms(&turned).unwrap()).unwrap();
        prop_assert_eq!((a.condition_circle_line, a.condition_ratio_set), (b.condition_circle_line, b.condition_ratio_set));
    }
}

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn cmv_spectrum_points_on_circle(alphas in prop::collection::vec(disk_point(), 4..20), t2 in -3.2f64..3.2) {
        let w = VerblunskyWindow::new(0, alphas.clone(), false).unwrap();
        let hi = alphas.len() as i64 - 2;
        let s = cmv_spectrum(&w, 1, hi, Boundary::Phase(Complex64::new(1.0, 0.0)), Boundary::Phase(Complex64::from_polar(1.0, t2)), 4, true).unwrap();
        prop_assert_eq!(s.points.len(), hi as usize);
        prop_assert!(s.points.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
        prop_assert!(s.max_residual <= 1e-8);
    }

    #[test]
    fn kernel_invariants(seed: u64, half in 5i64..40) {
        let d = DistributionSpec::bernoulli(0.0, 4.0).unwrap();
        let w: WordWindow<f64> = sample_window_stream(&d, -half, 2 * half, seed, 3).unwrap();
        let recs = eigenrecords_on(&w, -half, half - 1).unwrap();
        let k = dynloc_kernel(&recs, -half, half - 1).unwrap();
        prop_assert!(k.completeness_residual <= 1e-9);
        prop_assert!(k.dominated);
        let counts = center_count(&recs, &(0..=half).collect::<Vec<_>>());
        prop_assert!(counts.rows.windows(2).all(|p| p[0].count <= p[1].count));
        prop_assert_eq!(counts.rows.last().unwrap().count, recs.len());
    }
}
