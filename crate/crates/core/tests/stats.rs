mod common;

use common::checks::{bh_mismatches, chi2_error, normals, pearson_error, random_problem};
use common::oracles::{normal_equations, partial_recursive, pearson_direct};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vgembed::stats::{
    bh_correct, chi2_sf, loglik_ratio_test, ols_fit, partial_correlation, pearson, Matrix,
};

#[test]
fn ols_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let k = rng.random_range(1..=10);
        let n = rng.random_range(k + 5..=200);
        let (x, y, terms) = random_problem(&mut rng, n, k);
        let fit = ols_fit(&x, &y, &terms).unwrap();
        let oracle = normal_equations(&x.data, n, k, &y);
        for (a, b) in fit.beta.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
        let xtr = x.tmul_vec(&fit.residuals);
        let xtr_norm = xtr.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x_norm = x.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(xtr_norm < 1e-8 * x_norm * y_norm);
        assert_eq!(fit.aic, 2.0 * fit.k as f64 - 2.0 * fit.loglik);
    }
}

#[test]
fn fitted_slope_sign_follows_generator() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200;
    let s = normals(&mut rng, n);
    let noise = normals(&mut rng, n);
    let y: Vec<f64> = s.iter().zip(&noise).map(|(s, e)| 1.0 - 0.5 * s + e).collect();
    let x = Matrix::from_columns(&[&vec![1.0; n], &s]);
    let fit = ols_fit(&x, &y, &["intercept".into(), "sim".into()]).unwrap();
    assert!(fit.beta[1] < 0.0 && fit.p[1] < 1e-6);
}

#[test]
fn pearson_matches_direct_formula() {
    let err = pearson_error(50, 11);
    assert!(err < 1e-12, "{err}");
}

#[test]
fn partial_matches_recursion_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = 40;
        let z = normals(&mut rng, n);
        let x: Vec<f64> = z.iter().map(|v| 0.6 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = z.iter().zip(&x).map(|(a, b)| 0.4 * a + 0.3 * b + rng.sample::<f64, _>(StandardNormal)).collect();
        let oracle = partial_recursive(pearson_direct(&x, &y), pearson_direct(&x, &z), pearson_direct(&y, &z));
        let got = partial_correlation(&x, &y, &[&z]).unwrap();
        assert!((got.r - oracle).abs() < 1e-10, "{} vs {oracle}", got.r);
        assert_eq!(got.df, n - 3);
    }
}

#[test]
fn orthogonal_controls_leave_r_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 30;
    let x = normals(&mut rng, n);
    let y = normals(&mut rng, n);
    // Gram–Schmidt a random vector against 1, x and y
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in [vec![1.0; n], x.clone(), y.clone()] {
        basis.push(v);
    }
    let mut c = normals(&mut rng, n);
    for _ in 0..2 {
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for b in &basis {
            let mut b = b.clone();
            for o in &ortho {
                let d: f64 = b.iter().zip(o).map(|(p, q)| p * q).sum();
                b.iter_mut().zip(o).for_each(|(p, q)| *p -= d * q);
            }
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            b.iter_mut().for_each(|v| *v /= norm);
            ortho.push(b);
        }
        for o in &ortho {
            let d: f64 = c.iter().zip(o).map(|(p, q)| p * q).sum();
            c.iter_mut().zip(o).for_each(|(p, q)| *p -= d * q);
        }
    }
    let plain = pearson(&x, &y).unwrap().r;
    let partial = partial_correlation(&x, &y, &[&c]).unwrap().r;
    assert!((plain - partial).abs() < 1e-10);
}

#[test]
fn chi2_sf_matches_quadrature() {
    let err = chi2_error();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn chi2_sf_monotone_and_bounded() {
    for df in 1..=30 {
        let mut prev = 1.0;
        for i in 0..=100 {
            let p = chi2_sf(i as f64 * 5.0, df).unwrap();
            assert!((0.0..=1.0).contains(&p) && p <= prev + 1e-15);
            prev = p;
        }
    }
}

#[test]
fn bh_matches_brute_force() {
    assert_eq!(bh_mismatches(1000, 13), 0);
}

proptest! {
    #[test]
    fn pearson_affine_invariant(
        xs in prop::collection::vec(-100.0f64..100.0, 5..40),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys = normals(&mut rng, xs.len());
        let base = pearson(&xs, &ys);
        prop_assume!(base.is_ok());
        let scaled: Vec<f64> = xs.iter().map(|v| a * v + b).collect();
        let r = pearson(&scaled, &ys).unwrap().r;
        prop_assert!((r - base.unwrap().r).abs() < 1e-12);
    }

    #[test]
    fn bh_monotone(ps in prop::collection::vec(0.0f64..=1.0, 1..50)) {
        let flags = bh_correct(&ps, 0.05).unwrap();
        for i in 0..ps.len() {
            for j in 0..ps.len() {
                if ps[i] <= ps[j] && flags[j] {
                    prop_assert!(flags[i]);
                }
            }
        }
    }

    #[test]
    fn adding_a_column_never_lowers_loglik(seed in any::<u64>(), k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let (x, y, terms) = random_problem(&mut rng, n, k + 1);
        let reduced_cols: Vec<Vec<f64>> = (0..k).map(|j| x.column(j)).collect();
        let refs: Vec<&[f64]> = reduced_cols.iter().map(|c| c.as_slice()).collect();
        let reduced = ols_fit(&Matrix::from_columns(&refs), &y, &terms[..k]).unwrap();
        let full = ols_fit(&x, &y, &terms).unwrap();
        let test = loglik_ratio_test(&full, &reduced).unwrap();
        prop_assert!(2.0 * (full.loglik - reduced.loglik) >= -1e-9);
        prop_assert_eq!(test.df, 1);
        prop_assert!((0.0..=1.0).contains(&test.p));
    }
}
