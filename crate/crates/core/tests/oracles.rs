//! Solver and operator outputs against dense linear-algebra and brute-force
//! references.

use nalgebra::{DMatrix, DVector};
use varreg::bregman_iteration::bregman_iterate;
use varreg::estimates::{construct_source_instance, solve_source_element};
use varreg::linear::{operator_norm_estimate, POWER_ITERATIONS};
use varreg::operators::{identity, make_convolution, make_dense, make_radon, RadonGeometry};
use varreg::regularizers::DiscreteGradient;
use varreg::solvers::{solve_variational, SolverConfig};
use varreg::{rng, DataVector, LinearForwardMap, Regularizer};

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::substream(seed, "oracle", 0);
    (0..rows).map(|_| rng::gaussian_vec(&mut r, cols)).collect()
}

fn to_na(m: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j])
}

fn dense_of(f: &LinearForwardMap) -> DMatrix<f64> {
    let n = f.in_dim();
    let mut out = DMatrix::zeros(f.out_dim(), n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        out.set_column(j, &DVector::from_vec(f.apply(&e)));
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn tikhonov_matches_normal_equations() {
    for seed in 0..10 {
        let m = random_matrix(7, 5, seed);
        let f = make_dense(&m).unwrap();
        let v: Vec<f64> = rng::gaussian_vec(&mut rng::substream(seed, "data", 0), 7);
        let alpha = 0.3;
        let a = to_na(&m);
        let lhs = a.transpose() * &a + DMatrix::identity(5, 5) * alpha;
        let expected = lhs.lu().solve(&(a.transpose() * DVector::from_vec(v.clone()))).unwrap();
        let s = solve_variational(
            &f,
            &DataVector::new(v).unwrap(),
            alpha,
            &Regularizer::Quadratic,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(max_abs_diff(&s.u_alpha, expected.as_slice()) <= 1e-7, "seed {seed}");
    }
}

#[test]
fn tikhonov_frozen_example() {
    // (A^T A + I/2)^{-1} A^T v for A = [[1,2],[3,4],[5,6]], v = [1,0,1]
    let f = make_dense(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
    let v = DataVector::new(vec![1.0, 0.0, 1.0]).unwrap();
    let s = solve_variational(&f, &v, 0.5, &Regularizer::Quadratic, &SolverConfig::default()).unwrap();
    let a = to_na(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
    let oracle = (a.transpose() * &a + DMatrix::identity(2, 2) * 0.5)
        .lu()
        .solve(&(a.transpose() * DVector::from_vec(vec![1.0, 0.0, 1.0])))
        .unwrap();
    let frozen = [-52.0 / 279.0, 80.0 / 279.0];
    assert!(max_abs_diff(oracle.as_slice(), &frozen) <= 1e-14);
    assert!(max_abs_diff(&s.u_alpha, &frozen) <= 1e-8);
}

/// Lasso minimizer by enumerating sign patterns and checking the KKT system.
fn lasso_brute_force(a: &DMatrix<f64>, v: &DVector<f64>, alpha: f64) -> Vec<f64> {
    let n = a.ncols();
    let mut found = None;
    for code in 0..3usize.pow(n as u32) {
        let signs: Vec<i32> = (0..n).map(|i| (code / 3usize.pow(i as u32) % 3) as i32 - 1).collect();
        let supp: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        let mut u = vec![0.0; n];
        if !supp.is_empty() {
            let a_s = a.select_columns(&supp);
            let s = DVector::from_iterator(supp.len(), supp.iter().map(|&i| f64::from(signs[i])));
            let Some(x) = (a_s.transpose() * &a_s).lu().solve(&(a_s.transpose() * v - s * alpha)) else {
                continue;
            };
            if supp.iter().enumerate().any(|(k, &i)| x[k] * f64::from(signs[i]) <= 0.0) {
                continue;
            }
            for (k, &i) in supp.iter().enumerate() {
                u[i] = x[k];
            }
        }
        let g = a.transpose() * (v - a * DVector::from_vec(u.clone()));
        if (0..n).filter(|i| signs[*i] == 0).all(|i| g[i].abs() <= alpha + 1e-12) {
            assert!(found.is_none(), "lasso solution not unique");
            found = Some(u);
        }
    }
    found.expect("some sign pattern satisfies KKT")
}

#[test]
fn lasso_matches_sign_pattern_enumeration() {
    for seed in 0..20 {
        let m = random_matrix(6, 4, seed);
        let v: Vec<f64> = rng::gaussian_vec(&mut rng::substream(seed, "data", 0), 6);
        let alpha = 0.2 + 0.1 * (seed % 5) as f64;
        let expected = lasso_brute_force(&to_na(&m), &DVector::from_vec(v.clone()), alpha);
        let f = make_dense(&m).unwrap();
        let s = solve_variational(
            &f,
            &DataVector::new(v).unwrap(),
            alpha,
            &Regularizer::L1,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(
            max_abs_diff(&s.u_alpha, &expected) <= 1e-7,
            "seed {seed}: {:?} vs {expected:?}",
            s.u_alpha
        );
    }
}

/// 1-D TV denoising by projected gradient on the dual box.
fn tv_denoise_dual(v: &[f64], alpha: f64) -> Vec<f64> {
    let n = v.len();
    let d = DiscreteGradient::one_dim(n).unwrap();
    let mut q = vec![0.0; n - 1];
    for _ in 0..200_000 {
        let u: Vec<f64> = v.iter().zip(d.transpose(&q)).map(|(a, b)| a - b).collect();
        let g = d.apply(&u);
        for (qi, gi) in q.iter_mut().zip(g) {
            *qi = (*qi + 0.25 * gi).clamp(-alpha, alpha);
        }
    }
    v.iter().zip(d.transpose(&q)).map(|(a, b)| a - b).collect()
}

#[test]
fn tv_denoising_matches_dual_projection() {
    for seed in 0..5 {
        let v: Vec<f64> = rng::gaussian_vec(&mut rng::substream(seed, "data", 0), 8);
        let alpha = 0.3;
        let expected = tv_denoise_dual(&v, alpha);
        let j = Regularizer::TvAniso(DiscreteGradient::one_dim(8).unwrap());
        let s = solve_variational(
            &identity(8),
            &DataVector::new(v).unwrap(),
            alpha,
            &j,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(max_abs_diff(&s.u_alpha, &expected) <= 1e-6, "seed {seed}");
    }
}

#[test]
fn tv_two_level_step_frozen() {
    // a step of height 1 on 2 + 2 samples shrinks by 2 alpha / 2 on each side
    let v = DataVector::new(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
    let j = Regularizer::TvAniso(DiscreteGradient::one_dim(4).unwrap());
    let s = solve_variational(&identity(4), &v, 0.2, &j, &SolverConfig::default()).unwrap();
    assert!(max_abs_diff(&s.u_alpha, &[0.1, 0.1, 0.9, 0.9]) <= 1e-7);
    assert!(max_abs_diff(&s.u_alpha, &tv_denoise_dual(&v, 0.2)) <= 1e-7);
}

#[test]
fn operator_norm_matches_svd() {
    for seed in 0..5 {
        let m = random_matrix(9, 6, seed);
        let sv = to_na(&m).singular_values().max();
        let est = operator_norm_estimate(&make_dense(&m).unwrap(), POWER_ITERATIONS, seed).unwrap();
        assert!((est - sv).abs() <= 1e-6 * sv, "{est} vs {sv}");
    }
    let conv = make_convolution(&[0.25, 0.5, 0.25], 16).unwrap();
    let sv = dense_of(&conv).singular_values().max();
    let est = operator_norm_estimate(&conv, POWER_ITERATIONS, 0).unwrap();
    assert!((est - sv).abs() <= 1e-8);
    assert!((sv - 1.0).abs() <= 1e-12);
}

#[test]
fn convolution_of_a_delta_is_the_centred_kernel() {
    let k = [1.0, 2.0, 3.0, 4.0];
    let n = 9;
    let f = make_convolution(&k, n).unwrap();
    let c = (k.len() - 1) / 2;
    for p in 0..n {
        let mut e = vec![0.0; n];
        e[p] = 1.0;
        let out = f.apply(&e);
        let mut expected = vec![0.0; n];
        for (j, kj) in k.iter().enumerate() {
            expected[(p + j + n - c) % n] += kj;
        }
        assert_eq!(out, expected);
    }
}

#[test]
fn adjoints_are_dense_transposes() {
    let ops = [
        make_convolution(&[0.1, -0.7, 2.0], 11).unwrap(),
        make_radon(&RadonGeometry::uniform(8, 6, 10).unwrap()),
        make_dense(&random_matrix(5, 4, 3)).unwrap(),
    ];
    for f in &ops {
        let a = dense_of(f);
        for i in 0..f.out_dim() {
            let mut e = vec![0.0; f.out_dim()];
            e[i] = 1.0;
            let row = f.adjoint(&e);
            assert!(max_abs_diff(&row, a.row(i).transpose().as_slice()) <= 1e-14);
        }
    }
}

#[test]
fn bregman_iteration_reaches_pseudoinverse() {
    let m = random_matrix(4, 9, 11);
    let f = make_dense(&m).unwrap();
    let v: Vec<f64> = rng::gaussian_vec(&mut rng::substream(11, "data", 0), 4);
    let pinv = to_na(&m).pseudo_inverse(1e-14).unwrap() * DVector::from_vec(v.clone());
    let t = bregman_iterate(
        &f,
        &DataVector::new(v).unwrap(),
        1.0,
        &Regularizer::Quadratic,
        60,
        &SolverConfig::default(),
        None,
    )
    .unwrap();
    assert!(max_abs_diff(&t.last().u, pinv.as_slice()) <= 1e-6);
}

#[test]
fn source_element_is_minimum_norm() {
    let m = random_matrix(8, 5, 2);
    let f = make_dense(&m).unwrap();
    let inst = construct_source_instance(&f, &Regularizer::Quadratic, 4).unwrap();
    let (z, defect) = solve_source_element(&f, &inst.p_star.p, &SolverConfig::default()).unwrap();
    let at = to_na(&m).transpose();
    let z_min = at.pseudo_inverse(1e-14).unwrap() * DVector::from_column_slice(&inst.p_star.p);
    assert!(defect <= 1e-8);
    assert!(max_abs_diff(&z, z_min.as_slice()) <= 1e-7);
}
