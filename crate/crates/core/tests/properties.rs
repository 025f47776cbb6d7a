use proptest::prelude::*;
use varreg::estimates::{check_stability, construct_source_instance, distance_function, range_condition_defect};
use varreg::linear::{adjoint_consistency_check, operator_norm_estimate};
use varreg::operators::{make_convolution, make_dense, make_radon, make_sampled, RadonGeometry, SampledDesign};
use varreg::regularizers::DiscreteGradient;
use varreg::solvers::{solve_variational, SolverConfig};
use varreg::{inner, rng, DataVector, LinearForwardMap, Regularizer, SolutionVector, Subgradient};

fn gaussian_op(rows: usize, cols: usize, seed: u64) -> LinearForwardMap {
    let mut r = rng::substream(seed, "op", 0);
    let s = 1.0 / (rows as f64).sqrt();
    let m: Vec<Vec<f64>> = (0..rows)
        .map(|_| rng::gaussian_vec(&mut r, cols).into_iter().map(|x| x * s).collect())
        .collect();
    make_dense(&m).unwrap()
}

fn data(m: usize, seed: u64, name: &str) -> DataVector {
    DataVector::new(rng::gaussian_vec(&mut rng::substream(seed, name, 0), m)).unwrap()
}

fn regularizers(n: usize) -> Vec<Regularizer> {
    vec![
        Regularizer::Quadratic,
        Regularizer::L1,
        Regularizer::TvAniso(DiscreteGradient::one_dim(n).unwrap()),
    ]
}

/// A point with ties and zeros, plus a valid subgradient there.
fn point_with_subgradient(j: &Regularizer, n: usize, r: &mut rng::Rng) -> Subgradient {
    let raw = rng::gaussian_vec(r, n);
    let u: Vec<f64> = raw.iter().map(|x| (x * 2.0).round() / 2.0).collect();
    let free = rng::gaussian_vec(r, n.max(2));
    let clip = |x: f64| x.tanh();
    let at = SolutionVector::new(u.clone()).unwrap();
    match j {
        Regularizer::Quadratic => Subgradient::new(at.clone(), at),
        Regularizer::L1 => {
            let p: Vec<f64> = u
                .iter()
                .zip(&free)
                .map(|(x, f)| if *x != 0.0 { x.signum() } else { clip(*f) })
                .collect();
            Subgradient::new(SolutionVector::new(p).unwrap(), at)
        }
        Regularizer::TvAniso(d) => {
            let du = d.apply(&u);
            let q: Vec<f64> = du
                .iter()
                .zip(&free)
                .map(|(x, f)| if *x != 0.0 { x.signum() } else { clip(*f) })
                .collect();
            let p = d.transpose(&q);
            Subgradient::new(SolutionVector::new(p).unwrap(), at).with_dual(q)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_schwarz(a in prop::collection::vec(-1e3f64..1e3, 1..20), s in any::<u64>()) {
        let b = rng::gaussian_vec(&mut rng::from_seed(s), a.len());
        let ab = inner(&a, &b).unwrap();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(ab.abs() <= na * nb * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn power_iteration_is_monotone(seed in any::<u64>(), rows in 2usize..12, cols in 2usize..12) {
        let f = gaussian_op(rows, cols, seed);
        let mut last = 0.0;
        for it in [1, 2, 5, 10, 50, 200] {
            let s = operator_norm_estimate(&f, it, seed).unwrap();
            prop_assert!(s >= last * (1.0 - 1e-12));
            last = s;
        }
    }

    #[test]
    fn shipped_operators_are_adjoint_consistent(seed in any::<u64>(), n in 3usize..24, k in 1usize..4) {
        let kernel = rng::gaussian_vec(&mut rng::from_seed(seed), k);
        for f in [gaussian_op(n, n + 3, seed), make_convolution(&kernel, n).unwrap()] {
            prop_assert!(adjoint_consistency_check(&f, 32, seed).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn full_uniform_sampling_scales_the_norm(seed in any::<u64>(), rows in 1usize..15) {
        let f = gaussian_op(rows, 6, seed);
        let s = make_sampled(&f, &SampledDesign::full(rows).unwrap()).unwrap();
        let u = rng::gaussian_vec(&mut rng::from_seed(seed), 6);
        let a: f64 = s.apply(&u).iter().map(|x| x * x).sum();
        let b: f64 = f.apply(&u).iter().map(|x| x * x).sum::<f64>() / rows as f64;
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn bregman_nonnegative_and_decomposes(seed in any::<u64>(), n in 2usize..12) {
        let mut r = rng::from_seed(seed);
        for j in regularizers(n) {
            let s = point_with_subgradient(&j, n, &mut r);
            let t = point_with_subgradient(&j, n, &mut r);
            let d1 = j.bregman_distance(&t.at, &s).unwrap();
            let d2 = j.bregman_distance(&s.at, &t).unwrap();
            let sym = j.symmetric_bregman(&t, &s).unwrap();
            prop_assert!(d1 >= 0.0 && d2 >= 0.0 && sym >= 0.0);
            prop_assert!((sym - d1 - d2).abs() <= 1e-10 * (1.0 + sym), "{} {sym} {d1} {d2}", j.kind());
            if j == Regularizer::Quadratic {
                let half: f64 = 0.5 * t.at.iter().zip(s.at.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                prop_assert!((d1 - half).abs() <= 1e-12 * (1.0 + half));
            }
        }
    }

    #[test]
    fn prox_residual_is_a_subgradient(x in prop::collection::vec(-5f64..5.0, 1..16), tau in 0.01f64..3.0) {
        for j in [Regularizer::Quadratic, Regularizer::L1] {
            let w = j.prox(tau, &x).unwrap();
            let p: Vec<f64> = x.iter().zip(&w).map(|(a, b)| (a - b) / tau).collect();
            prop_assert!(j.is_subgradient(&w, &p, 1e-8).unwrap().holds);
        }
    }

    #[test]
    fn regularizers_are_convex(seed in any::<u64>(), n in 2usize..16) {
        let mut r = rng::from_seed(seed);
        let a = rng::gaussian_vec(&mut r, n);
        let b = rng::gaussian_vec(&mut r, n);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
        for j in regularizers(n) {
            prop_assert!(j.value(&mid) <= 0.5 * j.value(&a) + 0.5 * j.value(&b) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn radon_adjoint_is_exact(grid in 2usize..12, angles in 1usize..10, offsets in 1usize..14, seed in any::<u64>()) {
        let f = make_radon(&RadonGeometry::uniform(grid, angles, offsets).unwrap());
        prop_assert!(adjoint_consistency_check(&f, 32, seed).unwrap() <= 1e-10);
    }

    #[test]
    fn solutions_are_certified_and_stable(seed in any::<u64>(), m in 4usize..14, n in 4usize..14, alpha in 0.02f64..2.0) {
        let f = gaussian_op(m, n, seed);
        let v = data(m, seed, "v");
        let vt = data(m, seed, "v_tilde");
        let cfg = SolverConfig::default();
        for j in regularizers(n) {
            let s = solve_variational(&f, &v, alpha, &j, &cfg).unwrap();
            prop_assert!(s.optimality_defect <= s.threshold);
            let rep = check_stability(&f, &j, &v, &vt, alpha, &cfg).unwrap();
            prop_assert!(rep.holds, "{}: {rep}", j.kind());
        }
    }

    #[test]
    fn output_is_unique_across_initializations(seed in any::<u64>(), m in 3usize..10, n in 6usize..14, alpha in 0.05f64..1.0) {
        // m < n leaves the minimizer itself non-unique for l1 and TV
        let f = gaussian_op(m, n, seed);
        let v = data(m, seed, "v");
        for j in regularizers(n) {
            let a = solve_variational(&f, &v, alpha, &j, &SolverConfig::default()).unwrap();
            let cfg = SolverConfig { init_scale: 1.0, seed: seed ^ 0x5eed, ..Default::default() };
            let b = solve_variational(&f, &v, alpha, &j, &cfg).unwrap();
            let dfu: f64 = f.apply(&a.u_alpha).iter().zip(f.apply(&b.u_alpha)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let d = j.symmetric_bregman(&a.p_alpha, &b.p_alpha).unwrap();
            prop_assert!(dfu <= 10.0 * cfg.tol, "{}: |F(u1 - u2)| = {dfu:e}", j.kind());
            prop_assert!(d <= 10.0 * cfg.tol, "{}: d_sym = {d:e}", j.kind());
        }
    }

    #[test]
    fn range_condition_witness(seed in 0u64..1000, alpha in 0.01f64..5.0) {
        let f = gaussian_op(12, 8, seed);
        let cfg = SolverConfig::default();
        for j in regularizers(8) {
            let inst = construct_source_instance(&f, &j, seed).unwrap();
            prop_assert!(range_condition_defect(&f, &inst, alpha) <= 10.0 * cfg.tol);
        }
    }

    #[test]
    fn distance_function_is_nonincreasing(seed in 0u64..1000) {
        let f = gaussian_op(6, 10, seed);
        let p = rng::gaussian_vec(&mut rng::substream(seed, "p", 0), 10);
        let cfg = SolverConfig::default();
        let mut last = f64::INFINITY;
        for rho in [0.0, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let d = distance_function(&f, &p, rho, &cfg).unwrap();
            prop_assert!(d <= last + 1e-9);
            last = d;
        }
    }
}
