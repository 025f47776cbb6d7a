use super::{check_problem, finish, initial_guess, stopping_threshold, RegularizedSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::linear::{conjugate_gradient, DataVector, LinearForwardMap};
use crate::regularizers::{Regularizer, DEFAULT_MEMBERSHIP_TOL};

/// Quadratic regularization: conjugate gradients on `(F*F + alpha I) u = F* v`.
///
/// The normal-equation residual is exactly the optimality defect for
/// `p_alpha = u_alpha`.
pub fn solve_tikhonov_exact(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<RegularizedSolution> {
    check_problem(f, v, alpha, cfg)?;
    let rhs = f.adjoint(v);
    let threshold = stopping_threshold(f, v, cfg.tol);
    let x0 = initial_guess(f.in_dim(), cfg);
    let out = conjugate_gradient(
        |x| {
            let mut y = f.normal(x);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi += alpha * xi;
            }
            y
        },
        &rhs,
        Some(&x0),
        threshold,
        cfg.max_iters,
    );
    if !out.converged {
        return Err(Error::NotConverged {
            solver: "conjugate gradients",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    let p = out.x.clone();
    finish(
        f,
        v,
        alpha,
        &Regularizer::Quadratic,
        out.x,
        p,
        None,
        DEFAULT_MEMBERSHIP_TOL,
        out.residual,
        threshold,
        out.iterations,
        Vec::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{identity, make_dense};

    #[test]
    fn scalar_examples() {
        let cfg = SolverConfig::default();
        let s = solve_tikhonov_exact(&identity(1), &DataVector::new(vec![2.0]).unwrap(), 1.0, &cfg).unwrap();
        assert!((s.u_alpha[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.p_alpha.p, s.u_alpha);
        let f = make_dense(&[vec![2.0]]).unwrap();
        let s = solve_tikhonov_exact(&f, &DataVector::new(vec![2.0]).unwrap(), 2.0, &cfg).unwrap();
        assert!((s.u_alpha[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let f = make_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 3.0], vec![4.0, 0.0, 1.0]]).unwrap();
        let cfg = SolverConfig {
            max_iters: 1,
            tol: 1e-14,
            ..Default::default()
        };
        let v = DataVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        match solve_tikhonov_exact(&f, &v, 1e-3, &cfg) {
            Err(Error::NotConverged { residual, .. }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
