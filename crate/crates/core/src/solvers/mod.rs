//! Minimizers of `|Fu - v|^2 / 2 + alpha J(u)` with optimality certificates.

mod fista;
mod polish;
mod primal_dual;
mod tikhonov;

pub use fista::solve_fista;
pub use primal_dual::solve_primal_dual;
pub use tikhonov::solve_tikhonov_exact;

use crate::error::{invalid, Error, Result};
use crate::linear::{check_dim, norm, norm_sq, sub, DataVector, LinearForwardMap, SolutionVector};
use crate::regularizers::{Regularizer, Subgradient};
use crate::rng;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative optimality target: a solve stops once the defect is at most
    /// `tol * (1 + |F* v|)`.
    pub tol: f64,
    /// Fraction of the largest admissible step actually taken.
    pub step_safety: f64,
    pub seed: u64,
    /// Scale of a seeded Gaussian perturbation of the zero initial guess.
    pub init_scale: f64,
    /// Keep the per-iteration objective (or gap) in the solution.
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            tol: 1e-8,
            step_safety: 1.0,
            seed: 0,
            init_scale: 0.0,
            record_history: false,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid("tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if !(self.step_safety > 0.0 && self.step_safety <= 1.0) {
            return Err(invalid("step_safety", "must lie in (0, 1]"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(invalid("init_scale", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedSolution {
    pub u_alpha: SolutionVector,
    pub p_alpha: Subgradient,
    pub alpha: f64,
    /// `|F u_alpha - v|^2 / 2`
    pub data_residual: f64,
    pub j_value: f64,
    /// Distance of `-F*(F u_alpha - v)` from `alpha dJ(u_alpha)`.
    pub optimality_defect: f64,
    /// Stopping threshold the defect was driven below.
    pub threshold: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl RegularizedSolution {
    pub fn objective(&self) -> f64 {
        self.data_residual + self.alpha * self.j_value
    }
}

/// Dispatches to the exact quadratic solver, FISTA or the primal-dual
/// method according to the kind of `j`.
pub fn solve_variational(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    j: &Regularizer,
    cfg: &SolverConfig,
) -> Result<RegularizedSolution> {
    match j {
        Regularizer::Quadratic => solve_tikhonov_exact(f, v, alpha, cfg),
        Regularizer::L1 => solve_fista(f, v, alpha, j, cfg),
        Regularizer::TvAniso(_) => solve_primal_dual(f, v, alpha, j, cfg),
    }
}

pub(crate) fn check_problem(f: &LinearForwardMap, v: &DataVector, alpha: f64, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", "must be positive"));
    }
    check_dim(f.out_dim(), v.dim())
}

/// `tol * (1 + |F* v|)`
pub(crate) fn stopping_threshold(f: &LinearForwardMap, v: &[f64], tol: f64) -> f64 {
    tol * (1.0 + norm(&f.adjoint(v)))
}

pub(crate) fn initial_guess(n: usize, cfg: &SolverConfig) -> Vec<f64> {
    if cfg.init_scale == 0.0 {
        vec![0.0; n]
    } else {
        let mut r = rng::substream(cfg.seed, "init", 0);
        rng::gaussian_vec(&mut r, n)
            .into_iter()
            .map(|x| cfg.init_scale * x)
            .collect()
    }
}

/// Wraps `(u, p)` into a solution, certifying `p` in `dJ(u)` to the
/// tolerance `membership_tol`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    f: &LinearForwardMap,
    v: &[f64],
    alpha: f64,
    j: &Regularizer,
    u: Vec<f64>,
    p: Vec<f64>,
    dual: Option<Vec<f64>>,
    membership_tol: f64,
    defect: f64,
    threshold: f64,
    iterations: usize,
    history: Vec<f64>,
) -> Result<RegularizedSolution> {
    let data_residual = 0.5 * norm_sq(&sub(&f.apply(&u), v));
    let j_value = j.value(&u);
    let u_alpha = SolutionVector::from_raw(u);
    let mut p_alpha = Subgradient::new(SolutionVector::from_raw(p), u_alpha.clone()).with_tol(membership_tol);
    if let Some(q) = dual {
        p_alpha = p_alpha.with_dual(q);
    }
    let check = j.check_subgradient(&p_alpha)?;
    if !check.holds {
        return Err(Error::NotASubgradient {
            violation: check.max_violation,
            tol: membership_tol,
        });
    }
    Ok(RegularizedSolution {
        u_alpha,
        p_alpha,
        alpha,
        data_residual,
        j_value,
        optimality_defect: defect,
        threshold,
        iterations,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::identity;
    use crate::regularizers::DiscreteGradient;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig::default().with_tol(0.0).validate().is_err());
        let cfg = SolverConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            step_safety: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dispatch_by_kind() {
        let f = identity(3);
        let v = DataVector::new(vec![2.0, 0.5, -1.0]).unwrap();
        let cfg = SolverConfig::default();
        let q = solve_variational(&f, &v, 1.0, &Regularizer::Quadratic, &cfg).unwrap();
        assert_eq!(q.u_alpha.as_slice(), &[1.0, 0.25, -0.5]);
        let l = solve_variational(&f, &v, 1.0, &Regularizer::L1, &cfg).unwrap();
        for (a, b) in l.u_alpha.iter().zip([1.0, 0.0, 0.0]) {
            assert!((a - b).abs() <= 1e-8);
        }
        let tv = Regularizer::TvAniso(DiscreteGradient::one_dim(3).unwrap());
        let t = solve_variational(&f, &v, 0.01, &tv, &cfg).unwrap();
        assert!(t.optimality_defect <= t.threshold);
        assert!(solve_variational(&f, &v, 0.0, &Regularizer::L1, &cfg).is_err());
    }
}
