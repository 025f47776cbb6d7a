//! Bregman iteration and two-step debiasing.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linear::{check_dim, conjugate_gradient, norm, norm_sq, sub, DataVector, LinearForwardMap, SolutionVector};
use crate::regularizers::{Regularizer, Subgradient};
use crate::solvers::{solve_fista, solve_variational, RegularizedSolution, SolverConfig};

/// Residual factor of the discrepancy principle.
pub const DISCREPANCY_FACTOR: f64 = 1.1;

#[derive(Clone, Debug, PartialEq)]
pub struct BregmanStep {
    pub k: usize,
    pub u: SolutionVector,
    /// `p^k` from the additive subgradient recursion.
    pub p: Subgradient,
    /// Data `v^k` after the update that follows `u^k`.
    pub v: DataVector,
    /// `|F u^k - v|`
    pub residual: f64,
    pub j_value: f64,
    /// `d_J^{p^k}(u*, u^k)` when a reference is given.
    pub bregman_to_ref: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BregmanTrace {
    pub v0: DataVector,
    pub alpha: f64,
    pub steps: Vec<BregmanStep>,
    /// Set when the discrepancy principle ended the run early.
    pub stopped_by_discrepancy: bool,
}

impl BregmanTrace {
    pub fn last(&self) -> &BregmanStep {
        self.steps.last().expect("trace has at least one step")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,residual,J_value,bregman_to_ref\n");
        for s in &self.steps {
            let b = s.bregman_to_ref.map(|x| format!("{x:e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:e},{:e},{}", s.k, s.residual, s.j_value, b);
        }
        out
    }
}

/// Runs `k_max` Bregman steps `u^{k+1} in argmin |Fu - v^k|^2/2 + alpha J(u)`,
/// `v^{k+1} = v^k + v - F u^{k+1}`.
pub fn bregman_iterate(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    j: &Regularizer,
    k_max: usize,
    cfg: &SolverConfig,
    reference: Option<&SolutionVector>,
) -> Result<BregmanTrace> {
    run(f, v, alpha, j, k_max, cfg, reference, None)
}

/// As [`bregman_iterate`], stopping at the first `k` with
/// `|F u^k - v| <= 1.1 delta`.
#[allow(clippy::too_many_arguments)]
pub fn bregman_iterate_discrepancy(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    j: &Regularizer,
    k_max: usize,
    delta: f64,
    cfg: &SolverConfig,
    reference: Option<&SolutionVector>,
) -> Result<BregmanTrace> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(crate::error::invalid("delta", "must be nonnegative"));
    }
    run(f, v, alpha, j, k_max, cfg, reference, Some(delta))
}

#[allow(clippy::too_many_arguments)]
fn run(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    j: &Regularizer,
    k_max: usize,
    cfg: &SolverConfig,
    reference: Option<&SolutionVector>,
    delta: Option<f64>,
) -> Result<BregmanTrace> {
    if k_max == 0 {
        return Err(crate::error::invalid("K", "must be at least 1"));
    }
    if let Some(r) = reference {
        check_dim(f.in_dim(), r.dim())?;
    }
    let inner = SolverConfig {
        tol: cfg.tol / 10.0,
        ..cfg.clone()
    };
    let mut vk = v.clone();
    let mut p = vec![0.0; f.in_dim()];
    let mut steps = Vec::with_capacity(k_max);
    let mut stopped_by_discrepancy = false;
    for k in 1..=k_max {
        let wrap = |e: Error| Error::Iteration {
            iteration: k,
            source: Box::new(e),
        };
        let sol = solve_variational(f, &vk, alpha, j, &inner).map_err(wrap)?;
        let fu = f.apply(&sol.u_alpha);
        let r = sub(v, &fu);
        let step_p = f.adjoint(&r);
        for (pi, si) in p.iter_mut().zip(&step_p) {
            *pi += si / alpha;
        }
        // both forms of the iteration must describe the same subgradient
        let gap = norm(&sub(&p, &sol.p_alpha.p));
        let allowed = 10.0 * sol.threshold / alpha + 1e-12 * (1.0 + norm(&p));
        if gap > allowed {
            return Err(wrap(Error::NotASubgradient {
                violation: gap,
                tol: allowed,
            }));
        }
        let l1: f64 = sol.u_alpha.iter().map(|x| x.abs()).sum();
        let tol = sol.p_alpha.tol + 10.0 * gap * (1.0 + l1);
        let pk = Subgradient::new(SolutionVector::from_raw(p.clone()), sol.u_alpha.clone()).with_tol(tol);
        let bregman_to_ref = match reference {
            Some(u_star) => Some(j.bregman_distance(u_star, &pk).map_err(wrap)?),
            None => None,
        };
        let next: Vec<f64> = vk.iter().zip(&r).map(|(a, b)| a + b).collect();
        vk = DataVector::from_raw(next);
        let residual = norm(&r);
        steps.push(BregmanStep {
            k,
            u: sol.u_alpha,
            p: pk,
            v: vk.clone(),
            residual,
            j_value: sol.j_value,
            bregman_to_ref,
        });
        if let Some(d) = delta {
            if residual <= DISCREPANCY_FACTOR * d {
                stopped_by_discrepancy = true;
                break;
            }
        }
    }
    Ok(BregmanTrace {
        v0: v.clone(),
        alpha,
        steps,
        stopped_by_discrepancy,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Debiased {
    pub u_db: SolutionVector,
    pub first: RegularizedSolution,
    pub support: Vec<usize>,
    /// `u_alpha` vanished, so there was nothing to refit.
    pub empty_support: bool,
    /// `d_J^{p_alpha}(u_db, u_alpha)`
    pub bregman_to_first: f64,
}

/// Sparse solve followed by a least-squares refit over the sign cone of
/// its support, i.e. over the points at zero Bregman distance from it.
pub fn debias_two_step(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    j: &Regularizer,
    cfg: &SolverConfig,
) -> Result<Debiased> {
    if *j != Regularizer::L1 {
        return Err(Error::Unsupported(format!(
            "debiasing is implemented for l1, got {}",
            j.kind()
        )));
    }
    let first_cfg = SolverConfig {
        tol: cfg.tol * 1e-2,
        ..cfg.clone()
    };
    let first = solve_fista(f, v, alpha, j, &first_cfg)?;
    let u_a = first.u_alpha.as_slice();
    let support: Vec<usize> = (0..u_a.len()).filter(|&i| u_a[i] != 0.0).collect();
    if support.is_empty() {
        log::warn!("debiasing: empty support, returning zero");
        let u_db = SolutionVector::zeros(f.in_dim());
        let bregman_to_first = j.bregman_distance(&u_db, &first.p_alpha)?;
        return Ok(Debiased {
            u_db,
            first,
            support,
            empty_support: true,
            bregman_to_first,
        });
    }
    let signs: Vec<f64> = u_a.iter().map(|x| if *x == 0.0 { 0.0 } else { x.signum() }).collect();
    let u = refit(f, v, &signs, u_a, cfg)?;
    let u_db = SolutionVector::from_raw(u);
    let bregman_to_first = j.bregman_distance(&u_db, &first.p_alpha)?;
    Ok(Debiased {
        u_db,
        first,
        support,
        empty_support: false,
        bregman_to_first,
    })
}

fn project(x: &mut [f64], signs: &[f64]) {
    for (xi, s) in x.iter_mut().zip(signs) {
        if *s == 0.0 || xi.signum() * s < 0.0 {
            *xi = 0.0;
        }
    }
}

/// Projected-gradient residual `|x - P(x - grad)|`.
fn kkt_residual(x: &[f64], g: &[f64], signs: &[f64]) -> f64 {
    let mut y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    project(&mut y, signs);
    norm(&sub(x, &y))
}

/// `min |Fu - v|^2 / 2` over `{u : sign(u_i) in {0, signs_i}}`.
fn refit(f: &LinearForwardMap, v: &[f64], signs: &[f64], start: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    let restrict = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(signs)
            .map(|(a, s)| if *s == 0.0 { 0.0 } else { *a })
            .collect()
    };
    let grad = |x: &[f64]| f.adjoint(&sub(&f.apply(x), v));
    let threshold = cfg.tol * (1.0 + norm(&f.adjoint(v)));

    // unconstrained least squares on the support; kept if it respects the signs
    let rhs = restrict(&f.adjoint(v));
    let cg = conjugate_gradient(
        |x| restrict(&f.normal(&restrict(x))),
        &rhs,
        Some(start),
        threshold * 1e-2,
        cfg.max_iters,
    );
    let mut ls = cg.x;
    if ls.iter().zip(signs).all(|(x, s)| x * s >= 0.0) {
        project(&mut ls, signs);
        if kkt_residual(&ls, &grad(&ls), signs) <= threshold {
            return Ok(ls);
        }
    }

    let sigma = crate::linear::operator_norm_estimate(f, crate::linear::POWER_ITERATIONS, cfg.seed)?;
    let step = 1.0 / (1.02 * sigma * sigma).max(f64::MIN_POSITIVE);
    let objective = |x: &[f64]| 0.5 * norm_sq(&sub(&f.apply(x), v));
    let mut x = start.to_vec();
    let mut obj = objective(&x);
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    for _ in 0..cfg.max_iters {
        let g = grad(&x);
        if kkt_residual(&x, &g, signs) <= threshold {
            return Ok(x);
        }
        let gy = grad(&y);
        let mut z: Vec<f64> = y.iter().zip(&gy).map(|(a, b)| a - step * b).collect();
        project(&mut z, signs);
        let obj_z = objective(&z);
        if obj_z > obj && t > 1.0 {
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = z.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        t = t_next;
        x = z;
        obj = obj_z.min(obj);
    }
    let residual = kkt_residual(&x, &grad(&x), signs);
    Err(Error::NotConverged {
        solver: "sign-constrained refit",
        iterations: cfg.max_iters,
        residual,
    })
}

/// `|F u_db - v|` and `|F u_alpha - v|` of a debiasing result.
pub fn debias_residuals(f: &LinearForwardMap, v: &DataVector, d: &Debiased) -> (f64, f64) {
    let r_db = norm(&sub(&f.apply(&d.u_db), v));
    let r_a = norm(&sub(&f.apply(&d.first.u_alpha), v));
    (r_db, r_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{identity, make_dense};

    #[test]
    fn scalar_recursion() {
        let v = DataVector::new(vec![1.0]).unwrap();
        let t = bregman_iterate(
            &identity(1),
            &v,
            1.0,
            &Regularizer::Quadratic,
            20,
            &SolverConfig::default(),
            None,
        )
        .unwrap();
        for s in &t.steps {
            assert!((s.u[0] - (1.0 - 0.5f64.powi(s.k as i32))).abs() <= 1e-10);
        }
    }

    #[test]
    fn one_step_equals_single_solve() {
        let f = make_dense(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![0.0, 1.0]]).unwrap();
        let v = DataVector::new(vec![1.0, 0.3, -0.2]).unwrap();
        let cfg = SolverConfig::default();
        let t = bregman_iterate(&f, &v, 0.4, &Regularizer::L1, 1, &cfg, None).unwrap();
        let inner = SolverConfig {
            tol: cfg.tol / 10.0,
            ..cfg
        };
        let s = solve_variational(&f, &v, 0.4, &Regularizer::L1, &inner).unwrap();
        assert_eq!(t.steps[0].u, s.u_alpha);
    }

    #[test]
    fn data_update_is_stored_exactly() {
        let f = make_dense(&[vec![1.0, 1.0]]).unwrap();
        let v = DataVector::new(vec![2.0]).unwrap();
        let t = bregman_iterate(&f, &v, 1.0, &Regularizer::Quadratic, 5, &SolverConfig::default(), None).unwrap();
        let mut prev = t.v0.clone();
        for s in &t.steps {
            let fu = f.apply(&s.u);
            assert_eq!(s.v[0], prev[0] + (v[0] - fu[0]));
            prev = s.v.clone();
        }
    }

    #[test]
    fn discrepancy_stops_early() {
        let v = DataVector::new(vec![1.0]).unwrap();
        let t = bregman_iterate_discrepancy(
            &identity(1),
            &v,
            1.0,
            &Regularizer::Quadratic,
            50,
            0.05,
            &SolverConfig::default(),
            None,
        )
        .unwrap();
        assert!(t.stopped_by_discrepancy);
        // residual 2^-k first drops below 0.055 at k = 5
        assert_eq!(t.steps.len(), 5);
    }

    #[test]
    fn csv_has_fixed_header() {
        let v = DataVector::new(vec![1.0]).unwrap();
        let u = SolutionVector::new(vec![1.0]).unwrap();
        let t = bregman_iterate(
            &identity(1),
            &v,
            1.0,
            &Regularizer::Quadratic,
            2,
            &SolverConfig::default(),
            Some(&u),
        )
        .unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("k,residual,J_value,bregman_to_ref\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn debias_example() {
        let v = DataVector::new(vec![2.0, 0.5]).unwrap();
        let d = debias_two_step(&identity(2), &v, 1.0, &Regularizer::L1, &SolverConfig::default()).unwrap();
        assert!((d.first.u_alpha[0] - 1.0).abs() <= 1e-9);
        assert_eq!(d.first.u_alpha[1], 0.0);
        assert!((d.u_db[0] - 2.0).abs() <= 1e-9);
        assert_eq!(d.u_db[1], 0.0);
        assert!(d.bregman_to_first.abs() <= 1e-8);
    }

    #[test]
    fn debias_zero_data() {
        let v = DataVector::zeros(3);
        let d = debias_two_step(&identity(3), &v, 1.0, &Regularizer::L1, &SolverConfig::default()).unwrap();
        assert!(d.empty_support);
        assert!(d.u_db.iter().all(|&x| x == 0.0));
        assert!(debias_two_step(&identity(3), &v, 1.0, &Regularizer::Quadratic, &SolverConfig::default()).is_err());
    }
}
