//! Source conditions and numerical certification of the Bregman-distance
//! error estimates.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linear::{
    check_dim, conjugate_gradient, dot, norm, norm_sq, sub, DataVector, LinearForwardMap, SolutionVector,
};
use crate::regularizers::{DiscreteGradient, Regularizer, Subgradient};
use crate::rng;
use crate::solvers::{solve_variational, RegularizedSolution, SolverConfig};

/// Membership tolerance vouched for by exactly constructed subgradients.
pub const CONSTRUCTION_TOL: f64 = 1e-10;

const SATURATION: f64 = 0.99;
const MAX_REDRAWS: u64 = 64;

/// `u*` together with a source element `z*` such that `p* = F* z*` lies in
/// `dJ(u*)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceInstance {
    pub u_star: SolutionVector,
    pub p_star: Subgradient,
    pub z_star: DataVector,
    /// `F u*`
    pub v_star: DataVector,
    /// `|F* z* - p*|`
    pub defect: f64,
    /// Seed of the accepted draw.
    pub seed: u64,
}

impl SourceInstance {
    pub fn z_norm_sq(&self) -> f64 {
        norm_sq(&self.z_star)
    }

    /// Instance for `c u*` with `c > 0`. Only the quadratic subgradient
    /// scales along; the others are invariant.
    pub fn scaled(&self, j: &Regularizer, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("c", "must be positive"));
        }
        let mul = |x: &[f64], s: f64| -> Vec<f64> { x.iter().map(|a| a * s).collect() };
        let u_star = SolutionVector::from_raw(mul(&self.u_star, c));
        let k = if matches!(j, Regularizer::Quadratic) { c } else { 1.0 };
        let mut p_star = Subgradient::new(SolutionVector::from_raw(mul(&self.p_star.p, k)), u_star.clone())
            .with_tol(self.p_star.tol);
        p_star.dual = self.p_star.dual.clone();
        Ok(Self {
            u_star,
            p_star,
            z_star: DataVector::from_raw(mul(&self.z_star, k)),
            v_star: DataVector::from_raw(mul(&self.v_star, c)),
            defect: self.defect * k,
            seed: self.seed,
        })
    }

    /// Scaled so that `|F u*| = 1`.
    pub fn normalized(&self, j: &Regularizer) -> Result<Self> {
        let s = norm(&self.v_star);
        if s <= 0.0 {
            return Err(invalid("u_star", "F u* vanishes"));
        }
        self.scaled(j, 1.0 / s)
    }
}

/// Outcome of one inequality check `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `rhs - lhs`
    pub slack: f64,
    pub headroom: f64,
    pub components: Vec<(&'static str, f64)>,
}

impl EstimateReport {
    pub fn new(lhs: f64, rhs: f64, tol: f64, components: Vec<(&'static str, f64)>) -> Self {
        let headroom = headroom(tol, rhs);
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + headroom,
            slack: rhs - lhs,
            headroom,
            components,
        }
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lhs={:.6e} rhs={:.6e} slack={:.3e} holds={}",
            self.lhs, self.rhs, self.slack, self.holds
        )?;
        for (name, v) in &self.components {
            write!(f, " {name}={v:.6e}")?;
        }
        Ok(())
    }
}

/// Allowance for solver inexactness on an inequality with right side `rhs`.
pub fn headroom(tol: f64, rhs: f64) -> f64 {
    10.0 * tol * (1.0 + rhs.abs())
}

/// Min-norm `x` with `G x = r`, or `None` when the system is inconsistent.
fn min_norm_solve(g: impl Fn(&[f64]) -> Vec<f64>, gt: impl Fn(&[f64]) -> Vec<f64>, r: &[f64]) -> Option<Vec<f64>> {
    let scale = 1.0 + norm(r);
    let out = conjugate_gradient(|w| g(&gt(w)), r, None, 1e-14 * scale, 10 * r.len() + 100);
    let x = gt(&out.x);
    (norm(&sub(&g(&x), r)) <= 1e-11 * scale).then_some(x)
}

/// Projects `z` onto the complement of `w`.
fn deflate(z: &mut [f64], w: &[f64]) {
    let ww = norm_sq(w);
    if ww > 0.0 {
        let c = dot(z, w) / ww;
        z.iter_mut().zip(w).for_each(|(zi, wi)| *zi -= c * wi);
    }
}

/// Builds a source-condition instance: `z*` is drawn first, `u*` is then
/// chosen so that `F* z*` is a subgradient at it.
///
/// For l1 and 1-d TV the dual vector is scaled to unit sup-norm, the entries
/// above 0.99 are corrected to exactly `+-1` by a minimum-norm change of `z*`
/// and `u*` is supported (jumps) on them with magnitudes in `[0.5, 1.5]`.
/// For 2-d TV `u*` is constant and the dual field is strictly inside the
/// unit ball.
pub fn construct_source_instance(f: &LinearForwardMap, j: &Regularizer, seed: u64) -> Result<SourceInstance> {
    if let Regularizer::TvAniso(d) = j {
        check_dim(d.n_pixels(), f.in_dim())?;
    }
    for attempt in 0..MAX_REDRAWS {
        let s = rng::derive_seed(seed, "instance", attempt);
        if let Some(inst) = try_construct(f, j, s)? {
            return Ok(inst);
        }
    }
    Err(invalid(
        "F",
        "no admissible source element found; the operator may be degenerate",
    ))
}

fn try_construct(f: &LinearForwardMap, j: &Regularizer, seed: u64) -> Result<Option<SourceInstance>> {
    let mut r = rng::from_seed(seed);
    let mut z = rng::gaussian_vec(&mut r, f.out_dim());
    let n = f.in_dim();
    let (u, dual) = match j {
        Regularizer::Quadratic => {
            let p = f.adjoint(&z);
            if norm(&p) <= 1e-12 {
                return Ok(None);
            }
            (p, None)
        }
        Regularizer::L1 => {
            let Some(z_new) = saturate(&mut z, |x| f.adjoint(x), |w| f.apply(w), &[]) else {
                return Ok(None);
            };
            z = z_new;
            let p = f.adjoint(&z);
            let mut u = vec![0.0; n];
            for i in 0..n {
                if (p[i].abs() - 1.0).abs() <= 1e-12 {
                    u[i] = p[i].signum() * magnitude(&mut r);
                }
            }
            (u, None)
        }
        Regularizer::TvAniso(d) if d.rows == 1 || d.cols == 1 => {
            let ones = f.apply(&vec![1.0; n]);
            deflate(&mut z, &ones);
            let dual_of = |x: &[f64]| chain_dual(&f.adjoint(x));
            let dual_t = |w: &[f64]| f.apply(&chain_dual_t(w, n));
            let Some(z_new) = saturate(&mut z, dual_of, dual_t, &ones) else {
                return Ok(None);
            };
            z = z_new;
            let q = chain_dual(&f.adjoint(&z));
            let mut u = vec![0.0; n];
            u[0] = r_uniform(&mut r, -0.5, 0.5);
            for e in 0..n - 1 {
                let jump = if (q[e].abs() - 1.0).abs() <= 1e-12 {
                    q[e].signum() * magnitude(&mut r)
                } else {
                    0.0
                };
                u[e + 1] = u[e] + jump;
            }
            (u, Some(q))
        }
        Regularizer::TvAniso(d) => {
            let ones = f.apply(&vec![1.0; n]);
            deflate(&mut z, &ones);
            let p = f.adjoint(&z);
            if norm(&p) <= 1e-12 {
                return Ok(None);
            }
            let Some(q) = grid_dual(d, &p) else {
                return Ok(None);
            };
            let qmax = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let c = 0.9 / qmax;
            z.iter_mut().for_each(|x| *x *= c);
            let q: Vec<f64> = q.iter().map(|x| x * c).collect();
            let level = magnitude(&mut r);
            (vec![level; n], Some(q))
        }
    };
    let p = f.adjoint(&z);
    let u_star = SolutionVector::from_raw(u);
    let mut p_star = Subgradient::new(SolutionVector::from_raw(p.clone()), u_star.clone()).with_tol(CONSTRUCTION_TOL);
    if let Some(q) = dual {
        p_star = p_star.with_dual(q);
    }
    if !j.check_subgradient(&p_star)?.holds {
        return Ok(None);
    }
    let v_star = DataVector::from_raw(f.apply(&u_star));
    let defect = norm(&sub(&f.adjoint(&z), &p_star.p));
    Ok(Some(SourceInstance {
        u_star,
        p_star,
        z_star: DataVector::from_raw(z),
        v_star,
        defect,
        seed,
    }))
}

fn magnitude(r: &mut rng::Rng) -> f64 {
    r_uniform(r, 0.5, 1.5)
}

fn r_uniform(r: &mut rng::Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    r.random_range(lo..hi)
}

/// `q = -cumsum(p)` on the `n - 1` edges of a chain, the dual field with
/// `D^T q = p` whenever `sum p = 0`.
fn chain_dual(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p[..p.len() - 1]
        .iter()
        .map(|pi| {
            acc -= pi;
            acc
        })
        .collect()
}

/// Transpose of [`chain_dual`].
fn chain_dual_t(w: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n - 1).rev() {
        acc -= w[i];
        out[i] = acc;
    }
    out
}

/// Minimum-norm `q` with `D^T q = p` on a grid.
fn grid_dual(d: &DiscreteGradient, p: &[f64]) -> Option<Vec<f64>> {
    min_norm_solve(|q| d.transpose(q), |w| d.apply(w), p)
}

/// Rescales `z` so that the dual vector `a(z)` has unit sup-norm, then
/// moves `z` by the smallest amount that makes every entry above
/// [`SATURATION`] exactly `+-1` while keeping `<keep, z> = 0` when `keep`
/// is nonempty. Returns `None` when that fails or pushes another entry
/// outside the unit ball.
fn saturate(
    z: &mut [f64],
    a: impl Fn(&[f64]) -> Vec<f64>,
    at: impl Fn(&[f64]) -> Vec<f64>,
    keep: &[f64],
) -> Option<Vec<f64>> {
    let d = a(z);
    let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if dmax <= 1e-12 {
        return None;
    }
    z.iter_mut().for_each(|x| *x /= dmax);
    let d: Vec<f64> = d.iter().map(|x| x / dmax).collect();
    let support: Vec<usize> = (0..d.len()).filter(|&i| d[i].abs() >= SATURATION).collect();
    let with_keep = !keep.is_empty() && norm_sq(keep) > 0.0;
    let mut target: Vec<f64> = support.iter().map(|&i| d[i].signum() - d[i]).collect();
    if with_keep {
        target.push(-dot(keep, z));
    }
    let m = d.len();
    let g = |x: &[f64]| {
        let ax = a(x);
        let mut out: Vec<f64> = support.iter().map(|&i| ax[i]).collect();
        if with_keep {
            out.push(dot(keep, x));
        }
        out
    };
    let gt = |w: &[f64]| {
        let mut full = vec![0.0; m];
        for (k, &i) in support.iter().enumerate() {
            full[i] = w[k];
        }
        let mut x = at(&full);
        if with_keep {
            x.iter_mut().zip(keep).for_each(|(xi, ki)| *xi += w[support.len()] * ki);
        }
        x
    };
    let dz = min_norm_solve(g, gt, &target)?;
    let z_new: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
    let d_new = a(&z_new);
    let on: Vec<bool> = (0..m).map(|i| support.contains(&i)).collect();
    let ok = d_new.iter().zip(&on).all(|(x, &s)| {
        if s {
            (x.abs() - 1.0).abs() <= 1e-12
        } else {
            x.abs() < SATURATION
        }
    });
    ok.then_some(z_new)
}

/// Minimum-norm least-squares `z` for `F* z = p*` and the defect `|F* z - p*|`.
pub fn solve_source_element(f: &LinearForwardMap, p_star: &[f64], cfg: &SolverConfig) -> Result<(DataVector, f64)> {
    check_dim(f.in_dim(), p_star.len())?;
    let rhs = f.apply(p_star);
    let out = conjugate_gradient(
        |z| f.apply(&f.adjoint(z)),
        &rhs,
        None,
        cfg.tol * 1e-2 * (1.0 + norm(&rhs)),
        cfg.max_iters,
    );
    let defect = norm(&sub(&f.adjoint(&out.x), p_star));
    Ok((DataVector::from_raw(out.x), defect))
}

/// `inf { |F* z - p*| : |z| <= rho }` by accelerated projected gradient.
pub fn distance_function(f: &LinearForwardMap, p_star: &[f64], rho: f64, cfg: &SolverConfig) -> Result<f64> {
    check_dim(f.in_dim(), p_star.len())?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("rho", "must be nonnegative"));
    }
    let sigma = crate::linear::operator_norm_estimate(f, crate::linear::POWER_ITERATIONS, cfg.seed)?;
    if rho == 0.0 || sigma == 0.0 {
        return Ok(norm(p_star));
    }
    let step = 1.0 / (sigma * sigma);
    let project = |z: &mut Vec<f64>| {
        let nz = norm(z);
        if nz > rho {
            z.iter_mut().for_each(|x| *x *= rho / nz);
        }
    };
    let value = |z: &[f64]| norm(&sub(&f.adjoint(z), p_star));
    let grad = |z: &[f64]| f.apply(&sub(&f.adjoint(z), p_star));
    let threshold = cfg.tol * 1e-2 * (1.0 + norm(&f.apply(p_star)));
    let mut z = vec![0.0; f.out_dim()];
    let mut best = value(&z);
    let mut y = z.clone();
    let mut t: f64 = 1.0;
    for _ in 0..cfg.max_iters {
        let g = grad(&y);
        let mut z_next: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        project(&mut z_next);
        let val = value(&z_next);
        if val > best && t > 1.0 {
            t = 1.0;
            y = z.clone();
            continue;
        }
        // projected-gradient mapping at the accepted point
        let gz = grad(&z_next);
        let mut w: Vec<f64> = z_next.iter().zip(&gz).map(|(a, b)| a - step * b).collect();
        project(&mut w);
        let mapping = norm(&sub(&z_next, &w)) / step;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = z_next.iter().zip(&z).map(|(a, b)| a + beta * (a - b)).collect();
        t = t_next;
        z = z_next;
        best = best.min(val);
        if mapping <= threshold {
            break;
        }
    }
    Ok(best)
}

fn check_instance(inst: &SourceInstance) -> Result<()> {
    if inst.defect > 1e-10 {
        return Err(invalid(
            "instance",
            format!("source defect {:.3e} exceeds 1e-10", inst.defect),
        ));
    }
    Ok(())
}

/// `|F u_alpha - F u*|^2 / 2 + alpha d_sym(u_alpha, u*) <= |v - v*|^2 + alpha^2 |z*|^2`.
pub fn check_error_estimate(
    f: &LinearForwardMap,
    j: &Regularizer,
    inst: &SourceInstance,
    v: &DataVector,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    check_instance(inst)?;
    let sol = solve_variational(f, v, alpha, j, cfg)?;
    error_estimate_from(f, j, inst, v, &sol, cfg.tol)
}

pub fn error_estimate_from(
    f: &LinearForwardMap,
    j: &Regularizer,
    inst: &SourceInstance,
    v: &DataVector,
    sol: &RegularizedSolution,
    tol: f64,
) -> Result<EstimateReport> {
    let alpha = sol.alpha;
    let d = j.symmetric_bregman(&sol.p_alpha, &inst.p_star)?;
    let output = 0.5 * norm_sq(&sub(&f.apply(&sol.u_alpha), &inst.v_star));
    let noise = norm_sq(&sub(v, &inst.v_star));
    let bias = alpha * alpha * inst.z_norm_sq();
    let sharp: Vec<f64> = v
        .iter()
        .zip(inst.v_star.iter())
        .zip(inst.z_star.iter())
        .map(|((a, b), z)| a - b - alpha * z)
        .collect();
    Ok(EstimateReport::new(
        output + alpha * d,
        noise + bias,
        tol,
        vec![
            ("output_term", output),
            ("bregman_term", alpha * d),
            ("noise_term", noise),
            ("bias_term", bias),
            ("intermediate_bound", 0.5 * norm_sq(&sharp)),
        ],
    ))
}

/// `d_sym(u_alpha, u*) <= |v - v*|^2 / alpha + alpha |z*|^2`.
pub fn check_effective_estimate(
    f: &LinearForwardMap,
    j: &Regularizer,
    inst: &SourceInstance,
    v: &DataVector,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    check_instance(inst)?;
    let sol = solve_variational(f, v, alpha, j, cfg)?;
    effective_estimate_from(j, inst, v, &sol, cfg.tol)
}

pub fn effective_estimate_from(
    j: &Regularizer,
    inst: &SourceInstance,
    v: &DataVector,
    sol: &RegularizedSolution,
    tol: f64,
) -> Result<EstimateReport> {
    let alpha = sol.alpha;
    let d = j.symmetric_bregman(&sol.p_alpha, &inst.p_star)?;
    let noise = norm_sq(&sub(v, &inst.v_star)) / alpha;
    let bias = alpha * inst.z_norm_sq();
    // the division by alpha scales the solver error too
    Ok(EstimateReport::new(
        d,
        noise + bias,
        tol / alpha.min(1.0),
        vec![("bregman", d), ("variance_term", noise), ("bias_term", bias)],
    ))
}

/// Two solves at `v` and `v~`:
/// `|F u - F u~|^2 / 2 + alpha d_sym(u~, u) <= |v - v~|^2 / 2`.
pub fn check_stability(
    f: &LinearForwardMap,
    j: &Regularizer,
    v: &DataVector,
    v_tilde: &DataVector,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    let a = solve_variational(f, v, alpha, j, cfg)?;
    let b = solve_variational(f, v_tilde, alpha, j, cfg)?;
    let d = j.symmetric_bregman(&b.p_alpha, &a.p_alpha)?;
    let output = 0.5 * norm_sq(&sub(&f.apply(&a.u_alpha), &f.apply(&b.u_alpha)));
    let data = 0.5 * norm_sq(&sub(v, v_tilde));
    Ok(EstimateReport::new(
        output + alpha * d,
        data,
        cfg.tol,
        vec![
            ("output_term", output),
            ("bregman_term", alpha * d),
            ("data_term", data),
        ],
    ))
}

/// Optimality defect of `u*` for the data `v* + alpha z*`, which has `u*`
/// as its exact regularized solution.
pub fn range_condition_defect(f: &LinearForwardMap, inst: &SourceInstance, alpha: f64) -> f64 {
    let v_alpha: Vec<f64> = inst
        .v_star
        .iter()
        .zip(inst.z_star.iter())
        .map(|(a, z)| a + alpha * z)
        .collect();
    let g = f.adjoint(&sub(&f.apply(&inst.u_star), &v_alpha));
    norm(
        &g.iter()
            .zip(inst.p_star.p.iter())
            .map(|(a, p)| a + alpha * p)
            .collect::<Vec<_>>(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct HigherOrderReport {
    pub report: EstimateReport,
    /// `alpha^2 |eta*|^2 / 2`, reported for the quadratic regularizer.
    pub quadratic_reference: Option<f64>,
    /// Whether `d^{p*}(u* - alpha eta*, u*)` vanishes, reported for l1.
    pub first_term_zero: Option<bool>,
}

/// `d^{p*}(u_alpha, u*) <= d^{p*}(u* - alpha eta*, u*) + |v - v*|^2 / (2 alpha)`
/// under `p* = F*F eta*`.
#[allow(clippy::too_many_arguments)]
pub fn check_higher_order_estimate(
    f: &LinearForwardMap,
    j: &Regularizer,
    u_star: &SolutionVector,
    eta_star: &SolutionVector,
    v: &DataVector,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<HigherOrderReport> {
    check_dim(f.in_dim(), u_star.dim())?;
    check_dim(f.in_dim(), eta_star.dim())?;
    let p = f.normal(eta_star);
    let p_star = Subgradient::new(SolutionVector::from_raw(p), u_star.clone()).with_tol(CONSTRUCTION_TOL);
    let check = j.check_subgradient(&p_star)?;
    if !check.holds {
        return Err(Error::NotASubgradient {
            violation: check.max_violation,
            tol: CONSTRUCTION_TOL,
        });
    }
    let sol = solve_variational(f, v, alpha, j, cfg)?;
    let lhs = j.bregman_distance(&sol.u_alpha, &p_star)?;
    let shifted: Vec<f64> = u_star.iter().zip(eta_star.iter()).map(|(u, e)| u - alpha * e).collect();
    let first = j.bregman_distance(&shifted, &p_star)?;
    let v_star = f.apply(u_star);
    let noise = norm_sq(&sub(v, &v_star)) / (2.0 * alpha);
    let report = EstimateReport::new(
        lhs,
        first + noise,
        cfg.tol / alpha.min(1.0),
        vec![("bregman", lhs), ("first_term", first), ("noise_term", noise)],
    );
    Ok(HigherOrderReport {
        report,
        quadratic_reference: matches!(j, Regularizer::Quadratic).then(|| 0.5 * alpha * alpha * norm_sq(eta_star)),
        first_term_zero: matches!(j, Regularizer::L1).then_some(first.abs() <= 1e-12),
    })
}

/// `(u*, eta*)` with `F*F eta*` a subgradient at `u*`.
///
/// Quadratic: `eta*` Gaussian and `u* = F*F eta*`. l1: a random support `S`
/// of size `k` with signs `s`, `eta*` solves `(F*F eta)_S = s` on `S` and
/// vanishes elsewhere; draws where `|F*F eta*| >= 1` off `S` are rejected.
pub fn construct_higher_order_instance(
    f: &LinearForwardMap,
    j: &Regularizer,
    k: usize,
    seed: u64,
) -> Result<(SolutionVector, SolutionVector)> {
    let n = f.in_dim();
    for attempt in 0..MAX_REDRAWS {
        let mut r = rng::substream(seed, "higher-order", attempt);
        match j {
            Regularizer::Quadratic => {
                let eta = rng::gaussian_vec(&mut r, n);
                let u = f.normal(&eta);
                if norm(&u) > 1e-12 {
                    return Ok((SolutionVector::from_raw(u), SolutionVector::from_raw(eta)));
                }
            }
            Regularizer::L1 => {
                if k == 0 || k > n {
                    return Err(invalid("k", "support size must lie in 1..=n"));
                }
                let support = rand::seq::index::sample(&mut r, n, k).into_vec();
                let signs: Vec<f64> = (0..k)
                    .map(|_| if rng::gaussian(&mut r) >= 0.0 { 1.0 } else { -1.0 })
                    .collect();
                let scatter = |w: &[f64]| {
                    let mut x = vec![0.0; n];
                    for (&i, wi) in support.iter().zip(w) {
                        x[i] = *wi;
                    }
                    x
                };
                let gather = |x: &[f64]| support.iter().map(|&i| x[i]).collect::<Vec<_>>();
                let cg = conjugate_gradient(
                    |w| gather(&f.normal(&scatter(w))),
                    &signs,
                    None,
                    1e-14 * (1.0 + k as f64),
                    20 * k + 100,
                );
                if !cg.converged {
                    continue;
                }
                let eta = scatter(&cg.x);
                let p = f.normal(&eta);
                let off_ok = (0..n).filter(|i| !support.contains(i)).all(|i| p[i].abs() < 1.0);
                if !off_ok {
                    continue;
                }
                let mut u = vec![0.0; n];
                for (&i, s) in support.iter().zip(&signs) {
                    u[i] = s * magnitude(&mut r);
                }
                return Ok((SolutionVector::from_raw(u), SolutionVector::from_raw(eta)));
            }
            Regularizer::TvAniso(_) => {
                return Err(Error::Unsupported("higher-order instances for TV".into()));
            }
        }
    }
    Err(invalid("F", "no admissible higher-order instance found"))
}

/// `min |u*_i| / |eta*|_inf` over the support: below this `u* - alpha eta*`
/// keeps the sign pattern of `u*`.
pub fn sign_preservation_threshold(u_star: &[f64], eta_star: &[f64]) -> f64 {
    let umin = u_star
        .iter()
        .filter(|x| **x != 0.0)
        .fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let emax = eta_star.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if emax == 0.0 {
        f64::INFINITY
    } else {
        umin / emax
    }
}

/// Coupling of the regularization parameter to the noise level.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ParameterRule {
    /// `alpha = c delta`: `delta^2 / alpha -> 0`, a convergent choice.
    Linear { c: f64 },
    /// `alpha = c delta^2`: `delta^2 / alpha` stays bounded away from zero.
    Squared { c: f64 },
    /// Noise-free data with `alpha_n = alpha0 2^-n`.
    Noiseless { alpha0: f64 },
}

impl ParameterRule {
    fn alpha(&self, delta: f64, n: usize) -> f64 {
        match *self {
            ParameterRule::Linear { c } => c * delta,
            ParameterRule::Squared { c } => c * delta * delta,
            ParameterRule::Noiseless { alpha0 } => alpha0 * 0.5f64.powi(n as i32),
        }
    }

    /// Whether the rule guarantees convergence as `delta -> 0`.
    pub fn is_convergent(&self) -> bool {
        !matches!(self, ParameterRule::Squared { .. })
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub bregman: f64,
    pub bound: f64,
    pub output_err: f64,
    pub j_value: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub j_star: f64,
    pub rule: ParameterRule,
}

pub const CONVERGENCE_HEADER: &str = "n,delta,alpha,bregman,bound,output_err,J_value";

impl ConvergenceTable {
    pub fn bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    /// `d_{n+1} / d_n` for consecutive rows.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].bregman / w[0].bregman).collect()
    }

    /// `(d_last / d_first)^(1 / (rows - 1))`
    pub fn mean_ratio(&self) -> f64 {
        let k = self.rows.len();
        if k < 2 {
            return f64::NAN;
        }
        (self.rows[k - 1].bregman / self.rows[0].bregman).powf(1.0 / (k - 1) as f64)
    }

    pub fn final_j_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| (r.j_value - self.j_star).abs())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CONVERGENCE_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.n, r.delta, r.alpha, r.bregman, r.bound, r.output_err, r.j_value
            );
        }
        out
    }
}

/// Solves along `delta_n = delta0 2^-n`, `n = 0..=n_max`, with data
/// `v* + delta_n e` for a fixed seeded unit vector `e`, and records the
/// symmetric Bregman distance to `u*` against `delta^2/alpha + alpha |z*|^2`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    f: &LinearForwardMap,
    j: &Regularizer,
    inst: &SourceInstance,
    delta0: f64,
    rule: ParameterRule,
    n_max: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ConvergenceTable> {
    check_instance(inst)?;
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(invalid("delta0", "must be nonnegative"));
    }
    match rule {
        ParameterRule::Linear { c } | ParameterRule::Squared { c } if !(c > 0.0) => {
            return Err(invalid("c", "must be positive"));
        }
        ParameterRule::Noiseless { alpha0 } if !(alpha0 > 0.0) => {
            return Err(invalid("alpha0", "must be positive"));
        }
        _ => {}
    }
    let noiseless = matches!(rule, ParameterRule::Noiseless { .. });
    if !noiseless && delta0 == 0.0 {
        return Err(invalid("delta0", "must be positive unless the rule is noiseless"));
    }
    let mut e = rng::gaussian_vec(&mut rng::substream(seed, "noise", 0), f.out_dim());
    let ne = norm(&e);
    e.iter_mut().for_each(|x| *x /= ne);
    let z2 = inst.z_norm_sq();
    let rows = (0..=n_max)
        .into_par_iter()
        .map(|n| -> Result<ConvergenceRow> {
            let delta = if noiseless { 0.0 } else { delta0 * 0.5f64.powi(n as i32) };
            let alpha = rule.alpha(delta, n);
            let v = DataVector::from_raw(inst.v_star.iter().zip(&e).map(|(a, b)| a + delta * b).collect());
            let sol = solve_variational(f, &v, alpha, j, cfg)?;
            let bregman = j.symmetric_bregman(&sol.p_alpha, &inst.p_star)?;
            let noise = norm_sq(&sub(&v, &inst.v_star));
            let bound = noise / alpha + alpha * z2;
            Ok(ConvergenceRow {
                n,
                delta,
                alpha,
                bregman,
                bound,
                output_err: norm(&sub(&f.apply(&sol.u_alpha), &inst.v_star)),
                j_value: sol.j_value,
                holds: bregman <= bound + headroom(cfg.tol / alpha.min(1.0), bound),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable {
        rows,
        j_star: j.value(&inst.u_star),
        rule,
    })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct BiasVarianceRow {
    pub alpha: f64,
    pub mean_bregman: f64,
    pub stderr: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasVarianceTable {
    pub rows: Vec<BiasVarianceRow>,
    /// Monte Carlo mean of `|v - v*|^2`.
    pub noise_energy_mean: f64,
    pub noise_energy_stderr: f64,
    /// `m sigma^2`
    pub noise_energy_expected: f64,
}

pub const BIAS_VARIANCE_HEADER: &str = "alpha,mean_bregman,stderr,bound";

impl BiasVarianceTable {
    pub fn bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    /// Index of the grid point with the smallest mean distance.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, r) in self.rows.iter().enumerate() {
            if r.mean_bregman < self.rows[best].mean_bregman {
                best = i;
            }
        }
        best
    }

    pub fn interior_minimum(&self) -> bool {
        let i = self.argmin();
        i > 0 && i + 1 < self.rows.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{BIAS_VARIANCE_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:e},{:e},{:e},{:e}", r.alpha, r.mean_bregman, r.stderr, r.bound);
        }
        out
    }
}

/// Mean and standard error with compensated summation.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = neumaier_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = neumaier_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Monte Carlo mean of `d_sym(u_alpha, u*)` over `replicates` noise draws
/// of standard deviation `sigma`, using the same draws for every `alpha`,
/// against `m sigma^2 / alpha + alpha |z*|^2`.
#[allow(clippy::too_many_arguments)]
pub fn bias_variance_study(
    f: &LinearForwardMap,
    j: &Regularizer,
    inst: &SourceInstance,
    sigma: f64,
    alpha_grid: &[f64],
    replicates: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<BiasVarianceTable> {
    check_instance(inst)?;
    if replicates < 2 {
        return Err(invalid("replicates", "must be at least 2"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", "must be nonnegative"));
    }
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a > 0.0)) {
        return Err(invalid("alpha_grid", "needs positive entries"));
    }
    let m = f.out_dim();
    let per_replicate = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<(f64, Vec<f64>)> {
            let noise = rng::gaussian_vec(&mut rng::substream(seed, "noise", r as u64), m);
            let v = DataVector::from_raw(inst.v_star.iter().zip(&noise).map(|(a, n)| a + sigma * n).collect());
            let energy = sigma * sigma * norm_sq(&noise);
            let ds = alpha_grid
                .iter()
                .map(|&alpha| {
                    let sol = solve_variational(f, &v, alpha, j, cfg)?;
                    j.symmetric_bregman(&sol.p_alpha, &inst.p_star)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((energy, ds))
        })
        .collect::<Result<Vec<_>>>()?;
    let energies: Vec<f64> = per_replicate.iter().map(|(e, _)| *e).collect();
    let (noise_energy_mean, noise_energy_stderr) = mean_stderr(&energies);
    let expected = m as f64 * sigma * sigma;
    let z2 = inst.z_norm_sq();
    let rows = alpha_grid
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let ds: Vec<f64> = per_replicate.iter().map(|(_, d)| d[k]).collect();
            let (mean, se) = mean_stderr(&ds);
            let bound = expected / alpha + alpha * z2;
            BiasVarianceRow {
                alpha,
                mean_bregman: mean,
                stderr: se,
                bound,
                holds: mean <= bound + 3.0 * se + headroom(cfg.tol / alpha.min(1.0), bound),
            }
        })
        .collect();
    Ok(BiasVarianceTable {
        rows,
        noise_energy_mean,
        noise_energy_stderr,
        noise_energy_expected: expected,
    })
}
