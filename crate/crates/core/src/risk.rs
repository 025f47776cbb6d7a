//! Empirical and population risks of a sampled linear model and the
//! estimates linking Bregman distances to the generalization error.
//!
//! The population is a fixed quadrature grid: every row of a base operator
//! with weight `1/M`. An empirical design draws `N` of these rows with
//! replacement and adds Gaussian noise to the observed values. Losses are
//! halved squares throughout.

use crate::error::{invalid, Error, Result};
use crate::estimates::{headroom, EstimateReport, SourceInstance, CONSTRUCTION_TOL};
use crate::linear::{check_dim, norm_sq, sub, DataVector, LinearForwardMap, SolutionVector};
use crate::operators::{draw_design, make_sampled, SampledDesign};
use crate::regularizers::{Regularizer, Subgradient};
use crate::solvers::{solve_tikhonov_exact, solve_variational, RegularizedSolution, SolverConfig};

#[derive(Clone, Debug)]
pub struct RiskPair {
    /// `P`: all base rows scaled by `1/sqrt(M)`.
    pub population_map: LinearForwardMap,
    /// `F~`: sampled rows scaled by `sqrt(w_i)`.
    pub empirical_map: LinearForwardMap,
    /// `P theta*`
    pub v_pop: DataVector,
    /// `sqrt(w_i) ((F theta*)_{r_i} + n_i)`
    pub v_emp: DataVector,
    pub theta_star: SolutionVector,
    pub design: SampledDesign,
    /// Standard deviation of the noise model.
    pub noise_sigma: f64,
}

impl RiskPair {
    pub fn new(
        base: &LinearForwardMap,
        theta_star: SolutionVector,
        design: SampledDesign,
        noise_sigma: f64,
    ) -> Result<Self> {
        check_dim(base.in_dim(), theta_star.dim())?;
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(invalid("noise_sigma", "must be nonnegative"));
        }
        let m = base.out_dim();
        let population_map = make_sampled(base, &SampledDesign::full(m)?)?;
        let empirical_map = make_sampled(base, &design)?;
        let full = base.apply(&theta_star);
        let s = 1.0 / (m as f64).sqrt();
        let v_pop = DataVector::from_raw(full.iter().map(|x| s * x).collect());
        let v_emp = DataVector::from_raw(
            design
                .sample_rows
                .iter()
                .zip(&design.weights)
                .zip(design.noise.iter())
                .map(|((&r, w), n)| w.sqrt() * (full[r] + n))
                .collect(),
        );
        Ok(Self {
            population_map,
            empirical_map,
            v_pop,
            v_emp,
            theta_star,
            design,
            noise_sigma,
        })
    }

    /// Draws an `n`-point design over the rows of `base` and builds the pair.
    pub fn draw(
        base: &LinearForwardMap,
        theta_star: SolutionVector,
        n: usize,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let design = draw_design(base.out_dim(), n, noise_sigma, seed)?;
        Self::new(base, theta_star, design, noise_sigma)
    }

    /// `|F~ theta* - v~|^2`, the weighted empirical noise energy.
    pub fn empirical_noise_energy(&self) -> f64 {
        norm_sq(&sub(&self.empirical_map.apply(&self.theta_star), &self.v_emp))
    }
}

/// `|F~ theta - v~|^2 / 2`
pub fn empirical_risk(pair: &RiskPair, theta: &[f64]) -> f64 {
    0.5 * norm_sq(&sub(&pair.empirical_map.apply(theta), &pair.v_emp))
}

/// `|P theta - v|^2 / 2 + sigma^2 / 2`
pub fn population_risk(pair: &RiskPair, theta: &[f64]) -> f64 {
    0.5 * norm_sq(&sub(&pair.population_map.apply(theta), &pair.v_pop)) + 0.5 * pair.noise_sigma * pair.noise_sigma
}

/// `R(theta) - R^(theta)`; may be negative.
pub fn generalization_error(pair: &RiskPair, theta: &[f64]) -> f64 {
    population_risk(pair, theta) - empirical_risk(pair, theta)
}

/// Minimizer of the population risk by the quadratic solver at `alpha = 1e-10`.
pub fn population_minimizer(pair: &RiskPair, cfg: &SolverConfig) -> Result<SolutionVector> {
    Ok(solve_tikhonov_exact(&pair.population_map, &pair.v_pop, 1e-10, cfg)?.u_alpha)
}

/// `R(theta) - R(theta*)` split into generalization, approximation and
/// sampling parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposition {
    /// `R(theta) - R^(theta)`
    pub generalization: f64,
    /// `R^(theta) - R^(theta*)`
    pub approximation: f64,
    /// `R^(theta*) - R(theta*)`
    pub sampling: f64,
    pub sum: f64,
    /// `R(theta) - R(theta*)` evaluated directly.
    pub target: f64,
}

impl Decomposition {
    pub fn identity_defect(&self) -> f64 {
        (self.sum - self.target).abs()
    }
}

/// Three-term split given the risks of the population minimizer.
pub fn error_decomposition(pair: &RiskPair, theta: &[f64], r_star_pop: f64, r_star_emp: f64) -> Decomposition {
    let r = population_risk(pair, theta);
    let r_hat = empirical_risk(pair, theta);
    let generalization = r - r_hat;
    let approximation = r_hat - r_star_emp;
    let sampling = r_star_emp - r_star_pop;
    Decomposition {
        generalization,
        approximation,
        sampling,
        sum: generalization + approximation + sampling,
        target: r - r_star_pop,
    }
}

fn require_same(pair: &RiskPair, u_star: &SolutionVector) -> Result<()> {
    check_dim(pair.theta_star.dim(), u_star.dim())?;
    if pair.theta_star != *u_star {
        return Err(invalid(
            "instance",
            "source instance and risk pair use different ground truths",
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorErrorReport {
    pub main: EstimateReport,
    /// Consistent-data form, evaluated when the design is noise free.
    pub consistent: Option<EstimateReport>,
    /// `|P u - v|^2 - |F~ u - v~|^2`
    pub g: f64,
    pub solution: RegularizedSolution,
}

/// `|P(u_alpha - u*)|^2 / 4 + alpha d_sym <= alpha^2 |z*|^2 + |F~u* - v~|^2 + G(u_alpha) / 2`
/// with `u_alpha` solved from `(F~, v~)` and `G` the difference of the
/// unhalved squared residuals.
pub fn check_operator_error_estimate(
    pair: &RiskPair,
    j: &Regularizer,
    inst: &SourceInstance,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<OperatorErrorReport> {
    require_same(pair, &inst.u_star)?;
    check_dim(pair.population_map.out_dim(), inst.z_star.dim())?;
    let sol = solve_variational(&pair.empirical_map, &pair.v_emp, alpha, j, cfg)?;
    let d = j.symmetric_bregman(&sol.p_alpha, &inst.p_star)?;
    let e = sub(&sol.u_alpha, &inst.u_star);
    let pop_err = norm_sq(&pair.population_map.apply(&e));
    let r_pop = norm_sq(&sub(&pair.population_map.apply(&sol.u_alpha), &pair.v_pop));
    let r_emp = norm_sq(&sub(&pair.empirical_map.apply(&sol.u_alpha), &pair.v_emp));
    let g = r_pop - r_emp;
    let s = pair.empirical_noise_energy();
    let z2 = inst.z_norm_sq();
    let main = EstimateReport::new(
        0.25 * pop_err + alpha * d,
        alpha * alpha * z2 + s + 0.5 * g,
        cfg.tol,
        vec![
            ("population_error_term", 0.25 * pop_err),
            ("bregman_term", alpha * d),
            ("bias_term", alpha * alpha * z2),
            ("data_term", s),
            ("half_g", 0.5 * g),
        ],
    );
    let consistent = pair.design.noise.iter().all(|n| *n == 0.0).then(|| {
        EstimateReport::new(
            d,
            alpha * z2 + g / (2.0 * alpha),
            cfg.tol / alpha.min(1.0),
            vec![("bregman", d), ("bias_term", alpha * z2), ("g_term", g / (2.0 * alpha))],
        )
    });
    Ok(OperatorErrorReport {
        main,
        consistent,
        g,
        solution: sol,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiskTheoremReport {
    pub report: EstimateReport,
    /// `R(theta_alpha) - R^(theta_alpha)` with halved losses.
    pub g: f64,
    /// Right-hand side with `G` built from unhalved losses.
    pub rhs_unhalved_g: f64,
    pub solution: RegularizedSolution,
}

/// `E_P |F theta_alpha - F theta*|^2 / 4 + alpha d_sym
///  <= G(theta_alpha) / 2 + alpha^2 |z*|^2 + E_{P^N} |F theta* - y|^2`
/// with `G = R - R^` in the halved-loss convention and `p* = P* z*`.
pub fn check_risk_theorem(
    pair: &RiskPair,
    j: &Regularizer,
    z_star: &DataVector,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<RiskTheoremReport> {
    check_dim(pair.population_map.out_dim(), z_star.dim())?;
    let p = pair.population_map.adjoint(z_star);
    let p_star = Subgradient::new(SolutionVector::from_raw(p), pair.theta_star.clone()).with_tol(CONSTRUCTION_TOL);
    let check = j.check_subgradient(&p_star)?;
    if !check.holds {
        return Err(Error::NotASubgradient {
            violation: check.max_violation,
            tol: CONSTRUCTION_TOL,
        });
    }
    risk_theorem_with(pair, j, &p_star, z_star, alpha, cfg)
}

/// As [`check_risk_theorem`] for a source instance over the population map,
/// reusing its certified subgradient.
pub fn check_risk_theorem_instance(
    pair: &RiskPair,
    j: &Regularizer,
    inst: &SourceInstance,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<RiskTheoremReport> {
    require_same(pair, &inst.u_star)?;
    check_dim(pair.population_map.out_dim(), inst.z_star.dim())?;
    risk_theorem_with(pair, j, &inst.p_star, &inst.z_star, alpha, cfg)
}

fn risk_theorem_with(
    pair: &RiskPair,
    j: &Regularizer,
    p_star: &Subgradient,
    z_star: &DataVector,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<RiskTheoremReport> {
    let sol = solve_variational(&pair.empirical_map, &pair.v_emp, alpha, j, cfg)?;
    let d = j.symmetric_bregman(&sol.p_alpha, p_star)?;
    let e = sub(&sol.u_alpha, &pair.theta_star);
    let pop_err = norm_sq(&pair.population_map.apply(&e));
    let g = generalization_error(pair, &sol.u_alpha);
    let z2 = norm_sq(z_star);
    let noise = pair.empirical_noise_energy();
    let rhs = 0.5 * g + alpha * alpha * z2 + noise;
    let rhs_unhalved_g = g + alpha * alpha * z2 + noise;
    let report = EstimateReport::new(
        0.25 * pop_err + alpha * d,
        rhs,
        cfg.tol,
        vec![
            ("population_error_term", 0.25 * pop_err),
            ("bregman_term", alpha * d),
            ("half_g", 0.5 * g),
            ("bias_term", alpha * alpha * z2),
            ("noise_term", noise),
            ("rhs_unhalved_g", rhs_unhalved_g),
            (
                "slack_unhalved_g",
                rhs_unhalved_g + headroom(cfg.tol, rhs_unhalved_g) - 0.25 * pop_err - alpha * d,
            ),
        ],
    );
    Ok(RiskTheoremReport {
        report,
        g,
        rhs_unhalved_g,
        solution: sol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::construct_source_instance;
    use crate::operators::make_dense;
    use crate::rng;

    fn base() -> LinearForwardMap {
        let mut r = rng::from_seed(4);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| rng::gaussian_vec(&mut r, 6)).collect();
        make_dense(&rows).unwrap()
    }

    fn theta() -> SolutionVector {
        SolutionVector::new(vec![1.0, -0.5, 0.0, 2.0, 0.3, -1.0]).unwrap()
    }

    #[test]
    fn risks_at_truth() {
        let f = base();
        let pair = RiskPair::draw(&f, theta(), 25, 0.0, 1).unwrap();
        assert!(empirical_risk(&pair, &theta()) <= 1e-28);
        assert_eq!(population_risk(&pair, &theta()), 0.0);
        assert!(generalization_error(&pair, &theta()).abs() <= 1e-28);

        let noisy = RiskPair::draw(&f, theta(), 25, 0.2, 1).unwrap();
        assert!((population_risk(&noisy, &theta()) - 0.02).abs() <= 1e-15);
    }

    #[test]
    fn single_row_design() {
        let f = base();
        let design = SampledDesign::new(vec![7], vec![1.0], vec![0.4], 0).unwrap();
        let pair = RiskPair::new(&f, theta(), design, 0.4).unwrap();
        let t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let y = f.apply(&theta())[7] + 0.4;
        let expected = 0.5 * (f.apply(&t)[7] - y).powi(2);
        assert!((empirical_risk(&pair, &t) - expected).abs() <= 1e-12);
    }

    #[test]
    fn full_design_has_no_generalization_error() {
        let f = base();
        let pair = RiskPair::new(&f, theta(), SampledDesign::full(40).unwrap(), 0.0).unwrap();
        let t = [0.3, 0.2, -0.1, 0.0, 1.0, 2.0];
        assert!(generalization_error(&pair, &t).abs() <= 1e-12);
        let dec = error_decomposition(&pair, &t, 0.0, 0.0);
        assert!(dec.generalization.abs() <= 1e-12);
        assert!(dec.sampling.abs() <= 1e-12);
        assert!(dec.identity_defect() <= 1e-12);
    }

    #[test]
    fn decomposition_at_truth() {
        let f = base();
        let pair = RiskPair::draw(&f, theta(), 10, 0.3, 2).unwrap();
        let rp = population_risk(&pair, &theta());
        let re = empirical_risk(&pair, &theta());
        let dec = error_decomposition(&pair, &theta(), rp, re);
        assert_eq!(dec.approximation, 0.0);
        assert!((dec.generalization + dec.sampling).abs() <= 1e-15);
        assert!(dec.sum.abs() <= 1e-15);
    }

    #[test]
    fn operator_error_full_design_reduces_to_noiseless() {
        let f = base();
        let pop = make_sampled(&f, &SampledDesign::full(40).unwrap()).unwrap();
        let j = Regularizer::Quadratic;
        let inst = construct_source_instance(&pop, &j, 3).unwrap();
        let pair = RiskPair::new(&f, inst.u_star.clone(), SampledDesign::full(40).unwrap(), 0.0).unwrap();
        let rep = check_operator_error_estimate(&pair, &j, &inst, 0.05, &SolverConfig::default()).unwrap();
        assert!(rep.g.abs() <= 1e-12);
        assert!(rep.main.holds, "{}", rep.main);
        assert!(rep.consistent.unwrap().holds);
    }
}
