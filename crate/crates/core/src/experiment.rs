//! Config-driven experiment runner behind the `varreg` binary.
//!
//! Every experiment writes fixed-schema CSV files plus `summary.txt` and
//! `summary.json` into an output directory. Reruns with the same config
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bregman_iteration::{bregman_iterate, bregman_iterate_discrepancy, debias_residuals, debias_two_step};
use crate::error::{Error, Result};
use crate::estimates::{bias_variance_study, construct_source_instance, convergence_study, ParameterRule};
use crate::io::Image;
use crate::linear::{norm, sub, DataVector, LinearForwardMap, SolutionVector};
use crate::operators::{
    identity, make_convolution, make_dense, make_radon, make_sampled, phantom_image, RadonGeometry, SampledDesign,
};
use crate::regularizers::{Regularizer, RegularizerKind};
use crate::risk::{check_operator_error_estimate, check_risk_theorem_instance, RiskPair};
use crate::rng;
use crate::solvers::{solve_variational, RegularizedSolution, SolverConfig};

pub const OUT_DIR_ENV: &str = "VARREG_OUT_DIR";
pub const SOLVE_HEADER: &str = "alpha,objective,J_value,residual,defect,threshold,iterations";
pub const SOLUTION_HEADER: &str = "i,u,p";
pub const DEBIAS_HEADER: &str = "i,u_alpha,u_db";
pub const CERTIFICATION_HEADER: &str = "instance,lhs,rhs,slack,holds";
pub const RADON_DEMO_HEADER: &str = "alpha,objective,J_value,residual,defect,iterations,relative_error";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Solve,
    Bregman,
    Debias,
    Convergence,
    BiasVariance,
    OperatorError,
    RiskTheorem,
    RadonDemo,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Bregman => "bregman",
            ExperimentKind::Debias => "debias",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::BiasVariance => "bias_variance",
            ExperimentKind::OperatorError => "operator_error",
            ExperimentKind::RiskTheorem => "risk_theorem",
            ExperimentKind::RadonDemo => "radon_demo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity {
        n: usize,
    },
    Dense {
        matrix: Vec<Vec<f64>>,
    },
    /// `rows x cols` with i.i.d. `N(0, 1/rows)` entries drawn from the seed.
    Gaussian {
        rows: usize,
        cols: usize,
    },
    /// `diag(s_i)` with `s_i` geometric from 1 down to `smallest`.
    Spectrum {
        n: usize,
        smallest: f64,
    },
    Convolution {
        kernel: Vec<f64>,
        n: usize,
    },
    Radon {
        grid_n: usize,
        n_angles: usize,
        n_offsets: usize,
    },
}

impl OperatorSpec {
    pub fn build(&self, seed: u64) -> Result<LinearForwardMap> {
        match self {
            OperatorSpec::Identity { n } => {
                if *n == 0 {
                    return Err(config("operator.n", "must be positive"));
                }
                Ok(identity(*n))
            }
            OperatorSpec::Dense { matrix } => make_dense(matrix),
            OperatorSpec::Gaussian { rows, cols } => {
                if *rows == 0 || *cols == 0 {
                    return Err(config("operator", "rows and cols must be positive"));
                }
                let mut r = rng::substream(seed, "operator", 0);
                let s = 1.0 / (*rows as f64).sqrt();
                let m: Vec<Vec<f64>> = (0..*rows)
                    .map(|_| rng::gaussian_vec(&mut r, *cols).into_iter().map(|x| x * s).collect())
                    .collect();
                make_dense(&m)
            }
            OperatorSpec::Spectrum { n, smallest } => {
                if *n == 0 || !(*smallest > 0.0 && *smallest <= 1.0) {
                    return Err(config("operator", "need n > 0 and smallest in (0, 1]"));
                }
                let m: Vec<Vec<f64>> = (0..*n)
                    .map(|i| {
                        let mut row = vec![0.0; *n];
                        let t = if *n > 1 { i as f64 / (*n - 1) as f64 } else { 0.0 };
                        row[i] = smallest.powf(t);
                        row
                    })
                    .collect();
                make_dense(&m)
            }
            OperatorSpec::Convolution { kernel, n } => make_convolution(kernel, *n),
            OperatorSpec::Radon {
                grid_n,
                n_angles,
                n_offsets,
            } => Ok(make_radon(&RadonGeometry::uniform(*grid_n, *n_angles, *n_offsets)?)),
        }
    }

    fn is_image(&self) -> bool {
        matches!(self, OperatorSpec::Radon { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Linear,
    Squared,
    Noiseless,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub operator: OperatorSpec,
    #[serde(default = "default_regularizer")]
    pub regularizer: RegularizerKind,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
    /// Noise standard deviation.
    #[serde(default)]
    pub sigma: f64,
    /// Explicit data `v`; otherwise synthesized from a seeded ground truth.
    #[serde(default)]
    pub data: Option<Vec<f64>>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Noise level for the discrepancy principle in `bregman`.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default = "default_rule")]
    pub rule: RuleKind,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Sampled rows per design.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_regularizer() -> RegularizerKind {
    RegularizerKind::Quadratic
}
fn default_k_max() -> usize {
    20
}
fn default_delta0() -> f64 {
    0.1
}
fn default_rule() -> RuleKind {
    RuleKind::Linear
}
fn default_c() -> f64 {
    1.0
}
fn default_n_max() -> usize {
    8
}
fn default_samples() -> usize {
    100
}
fn default_replicates() -> usize {
    32
}
fn default_instances() -> usize {
    10
}

fn config(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Built-in configuration used when no file is given.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = |operator, regularizer, alpha| Self {
            experiment: kind,
            seed: 0,
            operator,
            regularizer,
            alpha: Some(alpha),
            alpha_grid: None,
            sigma: 0.0,
            data: None,
            k_max: default_k_max(),
            delta: None,
            delta0: default_delta0(),
            rule: default_rule(),
            c: default_c(),
            n_max: default_n_max(),
            samples: default_samples(),
            replicates: default_replicates(),
            instances: default_instances(),
            solver: SolverConfig::default(),
            output: None,
        };
        let radon16 = OperatorSpec::Radon {
            grid_n: 16,
            n_angles: 32,
            n_offsets: 32,
        };
        match kind {
            ExperimentKind::Solve => Self {
                data: Some(vec![2.0, 0.5]),
                ..base(OperatorSpec::Identity { n: 2 }, RegularizerKind::L1, 1.0)
            },
            ExperimentKind::Bregman => base(
                OperatorSpec::Gaussian { rows: 20, cols: 40 },
                RegularizerKind::Quadratic,
                1.0,
            ),
            ExperimentKind::Debias => Self {
                sigma: 0.01,
                ..base(OperatorSpec::Gaussian { rows: 40, cols: 64 }, RegularizerKind::L1, 0.05)
            },
            ExperimentKind::Convergence => base(
                OperatorSpec::Spectrum { n: 32, smallest: 1e-4 },
                RegularizerKind::Quadratic,
                1.0,
            ),
            ExperimentKind::BiasVariance => Self {
                sigma: 0.01,
                alpha: None,
                alpha_grid: Some((0..8).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect()),
                replicates: 200,
                ..base(
                    OperatorSpec::Spectrum { n: 32, smallest: 1e-4 },
                    RegularizerKind::Quadratic,
                    1.0,
                )
            },
            ExperimentKind::OperatorError | ExperimentKind::RiskTheorem => {
                base(radon16, RegularizerKind::Quadratic, 1e-3)
            }
            ExperimentKind::RadonDemo => Self {
                sigma: 0.01,
                ..base(
                    OperatorSpec::Radon {
                        grid_n: 24,
                        n_angles: 36,
                        n_offsets: 36,
                    },
                    RegularizerKind::TvAniso,
                    1e-3,
                )
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("config").to_string();
            Error::Config {
                field,
                reason: e.to_string().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate().map_err(|e| config("solver", e.to_string()))?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(config("sigma", "must be nonnegative"));
        }
        let needs_alpha = !matches!(
            self.experiment,
            ExperimentKind::BiasVariance | ExperimentKind::Convergence
        );
        if needs_alpha {
            match self.alpha {
                Some(a) if a > 0.0 && a.is_finite() => {}
                Some(_) => return Err(config("alpha", "must be positive")),
                None => return Err(config("alpha", "required for this experiment")),
            }
        }
        match self.experiment {
            ExperimentKind::BiasVariance => match &self.alpha_grid {
                Some(g) if !g.is_empty() && g.iter().all(|a| *a > 0.0 && a.is_finite()) => {}
                _ => return Err(config("alpha_grid", "needs positive entries")),
            },
            ExperimentKind::Debias if self.regularizer != RegularizerKind::L1 => {
                return Err(config("regularizer", "debiasing needs l1"));
            }
            ExperimentKind::RadonDemo if !self.operator.is_image() => {
                return Err(config("operator", "radon_demo needs a radon operator"));
            }
            ExperimentKind::Convergence if !(self.c > 0.0 && self.delta0 > 0.0) => {
                return Err(config("c", "c and delta0 must be positive"));
            }
            ExperimentKind::OperatorError | ExperimentKind::RiskTheorem if self.samples == 0 || self.instances == 0 => {
                return Err(config("samples", "samples and instances must be positive"));
            }
            _ => {}
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(config("delta", "must be nonnegative"));
            }
        }
        Ok(())
    }

    fn regularizer_for(&self, dim: usize) -> Result<Regularizer> {
        Regularizer::from_kind(self.regularizer, dim, self.operator.is_image())
    }

    fn parameter_rule(&self) -> ParameterRule {
        match self.rule {
            RuleKind::Linear => ParameterRule::Linear { c: self.c },
            RuleKind::Squared => ParameterRule::Squared { c: self.c },
            RuleKind::Noiseless => ParameterRule::Noiseless {
                alpha0: self.alpha.unwrap_or(self.c * self.delta0),
            },
        }
    }
}

/// One certified check; `detail` carries the term breakdown.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckLine>,
    pub files: Vec<String>,
}

impl Summary {
    fn new(kind: ExperimentKind) -> Self {
        Self {
            experiment: kind.name().to_string(),
            passed: 0,
            failed: 0,
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    fn check(&mut self, id: impl Into<String>, passed: bool, detail: impl Into<String>) {
        if passed {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        self.checks.push(CheckLine {
            id: id.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn success(&self) -> bool {
        self.failed == 0
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("experiment {}\n", self.experiment);
        for c in &self.checks {
            let _ = writeln!(out, "{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.detail);
        }
        let _ = writeln!(out, "passed {} failed {}", self.passed, self.failed);
        out
    }
}

/// Header-only CSV for an empty result set, one line per row otherwise.
pub fn certification_csv(rows: &[(usize, f64, f64, f64, bool)]) -> String {
    let mut out = format!("{CERTIFICATION_HEADER}\n");
    for (i, lhs, rhs, slack, holds) in rows {
        let _ = writeln!(out, "{i},{lhs:e},{rhs:e},{slack:e},{holds}");
    }
    out
}

struct Output {
    dir: PathBuf,
    summary: Summary,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.summary.files.push(name.to_string());
        Ok(())
    }
}

/// Resolves the output directory: the config's `output`, then the
/// environment variable, then `out/<experiment>`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()))
}

/// Runs the experiment and writes its files into `dir`. Certification
/// failures and per-instance solver failures are recorded in the summary;
/// only configuration and I/O problems are returned as errors.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<Summary> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut out = Output {
        dir: dir.to_path_buf(),
        summary: Summary::new(cfg.experiment),
    };
    let f = cfg.operator.build(cfg.seed)?;
    match cfg.experiment {
        ExperimentKind::Solve => run_solve(cfg, &f, &mut out)?,
        ExperimentKind::Bregman => run_bregman(cfg, &f, &mut out)?,
        ExperimentKind::Debias => run_debias(cfg, &f, &mut out)?,
        ExperimentKind::Convergence => run_convergence(cfg, &f, &mut out)?,
        ExperimentKind::BiasVariance => run_bias_variance(cfg, &f, &mut out)?,
        ExperimentKind::OperatorError | ExperimentKind::RiskTheorem => run_certification(cfg, &f, &mut out)?,
        ExperimentKind::RadonDemo => run_radon_demo(cfg, &f, &mut out)?,
    }
    let recorded = ExperimentConfig {
        output: None,
        ..cfg.clone()
    };
    out.write("config.toml", &recorded.to_toml())?;
    let text = out.summary.to_text();
    out.write("summary.txt", &text)?;
    let json = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    out.summary.files.push("summary.json".to_string());
    Ok(out.summary)
}

/// Ground truth for synthesized data: the phantom on image operators, a
/// sparse seeded vector for l1 and a Gaussian vector otherwise.
fn ground_truth(cfg: &ExperimentConfig, n: usize) -> Vec<f64> {
    if let OperatorSpec::Radon { grid_n, .. } = cfg.operator {
        return phantom_image(grid_n);
    }
    let mut r = rng::substream(cfg.seed, "truth", 0);
    let g = rng::gaussian_vec(&mut r, n);
    if cfg.regularizer == RegularizerKind::L1 {
        let k = (n / 8).max(1);
        g.iter()
            .enumerate()
            .map(|(i, x)| {
                if i % (n / k).max(1) == 0 {
                    x.signum() * (1.0 + x.abs())
                } else {
                    0.0
                }
            })
            .collect()
    } else {
        g
    }
}

/// Data from the config or `F u_true + sigma e`.
fn data(cfg: &ExperimentConfig, f: &LinearForwardMap) -> Result<(DataVector, Option<SolutionVector>)> {
    if let Some(v) = &cfg.data {
        if v.len() != f.out_dim() {
            return Err(config(
                "data",
                format!("expected {} entries, found {}", f.out_dim(), v.len()),
            ));
        }
        return Ok((DataVector::new(v.clone())?, None));
    }
    let u = ground_truth(cfg, f.in_dim());
    let mut noise = rng::substream(cfg.seed, "noise", 0);
    let v: Vec<f64> = f
        .apply(&u)
        .into_iter()
        .map(|x| x + cfg.sigma * rng::gaussian(&mut noise))
        .collect();
    Ok((DataVector::new(v)?, Some(SolutionVector::new(u)?)))
}

fn solve_row(s: &RegularizedSolution) -> String {
    format!(
        "{:e},{:e},{:e},{:e},{:e},{:e},{}",
        s.alpha,
        s.objective(),
        s.j_value,
        s.data_residual,
        s.optimality_defect,
        s.threshold,
        s.iterations
    )
}

fn run_solve(cfg: &ExperimentConfig, f: &LinearForwardMap, out: &mut Output) -> Result<()> {
    let (v, _) = data(cfg, f)?;
    let j = cfg.regularizer_for(f.in_dim())?;
    let alpha = cfg.alpha.expect("validated");
    let mut table = format!("{SOLVE_HEADER}\n");
    let mut sol_csv = format!("{SOLUTION_HEADER}\n");
    match solve_variational(f, &v, alpha, &j, &cfg.solver) {
        Ok(s) => {
            let _ = writeln!(table, "{}", solve_row(&s));
            for (i, (u, p)) in s.u_alpha.iter().zip(s.p_alpha.p.iter()).enumerate() {
                let _ = writeln!(sol_csv, "{i},{u:e},{p:e}");
            }
            out.summary.check(
                "solve",
                s.optimality_defect <= s.threshold,
                format!("defect={:e} threshold={:e}", s.optimality_defect, s.threshold),
            );
        }
        Err(e) => out.summary.check("solve", false, e.to_string()),
    }
    out.write("solve.csv", &table)?;
    out.write("solution.csv", &sol_csv)
}

fn run_bregman(cfg: &ExperimentConfig, f: &LinearForwardMap, out: &mut Output) -> Result<()> {
    let (v, truth) = data(cfg, f)?;
    let j = cfg.regularizer_for(f.in_dim())?;
    let alpha = cfg.alpha.expect("validated");
    let trace = match cfg.delta {
        Some(delta) => bregman_iterate_discrepancy(f, &v, alpha, &j, cfg.k_max, delta, &cfg.solver, truth.as_ref()),
        None => bregman_iterate(f, &v, alpha, &j, cfg.k_max, &cfg.solver, truth.as_ref()),
    };
    match trace {
        Ok(t) => {
            out.write("bregman.csv", &t.to_csv())?;
            for w in t.steps.windows(2) {
                let ok = w[1].residual <= w[0].residual * (1.0 + 1e-6) + 1e-10;
                if !ok {
                    out.summary.check(
                        format!("k={}", w[1].k),
                        false,
                        format!("residual increased {:e} -> {:e}", w[0].residual, w[1].residual),
                    );
                }
            }
            out.summary.check(
                "residual_monotone",
                out.summary.failed == 0,
                format!(
                    "steps={} final_residual={:e} discrepancy_stop={}",
                    t.steps.len(),
                    t.last().residual,
                    t.stopped_by_discrepancy
                ),
            );
        }
        Err(e) => {
            out.write("bregman.csv", "k,residual,J_value,bregman_to_ref\n")?;
            out.summary.check("bregman", false, e.to_string());
        }
    }
    Ok(())
}

fn run_debias(cfg: &ExperimentConfig, f: &LinearForwardMap, out: &mut Output) -> Result<()> {
    let (v, _) = data(cfg, f)?;
    let j = Regularizer::L1;
    let alpha = cfg.alpha.expect("validated");
    let mut csv = format!("{DEBIAS_HEADER}\n");
    match debias_two_step(f, &v, alpha, &j, &cfg.solver) {
        Ok(d) => {
            for (i, (a, b)) in d.first.u_alpha.iter().zip(d.u_db.iter()).enumerate() {
                let _ = writeln!(csv, "{i},{a:e},{b:e}");
            }
            let (r_db, r_alpha) = debias_residuals(f, &v, &d);
            out.summary.check(
                "residual",
                r_db <= r_alpha * (1.0 + 1e-8) + 1e-12,
                format!("residual_alpha={r_alpha:e} residual_db={r_db:e}"),
            );
            out.summary.check(
                "bregman_to_first",
                d.bregman_to_first <= 1e-8,
                format!("d={:e} support={}", d.bregman_to_first, d.support.len()),
            );
        }
        Err(e) => out.summary.check("debias", false, e.to_string()),
    }
    out.write("debias.csv", &csv)
}

fn run_convergence(cfg: &ExperimentConfig, f: &LinearForwardMap, out: &mut Output) -> Result<()> {
    let j = cfg.regularizer_for(f.in_dim())?;
    let inst = construct_source_instance(f, &j, cfg.seed)?.normalized(&j)?;
    match convergence_study(
        f,
        &j,
        &inst,
        cfg.delta0,
        cfg.parameter_rule(),
        cfg.n_max,
        cfg.seed,
        &cfg.solver,
    ) {
        Ok(t) => {
            out.write("convergence.csv", &t.to_csv())?;
            for r in &t.rows {
                out.summary.check(
                    format!("n={}", r.n),
                    r.holds,
                    format!("bregman={:e} bound={:e}", r.bregman, r.bound),
                );
            }
        }
        Err(e) => {
            out.write(
                "convergence.csv",
                &format!("{}\n", crate::estimates::CONVERGENCE_HEADER),
            )?;
            out.summary.check("convergence", false, e.to_string());
        }
    }
    Ok(())
}

fn run_bias_variance(cfg: &ExperimentConfig, f: &LinearForwardMap, out: &mut Output) -> Result<()> {
    let j = cfg.regularizer_for(f.in_dim())?;
    let inst = construct_source_instance(f, &j, cfg.seed)?.normalized(&j)?;
    let grid = cfg.alpha_grid.clone().expect("validated");
    match bias_variance_study(f, &j, &inst, cfg.sigma, &grid, cfg.replicates, cfg.seed, &cfg.solver) {
        Ok(t) => {
            out.write("bias_variance.csv", &t.to_csv())?;
            for r in &t.rows {
                out.summary.check(
                    format!("alpha={:e}", r.alpha),
                    r.holds,
                    format!("mean={:e} stderr={:e} bound={:e}", r.mean_bregman, r.stderr, r.bound),
                );
            }
        }
        Err(e) => {
            out.write(
                "bias_variance.csv",
                &format!("{}\n", crate::estimates::BIAS_VARIANCE_HEADER),
            )?;
            out.summary.check("bias_variance", false, e.to_string());
        }
    }
    Ok(())
}

fn run_certification(cfg: &ExperimentConfig, f: &LinearForwardMap, out: &mut Output) -> Result<()> {
    let j = cfg.regularizer_for(f.in_dim())?;
    let pop = make_sampled(f, &SampledDesign::full(f.out_dim())?)?;
    let alpha = cfg.alpha.expect("validated");
    let risk = cfg.experiment == ExperimentKind::RiskTheorem;
    let results: Vec<Result<(crate::estimates::EstimateReport, bool)>> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let inst = construct_source_instance(&pop, &j, rng::derive_seed(cfg.seed, "instance", i as u64))?
                .normalized(&j)?;
            let pair = RiskPair::draw(
                f,
                inst.u_star.clone(),
                cfg.samples,
                cfg.sigma,
                rng::derive_seed(cfg.seed, "design", i as u64),
            )?;
            if risk {
                let r = check_risk_theorem_instance(&pair, &j, &inst, alpha, &cfg.solver)?;
                let ok = r.report.holds;
                Ok((r.report, ok))
            } else {
                let r = check_operator_error_estimate(&pair, &j, &inst, alpha, &cfg.solver)?;
                let ok = r.main.holds && r.consistent.as_ref().is_none_or(|c| c.holds);
                Ok((r.main, ok))
            }
        })
        .collect();
    let mut rows = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok((rep, ok)) => {
                rows.push((i, rep.lhs, rep.rhs, rep.slack, ok));
                out.summary.check(format!("instance={i}"), ok, rep.to_string());
            }
            Err(e) => out.summary.check(format!("instance={i}"), false, e.to_string()),
        }
    }
    out.write(&format!("{}.csv", cfg.experiment.name()), &certification_csv(&rows))
}

fn run_radon_demo(cfg: &ExperimentConfig, f: &LinearForwardMap, out: &mut Output) -> Result<()> {
    let OperatorSpec::Radon {
        grid_n,
        n_angles,
        n_offsets,
    } = cfg.operator
    else {
        unreachable!("validated");
    };
    let (v, truth) = data(cfg, f)?;
    let j = cfg.regularizer_for(f.in_dim())?;
    let alpha = cfg.alpha.expect("validated");
    out.write(
        "sinogram.csv",
        &Image::new(n_angles, n_offsets, v.as_slice().to_vec())?.to_csv(),
    )?;
    if let Some(t) = &truth {
        out.write(
            "phantom.csv",
            &Image::new(grid_n, grid_n, t.as_slice().to_vec())?.to_csv(),
        )?;
    }
    let mut table = format!("{RADON_DEMO_HEADER}\n");
    match solve_variational(f, &v, alpha, &j, &cfg.solver) {
        Ok(s) => {
            let rel = truth.as_ref().map_or(f64::NAN, |t| norm(&sub(&s.u_alpha, t)) / norm(t));
            let _ = writeln!(
                table,
                "{:e},{:e},{:e},{:e},{:e},{},{:e}",
                s.alpha,
                s.objective(),
                s.j_value,
                s.data_residual,
                s.optimality_defect,
                s.iterations,
                rel
            );
            out.write(
                "reconstruction.csv",
                &Image::new(grid_n, grid_n, s.u_alpha.as_slice().to_vec())?.to_csv(),
            )?;
            out.summary.check(
                "reconstruction",
                s.optimality_defect <= s.threshold,
                format!(
                    "defect={:e} relative_error={rel:e} iterations={}",
                    s.optimality_defect, s.iterations
                ),
            );
        }
        Err(e) => out.summary.check("reconstruction", false, e.to_string()),
    }
    out.write("radon_demo.csv", &table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_preset_matches_soft_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&ExperimentConfig::preset(ExperimentKind::Solve), dir.path()).unwrap();
        assert!(s.success());
        let sol = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        let u: Vec<f64> = sol
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!((u[0] - 1.0).abs() <= 1e-8 && u[1].abs() <= 1e-8);
    }

    #[test]
    fn toml_round_trip_and_unknown_field() {
        let cfg = ExperimentConfig::preset(ExperimentKind::BiasVariance);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let bad = "experiment = \"solve\"\nalpah = 1.0\n[operator]\nkind = \"identity\"\nn = 2\n";
        match ExperimentConfig::from_toml(bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "alpah"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_alpha_names_the_field() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::Solve);
        cfg.alpha = None;
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_certification_is_header_only() {
        assert_eq!(certification_csv(&[]), format!("{CERTIFICATION_HEADER}\n"));
    }

    #[test]
    fn failed_check_names_the_instance() {
        let mut s = Summary::new(ExperimentKind::RiskTheorem);
        s.check("instance=3", false, "lhs=1 rhs=0");
        assert!(s.to_text().contains("FAIL instance=3"));
        assert!(!s.success());
    }
}
