use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varreg::experiment::{output_dir, run_experiment, ExperimentConfig, ExperimentKind, OUT_DIR_ENV};
use varreg::RegularizerKind;

/// Variational regularization experiments.
#[derive(Parser)]
#[command(name = "varreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single regularized solve.
    Solve(Overrides),
    /// Bregman iteration trace.
    Bregman(Overrides),
    /// Two-step l1 solve with sign-cone refit.
    Debias(Overrides),
    /// Bregman distance along a vanishing noise schedule.
    Convergence(Overrides),
    /// Monte Carlo mean Bregman distance over an alpha grid.
    BiasVariance(Overrides),
    /// Sampled-operator error estimate over seeded instances.
    OperatorError(Overrides),
    /// Risk-based estimate over seeded instances.
    RiskTheorem(Overrides),
    /// Phantom reconstruction from a Radon sinogram.
    RadonDemo(Overrides),
    /// Print the built-in config of an experiment as TOML.
    Preset { experiment: String },
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// TOML config; built-in preset when absent.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long)]
    regularizer: Option<RegularizerKind>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(x) = self.$field { cfg.$field = x; } )* };
        }
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if self.$field.is_some() { cfg.$field = self.$field; } )* };
        }
        set!(
            seed,
            sigma,
            regularizer,
            k_max,
            delta0,
            c,
            n_max,
            samples,
            replicates,
            instances
        );
        set_opt!(alpha, alpha_grid, delta);
        if let Some(t) = self.tol {
            cfg.solver.tol = t;
        }
        if let Some(m) = self.max_iters {
            cfg.solver.max_iters = m;
        }
        if self.out.is_some() {
            cfg.output = self.out;
        }
    }
}

fn parse_kind(name: &str) -> Option<ExperimentKind> {
    serde_json::from_value(serde_json::Value::String(name.replace('-', "_"))).ok()
}

fn run(kind: ExperimentKind, ov: Overrides) -> Result<bool, String> {
    let mut cfg = match &ov.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => ExperimentConfig::preset(kind),
    };
    if cfg.experiment != kind {
        return Err(format!(
            "configuration error in `experiment`: file describes `{}`, subcommand is `{}`",
            cfg.experiment.name(),
            kind.name()
        ));
    }
    ov.apply(&mut cfg);
    let dir = output_dir(&cfg);
    let summary = run_experiment(&cfg, &dir).map_err(|e| e.to_string())?;
    print!("{}", summary.to_text());
    log::info!("wrote {} files to {}", summary.files.len(), dir.display());
    Ok(summary.success())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, ov) = match cli.command {
        Command::Solve(o) => (ExperimentKind::Solve, o),
        Command::Bregman(o) => (ExperimentKind::Bregman, o),
        Command::Debias(o) => (ExperimentKind::Debias, o),
        Command::Convergence(o) => (ExperimentKind::Convergence, o),
        Command::BiasVariance(o) => (ExperimentKind::BiasVariance, o),
        Command::OperatorError(o) => (ExperimentKind::OperatorError, o),
        Command::RiskTheorem(o) => (ExperimentKind::RiskTheorem, o),
        Command::RadonDemo(o) => (ExperimentKind::RadonDemo, o),
        Command::Preset { experiment } => {
            return match parse_kind(&experiment) {
                Some(k) => {
                    print!("{}", ExperimentConfig::preset(k).to_toml());
                    ExitCode::SUCCESS
                }
                None => {
                    eprintln!("unknown experiment `{experiment}`");
                    ExitCode::from(2)
                }
            };
        }
    };
    match run(kind, ov) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
