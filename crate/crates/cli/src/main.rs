//! `flambe`: experiment driver for reward-free exploration in low-rank MDPs.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] flambe_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Core(e) if e.is_invariant_violation() => 3,
            CliError::Core(flambe_core::Error::Config(_)) => 2,
            CliError::Core(_) | CliError::Io { .. } => 4,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "flambe", version, about = "Reward-free exploration in low-rank MDPs with continuous actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags that override fields of the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// Experiment config (TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; relative paths resolve against $FLAMBE_OUTPUT_ROOT (default ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; also reseeds the environment.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    repetitions: Option<usize>,
    #[arg(long, global = true)]
    n_states: Option<usize>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Planner tolerance.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Planner grid resolution per action axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Samples per step and iteration (practical mode).
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    j_max: Option<usize>,
    /// Also write JSON mirrors of summary tables.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an environment and hypothesis class with its smoothness certificate.
    GenEnv,
    /// Run FLAMBE for each repetition seed.
    RunFlambe,
    /// Compare a learned model with the environment on sparse rewards.
    EvalModel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        env: PathBuf,
    },
    /// Run the smoothness verifier suites.
    VerifyBounds,
    /// Print the formula-derived hyperparameters.
    Hyper(commands::HyperArgs),
    /// Full pipeline on a fixed 3-state environment.
    Smoke,
}

fn load_config(o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &o.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = o.seed {
        cfg.seeds.base = s;
        cfg.env.seed = s;
    }
    if let Some(r) = o.repetitions {
        cfg.seeds.repetitions = r;
    }
    if let Some(v) = o.n_states {
        cfg.env.n_states = v;
    }
    if let Some(v) = o.d {
        cfg.env.d = v;
    }
    if let Some(v) = o.m {
        cfg.env.m = v;
    }
    if let Some(v) = o.horizon {
        cfg.env.horizon = v;
    }
    if let Some(v) = o.beta {
        cfg.planner.beta = v;
    }
    if let Some(v) = o.grid {
        cfg.planner.g = v;
    }
    if let config::HyperSection::Practical { n, j_max, .. } = &mut cfg.hyper {
        if let Some(v) = o.n {
            *n = v;
        }
        if let Some(v) = o.j_max {
            *j_max = v;
        }
    } else if o.n.is_some() || o.j_max.is_some() {
        return Err(CliError::Usage("--n and --j-max need hyper.mode = \"practical\"".into()));
    }
    if let Some(dir) = &o.out {
        cfg.output.dir = Some(dir.display().to_string());
    }
    cfg.output.json |= o.json;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Smoke = cli.command {
        return commands::smoke(&cli.overrides);
    }
    let cfg = load_config(&cli.overrides)?;
    match cli.command {
        Command::GenEnv => commands::gen_env(&cfg),
        Command::RunFlambe => commands::run_flambe(&cfg),
        Command::EvalModel { model, env } => commands::eval_model(&cfg, &model, &env),
        Command::VerifyBounds => commands::verify_bounds(&cfg),
        Command::Hyper(args) => commands::hyper(&cfg, &args, cli.overrides.out.is_some()),
        Command::Smoke => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flambe: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
