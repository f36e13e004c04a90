use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kf_cli::{parse_config, run, CliError, Command};

#[derive(Parser)]
#[command(name = "kfeller", version, about = "Krein-Feller spectra, identities and random fields")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// JSON run configuration
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// override the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// override the relative tolerance used by `validate`
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// override the output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// ignore the cache
    #[arg(long, global = true)]
    no_cache: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// compile W and V to atomic measures
    MeasureCompile,
    /// iterated-kernel diagonal tables
    Kernels,
    /// generalized trigonometric functions
    Trig,
    /// eigenvalues and eigenfunctions
    Spectrum,
    /// bridge-kernel trace against Dirichlet eigenvalues
    DirichletTrace,
    /// compare against the dense cycle-graph oracle
    OracleCompare,
    /// Whittle-Matern samples
    FieldSample,
    /// spectral Ornstein-Uhlenbeck simulation
    SpdeEvolve,
    /// run the identity suite; exit 1 if a property fails
    Validate,
    /// summary report and plot-ready tables
    Report,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::MeasureCompile => Command::MeasureCompile,
            Sub::Kernels => Command::Kernels,
            Sub::Trig => Command::Trig,
            Sub::Spectrum => Command::Spectrum,
            Sub::DirichletTrace => Command::DirichletTrace,
            Sub::OracleCompare => Command::OracleCompare,
            Sub::FieldSample => Command::FieldSample,
            Sub::SpdeEvolve => Command::SpdeEvolve,
            Sub::Validate => Command::Validate,
            Sub::Report => Command::Report,
        }
    }
}

fn main_inner(cli: Cli) -> Result<bool, CliError> {
    let command = Command::from(cli.command);
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = parse_config(&path)?;
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Config(format!("config is for `{}`, invoked as `{}`", c.name(), command.name())));
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Config(format!("--tol must be positive, got {tol}")));
        }
        cfg.tolerances.rel = tol;
    }
    if let Some(out) = cli.out {
        cfg.output.dir = out;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    run(&cfg, command, !cli.no_cache)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
