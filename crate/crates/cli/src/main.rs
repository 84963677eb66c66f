use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use itokit_cli::{config, execute, CliError, CliResult, Command};

#[derive(Parser)]
#[command(name = "itokit", version, about = "SDE toolkit experiments on analytic toy worlds")]
struct Args {
    /// JSON experiment config; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to ITOKIT_THREADS, then to all cores.
    #[arg(long, global = true, env = "ITOKIT_THREADS")]
    threads: Option<usize>,
    /// Log as JSON lines on stderr.
    #[arg(long, global = true)]
    json_logs: bool,
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Check closed-form kernels against Euler-Maruyama simulation.
    ValidateKernels,
    /// Run reverse trajectories and score them against the exact posterior.
    Sample,
    /// Train the x0-prediction network.
    Train,
    /// Collinearity and terminal error across temperatures.
    TemperatureStudy,
    /// Terminal error for methods x samplers x NFE budgets.
    Sweep,
}

impl From<Verb> for Command {
    fn from(v: Verb) -> Self {
        match v {
            Verb::ValidateKernels => Command::ValidateKernels,
            Verb::Sample => Command::Sample,
            Verb::Train => Command::Train,
            Verb::TemperatureStudy => Command::TemperatureStudy,
            Verb::Sweep => Command::Sweep,
        }
    }
}

fn init_logging(json: bool) {
    let builder = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal());
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

fn run(args: &Args) -> CliResult<()> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::at("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::at("--threads", e))?;
    }
    let mut cfg = match &args.config {
        Some(path) => config::load(path)?,
        None => config::ExperimentConfig::default(),
    };
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let resolved = cfg.resolve()?;
    execute(args.command.into(), &resolved, &args.out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_logging(args.json_logs);
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!("{e}");
            eprintln!("itokit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
