use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use relmlr::estimation::FitMethod;
use relmlr::pipeline::{cmd_diagnose, cmd_evaluate, cmd_fit, cmd_ingest, cmd_simulate, Outcome, Overrides, RunConfig};
use relmlr::Error;

#[derive(Parser, Debug)]
#[command(name = "relmlr", version, about = "Relational multilinear autoregression for directed-dyad panels")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides model.seed (and simulate.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides fit.method.
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,
    /// Overrides fit.variables; comma-separated labels.
    #[arg(long, global = true, value_delimiter = ',')]
    variables: Option<Vec<String>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Aggregate an event CSV into a panel container.
    Ingest,
    /// Fit the panel by least squares or Gibbs sampling.
    Fit,
    /// Write traces, summaries, networks and convergence statistics for a fit.
    Diagnose,
    /// Generate a synthetic panel from known coefficients.
    Simulate,
    /// Write per-dyad RMSE grids.
    Evaluate {
        /// Compare this tensor container against the panel instead of using the fit.
        #[arg(long)]
        predicted: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Als,
    Gibbs,
}

fn absolute(p: PathBuf) -> Result<PathBuf, Error> {
    if p.is_absolute() {
        return Ok(p);
    }
    let cwd = std::env::current_dir().map_err(|e| Error::Config(format!("cannot read working directory: {e}")))?;
    Ok(cwd.join(p))
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(&absolute(p.clone())?)?,
        None => RunConfig::from_toml_str("", absolute(PathBuf::from("."))?)?,
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.map(absolute).transpose()?,
        method: cli.method.map(|m| match m {
            Method::Als => FitMethod::Als,
            Method::Gibbs => FitMethod::Gibbs,
        }),
        variables: cli.variables,
    })?;
    match cli.command {
        Command::Ingest => cmd_ingest(&cfg),
        Command::Fit => cmd_fit(&cfg),
        Command::Diagnose => cmd_diagnose(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Evaluate { predicted } => cmd_evaluate(&cfg, predicted.map(absolute).transpose()?.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome).expect("outcome serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::debug!("{e:?}");
            let report = serde_json::json!({
                "status": "error",
                "kind": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
