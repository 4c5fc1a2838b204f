use std::io::IsTerminal;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use fact_cli::commands;
use fact_cli::service::{self, AppState, ServiceConfig};
use fact_cli::{CliError, Overrides, RunConfig};
use fact_core::model::ModelBundle;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "fact", version, about = "Cost-aware test-time feature acquisition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every stochastic component; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted config override such as `corruption.alpha=3.5`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthesized dataset CSV and its cost manifest.
    GenSynth(Common),
    /// Train the autoencoder and predictor and write the bundle.
    Train(Common),
    /// Compare acquisition policies on the test split.
    Simulate(Common),
    /// Serve interactive acquisition sessions over HTTP.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Listening port; overrides `serve.port`.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Record the acquisition rank of every feature per test instance.
    OrderMatrix(Common),
    /// Retrain across corruption shapes and compare curve areas.
    BetaSweep(Common),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let overrides = Overrides {
        sets: common.sets.clone(),
        seed: common.seed,
        out: common.out.clone(),
    };
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn serve(cfg: &RunConfig, port: Option<u16>) -> Result<(), CliError> {
    let dir = cfg.bundle_dir();
    if !dir.exists() {
        return Err(CliError::Io(format!("{}: bundle not found", dir.display())));
    }
    let bundle = ModelBundle::load(&dir)?;
    let host: std::net::IpAddr = cfg
        .serve
        .host
        .parse()
        .map_err(|e| CliError::Config(format!("serve.host {:?}: {e}", cfg.serve.host)))?;
    let addr = SocketAddr::new(host, port.unwrap_or(cfg.serve.port));
    let state = AppState::new(
        bundle,
        ServiceConfig {
            idle_timeout: Duration::from_secs(cfg.serve.idle_timeout_secs),
            event_log: cfg.serve.event_log.clone(),
        },
    )?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(state, addr))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenSynth(c) => {
            for path in commands::gen_synth(&load(&c)?)? {
                println!("{}", path.display());
            }
        }
        Command::Train(c) => print_json(&commands::train(&load(&c)?)?),
        Command::Simulate(c) => print_json(&commands::simulate(&load(&c)?)?),
        Command::Serve { common, port } => serve(&load(&common)?, port)?,
        Command::OrderMatrix(c) => print_json(&commands::order_matrix(&load(&c)?)?.1),
        Command::BetaSweep(c) => print_json(&commands::sweep(&load(&c)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
