use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vrlab_cli::commands::{self, ClassifyArgs, ProbeArgs, SimulateArgs, SuiteArgs};
use vrlab_cli::config::RunConfig;
use vrlab_cli::server::{self, ServerConfig};
use vrlab_cli::CliError;

/// Watch simulated machines from the outside and judge their declarations.
#[derive(Parser, Debug)]
#[command(name = "vrlab", version, arg_required_else_help = true)]
struct Cli {
    /// Print the default run configuration as JSON and exit.
    #[arg(long = "print-defaults")]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Observe a calculator passively and write its trajectory CSV.
    Simulate(SimulateArgs),
    /// Judge a recorded trajectory against a declaration.
    Classify(ClassifyArgs),
    /// Drive a calculator's controller and report whether its declaration survives.
    Probe(ProbeArgs),
    /// Run every catalog calculator and compare with the expected verdicts.
    Suite(SuiteArgs),
    /// Serve live sessions over WebSocket.
    Serve(ServeArgs),
}

#[derive(clap::Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    /// Simulated time units per wall-clock second; `inf` for unpaced.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Directory of static UI assets to serve at `/`.
    #[arg(long)]
    assets: Option<PathBuf>,
    /// Default run configuration for sessions.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    if args.speed.is_nan() || args.speed <= 0.0 {
        return Err(CliError::Input("--speed must be > 0".into()));
    }
    let defaults = RunConfig::load_or_default(args.config.as_deref())?;
    defaults.validate()?;
    let config = ServerConfig { defaults, speed: args.speed, assets: args.assets };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(format!("runtime: {e}")))?;
    runtime.block_on(async {
        let addr = SocketAddr::new(args.bind, args.port);
        let listener = server::bind(addr).await.map_err(|e| CliError::io(addr.to_string(), e))?;
        let local = listener.local_addr().map_err(|e| CliError::io(addr.to_string(), e))?;
        println!("listening on http://{local}");
        server::serve(listener, config).await.map_err(|e| CliError::io(local.to_string(), e))
    })
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if cli.print_defaults {
        println!("{}", RunConfig::default().to_pretty_json());
        return Ok(ExitCode::SUCCESS);
    }
    match cli.command {
        None => unreachable!("clap prints help without a subcommand"),
        Some(Command::Simulate(a)) => commands::simulate(&a)?,
        Some(Command::Classify(a)) => {
            commands::classify(&a)?;
        }
        Some(Command::Probe(a)) => {
            commands::probe(&a)?;
        }
        Some(Command::Suite(a)) => {
            let report = commands::suite(&a)?;
            let failed: Vec<String> = report.failed_rows().map(|r| r.calculator.to_string()).collect();
            if !failed.is_empty() {
                eprintln!("error: suite rows failed: {}", failed.join(", "));
                return Ok(ExitCode::FAILURE);
            }
        }
        Some(Command::Serve(a)) => serve(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
