use std::path::PathBuf;

use clap::{Parser, Subcommand};

use qsync::cli;
use qsync::config::{IntegratorConfig, RunConfig};
use qsync::Error;

#[derive(Parser)]
#[command(
    name = "qsync",
    about = "Synchronization analysis and coupling synthesis for linear open quantum systems with memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to a JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Integrator override: "cq" (convolution quadrature) or "lift"
    /// (exponential state-space lift).
    #[arg(long, global = true)]
    method: Option<String>,

    /// Integration step override.
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Integration horizon override.
    #[arg(long, global = true)]
    horizon: Option<f64>,

    /// Coupling gain override (skips the gain search).
    #[arg(long, global = true)]
    gain: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify synchronization conditions and the stability certificate.
    Check,
    /// Synthesize engineered coupling blocks for identical subsystems.
    Synthesize,
    /// Integrate the configured scenarios and report error decay.
    Simulate,
    /// Run the built-in worked example end to end.
    ReproduceExample,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code_for(&e)
        }
    }
}

fn dispatch(args: &Cli) -> qsync::Result<i32> {
    let mut cfg = match (&args.command, &args.config) {
        (Command::ReproduceExample, None) => cli::example_config(),
        (_, Some(path)) => RunConfig::load(path)?,
        (_, None) => return Err(Error::Config("--config is required".into())),
    };

    if args.gain.is_some() {
        cfg.gain = args.gain;
    }
    if args.method.is_some() || args.dt.is_some() || args.horizon.is_some() {
        let mut integ = cfg.integrator.take().unwrap_or_default();
        if args.method.is_some() {
            integ.method = args.method.clone();
        }
        if args.dt.is_some() {
            integ.dt = args.dt;
        }
        if args.horizon.is_some() {
            integ.horizon = args.horizon;
        }
        cfg.integrator = Some(IntegratorConfig { ..integ });
    }

    std::fs::create_dir_all(&args.out)?;
    match args.command {
        Command::Check => cli::cmd_check(&cfg, &args.out),
        Command::Synthesize => cli::cmd_synthesize(&cfg, &args.out),
        Command::Simulate => cli::cmd_simulate(&cfg, &args.out),
        Command::ReproduceExample => cli::cmd_reproduce_example(&cfg, &args.out),
    }
}
