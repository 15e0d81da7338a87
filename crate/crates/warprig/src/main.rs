use clap::{Parser, Subcommand};
use warprig::cli::{run_to_output, Command as RunCommand};
use warprig::config::{apply_override, validate};
use warprig::Error;

/// Numerical toolkit for hypersurface geometry and rigidity experiments in
/// warped product spaces.
#[derive(Parser)]
#[command(name = "warprig", version, about)]
struct Args {
    #[command(subcommand)]
    command: Cli,
}

#[derive(Subcommand)]
enum Cli {
    /// Radial diagnostics, static/super-static residuals, Phi sign.
    Ambient(CommonArgs),
    /// Identity residual suite over a surface.
    Verify(CommonArgs),
    /// Solve and validate the auxiliary weight ODE.
    Weight(CommonArgs),
    /// Kernel spectrum of the linearized isometric-embedding operator.
    Spectrum(CommonArgs),
    /// Global pair identity for two immersions.
    Pair(CommonArgs),
    /// Optimization search for isometric same-curvature companions.
    Search(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(short, long)]
    config: std::path::PathBuf,
    /// Dotted-path overrides, e.g. --override grid.lat=48
    #[arg(long = "override", value_name = "KEY.PATH=VALUE")]
    overrides: Vec<String>,
}

fn main() {
    if let Ok(threads) = std::env::var("WARPRIG_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .ok();
        }
    }
    let args = Args::parse();
    let (command, common) = match &args.command {
        Cli::Ambient(c) => (RunCommand::Ambient, c),
        Cli::Verify(c) => (RunCommand::Verify, c),
        Cli::Weight(c) => (RunCommand::Weight, c),
        Cli::Spectrum(c) => (RunCommand::Spectrum, c),
        Cli::Pair(c) => (RunCommand::Pair, c),
        Cli::Search(c) => (RunCommand::Search, c),
    };
    if let Err(err) = execute(command, common) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn execute(command: RunCommand, common: &CommonArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut raw: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(vec![format!("config parse: {e}")]))?;
    for assignment in &common.overrides {
        apply_override(&mut raw, assignment)?;
    }
    let config = validate(&raw)?;
    run_to_output(command, &config)?;
    Ok(())
}
