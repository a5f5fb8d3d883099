use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kpz_sync::experiment::{
    emit_plotdata, parse_config_str, run_experiment, ConfigError, ExperimentError, ExperimentKind, RunManifest,
};

#[derive(Parser)]
#[command(
    name = "kpzsync",
    version,
    about = "Synchronization experiments for the stochastic heat and KPZ equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample noise and report moment and covariance checks
    NoiseCheck(RunArgs),
    /// Solve the stochastic heat equation and store snapshots
    She(RunArgs),
    /// Estimate the top Lyapunov exponent of the projective cocycle
    Lyapunov(RunArgs),
    /// Track the Hilbert distance between two forward solutions
    SyncForward(RunArgs),
    /// Pullback iteration towards the random fixed point
    SyncPullback(RunArgs),
    /// Positive eigenfunction of a fixed kernel
    KreinRutman(RunArgs),
    /// Track the centering constant between two KPZ solutions
    Constants(RunArgs),
    /// Besov, Hölder and Schauder diagnostics
    Regularity(RunArgs),
    /// Run the experiment named by the configuration's `kind`
    Run(RunArgs),
    /// Write gnuplot data next to the reports of a finished run
    Plot {
        #[arg(long, default_value = "out/manifest.json")]
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set grid.n=128`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write gnuplot data after the run
    #[arg(long)]
    plot: bool,
}

fn run(kind: Option<ExperimentKind>, args: RunArgs) -> Result<(), ExperimentError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
            path: p.display().to_string(),
            message: e.to_string(),
        })?,
        None => String::new(),
    };
    let mut overrides = args.overrides;
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &args.out {
        overrides.push(format!("out={:?}", o.display().to_string()));
    }
    let cfg = parse_config_str(&text, kind, &overrides)?;
    let manifest = run_experiment(&cfg, args.jobs)?;
    println!("{}", manifest.out_dir.join("manifest.json").display());
    if args.plot {
        for p in emit_plotdata(&manifest)? {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::NoiseCheck(a) => run(Some(ExperimentKind::NoiseCheck), a),
        Command::She(a) => run(Some(ExperimentKind::She), a),
        Command::Lyapunov(a) => run(Some(ExperimentKind::Lyapunov), a),
        Command::SyncForward(a) => run(Some(ExperimentKind::SyncForward), a),
        Command::SyncPullback(a) => run(Some(ExperimentKind::SyncPullback), a),
        Command::KreinRutman(a) => run(Some(ExperimentKind::KreinRutman), a),
        Command::Constants(a) => run(Some(ExperimentKind::Constants), a),
        Command::Regularity(a) => run(Some(ExperimentKind::Regularity), a),
        Command::Run(a) => run(None, a),
        Command::Plot { manifest } => RunManifest::load(&manifest).and_then(|m| {
            for p in emit_plotdata(&m)? {
                println!("{}", p.display());
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
