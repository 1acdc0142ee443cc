use std::path::PathBuf;
use std::process::ExitCode;

use anosov_lab::{config, emit, render, run, Command, Format, THREADS_ENV};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anosov-lab", version, about = "Dimension experiments for Anosov representations of free groups")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Subcommand)]
enum Sub {
    /// Check that the Falconer and Lyapunov functionals are mutually inverse.
    DualityTest(Common),
    /// Exact counting behind the entropy-gap inequality.
    GapCombinatorics(Common),
    /// Entropy rates and Lyapunov exponents of the configured walks.
    Walk(Common),
    /// Pressure curve and Falconer critical exponent.
    Falconer(Common),
    /// Box-counting estimates of the limit set and of the splitting set.
    Minkowski(Common),
    /// Dimension-gap checks at estimate level.
    CheckGap(Common),
    /// Shadow covering bound along the configured ray.
    Shadow(Common),
    /// Everything above that depends on the representation, in one report.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(n) = std::env::var(THREADS_ENV) {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is set once");
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {n:?}");
                return ExitCode::from(1);
            }
        }
    }
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::DualityTest(c) => (Command::DualityTest, c),
        Sub::GapCombinatorics(c) => (Command::GapCombinatorics, c),
        Sub::Walk(c) => (Command::Walk, c),
        Sub::Falconer(c) => (Command::Falconer, c),
        Sub::Minkowski(c) => (Command::Minkowski, c),
        Sub::CheckGap(c) => (Command::CheckGap, c),
        Sub::Shadow(c) => (Command::Shadow, c),
        Sub::Report(c) => (Command::Report, c),
    };
    let format = match common.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    let result = config::load(&common.config).and_then(|(cfg, bytes)| {
        let outcome = run(&cfg, &bytes, command, common.seed)?;
        match &common.out {
            Some(dir) => {
                for path in emit(&outcome, format, dir)? {
                    log::info!("wrote {}", path.display());
                }
            }
            None => print!("{}", render(&outcome, format)),
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            for a in &outcome.report.anomalies {
                eprintln!("ANOMALY: {a}");
            }
            for p in &outcome.report.partial {
                eprintln!("unavailable: {p}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
