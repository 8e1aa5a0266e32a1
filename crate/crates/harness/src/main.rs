use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gplb_harness::config::{ExperimentConfig, Format, Mode};
use gplb_harness::{experiment, verify, HarnessError};

#[derive(Parser)]
#[command(name = "gplb", version, about = "GP posterior contraction lower-bound experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact and Monte Carlo risk of the worst adversarial family member.
    Risk(RunArgs),
    /// Posterior mass outside the mu/4 and gamma/5 balls.
    Contraction(RunArgs),
    /// GP posterior mean against the one-sparse linear minimax risk.
    Minimax(RunArgs),
    /// Wavelet priors against the sawtooth test function.
    Wavelet(RunArgs),
    /// Exact risks and log-log slopes over the n grid.
    Rates(RunArgs),
    /// Runs the property suite; exit status 1 if a property fails.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; defaults are used when absent.
    #[arg(long, env = "GPLB_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "GPLB_SEED")]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, env = "GPLB_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "GPLB_FORMAT", value_enum)]
    format: Option<Format>,
    /// Worker threads; all cores when absent.
    #[arg(long, env = "GPLB_THREADS")]
    threads: Option<usize>,
}

impl Command {
    fn split(self) -> (Mode, RunArgs) {
        match self {
            Self::Risk(a) => (Mode::Risk, a),
            Self::Contraction(a) => (Mode::Contraction, a),
            Self::Minimax(a) => (Mode::Minimax, a),
            Self::Wavelet(a) => (Mode::Wavelet, a),
            Self::Rates(a) => (Mode::Rates, a),
            Self::Verify(a) => (Mode::Verify, a),
        }
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(format) = args.format {
        cfg.output.format = format;
    }
    Ok(cfg)
}

fn execute(mode: Mode, args: RunArgs) -> Result<bool, HarnessError> {
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(HarnessError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let cfg = load(&args)?;
    if mode == Mode::Verify {
        let checks = verify::run_suite(cfg.seed);
        for c in &checks {
            println!("{c}");
        }
        return Ok(verify::suite_passed(&checks));
    }
    let report = experiment::run(&cfg, mode)?;
    match &report.config.output.path {
        Some(path) => report.emit(path, report.config.output.format)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write_to(&mut lock, report.config.output.format)?;
            lock.flush().map_err(|e| HarnessError::Io {
                path: "<stdout>".into(),
                source: e,
            })?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("GPLB_LOG", "warn")).init();
    let (mode, args) = Cli::parse().command.split();
    match execute(mode, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("gplb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
