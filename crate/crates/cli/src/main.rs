use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use ma_isac::experiment::{emit_csv, load_config, run_experiment, ExperimentKind};
use ma_isac::Error;

/// Run one simulation experiment and write its records as CSV.
#[derive(Debug, Parser)]
#[command(name = "ma-isac-lab", version)]
struct Cli {
    /// convergence-sensing, convergence-comm, mse-vs-power, secrecy-vs-power,
    /// robustness-sweep, region-width, ma-count or region-size
    kind: ExperimentKind,

    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,

    /// Root seed for every random stream.
    #[arg(long)]
    seed: u64,

    /// Monte Carlo count; overrides `trials` in the config.
    #[arg(long)]
    trials: Option<usize>,

    /// Worker threads (default: one per core).
    #[arg(long, env = "MA_ISAC_THREADS")]
    threads: Option<usize>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ma-isac-lab: {e}");
            let config_error = matches!(e, Error::Config { .. } | Error::InvalidConfiguration(_));
            ExitCode::from(if config_error { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(t) = cli.trials {
        if t == 0 {
            return Err(Error::Config {
                field: "--trials".into(),
                message: "must be >= 1".into(),
            });
        }
        cfg.trials = Some(t);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config {
                field: "--threads".into(),
                message: "must be >= 1".into(),
            });
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Io(e.to_string()))?;
    let records = pool.install(|| run_experiment(cli.kind, &cfg, cli.seed))?;
    emit_csv(&records, &cli.out)
}
