use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cran_outage::experiments::{
    emit_plot_data, policy_rows, results_csv, run_prepared, CellOrNetwork, ExperimentConfig,
    ExperimentError, FieldProblem, OUTPUT_DIR_ENV,
};

#[derive(Parser)]
#[command(
    name = "cran-outage",
    version,
    about = "Computational outage simulator for cloud RAN uplinks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Turn a results directory into x,y,ci_low,ci_high,series rows.
    EmitPlots {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the MRS and CAS threshold tables as CSV.
    PolicyTables {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}

fn dispatch(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run {
            config,
            workers,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
                cfg.output.dir = PathBuf::from(dir);
            }
            let prepared = cfg.prepare()?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = workers {
                if n == 0 {
                    return Err(ExperimentError::Config(vec![FieldProblem {
                        field: "--workers".into(),
                        message: "must be at least 1".into(),
                    }]));
                }
                pool = pool.num_threads(n);
            }
            let pool = pool
                .build()
                .map_err(|e| ExperimentError::Simulation(format!("thread pool: {e}")))?;
            let summary = pool.install(|| run_prepared(&prepared))?;
            println!(
                "{} finished in {:.1} s; results in {}",
                summary.manifest.experiment,
                summary.manifest.wall_clock_s,
                summary.output_dir.display()
            );
            Ok(())
        }
        Command::EmitPlots { input, out } => {
            let path = emit_plot_data(&input, &out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::PolicyTables { config } => {
            let prepared = ExperimentConfig::load(&config)?.prepare()?;
            print!(
                "{}",
                results_csv(&CellOrNetwork::PolicyTables(policy_rows(&prepared)))
            );
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.prepare()?;
            println!("{}: ok ({})", config.display(), cfg.experiment);
            Ok(())
        }
    }
}
