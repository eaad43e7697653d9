use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use amr::cli;

#[derive(Parser)]
#[command(
    name = "amr",
    version,
    about = "Arithmetic-method regression: solver validation, hybrid-regressor evaluation, and comparison reports"
)]
struct Args {
    /// Root seed for every randomized subsystem (default 42; for
    /// `evaluate` it overrides the config file's seed when given).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file or directory (meaning depends on the subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized numerical validation of the equal-share solver.
    AmaValidate {
        /// Dimension checkpoints, ascending (e.g. 1,10,1000).
        #[arg(long, value_delimiter = ',', required = true)]
        checkpoints: Vec<usize>,

        /// Uniform draw interval as `lo,hi`.
        #[arg(long, default_value = "-1000,1000")]
        range: String,

        /// Divide by the 1-based position instead of the active count
        /// (diagnostic; reconstruction error grows harmonically).
        #[arg(long)]
        literal_index_divisor: bool,
    },

    /// LOOCV evaluation of the configured algorithms on the configured
    /// datasets.
    Evaluate {
        /// Accumulate neighborhood sums without dividing by the neighbor
        /// count (diagnostic).
        #[arg(long)]
        literal_sum: bool,
    },

    /// Permutation-test comparison of two algorithms' stored predictions.
    Compare {
        /// Directory holding `actuals.csv` and `<algo>_predictions.csv`.
        #[arg(long)]
        pred_dir: PathBuf,

        /// The two algorithm ids, e.g. `amr,knn`.
        #[arg(long, value_delimiter = ',', required = true)]
        pair: Vec<String>,

        #[arg(long, default_value_t = 5000)]
        n_perm: u64,

        #[arg(long, default_value_t = 0.05)]
        p_threshold: f64,
    },

    /// Randomized verification of the solver's operator identities and the
    /// closed-form blend coefficient.
    TheoryCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },

    /// Aggregate metric JSONs into per-metric tables and a pairwise
    /// comparison table.
    Report {
        /// Algorithm columns, in order (default: discovered, hybrid first).
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,

        #[arg(long, default_value_t = 5000)]
        n_perm: u64,

        /// External reference table (same shape as the metric CSVs) for the
        /// per-cell deviation report.
        #[arg(long)]
        reference: Option<PathBuf>,

        /// Which metric the reference table holds.
        #[arg(long, default_value = "mae")]
        reference_metric: String,
    },
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text.split_once(',').context("range must be `lo,hi`")?;
    let lo: f64 = lo.trim().parse().context("bad range lower bound")?;
    let hi: f64 = hi.trim().parse().context("bad range upper bound")?;
    if lo >= hi {
        bail!("range lower bound must be below the upper bound");
    }
    Ok((lo, hi))
}

fn run(args: Args) -> Result<()> {
    let seed = args.seed.unwrap_or(42);
    match args.command {
        Command::AmaValidate {
            checkpoints,
            range,
            literal_index_divisor,
        } => cli::cmd_ama_validate(
            &checkpoints,
            parse_range(&range)?,
            seed,
            args.out.as_deref(),
            literal_index_divisor,
        ),
        Command::Evaluate { literal_sum } => {
            let config_path = args
                .config
                .context("evaluate requires --config pointing at a run config")?;
            let mut config = cli::RunConfig::from_file(&config_path)?;
            if let Some(out) = args.out {
                config.output_dir = out;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            cli::cmd_evaluate(&config, literal_sum)
        }
        Command::Compare {
            pred_dir,
            pair,
            n_perm,
            p_threshold,
        } => {
            if pair.len() != 2 {
                bail!("--pair needs exactly two algorithm ids, got {}", pair.len());
            }
            cli::cmd_compare(&pred_dir, &pair[0], &pair[1], n_perm, seed, p_threshold)
        }
        Command::TheoryCheck { trials } => cli::cmd_theory_check(trials, seed, args.out.as_deref()),
        Command::Report {
            algorithms,
            n_perm,
            reference,
            reference_metric,
        } => {
            let out_dir = args
                .out
                .context("report requires --out (the evaluate output directory)")?;
            cli::cmd_report(
                &out_dir,
                algorithms,
                n_perm,
                seed,
                reference.as_deref(),
                &reference_metric,
            )
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
