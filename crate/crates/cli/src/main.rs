//! `sdot`: solve, regularize and check semi-discrete transport problems with
//! storage fees.
//!
//! Exit codes: 0 success, 1 malformed input, 2 failed assumption or check,
//! 3 Newton iteration cap. Failures print a one-line JSON diagnostic on stderr.

mod commands;
mod failure;
mod instances;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::Failure;

#[derive(Parser)]
#[command(name = "sdot", version, about = "Semi-discrete optimal transport with storage fees")]
struct Cli {
    /// Worker threads for mass and Jacobian evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for output artifacts; created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct InputArgs {
    /// Problem description (JSON).
    #[arg(long)]
    pub problem: PathBuf,

    /// Fee description (JSON list of parts); overrides the problem's own fee.
    #[arg(long)]
    pub fee: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Stop once the Euclidean norm of the gradient drops below this.
    #[arg(long, default_value_t = 1e-8)]
    pub zeta: f64,

    /// Lower bound on the conjugate gradient; defaults to the smallest lower domain end.
    #[arg(long)]
    pub eps: Option<f64>,

    /// Cell-mass floor; defaults to min(eps/6, 0.15/N).
    #[arg(long)]
    pub eps0: Option<f64>,

    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,

    /// Regularize the fee first when it does not meet the solver's hypotheses.
    #[arg(long)]
    pub auto_regularize: bool,

    /// Perturbation size for --auto-regularize.
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the damped Newton solver; writes trace.csv and result.json.
    Solve(SolveArgs),

    /// Regularize a fee; writes fee.json and regularization.json.
    Regularize {
        #[command(flatten)]
        input: InputArgs,

        #[arg(long)]
        eta: f64,
    },

    /// Run seeded property suites; writes verify.json.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Grid step for the brute-force comparisons.
        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,
    },

    /// Compare the Newton solution with a brute-force grid search; writes oracle.json.
    OracleCompare {
        #[command(flatten)]
        input: InputArgs,

        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,

        #[arg(long, default_value_t = 1e-10)]
        zeta: f64,
    },

    /// Measure how far the minimiser moves under fee perturbations; writes stability.json.
    Stability {
        #[command(flatten)]
        input: InputArgs,

        /// Second fee to compare against; without it a scaling ladder is run.
        #[arg(long)]
        fee2: Option<PathBuf>,

        /// Relative scalings for the ladder, largest first.
        #[arg(long, value_delimiter = ',', default_values_t = [0.04, 0.01, 0.0025])]
        steps: Vec<f64>,

        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,

        #[arg(long, default_value_t = 1e-10)]
        zeta: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Debug)]
pub enum Suite {
    All,
    Geometry,
    Fees,
    Solver,
    Shuffle,
    Regularize,
    Oracle,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::malformed("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::malformed("threads", e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::malformed("out", format!("{}: {e}", cli.out.display())))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Solve(args) => commands::solve(&args, out),
        Command::Regularize { input, eta } => commands::regularize(&input, eta, out),
        Command::Verify {
            suite,
            seed,
            grid_step,
        } => verify::run(suite, seed, grid_step, out),
        Command::OracleCompare {
            input,
            grid_step,
            zeta,
        } => commands::oracle_compare(&input, grid_step, zeta, out),
        Command::Stability {
            input,
            fee2,
            steps,
            grid_step,
            zeta,
        } => commands::stability(&input, fee2.as_deref(), &steps, grid_step, zeta, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let field = e
                .get(clap::error::ContextKind::InvalidArg)
                .map_or_else(|| "arguments".to_string(), |v| v.to_string());
            let failure = Failure::malformed(field, e.kind().to_string());
            eprintln!("{}", failure.diagnostic());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.diagnostic());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
