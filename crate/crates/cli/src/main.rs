use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use cohgen_cli::config::{CouplingArg, Experiment, Overrides, RunConfig, SweepKind, UsageError};
use cohgen_cli::summary::Status;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "cohgen", version, about = "Unitary coherence generation from thermal spin states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unconstrained entropy maximization (micro-canonical optimum).
    Microcanonical(RunArgs),
    /// Energy-constrained optimization at one λ and/or over a λ list.
    Canonical(RunArgs),
    /// Control-field synthesis for the micro-canonical unitary.
    Grape(RunArgs),
    /// Parameter sweeps (fig1, fig4, fig5).
    Sweep(RunArgs),
    /// Print tables and rewrite the CSVs of an existing output directory.
    Report {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: <experiment>-<unix time>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spin quantum number; a comma-separated list for the fig1 sweep.
    #[arg(long, value_delimiter = ',')]
    j: Vec<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    /// Inverse temperature whose canonical energy is the target E_f.
    #[arg(long)]
    betaf: Option<f64>,
    /// Target energy E_f, instead of --betaf.
    #[arg(long, allow_negative_numbers = true)]
    energy: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
    /// Random starts per batch or grid cell.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum)]
    kind: Option<SweepKind>,
    #[arg(long, value_delimiter = ',')]
    beta0s: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    betafs: Vec<f64>,
    /// Points of the default log-spaced grids.
    #[arg(long)]
    grid_points: Option<usize>,
    /// GRAPE horizon T.
    #[arg(long)]
    time: Option<f64>,
    /// GRAPE piecewise-constant steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    target_fidelity: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            runs: self.runs,
            j: self.j.clone(),
            beta0: self.beta0,
            beta_f: self.betaf,
            energy: self.energy,
            lambda: self.lambda,
            lambdas: self.lambdas.clone(),
            alpha: self.alpha,
            coupling: self.coupling,
            kind: self.kind,
            beta0s: self.beta0s.clone(),
            beta_fs: self.betafs.clone(),
            grid_points: self.grid_points,
            total_time: self.time,
            steps: self.steps,
            target_fidelity: self.target_fidelity,
            max_iter: self.max_iter,
        }
    }

    fn resolve(&self, experiment: Experiment) -> Result<RunConfig, UsageError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        config.apply(&self.overrides());
        config.resolve(experiment)
    }
}

fn run(experiment: Experiment, args: RunArgs) -> ExitCode {
    let config = match args.resolve(experiment) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if args.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    let out = args.out.clone().unwrap_or_else(|| {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        PathBuf::from(format!("{}-{secs}", experiment.name()))
    });
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    let summary = match pool.install(|| cohgen_cli::run_to_dir(experiment, config, &out)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: writing {}: {e}", out.display());
            return ExitCode::FAILURE;
        }
    };
    print!("{}", summary.report());
    println!("artifacts: {}", out.display());
    match summary.status {
        Status::Ok => ExitCode::SUCCESS,
        Status::NotConverged => {
            eprintln!("warning: not every optimization converged; see summary.json");
            ExitCode::SUCCESS
        }
        Status::NumericalFailure => ExitCode::from(EXIT_NUMERICAL),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Microcanonical(a) => run(Experiment::Microcanonical, a),
        Command::Canonical(a) => run(Experiment::Canonical, a),
        Command::Grape(a) => run(Experiment::Grape, a),
        Command::Sweep(a) => run(Experiment::Sweep, a),
        Command::Report { dir } => match cohgen_cli::report(&dir) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", dir.display());
                ExitCode::from(EXIT_USAGE)
            }
        },
    }
}
