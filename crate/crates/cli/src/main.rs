use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tomo_core::estimators::{
    dataset_noise_level, least_squares, oracle, penalised, physical_threshold, trace_normalize,
};
use tomo_core::experiments::{aggregate, emit_outputs, run_experiment, ExperimentConfig, OutputPaths};
use tomo_core::fisher_bounds::{fisher_check, MixedDiagonalCoupling};
use tomo_core::model_selection::{cv_penalty_constant, cv_rank, cv_threshold_constant, CvGrid};
use tomo_core::sampler::{load_state, merge, save_state, split_batches, CountsDataset, EstimateFile};
use tomo_core::state_gen::{random_rank_r_state, StateSpec};
use tomo_core::{Result, TomoError};

#[derive(Parser)]
#[command(name = "tomo", version, about = "Low-rank state tomography from Pauli-setting counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random rank-r state and simulate count data in batches.
    Simulate(SimulateArgs),
    /// Estimate a state from one or more dataset files.
    Estimate(EstimateArgs),
    /// Run a simulation study described by a JSON config.
    Experiment(ExperimentArgs),
    /// Compare the Monte Carlo Haar-averaged Fisher information with its closed form.
    FisherCheck(FisherArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    rank: usize,
    /// Repetitions per setting, summed over batches.
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 5)]
    batches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    state_out: PathBuf,
    /// Merged dataset; with more than one batch, `<stem>-batch<j>.json` files
    /// are written alongside.
    #[arg(long)]
    data_out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ls,
    Pen,
    Phys,
    CvRank,
    PenCv,
    PhysCv,
    Oracle,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Ls => "ls",
            Method::Pen => "pen",
            Method::Phys => "phys",
            Method::CvRank => "cv-rank",
            Method::PenCv => "pen-cv",
            Method::PhysCv => "phys-cv",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(clap::Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Dataset files; cross-validated methods treat each file as one batch.
    #[arg(long = "data", required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// True state, required by the oracle.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Comma-separated grid of constants in [0, 3] for pen-cv and phys-cv.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Output file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for records.csv, summary.json and figures/, overriding the
    /// config's output paths.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Coupling {
    Tabulated,
    Derived,
}

#[derive(clap::Args)]
struct FisherArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Value used for the mixed diagonal-block coupling.
    #[arg(long, value_enum, default_value = "tabulated")]
    reference: Coupling,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| TomoError::Io { path: p.to_path_buf(), source: e }),
        None => {
            stdout_line(text);
            Ok(())
        }
    }
}

/// Writes to stdout, treating a closed pipe as the reader having had enough.
fn stdout_line(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn batch_path(data_out: &Path, j: usize) -> PathBuf {
    let stem = data_out.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    data_out.with_file_name(format!("{stem}-batch{j}.json"))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    if args.k == 0 || args.k > tomo_core::pauli_model::MAX_QUBITS {
        return Err(TomoError::InvalidArgument(format!("k must be in 1..=10, got {}", args.k)));
    }
    let rho = random_rank_r_state(&StateSpec::new(1 << args.k, args.rank, args.seed))?;
    let batches = split_batches(&rho, args.n, args.seed, args.batches)?;
    save_state(&rho, &args.state_out)?;
    merge(&batches)?.save(&args.data_out)?;
    if batches.len() > 1 {
        for (j, b) in batches.iter().enumerate() {
            b.save(&batch_path(&args.data_out, j + 1))?;
        }
    }
    eprintln!(
        "wrote {} and {} ({} batch(es) of n = {})",
        args.state_out.display(),
        args.data_out.display(),
        batches.len(),
        args.n / args.batches as u64
    );
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let batches = args
        .data
        .iter()
        .map(|p| CountsDataset::load(p))
        .collect::<Result<Vec<_>>>()?;
    let all = merge(&batches)?;
    let nu = dataset_noise_level(&all, args.epsilon)?.nu;
    let grid = match args.grid {
        Some(values) => CvGrid::new(values)?,
        None => CvGrid::default(),
    };
    let ls = least_squares(&all);
    let name = args.method.name();
    let file = match args.method {
        Method::Ls => EstimateFile::new(name, &ls, ls.dim(), nu, None)?,
        Method::Pen => {
            let fit = penalised(&ls, nu)?;
            EstimateFile::new(name, &fit.estimate, fit.rank, nu, None)?
        }
        Method::Phys => {
            let fit = physical_threshold(&trace_normalize(&ls), nu)?;
            EstimateFile::new(name, &fit.state.as_estimate(), fit.rank, nu, None)?
        }
        Method::CvRank => {
            let fit = cv_rank(&batches)?;
            EstimateFile::new(name, &fit.estimate, fit.rank, nu, None)?
        }
        Method::PenCv => {
            let fit = cv_penalty_constant(&batches, &grid, args.epsilon)?;
            EstimateFile::new(name, &fit.estimate, fit.rank, nu, Some(fit.constant))?
        }
        Method::PhysCv => {
            let fit = cv_threshold_constant(&batches, &grid, args.epsilon)?;
            EstimateFile::new(name, &fit.estimate.state.as_estimate(), fit.estimate.rank, nu, Some(fit.constant))?
        }
        Method::Oracle => {
            let path = args
                .state
                .as_ref()
                .ok_or_else(|| TomoError::InvalidArgument("--method oracle needs --state".into()))?;
            let fit = oracle(&ls, &load_state(path)?)?;
            EstimateFile::new(name, &fit.estimate, fit.rank, nu, None)?
        }
    };
    write_output(args.out.as_deref(), &file.to_json_string())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = &args.out {
        config.output = OutputPaths {
            records_csv: Some(dir.join("records.csv")),
            summary_json: Some(dir.join("summary.json")),
            figures_dir: Some(dir.join("figures")),
        };
    }
    let records = run_experiment(&config)?;
    let summary = aggregate(&records)?;
    let written = emit_outputs(&summary, &records, &config.output)?;
    let mut table = String::from("rank\tn\testimator\tmean_sq_error\tstd_error\tn*mse");
    for row in &summary {
        table.push_str(&format!(
            "\n{}\t{}\t{}\t{:.6}\t{:.6}\t{:.4}",
            row.rank, row.n, row.estimator, row.mean_sq_error, row.standard_error, row.renormalised_mse
        ));
    }
    stdout_line(&table);
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn fisher(args: FisherArgs) -> Result<()> {
    let reference = match args.reference {
        Coupling::Tabulated => MixedDiagonalCoupling::Tabulated,
        Coupling::Derived => MixedDiagonalCoupling::Derived,
    };
    let report = fisher_check(args.d, args.r, args.samples, args.seed, reference)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| TomoError::Parse(e.to_string()))?;
    write_output(args.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Experiment(a) => experiment(a),
        Command::FisherCheck(a) => fisher(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
