mod bench;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use l0_filter::clustering::{Algorithm, KernelSpec, Partition};
use l0_filter::data::{Dataset, SyntheticCase};
use l0_filter::evaluation::adjusted_rand_index;
use l0_filter::export::fmt_real;
use l0_filter::pipeline::{
    cluster_filter_path, compute_filter_path, run_baseline, run_km_filter, FilterMethod,
    FilterPath, PipelineConfig,
};
use l0_filter::FilterError;

use crate::io::Source;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or I/O. Exit code 2.
    Input(String),
    /// The numerics failed. Exit code 3.
    Numerical(String),
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        use FilterError::*;
        match e {
            NonFinite { .. }
            | LineSearchFailed { .. }
            | Continuation { .. }
            | BudgetExhausted(_)
            | NoCollapse(_)
            | Degenerate(_)
            | AllLambdasFailed => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "l0filter",
    version,
    about = "Smoothed l0 data filter for cluster analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV with a label column.
    Generate {
        #[arg(long)]
        case: SyntheticCase,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the filter problem over a penalty grid.
    Filter(FilterArgs),
    /// Cluster a dataset, optionally after filtering.
    Cluster(ClusterArgs),
    /// Run a benchmark matrix described by a TOML file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Export solve times per penalty and per sharpness stage.
    Timing {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 150)]
        grid_size: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Synthetic case tag (i, ii, iii, iv).
    #[arg(long, conflicts_with = "input")]
    case: Option<SyntheticCase>,
    /// Seed for the synthetic draw and the randomized algorithms.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV file of samples.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Zero-based label column of the CSV file.
    #[arg(long)]
    label_col: Option<usize>,
    /// Zero-based CSV columns to skip, e.g. identifiers.
    #[arg(long = "ignore-col")]
    ignore_cols: Vec<usize>,
}

impl InputArgs {
    fn source(&self) -> Result<Source, CliError> {
        match (&self.case, &self.input) {
            (Some(case), None) => Ok(Source::Case {
                case: *case,
                seed: self.seed,
            }),
            (None, Some(path)) => Ok(Source::File {
                path: path.clone(),
                label_col: self.label_col,
                ignore_cols: self.ignore_cols.clone(),
            }),
            _ => Err(CliError::Input(
                "give exactly one of --case or --input".into(),
            )),
        }
    }
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "l0")]
    method: FilterMethod,
    #[arg(long, default_value_t = 150)]
    grid_size: usize,
    /// Explicit penalties; replaces the grid built from the collapse penalty.
    #[arg(long = "lambda", value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of clusters; defaults to the number of classes.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "sl")]
    algorithm: Algorithm,
    /// none, l0, ridge, km5, km10 or km20.
    #[arg(long, default_value = "l0")]
    method: bench::Method,
    #[arg(long, default_value_t = 150)]
    grid_size: usize,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    /// Gaussian kernel width for kernel k-means and the criterion.
    #[arg(long, default_value_t = l0_filter::clustering::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { case, seed, out } => cmd_generate(case, seed, &out),
        Command::Filter(args) => cmd_filter(&args),
        Command::Cluster(args) => cmd_cluster(&args),
        Command::Bench { config, out, jobs } => bench::cmd_bench(&config, out, jobs),
        Command::Timing {
            input,
            grid_size,
            jobs,
            out,
        } => cmd_timing(&input, grid_size, jobs, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Input(msg) | CliError::Numerical(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}

fn cmd_generate(case: SyntheticCase, seed: u64, out: &std::path::Path) -> Result<(), CliError> {
    let data = Source::Case { case, seed }.load()?;
    io::write_with(out, |w| data.write_csv(w))?;
    println!(
        "m = {}, n = {}, k = {}",
        data.len(),
        data.dim(),
        case.num_clusters()
    );
    Ok(())
}

fn pipeline_config(grid_size: usize, jobs: usize) -> Result<PipelineConfig, CliError> {
    if grid_size == 0 {
        return Err(CliError::Input("--grid-size must be positive".into()));
    }
    Ok(PipelineConfig {
        grid_size,
        jobs,
        ..PipelineConfig::default()
    })
}

fn write_path(path: &FilterPath, dir: &std::path::Path) -> Result<(), CliError> {
    io::create_dir(dir)?;
    let mut rows = Vec::new();
    for (i, entry) in path.entries.iter().enumerate() {
        let file = format!("centroids_{i:03}.csv");
        let (groups, error) = match &entry.filtered {
            Ok(f) => {
                let centroids = Dataset::new("centroids", f.centroids.clone(), None)?;
                io::write_with(&dir.join(&file), |w| centroids.write_csv(w))?;
                (f.groups.num_groups().to_string(), String::new())
            }
            Err(e) => ("NA".into(), e.clone()),
        };
        rows.push(vec![
            i.to_string(),
            fmt_real(entry.lambda),
            groups,
            fmt_real(entry.seconds),
            file,
            error,
        ]);
    }
    io::write_csv(
        &dir.join("lambdas.csv"),
        &[
            "index",
            "lambda",
            "num_merge_groups",
            "seconds",
            "file",
            "error",
        ],
        &rows,
    )?;
    if path.method == FilterMethod::L0 {
        io::write_with(&dir.join("trace.csv"), |w| path.write_trace_csv(w))?;
        io::write_with(&dir.join("stage_averages.csv"), |w| {
            path.write_stage_averages_csv(w)
        })?;
    }
    Ok(())
}

fn cmd_filter(args: &FilterArgs) -> Result<(), CliError> {
    let data = args.input.source()?.load()?;
    let config = pipeline_config(args.grid_size, args.jobs)?;
    let grid = (!args.lambdas.is_empty()).then_some(args.lambdas.as_slice());
    let path = compute_filter_path(&data, args.method, grid, &config)?;
    write_path(&path, &args.out)?;
    let ok = path.entries.iter().filter(|e| e.filtered.is_ok()).count();
    println!(
        "{} filter: {ok}/{} penalties solved, written to {}",
        args.method.name(),
        path.entries.len(),
        args.out.display()
    );
    if ok == 0 {
        return Err(CliError::Numerical("every penalty failed".into()));
    }
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs) -> Result<(), CliError> {
    let source = args.input.source()?;
    let data = source.load()?;
    let k = args
        .k
        .or_else(|| source.default_k(&data))
        .ok_or_else(|| CliError::Input("--k is required for unlabelled data".into()))?;
    let mut config = pipeline_config(args.grid_size, args.jobs)?;
    config.cluster.restarts = args.restarts;
    config.cluster.kernel = KernelSpec::gaussian(args.gamma)?;
    let seed = args.input.seed;
    io::create_dir(&args.out)?;
    let started = Instant::now();
    let partition = match args.method {
        bench::Method::Baseline => run_baseline(&data, k, args.algorithm, &config.cluster, seed)?,
        bench::Method::Km(mult) => {
            run_km_filter(&data, k, mult, args.algorithm, &config.cluster, seed)?
        }
        bench::Method::L0 | bench::Method::Ridge => {
            let method = if args.method == bench::Method::L0 {
                FilterMethod::L0
            } else {
                FilterMethod::Ridge
            };
            let path = compute_filter_path(&data, method, None, &config)?;
            let result = cluster_filter_path(&path, k, args.algorithm, &config, seed)?;
            io::write_with(&args.out.join("entries.csv"), |w| {
                result.write_entries_csv(w)
            })?;
            if method == FilterMethod::L0 {
                io::write_with(&args.out.join("trace.csv"), |w| path.write_trace_csv(w))?;
            }
            println!("selected lambda = {}", result.best_entry().lambda);
            result.partition
        }
    };
    io::write_with(&args.out.join("partition.csv"), |w| partition.write_csv(w))?;
    print!(
        "{} + {}: sizes {:?}",
        args.method,
        args.algorithm,
        partition.sizes()
    );
    if let Some(labels) = data.labels() {
        let ari = adjusted_rand_index(&Partition::from_labels(labels), &partition)?;
        print!(", ARI {ari:.4}");
    }
    println!(" ({:.2} s)", started.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_timing(
    input: &InputArgs,
    grid_size: usize,
    jobs: usize,
    out: &std::path::Path,
) -> Result<(), CliError> {
    let data = input.source()?.load()?;
    let config = pipeline_config(grid_size, jobs)?;
    let path = compute_filter_path(&data, FilterMethod::L0, None, &config)?;
    io::create_dir(out)?;
    io::write_with(&out.join("trace.csv"), |w| path.write_trace_csv(w))?;
    io::write_with(&out.join("stage_averages.csv"), |w| {
        path.write_stage_averages_csv(w)
    })?;
    let rows: Vec<Vec<String>> = path
        .entries
        .iter()
        .map(|e| {
            let groups = e
                .filtered
                .as_ref()
                .map_or("NA".into(), |f| f.groups.num_groups().to_string());
            vec![fmt_real(e.lambda), fmt_real(e.seconds), groups]
        })
        .collect();
    io::write_csv(
        &out.join("lambda_times.csv"),
        &["lambda", "seconds", "num_merge_groups"],
        &rows,
    )?;
    let total: f64 = path.entries.iter().map(|e| e.seconds).sum();
    println!(
        "{} penalties, {:.2} s solving, mean {:.4} s per penalty",
        path.entries.len(),
        total,
        total / path.entries.len() as f64
    );
    Ok(())
}
