//! The benchmark matrix: filters crossed with clustering algorithms over a
//! set of datasets and seeds.
//!
//! Config grammar (TOML):
//!
//! ```toml
//! grid_size = 30          # penalties per path
//! restarts = 50           # restarts of EMGM, KKM and k-means
//! seeds = [1, 2]
//! gamma = 0.1             # kernel width
//! jobs = 1
//! output = "bench-out"    # relative to the config file
//! methods = ["baseline", "l0", "ridge", "km5", "km10", "km20"]
//! algorithms = ["SL", "EMGM", "KKM"]
//!
//! [[dataset]]
//! case = "i"
//!
//! [[dataset]]
//! name = "iris"
//! path = "iris.data"      # relative to the config file
//! label_col = 4
//! k = 3
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use l0_filter::clustering::{Algorithm, KernelSpec, Partition, DEFAULT_GAMMA};
use l0_filter::data::{Dataset, SyntheticCase};
use l0_filter::evaluation::adjusted_rand_index;
use l0_filter::export::fmt_real;
use l0_filter::pipeline::{
    cluster_filter_path, compute_filter_path, run_baseline, run_km_filter, FilterMethod,
    FilterPath, PipelineConfig,
};
use l0_filter::FilterError;
use rayon::prelude::*;
use serde::Deserialize;

use crate::io::{self, Source};
use crate::CliError;

/// One row family of the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Baseline,
    L0,
    Ridge,
    /// k-means filter with `multiplier * k` centroids.
    Km(usize),
}

impl Method {
    const ALL: [Method; 6] = [
        Method::Baseline,
        Method::L0,
        Method::Ridge,
        Method::Km(5),
        Method::Km(10),
        Method::Km(20),
    ];

    fn row_label(self, algorithm: Algorithm) -> String {
        match self {
            Method::Baseline => algorithm.to_string(),
            Method::L0 => format!("l0 filter + {algorithm}"),
            Method::Ridge => format!("ridge filter + {algorithm}"),
            Method::Km(m) => format!("KM filter ({m}k) + {algorithm}"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Baseline => f.write_str("none"),
            Method::L0 => f.write_str("l0"),
            Method::Ridge => f.write_str("ridge"),
            Method::Km(m) => write!(f, "km{m}"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.to_ascii_lowercase();
        match s.as_str() {
            "none" | "baseline" | "raw" => Ok(Method::Baseline),
            "l0" => Ok(Method::L0),
            "ridge" | "l2" => Ok(Method::Ridge),
            _ => s
                .strip_prefix("km")
                .and_then(|m| m.parse().ok())
                .filter(|&m: &usize| m > 0)
                .map(Method::Km)
                .ok_or_else(|| format!("unknown method '{s}'")),
        }
    }
}

fn default_grid() -> usize {
    150
}

fn default_restarts() -> usize {
    100
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_methods() -> Vec<String> {
    Method::ALL.iter().map(|m| m.to_string()).collect()
}

fn default_algorithms() -> Vec<String> {
    Algorithm::ALL.iter().map(|a| a.to_string()).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub gamma: Option<f64>,
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<String>,
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<DatasetSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: Option<String>,
    pub case: Option<String>,
    pub path: Option<PathBuf>,
    pub label_col: Option<usize>,
    #[serde(default)]
    pub ignore_cols: Vec<usize>,
    pub k: Option<usize>,
}

/// A validated dataset column of the table.
struct Column {
    name: String,
    source: ColumnSource,
    k: Option<usize>,
}

enum ColumnSource {
    Case(SyntheticCase),
    File {
        path: PathBuf,
        label_col: Option<usize>,
        ignore_cols: Vec<usize>,
    },
}

impl Column {
    fn source(&self, seed: u64) -> Source {
        match &self.source {
            ColumnSource::Case(case) => Source::Case { case: *case, seed },
            ColumnSource::File {
                path,
                label_col,
                ignore_cols,
            } => Source::File {
                path: path.clone(),
                label_col: *label_col,
                ignore_cols: ignore_cols.clone(),
            },
        }
    }
}

struct Plan {
    columns: Vec<Column>,
    rows: Vec<(Algorithm, Method)>,
    seeds: Vec<u64>,
    config: PipelineConfig,
    jobs: usize,
    output: PathBuf,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn plan(
    config: BenchConfig,
    base: &Path,
    out: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<Plan, CliError> {
    if config.methods.is_empty() || config.algorithms.is_empty() {
        return Err(invalid(
            "the methods and algorithms lists must not be empty",
        ));
    }
    if config.datasets.is_empty() || config.seeds.is_empty() {
        return Err(invalid("at least one dataset and one seed are required"));
    }
    if config.grid_size == 0 || config.restarts == 0 {
        return Err(invalid("grid_size and restarts must be positive"));
    }
    let methods = config
        .methods
        .iter()
        .map(|m| m.parse::<Method>().map_err(invalid))
        .collect::<Result<Vec<_>, _>>()?;
    let algorithms = config
        .algorithms
        .iter()
        .map(|a| a.parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()?;
    let rows = algorithms
        .iter()
        .flat_map(|&a| methods.iter().map(move |&m| (a, m)))
        .collect();
    let mut columns = Vec::new();
    for spec in config.datasets {
        let (source, default_name) = match (&spec.case, &spec.path) {
            (Some(case), None) => {
                let case: SyntheticCase = case.parse()?;
                (ColumnSource::Case(case), format!("({case})"))
            }
            (None, Some(path)) => {
                let path = base.join(path);
                if !path.is_file() {
                    return Err(invalid(format!(
                        "dataset file {} not found",
                        path.display()
                    )));
                }
                let stem = path
                    .file_stem()
                    .map_or("data".into(), |s| s.to_string_lossy().into_owned());
                (
                    ColumnSource::File {
                        path,
                        label_col: spec.label_col,
                        ignore_cols: spec.ignore_cols.clone(),
                    },
                    stem,
                )
            }
            _ => return Err(invalid("each dataset needs exactly one of case or path")),
        };
        columns.push(Column {
            name: spec.name.unwrap_or(default_name),
            source,
            k: spec.k,
        });
    }
    let mut pipeline = PipelineConfig {
        grid_size: config.grid_size,
        ..PipelineConfig::default()
    };
    pipeline.cluster.restarts = config.restarts;
    pipeline.cluster.kernel = KernelSpec::gaussian(config.gamma.unwrap_or(DEFAULT_GAMMA))?;
    let output =
        out.unwrap_or_else(|| base.join(config.output.unwrap_or_else(|| "bench-out".into())));
    Ok(Plan {
        columns,
        rows,
        seeds: config.seeds,
        config: pipeline,
        jobs: jobs.or(config.jobs).unwrap_or(1),
        output,
    })
}

/// Outcome of one (row, dataset, seed) cell.
struct Cell {
    row: usize,
    column: usize,
    seed: u64,
    ari: Result<f64, String>,
    seconds: f64,
}

/// Everything computed for one dataset draw.
struct Unit {
    cells: Vec<Cell>,
    /// Continuation trace of the l0 path, for the timing exports.
    l0_path: Option<FilterPath>,
}

fn run_unit(plan: &Plan, column: usize, seed: u64) -> Unit {
    let col = &plan.columns[column];
    let fail_all = |msg: String| Unit {
        cells: (0..plan.rows.len())
            .map(|row| Cell {
                row,
                column,
                seed,
                ari: Err(msg.clone()),
                seconds: 0.0,
            })
            .collect(),
        l0_path: None,
    };
    let source = col.source(seed);
    let data = match source.load() {
        Ok(d) => d,
        Err(e) => return fail_all(format!("{e:?}")),
    };
    let Some(truth) = data.labels().map(Partition::from_labels) else {
        return fail_all("dataset has no labels".into());
    };
    let Some(k) = col.k.or_else(|| source.default_k(&data)) else {
        return fail_all("k unknown".into());
    };
    let needs = |m: Method| plan.rows.iter().any(|r| r.1 == m);
    let path_for = |method: FilterMethod| {
        let started = Instant::now();
        let path =
            compute_filter_path(&data, method, None, &plan.config).map_err(|e| e.to_string());
        (path, started.elapsed().as_secs_f64())
    };
    let l0 = needs(Method::L0).then(|| path_for(FilterMethod::L0));
    let ridge = needs(Method::Ridge).then(|| path_for(FilterMethod::Ridge));
    let cells = plan
        .rows
        .iter()
        .enumerate()
        .map(|(row, &(algorithm, method))| {
            let started = Instant::now();
            let (partition, path_seconds) =
                cell_partition(&data, k, algorithm, method, plan, seed, &l0, &ridge);
            let ari =
                partition.and_then(|p| adjusted_rand_index(&truth, &p).map_err(|e| e.to_string()));
            if let Err(e) = &ari {
                log::warn!(
                    "{} on {} (seed {seed}) failed: {e}",
                    method.row_label(algorithm),
                    col.name
                );
            }
            Cell {
                row,
                column,
                seed,
                ari,
                seconds: path_seconds + started.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Unit {
        cells,
        l0_path: l0.and_then(|(p, _)| p.ok()),
    }
}

type TimedPath = Option<(Result<FilterPath, String>, f64)>;

#[allow(clippy::too_many_arguments)]
fn cell_partition(
    data: &Dataset,
    k: usize,
    algorithm: Algorithm,
    method: Method,
    plan: &Plan,
    seed: u64,
    l0: &TimedPath,
    ridge: &TimedPath,
) -> (Result<Partition, String>, f64) {
    let cluster = &plan.config.cluster;
    let filtered = |path: &TimedPath| match path {
        Some((Ok(p), secs)) => (
            cluster_filter_path(p, k, algorithm, &plan.config, seed)
                .map(|r| r.partition)
                .map_err(|e| e.to_string()),
            *secs,
        ),
        Some((Err(e), secs)) => (Err(e.clone()), *secs),
        None => (Err("path not computed".into()), 0.0),
    };
    match method {
        Method::Baseline => (
            run_baseline(data, k, algorithm, cluster, seed).map_err(|e| e.to_string()),
            0.0,
        ),
        Method::Km(m) => (
            run_km_filter(data, k, m, algorithm, cluster, seed)
                .map_err(|e: FilterError| e.to_string()),
            0.0,
        ),
        Method::L0 => filtered(l0),
        Method::Ridge => filtered(ridge),
    }
}

pub fn cmd_bench(
    config_path: &Path,
    out: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| io::io_error(config_path, e))?;
    let config: BenchConfig =
        toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", config_path.display())))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let plan = plan(config, base, out, jobs)?;

    let units: Vec<(usize, u64)> = (0..plan.columns.len())
        .flat_map(|c| plan.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| invalid(e.to_string()))?;
    let results: Vec<Unit> = pool.install(|| {
        units
            .par_iter()
            .map(|&(c, s)| run_unit(&plan, c, s))
            .collect()
    });
    log::info!(
        "benchmark finished in {:.1} s",
        started.elapsed().as_secs_f64()
    );

    write_outputs(&plan, &units, &results)?;
    let succeeded = results
        .iter()
        .flat_map(|u| &u.cells)
        .filter(|c| c.ari.is_ok())
        .count();
    if succeeded == 0 {
        return Err(CliError::Numerical("every benchmark cell failed".into()));
    }
    Ok(())
}

fn write_outputs(plan: &Plan, units: &[(usize, u64)], results: &[Unit]) -> Result<(), CliError> {
    let dir = &plan.output;
    io::create_dir(dir)?;
    let mut sums = vec![vec![(0.0, 0usize); plan.columns.len()]; plan.rows.len()];
    let mut cell_rows = Vec::new();
    for cell in results.iter().flat_map(|u| &u.cells) {
        let (algorithm, method) = plan.rows[cell.row];
        if let Ok(a) = cell.ari {
            let s = &mut sums[cell.row][cell.column];
            s.0 += a;
            s.1 += 1;
        }
        cell_rows.push(vec![
            method.row_label(algorithm),
            plan.columns[cell.column].name.clone(),
            cell.seed.to_string(),
            cell.ari.as_ref().map_or("NA".into(), |&a| fmt_real(a)),
            fmt_real(cell.seconds),
            cell.ari.as_ref().err().cloned().unwrap_or_default(),
        ]);
    }
    io::write_csv(
        &dir.join("cells.csv"),
        &["method", "dataset", "seed", "ari", "seconds", "error"],
        &cell_rows,
    )?;

    let means: Vec<Vec<Option<f64>>> = sums
        .iter()
        .map(|r| {
            r.iter()
                .map(|&(s, n)| (n > 0).then(|| s / n as f64))
                .collect()
        })
        .collect();
    let labels: Vec<String> = plan.rows.iter().map(|&(a, m)| m.row_label(a)).collect();
    let mut header = vec!["method"];
    header.extend(plan.columns.iter().map(|c| c.name.as_str()));
    let table_rows: Vec<Vec<String>> = labels
        .iter()
        .zip(&means)
        .map(|(label, row)| {
            let mut r = vec![label.clone()];
            r.extend(row.iter().map(|v| v.map_or("NA".into(), fmt_real)));
            r
        })
        .collect();
    io::write_csv(&dir.join("ari_table.csv"), &header, &table_rows)?;

    let text = aligned_table(&header, &labels, &means);
    std::fs::write(dir.join("ari_table.txt"), &text)
        .map_err(|e| io::io_error(&dir.join("ari_table.txt"), e))?;
    print!("{text}");

    let traces = dir.join("traces");
    for (&(column, seed), unit) in units.iter().zip(results) {
        if let Some(path) = &unit.l0_path {
            io::create_dir(&traces)?;
            let stem = format!("{}_seed{seed}", sanitize(&plan.columns[column].name));
            io::write_with(&traces.join(format!("{stem}_trace.csv")), |w| {
                path.write_trace_csv(w)
            })?;
            io::write_with(&traces.join(format!("{stem}_stages.csv")), |w| {
                path.write_stage_averages_csv(w)
            })?;
        }
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn aligned_table(header: &[&str], labels: &[String], means: &[Vec<Option<f64>>]) -> String {
    let cells: Vec<Vec<String>> = means
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| v.map_or("NA".into(), |a| format!("{a:.4}")))
                .collect()
        })
        .collect();
    let first = labels
        .iter()
        .map(|l| l.len())
        .chain([header[0].len()])
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = (1..header.len())
        .map(|j| {
            cells
                .iter()
                .map(|r| r[j - 1].len())
                .chain([header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = format!("{:<first$}", header[0]);
    for (h, w) in header[1..].iter().zip(&widths) {
        out.push_str(&format!("  {h:>w$}"));
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(&cells) {
        out.push_str(&format!("{label:<first$}"));
        for (v, w) in row.iter().zip(&widths) {
            out.push_str(&format!("  {v:>w$}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("km0".parse::<Method>().is_err());
        assert!("lasso".parse::<Method>().is_err());
        assert_eq!(
            Method::Km(5).row_label(Algorithm::KernelKMeans),
            "KM filter (5k) + KKM"
        );
    }

    #[test]
    fn default_matrix_has_eighteen_rows() {
        let config: BenchConfig = toml::from_str("[[dataset]]\ncase = \"i\"\n").unwrap();
        let plan = plan(config, Path::new("."), None, None).unwrap();
        assert_eq!(plan.rows.len(), 18);
        assert_eq!(plan.columns[0].name, "(i)");
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "methods = []\n[[dataset]]\ncase = \"i\"\n",
            "methods = [\"lasso\"]\n[[dataset]]\ncase = \"i\"\n",
            "[[dataset]]\ncase = \"ix\"\n",
            "[[dataset]]\ncase = \"i\"\npath = \"x.csv\"\n",
            "grid_size = 0\n[[dataset]]\ncase = \"i\"\n",
            "seeds = [1]\n",
        ];
        for text in bad {
            let config: BenchConfig = toml::from_str(text).unwrap();
            assert!(plan(config, Path::new("."), None, None).is_err(), "{text}");
        }
        assert!(toml::from_str::<BenchConfig>("colour = 1\n").is_err());
    }

    #[test]
    fn shipped_configs_are_valid() {
        let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        for (text, columns) in [
            (include_str!("../../../configs/desk.toml"), 4),
            (include_str!("../../../configs/table.toml"), 6),
        ] {
            let config: BenchConfig = toml::from_str(text).unwrap();
            let plan = plan(config, &base, None, None).unwrap();
            assert_eq!(plan.columns.len(), columns);
            assert_eq!(plan.rows.len(), 18);
        }
    }

    #[test]
    fn table_columns_line_up() {
        let text = aligned_table(
            &["method", "(i)", "iris"],
            &["SL".into(), "l0 filter + SL".into()],
            &[vec![Some(0.0), None], vec![Some(1.0), Some(0.5)]],
        );
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
        assert!(lines[1].ends_with("NA"));
    }
}
