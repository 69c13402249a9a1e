//! Penalty-path filtering followed by clustering, the ridge and k-means
//! variants, and the unfiltered baseline.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::clustering::{
    kmeans, run_algorithm, run_algorithm_weighted, Algorithm, ClusterConfig, KernelSpec, Partition,
};
use crate::data::{fit_scale, Dataset};
use crate::error::{FilterError, Result};
use crate::evaluation::{adjusted_rand_index, CriterionValue, KernelDistanceTable};
use crate::export::fmt_real;
use crate::model::{compute_weights, PairWeights};
use crate::seeds::derive_seed;
use crate::solver::{
    build_lambda_grid, find_lambda_max, find_ridge_lambda_max, merge_centroids, solve_ridge,
    solve_smooth_l0, MergeGroups, SolveTrace, SolverConfig, RIDGE_GRAD_TOL,
};

/// Which penalized problem produces the filtered points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterMethod {
    /// Smooth l0 surrogate with sharpness continuation.
    L0,
    /// Squared l2 penalty.
    Ridge,
}

impl FilterMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::L0 => "l0",
            Self::Ridge => "ridge",
        }
    }
}

impl std::str::FromStr for FilterMethod {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(Self::L0),
            "ridge" | "l2" => Ok(Self::Ridge),
            other => Err(FilterError::InvalidArgument(format!(
                "unknown filter method '{other}'"
            ))),
        }
    }
}

/// Everything a pipeline run needs besides the data, `k` and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub cluster: ClusterConfig,
    /// Decay rate of the pair weights.
    pub weight_theta: f64,
    /// Number of penalties when the grid is built from the collapse penalty.
    pub grid_size: usize,
    /// Start each l0 solve from the previous penalty's solution instead of
    /// the samples. Forces sequential solves.
    pub chained_warm_start: bool,
    /// Worker threads for the per-penalty work; 0 uses every core.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            cluster: ClusterConfig::default(),
            weight_theta: 0.1,
            grid_size: 150,
            chained_warm_start: false,
            jobs: 1,
        }
    }
}

/// Filtered points for one penalty.
#[derive(Debug, Clone)]
pub struct FilteredPoints {
    pub centroids: Array2<f64>,
    pub groups: MergeGroups,
    /// Continuation record; absent for ridge solves.
    pub trace: Option<SolveTrace>,
}

/// Solve outcome for one penalty of the path.
#[derive(Debug, Clone)]
pub struct PathEntry {
    pub lambda: f64,
    pub seconds: f64,
    pub filtered: std::result::Result<FilteredPoints, String>,
}

/// Filtered points over a whole penalty grid. Independent of the clustering
/// algorithm, so one path serves every algorithm and seed on the same data.
#[derive(Debug, Clone)]
pub struct FilterPath {
    pub method: FilterMethod,
    /// The input scaled to `[-1, 1]` per feature.
    pub scaled: Dataset,
    /// Collapse penalty, when the grid was built from it.
    pub lambda_max: Option<f64>,
    pub entries: Vec<PathEntry>,
}

impl FilterPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    /// Writes one row per continuation stage of every successful l0 solve.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        write_row(
            &mut w,
            [
                "lambda",
                "t",
                "alpha",
                "epsilon",
                "iterations",
                "grad_norm",
                "objective",
                "seconds",
            ]
            .map(String::from),
        )?;
        for entry in &self.entries {
            let Some(trace) = entry.filtered.as_ref().ok().and_then(|f| f.trace.as_ref()) else {
                continue;
            };
            for s in &trace.stages {
                write_row(
                    &mut w,
                    [
                        fmt_real(entry.lambda),
                        s.t.to_string(),
                        fmt_real(s.alpha),
                        fmt_real(s.epsilon),
                        s.iterations.to_string(),
                        fmt_real(s.grad_norm),
                        fmt_real(s.objective),
                        fmt_real(s.seconds),
                    ],
                )?;
            }
        }
        flush(w)
    }

    /// Per-stage means over every successful l0 solve of the path: one row
    /// per sharpness value with the average iterations and seconds.
    pub fn stage_averages(&self) -> Vec<StageAverage> {
        let mut rows: Vec<StageAverage> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for trace in self
            .entries
            .iter()
            .filter_map(|e| e.filtered.as_ref().ok().and_then(|f| f.trace.as_ref()))
        {
            for (i, s) in trace.stages.iter().enumerate() {
                if rows.len() <= i {
                    rows.push(StageAverage {
                        t: s.t,
                        alpha: s.alpha,
                        iterations: 0.0,
                        seconds: 0.0,
                    });
                    counts.push(0);
                }
                rows[i].iterations += s.iterations as f64;
                rows[i].seconds += s.seconds;
                counts[i] += 1;
            }
        }
        for (row, &c) in rows.iter_mut().zip(&counts) {
            row.iterations /= c as f64;
            row.seconds /= c as f64;
        }
        rows
    }

    pub fn write_stage_averages_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        write_row(
            &mut w,
            ["t", "alpha", "mean_iterations", "mean_seconds"].map(String::from),
        )?;
        for r in self.stage_averages() {
            write_row(
                &mut w,
                [
                    r.t.to_string(),
                    fmt_real(r.alpha),
                    fmt_real(r.iterations),
                    fmt_real(r.seconds),
                ],
            )?;
        }
        flush(w)
    }
}

/// Mean cost of one continuation stage across a path.
#[derive(Debug, Clone, PartialEq)]
pub struct StageAverage {
    pub t: usize,
    pub alpha: f64,
    pub iterations: f64,
    pub seconds: f64,
}

/// Clustering outcome for one penalty.
#[derive(Debug, Clone)]
pub struct PipelineEntry {
    pub lambda: f64,
    /// Number of merge groups among the filtered points.
    pub num_groups: Option<usize>,
    pub partition: Option<Partition>,
    pub criterion: Option<CriterionValue>,
    /// Agreement with the ground-truth labels, when the data has them.
    pub ari: Option<f64>,
    /// Solve plus clustering time.
    pub seconds: f64,
    pub error: Option<String>,
}

/// All per-penalty entries of a run and the selected partition.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub method: FilterMethod,
    pub algorithm: Algorithm,
    pub k: usize,
    pub entries: Vec<PipelineEntry>,
    /// Index of the entry with the smallest criterion.
    pub best: usize,
    pub partition: Partition,
}

impl PipelineResult {
    pub fn best_entry(&self) -> &PipelineEntry {
        &self.entries[self.best]
    }

    /// Writes `lambda,num_merge_groups,criterion,ari,seconds`; missing
    /// values are written as `NA`.
    pub fn write_entries_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        write_row(
            &mut w,
            ["lambda", "num_merge_groups", "criterion", "ari", "seconds"].map(String::from),
        )?;
        for e in &self.entries {
            write_row(
                &mut w,
                [
                    fmt_real(e.lambda),
                    e.num_groups.map_or("NA".into(), |g| g.to_string()),
                    fmt_real(e.criterion.as_ref().map_or(f64::NAN, |c| c.value)),
                    fmt_real(e.ari.unwrap_or(f64::NAN)),
                    fmt_real(e.seconds),
                ],
            )?;
        }
        flush(w)
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::Writer::from_writer(out)
}

fn write_row<W: Write, const N: usize>(w: &mut csv::Writer<W>, row: [String; N]) -> Result<()> {
    w.write_record(&row).map_err(|source| FilterError::Csv {
        path: "<output>".into(),
        source,
    })
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|source| FilterError::Io {
        path: "<output>".into(),
        source,
    })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| FilterError::InvalidArgument(format!("thread pool: {e}")))
}

fn solve_one(
    method: FilterMethod,
    points: &Array2<f64>,
    weights: &PairWeights,
    lambda: f64,
    solver: &SolverConfig,
    z0: Option<&Array2<f64>>,
) -> PathEntry {
    let started = Instant::now();
    let filtered = (|| {
        let (z, trace) = match method {
            FilterMethod::L0 => {
                let (z, trace) = solve_smooth_l0(points, weights, lambda, solver, z0)?;
                (z.into_array(), Some(trace))
            }
            FilterMethod::Ridge => (
                solve_ridge(points, weights, lambda, RIDGE_GRAD_TOL)?.into_array(),
                None,
            ),
        };
        let groups = merge_centroids(&z, points, solver.merge_tol_rel)?;
        Ok::<_, FilterError>(FilteredPoints {
            centroids: z,
            groups,
            trace,
        })
    })()
    .map_err(|e| e.to_string());
    if let Err(e) = &filtered {
        log::warn!("{} solve at lambda = {lambda} failed: {e}", method.name());
    }
    PathEntry {
        lambda,
        seconds: started.elapsed().as_secs_f64(),
        filtered,
    }
}

/// Scales `data`, then solves the filter problem at every penalty of
/// `lambda_grid`. Without a grid one is built from the collapse penalty.
pub fn compute_filter_path(
    data: &Dataset,
    method: FilterMethod,
    lambda_grid: Option<&[f64]>,
    config: &PipelineConfig,
) -> Result<FilterPath> {
    let (_, scaled) = fit_scale(data);
    let points = scaled.points();
    let weights = compute_weights(&scaled, config.weight_theta)?;
    let (grid, lambda_max) = match lambda_grid {
        Some(g) => {
            if g.is_empty() {
                return Err(FilterError::InvalidArgument("empty penalty grid".into()));
            }
            if g.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(FilterError::InvalidArgument(
                    "penalties must be finite and nonnegative".into(),
                ));
            }
            (g.to_vec(), None)
        }
        None => {
            let lambda_max = match method {
                FilterMethod::L0 => find_lambda_max(points, &weights, &config.solver)?,
                FilterMethod::Ridge => find_ridge_lambda_max(points, &weights, &config.solver)?,
            };
            log::info!("{} collapse penalty {lambda_max}", method.name());
            (
                build_lambda_grid(lambda_max, config.grid_size)?,
                Some(lambda_max),
            )
        }
    };
    let solve = |lambda: f64, z0: Option<&Array2<f64>>| {
        solve_one(method, points, &weights, lambda, &config.solver, z0)
    };
    let entries = if config.chained_warm_start && method == FilterMethod::L0 {
        let mut entries: Vec<PathEntry> = Vec::with_capacity(grid.len());
        for &lambda in &grid {
            let z0 = entries
                .last()
                .and_then(|e| e.filtered.as_ref().ok())
                .map(|f| f.centroids.clone());
            entries.push(solve(lambda, z0.as_ref()));
        }
        entries
    } else if config.jobs == 1 {
        grid.iter().map(|&l| solve(l, None)).collect()
    } else {
        pool(config.jobs)?.install(|| grid.par_iter().map(|&l| solve(l, None)).collect())
    };
    Ok(FilterPath {
        method,
        scaled,
        lambda_max,
        entries,
    })
}

/// Clusters the filtered points of one path entry and maps the result back
/// to the samples.
///
/// At zero penalty the samples themselves are clustered. Otherwise, when
/// there are at least `k` merge groups the group means are clustered with
/// the group sizes as multiplicities; with fewer groups the raw centroids
/// are clustered.
fn cluster_entry(
    path: &FilterPath,
    filtered: &FilteredPoints,
    lambda: f64,
    k: usize,
    algorithm: Algorithm,
    config: &ClusterConfig,
    seed: u64,
) -> Result<Partition> {
    if lambda == 0.0 {
        return run_algorithm(algorithm, path.scaled.points(), k, config, seed);
    }
    let groups = &filtered.groups;
    if groups.num_groups() >= k {
        let sizes: Vec<f64> = groups.group_sizes().into_iter().map(|s| s as f64).collect();
        let outer =
            run_algorithm_weighted(algorithm, &groups.representatives, &sizes, k, config, seed)?;
        Partition::new(groups.group_of.clone(), groups.num_groups())?.compose(&outer)
    } else {
        run_algorithm(algorithm, &filtered.centroids, k, config, seed)
    }
}

/// Clusters every entry of `path` with `algorithm` and selects the partition
/// with the smallest criterion, ties going to the smaller penalty.
pub fn cluster_filter_path(
    path: &FilterPath,
    k: usize,
    algorithm: Algorithm,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PipelineResult> {
    let m = path.scaled.len();
    if k < 2 || k > m {
        return Err(FilterError::KOutOfRange { k, m });
    }
    let kernel: &KernelSpec = &config.cluster.kernel;
    let table = KernelDistanceTable::new(path.scaled.points(), kernel);
    let truth = path.scaled.labels().map(Partition::from_labels);
    let run = |(idx, entry): (usize, &PathEntry)| {
        let started = Instant::now();
        let mut out = PipelineEntry {
            lambda: entry.lambda,
            num_groups: None,
            partition: None,
            criterion: None,
            ari: None,
            seconds: entry.seconds,
            error: None,
        };
        let filtered = match &entry.filtered {
            Ok(f) => f,
            Err(e) => {
                out.error = Some(e.clone());
                return out;
            }
        };
        out.num_groups = Some(filtered.groups.num_groups());
        let seed = derive_seed(seed, idx as u64);
        let scored = cluster_entry(
            path,
            filtered,
            entry.lambda,
            k,
            algorithm,
            &config.cluster,
            seed,
        )
        .and_then(|p| {
            let c = table.criterion(&p)?;
            let ari = truth
                .as_ref()
                .map(|t| adjusted_rand_index(t, &p))
                .transpose()?;
            Ok((p, c, ari))
        });
        match scored {
            Ok((p, c, ari)) => {
                out.partition = Some(p);
                out.criterion = Some(c);
                out.ari = ari;
            }
            Err(e) => {
                log::warn!("{algorithm} at lambda = {} failed: {e}", entry.lambda);
                out.error = Some(e.to_string());
            }
        }
        out.seconds += started.elapsed().as_secs_f64();
        out
    };
    let entries: Vec<PipelineEntry> = if config.jobs == 1 {
        path.entries.iter().enumerate().map(run).collect()
    } else {
        pool(config.jobs)?.install(|| path.entries.par_iter().enumerate().map(run).collect())
    };
    let best = select_best(&entries).ok_or(FilterError::AllLambdasFailed)?;
    let partition = entries[best]
        .partition
        .clone()
        .expect("selected entry has a partition");
    Ok(PipelineResult {
        method: path.method,
        algorithm,
        k,
        entries,
        best,
        partition,
    })
}

/// Index of the smallest criterion among scored entries; the earliest wins
/// ties, so the smaller penalty is kept on an increasing grid.
pub fn select_best(entries: &[PipelineEntry]) -> Option<usize> {
    let mut best: Option<(usize, &CriterionValue)> = None;
    for (i, e) in entries.iter().enumerate() {
        let Some(c) = &e.criterion else { continue };
        let better = match best {
            None => true,
            Some((j, b)) => c
                .compare(b)
                .then(entries[i].lambda.total_cmp(&entries[j].lambda))
                .is_lt(),
        };
        if better {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

/// Smooth l0 filter followed by `algorithm`.
pub fn run_l0_filter_pipeline(
    data: &Dataset,
    k: usize,
    algorithm: Algorithm,
    lambda_grid: Option<&[f64]>,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PipelineResult> {
    check_k(k, data)?;
    let path = compute_filter_path(data, FilterMethod::L0, lambda_grid, config)?;
    cluster_filter_path(&path, k, algorithm, config, seed)
}

/// Ridge filter followed by `algorithm`.
pub fn run_ridge_filter_pipeline(
    data: &Dataset,
    k: usize,
    algorithm: Algorithm,
    lambda_grid: Option<&[f64]>,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PipelineResult> {
    check_k(k, data)?;
    let path = compute_filter_path(data, FilterMethod::Ridge, lambda_grid, config)?;
    cluster_filter_path(&path, k, algorithm, config, seed)
}

/// k-means to `multiplier * k` centroids, `algorithm` on those centroids,
/// and every sample inherits its centroid's cluster.
pub fn run_km_filter(
    data: &Dataset,
    k: usize,
    multiplier: usize,
    algorithm: Algorithm,
    config: &ClusterConfig,
    seed: u64,
) -> Result<Partition> {
    check_k(k, data)?;
    let kbar = multiplier.saturating_mul(k);
    if kbar > data.len() || multiplier == 0 {
        return Err(FilterError::KOutOfRange {
            k: kbar,
            m: data.len(),
        });
    }
    let (_, scaled) = fit_scale(data);
    let coarse = kmeans(scaled.points(), kbar, config.restarts, derive_seed(seed, 0))?;
    let outer = run_algorithm(
        algorithm,
        &coarse.centroids,
        k,
        config,
        derive_seed(seed, 1),
    )?;
    coarse.partition.compose(&outer)
}

/// `algorithm` applied to the scaled samples.
pub fn run_baseline(
    data: &Dataset,
    k: usize,
    algorithm: Algorithm,
    config: &ClusterConfig,
    seed: u64,
) -> Result<Partition> {
    check_k(k, data)?;
    let (_, scaled) = fit_scale(data);
    run_algorithm(algorithm, scaled.points(), k, config, seed)
}

fn check_k(k: usize, data: &Dataset) -> Result<()> {
    if k < 2 || k > data.len() {
        return Err(FilterError::KOutOfRange { k, m: data.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticCase, SyntheticSpec};

    fn case_i(seed: u64) -> Dataset {
        generate_synthetic(SyntheticSpec::new(SyntheticCase::I, seed))
    }

    fn small_config() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.cluster.restarts = 5;
        c
    }

    #[test]
    fn zero_grid_matches_baseline() {
        let data = case_i(3);
        let config = small_config();
        for algorithm in Algorithm::ALL {
            let r = run_l0_filter_pipeline(&data, 2, algorithm, Some(&[0.0]), &config, 9).unwrap();
            let base =
                run_baseline(&data, 2, algorithm, &config.cluster, derive_seed(9, 0)).unwrap();
            assert_eq!(r.partition, base, "{algorithm}");
            let ridge =
                run_ridge_filter_pipeline(&data, 2, algorithm, Some(&[0.0]), &config, 9).unwrap();
            assert_eq!(ridge.partition, base, "{algorithm}");
        }
    }

    fn entry(lambda: f64, value: Option<f64>) -> PipelineEntry {
        PipelineEntry {
            lambda,
            num_groups: None,
            partition: None,
            criterion: value.map(|value| CriterionValue {
                value,
                within: vec![],
                pairs: vec![],
                between: 1.0,
            }),
            ari: None,
            seconds: 0.0,
            error: None,
        }
    }

    #[test]
    fn ties_go_to_smaller_lambda() {
        let entries = vec![
            entry(0.0, Some(0.5)),
            entry(0.1, Some(0.2)),
            entry(0.2, None),
            entry(0.3, Some(0.2)),
            entry(0.4, Some(f64::INFINITY)),
        ];
        assert_eq!(select_best(&entries), Some(1));
        assert_eq!(select_best(&[entry(0.0, None)]), None);
    }

    #[test]
    fn selection_never_worse_than_unfiltered() {
        let data = case_i(5);
        let config = small_config();
        let grid = [0.0, 0.01, 0.05, 0.2];
        let r = run_l0_filter_pipeline(&data, 2, Algorithm::SingleLinkage, Some(&grid), &config, 1)
            .unwrap();
        assert_eq!(r.entries.len(), 4);
        let best = r.best_entry().criterion.as_ref().unwrap().value;
        assert!(best <= r.entries[0].criterion.as_ref().unwrap().value);
        for e in &r.entries {
            let p = e.partition.as_ref().unwrap();
            assert_eq!(p.num_clusters(), 2);
            assert_eq!(p.sizes().iter().sum::<usize>(), data.len());
        }
    }

    #[test]
    fn path_is_deterministic_and_parallel_safe() {
        let data = case_i(2);
        let mut config = small_config();
        let grid = [0.0, 0.02, 0.1];
        let a = run_l0_filter_pipeline(&data, 2, Algorithm::KernelKMeans, Some(&grid), &config, 4)
            .unwrap();
        config.jobs = 2;
        let b = run_l0_filter_pipeline(&data, 2, Algorithm::KernelKMeans, Some(&grid), &config, 4)
            .unwrap();
        assert_eq!(a.best, b.best);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.partition, y.partition);
            assert_eq!(x.criterion, y.criterion);
        }
    }

    #[test]
    fn km_filter_inherits_centroid_clusters() {
        let data = case_i(7);
        let config = ClusterConfig {
            restarts: 3,
            ..ClusterConfig::default()
        };
        let p = run_km_filter(&data, 2, 5, Algorithm::SingleLinkage, &config, 1).unwrap();
        let (_, scaled) = fit_scale(&data);
        let coarse = kmeans(scaled.points(), 10, 3, derive_seed(1, 0)).unwrap();
        let a = coarse.partition.assignment();
        for i in 0..data.len() {
            for j in 0..data.len() {
                if a[i] == a[j] {
                    assert_eq!(p.assignment()[i], p.assignment()[j]);
                }
            }
        }
        assert!(run_km_filter(&data, 2, 60, Algorithm::SingleLinkage, &config, 1).is_err());
    }

    #[test]
    fn km_filter_with_every_point_a_centroid_is_the_baseline() {
        let data = case_i(8);
        let config = ClusterConfig::default();
        let p = run_km_filter(&data, 2, 50, Algorithm::SingleLinkage, &config, 1).unwrap();
        let base = run_baseline(&data, 2, Algorithm::SingleLinkage, &config, 1).unwrap();
        assert_eq!(p.canonical(), base.canonical());
    }

    #[test]
    fn csv_outputs() {
        let data = case_i(1);
        let config = small_config();
        let path =
            compute_filter_path(&data, FilterMethod::L0, Some(&[0.0, 0.05]), &config).unwrap();
        let r = cluster_filter_path(&path, 2, Algorithm::SingleLinkage, &config, 0).unwrap();
        let mut buf = Vec::new();
        r.write_entries_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,num_merge_groups,criterion,ari,seconds\n"));
        assert_eq!(text.lines().count(), 3);
        let mut buf = Vec::new();
        path.write_trace_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 16);
        let avg = path.stage_averages();
        assert_eq!(avg.len(), 16);
        assert_eq!(avg[15].alpha, 1e3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = case_i(1);
        let config = small_config();
        let sl = Algorithm::SingleLinkage;
        assert!(run_l0_filter_pipeline(&data, 1, sl, Some(&[0.0]), &config, 0).is_err());
        assert!(run_l0_filter_pipeline(&data, 2, sl, Some(&[]), &config, 0).is_err());
        assert!(run_l0_filter_pipeline(&data, 2, sl, Some(&[-1.0]), &config, 0).is_err());
    }
}
