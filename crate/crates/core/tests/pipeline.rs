use std::fs;

use l0_filter::clustering::Algorithm;
use l0_filter::data::{generate_synthetic, load_csv, SyntheticCase, SyntheticSpec};
use l0_filter::pipeline::{
    cluster_filter_path, compute_filter_path, run_baseline, FilterMethod, PipelineConfig,
};

fn small_config() -> PipelineConfig {
    let mut config = PipelineConfig::default();
    config.cluster.restarts = 5;
    config
}

#[test]
fn csv_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic(SyntheticSpec {
        case: SyntheticCase::I,
        seed: 3,
        cluster_size_override: Some(12),
    });
    let input = dir.path().join("case.csv");
    data.write_csv(fs::File::create(&input).unwrap()).unwrap();
    let loaded = load_csv(&input, Some(2)).unwrap();
    assert_eq!(loaded.dropped_rows, 0);
    assert_eq!(loaded.dataset.points(), data.points());

    let config = small_config();
    let grid = [0.0, 0.01, 0.05, 0.2];
    let path =
        compute_filter_path(&loaded.dataset, FilterMethod::L0, Some(&grid), &config).unwrap();
    let result = cluster_filter_path(&path, 2, Algorithm::KernelKMeans, &config, 1).unwrap();

    let entries = dir.path().join("entries.csv");
    result
        .write_entries_csv(fs::File::create(&entries).unwrap())
        .unwrap();
    let text = fs::read_to_string(&entries).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,num_merge_groups,criterion,ari,seconds");
    assert_eq!(lines.len(), 1 + grid.len());
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));

    let partition = dir.path().join("partition.csv");
    result
        .partition
        .write_csv(fs::File::create(&partition).unwrap())
        .unwrap();
    assert_eq!(
        fs::read_to_string(&partition).unwrap().lines().count(),
        1 + data.len()
    );

    let trace = dir.path().join("trace.csv");
    path.write_trace_csv(fs::File::create(&trace).unwrap())
        .unwrap();
    let stages = dir.path().join("stages.csv");
    path.write_stage_averages_csv(fs::File::create(&stages).unwrap())
        .unwrap();
    let stage_text = fs::read_to_string(&stages).unwrap();
    assert!(stage_text.starts_with("t,alpha,mean_iterations,mean_seconds"));
    assert_eq!(stage_text.lines().count(), 1 + path.stage_averages().len());
}

#[test]
fn outputs_are_identical_across_reruns() {
    let data = generate_synthetic(SyntheticSpec {
        case: SyntheticCase::III,
        seed: 4,
        cluster_size_override: Some(15),
    });
    let config = small_config();
    let grid = [0.0, 0.002, 0.02];
    let render = || {
        let path = compute_filter_path(&data, FilterMethod::L0, Some(&grid), &config).unwrap();
        let result = cluster_filter_path(&path, 2, Algorithm::GaussianMixture, &config, 8).unwrap();
        let mut buf = Vec::new();
        result.partition.write_csv(&mut buf).unwrap();
        let criteria: Vec<u64> = result
            .entries
            .iter()
            .map(|e| e.criterion.as_ref().map_or(0, |c| c.value.to_bits()))
            .collect();
        (buf, criteria)
    };
    assert_eq!(render(), render());
}

#[test]
fn ridge_at_zero_penalty_keeps_the_scaled_samples() {
    let data = generate_synthetic(SyntheticSpec::new(SyntheticCase::I, 2));
    let config = small_config();
    let path = compute_filter_path(&data, FilterMethod::Ridge, Some(&[0.0]), &config).unwrap();
    let filtered = path.entries[0].filtered.as_ref().unwrap();
    assert_eq!(&filtered.centroids, path.scaled.points());
    let result = cluster_filter_path(&path, 2, Algorithm::SingleLinkage, &config, 0).unwrap();
    let baseline = run_baseline(&data, 2, Algorithm::SingleLinkage, &config.cluster, 0).unwrap();
    assert_eq!(result.partition, baseline);
}
