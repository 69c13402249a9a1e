use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l0filter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["generate", "--case", "i", "--seed", "7", "--out", arg(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("m = 100, n = 2, k = 2"));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 101);
    assert!(text.lines().all(|l| l.split(',').count() == 3));
}

#[test]
fn bad_arguments_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&["generate", "--case", "ix", "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = run(&[
        "filter",
        "--input",
        arg(&dir.path().join("missing.csv")),
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "filter",
        "--case",
        "i",
        "--grid-size",
        "0",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn l0_filter_writes_centroids_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l0");
    let o = run(&[
        "filter",
        "--case",
        "i",
        "--method",
        "l0",
        "--grid-size",
        "10",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..10 {
        assert_eq!(
            csv_rows(&out.join(format!("centroids_{i:03}.csv"))).len(),
            100
        );
    }
    let trace = csv_rows(&out.join("trace.csv"));
    let mut last_per_lambda = std::collections::BTreeMap::new();
    for row in &trace {
        last_per_lambda.insert(row[0].clone(), row.clone());
    }
    assert_eq!(last_per_lambda.len(), 10);
    for row in last_per_lambda.values() {
        assert_eq!(row[2].parse::<f64>().unwrap(), 1e3);
        assert!(row[5].parse::<f64>().unwrap() <= 1e-5);
    }
    assert!(out.join("stage_averages.csv").is_file());
}

#[test]
fn ridge_at_zero_penalty_returns_scaled_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("case.csv");
    assert!(run(&[
        "generate",
        "--case",
        "iii",
        "--seed",
        "2",
        "--out",
        arg(&input)
    ])
    .status
    .success());
    let out = dir.path().join("ridge");
    let o = run(&[
        "filter",
        "--input",
        arg(&input),
        "--label-col",
        "2",
        "--method",
        "ridge",
        "--lambda",
        "0",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let loaded = l0_filter::data::load_csv(&input, Some(2)).unwrap().dataset;
    let (_, scaled) = l0_filter::data::fit_scale(&loaded);
    let rows = csv_rows(&out.join("centroids_000.csv"));
    for (row, expected) in rows.iter().zip(scaled.points().outer_iter()) {
        for (v, e) in row.iter().zip(expected.iter()) {
            assert_eq!(v.parse::<f64>().unwrap(), *e);
        }
    }
}

#[test]
fn cluster_and_timing_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cluster");
    let o = run(&[
        "cluster",
        "--case",
        "i",
        "--method",
        "none",
        "--algorithm",
        "kkm",
        "--restarts",
        "5",
        "--gamma",
        "0.5",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ARI"));
    assert_eq!(csv_rows(&out.join("partition.csv")).len(), 100);

    let out = dir.path().join("timing");
    let o = run(&[
        "timing",
        "--case",
        "i",
        "--grid-size",
        "4",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("lambda_times.csv")).len(), 4);
    let stages = csv_rows(&out.join("stage_averages.csv"));
    assert_eq!(stages.last().unwrap()[1].parse::<f64>().unwrap(), 1e3);
}

#[test]
fn bench_emits_the_full_table_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.toml");
    fs::write(
        &config,
        "grid_size = 4\nrestarts = 3\nseeds = [1]\noutput = \"first\"\n\n[[dataset]]\ncase = \"i\"\n",
    )
    .unwrap();
    let o = run(&["bench", "--config", arg(&config)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = dir.path().join("first");
    let table = fs::read_to_string(first.join("ari_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 19);
    assert_eq!(table.lines().next().unwrap(), "method,(i)");
    assert_eq!(
        fs::read_to_string(first.join("ari_table.txt"))
            .unwrap()
            .lines()
            .count(),
        19
    );
    assert_eq!(csv_rows(&first.join("cells.csv")).len(), 18);
    assert!(first.join("traces/i_seed1_trace.csv").is_file());

    let second = dir.path().join("second");
    let o = run(&["bench", "--config", arg(&config), "--out", arg(&second)]);
    assert!(o.status.success());
    assert_eq!(
        table,
        fs::read_to_string(second.join("ari_table.csv")).unwrap()
    );
}

#[test]
fn bench_rejects_empty_methods() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.toml");
    fs::write(&config, "methods = []\n\n[[dataset]]\ncase = \"i\"\n").unwrap();
    let o = run(&["bench", "--config", arg(&config)]);
    assert_eq!(o.status.code(), Some(2));
}
