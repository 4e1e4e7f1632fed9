use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use squadmds::io::{write_embedding, write_matrix, MatrixFormat};
use squadmds::synthetic;
use squadmds::Embedding;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_squadmds"));
    c.env_remove("SQUADMDS_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_data(dir: &Path, name: &str, n: usize, m: usize) -> PathBuf {
    let path = dir.join(name);
    write_matrix(&path, synthetic::gaussian_blob(n, m, 1).points(), MatrixFormat::Delimited).unwrap();
    path
}

fn manifest_value(path: &Path, key: &str) -> Option<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .find_map(|l| l.split_once(':').filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
}

fn parse_auc(o: &Output) -> f64 {
    let out = String::from_utf8_lossy(&o.stdout);
    out.trim().strip_prefix("auc:").unwrap().parse().unwrap()
}

#[test]
fn squad_mds_embeds_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_data(dir.path(), "x.csv", 1000, 10);
    let out = dir.path().join("e.csv");
    let o = run(&["embed", "--input", s(&input), "--method", "squad-mds", "--iters", "5000", "--output", s(&out), "--workers", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1000);
    let manifest = dir.path().join("e.csv.manifest");
    assert_eq!(manifest_value(&manifest, "iters").as_deref(), Some("5000"));
    assert_eq!(manifest_value(&manifest, "dataset_sha256").map(|h| h.len()), Some(64));
}

#[test]
fn hybrid_defaults_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_data(dir.path(), "x.csv", 200, 5);
    let out = dir.path().join("e.csv");
    let manifest = dir.path().join("run.manifest");
    let o = run(&["embed", "--input", s(&input), "--method", "hybrid", "--output", s(&out), "--manifest", s(&manifest)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (k, v) in [("lr_tsne", "1"), ("lr_mds", "0.5"), ("perplexities", "4,50"), ("iters", "750"), ("method", "hybrid")] {
        assert_eq!(manifest_value(&manifest, k).as_deref(), Some(v), "{k}");
    }
    let lr: f64 = manifest_value(&manifest, "lr_tsne").unwrap().parse().unwrap();
    assert_eq!(lr, 1.0);
}

#[test]
fn unknown_method_is_a_usage_error() {
    let o = run(&["embed", "--input", "x.csv", "--method", "umap", "--output", "e.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error kind:usage exit:1"));
}

#[test]
fn ragged_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "0,0\n1,0\n0,1\n1\n").unwrap();
    let o = run(&["embed", "--input", s(&input), "--output", s(&dir.path().join("e.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("kind:ragged_rows") && err.contains("line 4"), "{err}");
}

#[test]
fn missing_file_is_a_data_error() {
    let o = run(&["quality", "--hd", "/nonexistent/hd.csv", "--ld", "/nonexistent/ld.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind:io_error"));
}

#[test]
fn quality_of_identity_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_data(dir.path(), "p.csv", 300, 2);
    let curve = dir.path().join("curve.csv");
    let o = run(&["quality", "--hd", s(&path), "--ld", s(&path), "--output", s(&curve)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((parse_auc(&o) - 1.0).abs() < 1e-9);
    let text = std::fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("# n:300 auc:"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 298);
}

#[test]
fn quality_of_shuffled_rows_is_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic::gaussian_blob(1000, 2, 3);
    let hd = dir.path().join("hd.csv");
    write_matrix(&hd, data.points(), MatrixFormat::Delimited).unwrap();
    // A fixed derangement-like permutation of the rows.
    let flat: Vec<f64> = (0..1000).flat_map(|i| {
        let j = (i * 389 + 17) % 1000;
        let r = data.row(j);
        [r[0], r[1]]
    }).collect();
    let ld = dir.path().join("ld.csv");
    write_embedding(&ld, &Embedding::from_vec(1000, flat).unwrap(), None).unwrap();
    let o = run(&["quality", "--hd", s(&hd), "--ld", s(&ld)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(parse_auc(&o).abs() < 0.05);
}

#[test]
fn quality_rejects_row_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let hd = write_data(dir.path(), "hd.csv", 50, 3);
    let ld = write_data(dir.path(), "ld.csv", 40, 2);
    let o = run(&["quality", "--hd", s(&hd), "--ld", s(&ld)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind:row_count_mismatch"));
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_data(dir.path(), "x.csv", 300, 6);
    for method in ["squad-mds", "hybrid", "tsne", "smacof", "pca"] {
        let first = dir.path().join(format!("{method}.csv"));
        let o = run(&["embed", "--input", s(&input), "--method", method, "--iters", "60", "--seed", "9", "--workers", "1", "--output", s(&first)]);
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        let replay = dir.path().join(format!("{method}.replay.csv"));
        let manifest = dir.path().join(format!("{method}.csv.manifest"));
        let o = run(&["embed", "--from-manifest", s(&manifest), "--output", s(&replay)]);
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&replay).unwrap(), "{method}");
    }
}

#[test]
fn worker_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_data(dir.path(), "x.csv", 100, 3);
    let out = dir.path().join("e.csv");
    let o = bin()
        .args(["embed", "--input", s(&input), "--iters", "10", "--output", s(&out)])
        .env("SQUADMDS_WORKERS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest_value(&dir.path().join("e.csv.manifest"), "workers").as_deref(), Some("3"));
    let seq = dir.path().join("seq.csv");
    let o = run(&["embed", "--input", s(&input), "--iters", "10", "--workers", "1", "--output", s(&seq)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&seq).unwrap());
}

#[test]
fn bench_with_one_size_has_no_slope() {
    let o = run(&["bench", "--sizes", "200", "--method", "squad-mds", "--iters", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(out.lines().count(), 2, "{out}");
    assert!(out.starts_with("n,seconds\n200,"));
}

#[test]
fn bench_reports_a_slope() {
    let o = run(&["bench", "--sizes", "400,800", "--iters", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("slope:"));
}

#[test]
fn plot_draws_labelled_points() {
    let dir = tempfile::tempdir().unwrap();
    let e = dir.path().join("e.csv");
    std::fs::write(&e, "0,0,a\n1,0,b\n0,1,a\n1,1,c\n").unwrap();
    let svg = dir.path().join("e.svg");
    let o = run(&["plot", "--input", s(&e), "--output", s(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<circle").count(), 4);
}

#[test]
fn labels_flow_from_input_to_embedding_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.tsv");
    let mut text = String::from("f1\tf2\tf3\tkind\n");
    for i in 0..40 {
        text += &format!("{}\t{}\t{}\t{}\n", i % 7, (i * 3) % 11, i, if i % 2 == 0 { "even" } else { "odd" });
    }
    std::fs::write(&input, text).unwrap();
    let out = dir.path().join("e.csv");
    let svg = dir.path().join("e.svg");
    let o = run(&[
        "embed", "--input", s(&input), "--header", "--label-column", "last", "--method", "pca", "--output", s(&out), "--plot", s(&svg),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read_to_string(&out).unwrap().lines().next().unwrap().to_string();
    assert!(first.ends_with(",even"), "{first}");
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<circle").count(), 40);
}

#[test]
fn telemetry_has_one_record_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_data(dir.path(), "x.csv", 100, 4);
    let tel = dir.path().join("t.log");
    let o = run(&["embed", "--input", s(&input), "--iters", "25", "--output", s(&dir.path().join("e.csv")), "--telemetry", s(&tel)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&tel).unwrap();
    assert_eq!(text.lines().count(), 25);
    assert!(text.lines().all(|l| l.starts_with("iteration:") && l.contains(" lr:") && l.contains("sampled_stress:")));
}

#[test]
fn raw_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.bin");
    write_matrix(&input, synthetic::gaussian_blob(64, 5, 2).points(), MatrixFormat::Raw).unwrap();
    let out = dir.path().join("e.csv");
    let o = run(&["embed", "--input", s(&input), "--format", "raw", "--method", "smacof", "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 64);
}
