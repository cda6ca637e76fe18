use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stripmask");
const STUB: &str = env!("CARGO_BIN_EXE_stripmask-stub");

fn stripmask(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn explain_synthetic(dir: &Path, spec: &str, generations: &str) -> Output {
    stripmask(&["explain", "--synthetic", spec, "--generations", generations, "--out", p(dir)])
}

#[test]
fn explain_synthetic_writes_history_and_mask() {
    let dir = tempfile::tempdir().unwrap();
    let out = explain_synthetic(dir.path(), "rare_feature:0", "500");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.starts_with("best_delta="), "{summary}");
    assert!(summary.contains("evaluations="));

    let history = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    let values: Vec<f64> = history
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 501);
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    for name in ["mask.json", "series.csv", "ground_truth.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn explain_is_reproducible_for_a_fixed_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = stripmask(&[
            "explain", "--synthetic", "random:4", "--generations", "30", "--seed", "9", "--out", p(dir.path()),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(
        fs::read(a.path().join("mask.json")).unwrap(),
        fs::read(b.path().join("mask.json")).unwrap()
    );
}

#[test]
fn explain_with_external_model_matches_white_box() {
    let dir = tempfile::tempdir().unwrap();
    let gt_dir = tempfile::tempdir().unwrap();
    assert!(explain_synthetic(gt_dir.path(), "rare_feature:2", "0").status.success());
    let series = gt_dir.path().join("series.csv");
    let gt: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(gt_dir.path().join("ground_truth.json")).unwrap()).unwrap();
    let points: Vec<String> = gt["salient"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| format!("{}:{}", p[0], p[1]))
        .collect();
    let model = format!("{STUB} --mode square-sum --points {}", points.join(","));

    let out = stripmask(&[
        "explain", "--series", p(&series), "--model", &model, "--generations", "5", "--strips", "14",
        "--workers", "2", "--out", p(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let history = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 7);
}

#[test]
fn explain_missing_series_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = stripmask(&[
        "explain", "--series", "/definitely/missing.csv", "--model", &format!("{STUB} --mode sum"), "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn explain_reports_model_failures_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = tempfile::tempdir().unwrap();
    assert!(explain_synthetic(data.path(), "rare_time:1", "0").status.success());
    let series = data.path().join("series.csv");
    for mode in ["bad-version", "crash"] {
        let out = stripmask(&[
            "explain", "--series", p(&series), "--model", &format!("{STUB} --mode {mode}"), "--out",
            p(dir.path()),
        ]);
        assert_eq!(out.status.code(), Some(3), "{mode}");
    }
    let out = stripmask(&[
        "explain", "--series", p(&series), "--model", &format!("{STUB} --mode sum"), "--task", "classification",
        "--out", p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn explain_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = stripmask(&["explain", "--synthetic", "rare_feature:0", "--len-max", "99", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = stripmask(&["explain", "--synthetic", "nothing:0", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = stripmask(&["explain", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

fn evaluate(args: &[&str]) -> serde_json::Value {
    let mut all = vec!["evaluate"];
    all.extend_from_slice(args);
    let out = stripmask(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn evaluate_emits_requested_metrics_only() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("m.json");
    fs::write(
        &mask,
        r#"{"type":"strip","d":2,"t":4,"strips":[{"feature":1,"start":2,"length":2}]}"#,
    )
    .unwrap();
    let v = evaluate(&["--mask", p(&mask)]);
    assert_eq!(v["em"], 0.0);
    assert_eq!(v["dm"], 2);
    assert!(v.get("aup").is_none() && v.get("delta_p").is_none());
}

#[test]
fn evaluate_ground_truth_mask_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    fs::write(&gt, r#"{"salient":[[1,2],[1,3],[2,1]]}"#).unwrap();
    let mask = dir.path().join("m.json");
    fs::write(
        &mask,
        r#"{"type":"dense","d":2,"t":3,"dense":[[0,1,1],[1,0,0]]}"#,
    )
    .unwrap();
    let v = evaluate(&["--mask", p(&mask), "--ground-truth", p(&gt)]);
    assert_eq!((v["aup"].as_f64(), v["aur"].as_f64()), (Some(1.0), Some(1.0)));
}

#[test]
fn strip_and_dense_mask_files_evaluate_identically() {
    let dir = tempfile::tempdir().unwrap();
    assert!(explain_synthetic(dir.path(), "mixture:3", "5").status.success());
    let mask_text = fs::read_to_string(dir.path().join("mask.json")).unwrap();
    let mut dense: serde_json::Value = serde_json::from_str(&mask_text).unwrap();
    dense["type"] = "dense".into();
    dense.as_object_mut().unwrap().remove("strips");
    let dense_path = dir.path().join("dense.json");
    fs::write(&dense_path, dense.to_string()).unwrap();

    let model = format!("{STUB} --mode square-sum");
    let args = |m: &Path| {
        evaluate(&[
            "--mask", p(m), "--series", p(&dir.path().join("series.csv")), "--ground-truth",
            p(&dir.path().join("ground_truth.json")), "--model", &model,
        ])
    };
    let a = args(&dir.path().join("mask.json"));
    let b = args(&dense_path);
    assert_eq!(a, b);
    assert!(a["delta_p"].as_f64().unwrap() > 0.0);
}

#[test]
fn evaluate_shape_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("m.json");
    fs::write(&mask, r#"{"type":"dense","d":1,"t":2,"dense":[[0,1]]}"#).unwrap();
    let series = dir.path().join("x.csv");
    fs::write(&series, "feature,t1,t2,t3\nf1,1,2,3\n").unwrap();
    let out = stripmask(&["evaluate", "--mask", p(&mask), "--series", p(&series)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn render_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert!(explain_synthetic(dir.path(), "rare_feature:1", "5").status.success());
    let mut files = Vec::new();
    for name in ["a.svg", "b.svg"] {
        let out = dir.path().join(name);
        let status = stripmask(&[
            "render", "--mask", p(&dir.path().join("mask.json")), "--series", p(&dir.path().join("series.csv")),
            "--ground-truth", p(&dir.path().join("ground_truth.json")), "--out", p(&out),
        ]);
        assert!(status.status.success());
        files.push(fs::read(out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let svg = String::from_utf8(files.swap_remove(0)).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<rect x=").count(), 2500 + 125);
}

#[test]
fn render_single_salient_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("m.json");
    fs::write(&mask, r#"{"type":"dense","d":1,"t":1,"dense":[[1]]}"#).unwrap();
    let out = dir.path().join("one.svg");
    assert!(stripmask(&["render", "--mask", p(&mask), "--out", p(&out)]).status.success());
    let svg = fs::read_to_string(out).unwrap();
    assert_eq!(svg.matches("fill=\"#1a9850\"").count(), 1);
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("bench.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
kinds = ["rare_feature", "random"]
seeds = [0, 1]
methods = ["cgs", "rise"]
output_dir = "results"
d_features = 12
t_steps = 16
write_instances = true

[optimizer]
generations = 10

[baselines]
rise_masks = 20
"#,
    );
    let out = stripmask(&["bench", p(&config), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("results");
    let report = fs::read_to_string(results.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("method,dataset,seed,aup,aur,dm,em,delta_p,seconds"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.len() == 9 && r.iter().all(|c| !c.is_empty())));

    // summary means re-derive from the rows
    let summary = fs::read_to_string(results.join("summary.csv")).unwrap();
    let header: Vec<&str> = summary.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "aur_mean").unwrap();
    for line in summary.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let group: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == cells[0] && r[1] == cells[1])
            .map(|r| r[4].parse().unwrap())
            .collect();
        let mean = group.iter().sum::<f64>() / group.len() as f64;
        let reported: f64 = cells[col].parse().unwrap();
        assert!((mean - reported).abs() <= 1e-9);
    }
    assert_eq!(fs::read_to_string(results.join("errors.csv")).unwrap(), "method,dataset,seed,error\n");
    assert_eq!(fs::read_dir(results.join("masks")).unwrap().count(), 8);
    assert!(results.join("data/random_1.csv").exists());
    assert!(results.join("data/random_1_gt.json").exists());
}

#[test]
fn bench_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "kinds = [\"rare_feature\"]\nseeds = [0]\nmethods = []\noutput_dir = \"o\"\n",
        "kinds = [\"rare_feature\"]\nseeds = [0]\nmethods = [\"cgs\"]\noutput_dir = \"o\"\ntypo = 1\n",
        "kinds = [\"rare_feature\"]\nseeds = [0]\nmethods = [\"lime\"]\noutput_dir = \"o\"\n",
        "kinds = [\"rare_feature\"]\nseeds = [0]\nmethods = [\"cgs\"]\noutput_dir = \"o\"\nt_steps = 5\n",
    ];
    for body in cases {
        let config = write_config(dir.path(), body);
        let out = stripmask(&["bench", p(&config)]);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
    let out = stripmask(&["bench", "/no/such/config.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bad_worker_env_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["explain", "--synthetic", "rare_feature:0", "--generations", "1", "--out", p(dir.path())])
        .env("STRIPMASK_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
