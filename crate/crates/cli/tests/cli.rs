use std::path::Path;
use std::process::{Command, Output};

fn lowbody(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowbody")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = lowbody(&["check", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lowbody(&["purity", "--method", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let o = lowbody(&["purity", "--method", "recursive", "--layers", "9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn check_passes_at_small_n() {
    let o = lowbody(&["check", "--n", "6", "--trials", "5"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn purity_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = lowbody(&["purity", "--method", "network", "--n", "2", "--layout", "brick", "--out", path(&out)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,value,per_pauli,stderr,method"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!((rows[0][1].parse::<f64>().unwrap() - 0.4).abs() < 1e-15);
    assert!((rows[1][1].parse::<f64>().unwrap() - 0.6).abs() < 1e-15);
}

#[test]
fn dataset_features_select_flow() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = lowbody(&[
        "dataset",
        "--model",
        "xxx",
        "--n",
        "6",
        "--grid",
        "j2=0.4:1.6:4",
        "--shots",
        "50",
        "--seed",
        "2",
        "--exact",
        "--out",
        path(&data),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(data.join("manifest.csv").exists());

    let shadow_table = dir.path().join("shadow.csv");
    let exact_table = dir.path().join("exact.csv");
    for (table, exact) in [(&shadow_table, false), (&exact_table, true)] {
        let mut args = vec!["features", "--dataset", path(&data), "--out", path(table)];
        if exact {
            args.push("--exact");
        }
        let o = lowbody(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let header = std::fs::read_to_string(&exact_table).unwrap();
    assert_eq!(header.lines().count(), 5);

    let selected = dir.path().join("active.csv");
    let o = lowbody(&["select", "--features", path(&shadow_table), "--budget", "5", "--out", path(&selected)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&selected).unwrap();
    assert_eq!(text.lines().next(), Some("observable,rank,pauli,variance"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn shadows_sample_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o =
        lowbody(&["dataset", "--model", "xxx", "--n", "4", "--grid", "j2=1.5:1.5:1", "--exact", "--out", path(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let state = data.join("states").join("state_00000.bin");
    let out = dir.path().join("s.txt");
    let o = lowbody(&["shadows", "--state", path(&state), "--shots", "300", "--out", path(&out), "--estimate", "ZZII"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = lowbody(&["shadows", "--input", path(&out), "--estimate", "ZZII", "--groups", "3"]);
    assert!(again.status.success());
    let value: f64 = stdout(&again).trim().split(',').nth(1).unwrap().parse().unwrap();
    assert!(value.abs() <= 9.0);
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(
        &cfg,
        r#"
model = "xxx"
n = 8
seed = 1
shadows = 100
max_weight = 2
budget = 40
train = [{ param = "j2", start = 0.2, stop = 1.8, count = 6 }]
test = [{ param = "j2", start = 0.3, stop = 1.7, count = 4 }]

[training]
max_iter = 10
restarts = 2
"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = lowbody(&["train", "--config", path(&cfg), "--exact", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("test_accuracy,"));
    for name in ["run.toml", "model.json", "metrics.csv", "runs.csv", "predictions.csv", "test_features.csv"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let o = lowbody(&[
        "eval",
        "--model",
        path(&out.join("model.json")),
        "--features",
        path(&out.join("test_features.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("accuracy,"));
}

#[test]
fn surrogate_reports_graph_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lowbody(&["surrogate", "--n", "8", "--max-weight", "2", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("0,"));
    assert!(dir.path().join("observable_0.ppsg").exists());
}
