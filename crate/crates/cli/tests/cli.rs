use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn narx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_narx-prune"))
        .args(args)
        .current_dir(dir)
        .env_remove("NARX_PRUNE_OUT")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(narx(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(narx(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(narx(dir.path(), &["fit-baseline"]).status.code(), Some(1));
    let bad_grid = narx(dir.path(), &["sweep", "--model", "m.json", "--axis", "atoms", "--grid", "9:1:1"]);
    assert_eq!(bad_grid.status.code(), Some(1));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = narx(dir.path(), &["prune", "--model", "nowhere.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.json"));
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_narx-prune"))
        .args(["generate", "sine-demo"])
        .current_dir(dir.path())
        .env("NARX_PRUNE_OUT", "from_env")
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("from_env/manifest.json").exists());
}

#[test]
fn artifacts_echo_their_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(narx(d, &["--out", "fit", "fit-baseline", "--dataset", "sdse", "--data-seed", "2"]).status.success());
    let report = json(&d.join("fit/fit_report.json"));
    assert_eq!(report["format_version"], 1);
    assert_eq!(report["command"], "fit-baseline");
    assert_eq!(report["config"]["data_seed"], 2);
    assert_eq!(report["terms"].as_array().unwrap().len(), 10);

    let n_zero = narx(d, &["--out", "p", "prune", "--model", "fit/model.json", "--n", "0"]);
    assert_eq!(n_zero.status.code(), Some(1));

    assert!(narx(d, &["--out", "p", "prune", "--model", "fit/model.json", "--atoms", "20", "--seed", "4"]).status.success());
    let prune = json(&d.join("p/prune.json"));
    assert_eq!(prune["command"], "prune");
    assert_eq!(prune["config"]["atoms"], 20);
    assert_eq!(prune["config"]["seed"], 4);
    assert_eq!(prune["effective_batch_size"], 5);
    assert!(prune.get("runtime_ms").is_none());
}

#[test]
fn replay_reproduces_an_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(narx(d, &["--out", "fit", "fit-baseline", "--dataset", "sdse"]).status.success());
    assert!(narx(d, &["--out", "a", "evaluate", "--model", "fit/model.json", "--trials", "2"]).status.success());
    assert!(narx(d, &["--out", "b", "replay", "a/trials.json"]).status.success());
    for file in ["trials.json", "trials.csv"] {
        assert_eq!(fs::read(d.join("a").join(file)).unwrap(), fs::read(d.join("b").join(file)).unwrap(), "{file}");
    }
    let csv = fs::read_to_string(d.join("a/trials.csv")).unwrap();
    assert!(csv.starts_with("method,trial,seed,n,q,p,r2_coefficients,error\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn pca_writes_every_point_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(narx(d, &["--out", "fit", "fit-baseline", "--dataset", "adse"]).status.success());
    assert!(narx(d, &["--out", "pca", "pca", "--model", "fit/model.json", "--n", "30", "--atoms", "10"]).status.success());
    let text = fs::read_to_string(d.join("pca/pca.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pc1,pc2,kind"));
    let kinds: Vec<&str> = lines.map(|l| l.rsplit(',').next().unwrap()).collect();
    for kind in ["sample", "atom", "selected_fastcan", "selected_random"] {
        assert!(kinds.contains(&kind), "{kind}");
    }
    assert_eq!(kinds.iter().filter(|k| **k == "atom").count(), 10);
    assert_eq!(kinds.iter().filter(|k| **k == "selected_random").count(), 30);
}
