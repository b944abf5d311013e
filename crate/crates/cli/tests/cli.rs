//! Runs the `neglearn` binary on small synthetic data.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_neglearn");

fn neglearn(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("NEGLEARN_OUT")
        .env_remove("NEGLEARN_DATA")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Writes a 24×24 binary PGM with a diagonal gradient.
fn write_pgm(path: &Path) {
    let mut bytes = b"P5\n24 24\n255\n".to_vec();
    bytes.extend((0..24 * 24).map(|i| ((i % 24 + i / 24) * 5) as u8));
    std::fs::write(path, bytes).unwrap();
}

const DENSE: &str = r#"
name = "tiny"
seed = 3

[model]
kind = "dense"
visible = 64
hidden = 16
output_activation = "sigmoid"

[training]
epochs = 3
batch_size = 8
q_negative = 1
negative_rate_ratio = 0.5

[optimizer]
kind = "adam"
learning_rate = 0.01

[data]
normal = "texture?n=60&size=8"
anomaly = "pgm:image.pgm?patch=8&n=30"
"#;

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    write_pgm(&dir.path().join("image.pgm"));
    let path = dir.path().join("run.toml");
    std::fs::write(&path, config).unwrap();
    (dir, path)
}

fn assert_csv(path: &Path, header: &str) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# neglearn seed="), "{}: {first}", path.display());
    assert!(first.contains(" config="), "{first}");
    assert_eq!(lines.next().unwrap(), header, "{}", path.display());
    assert!(lines.next().is_some(), "{} has no rows", path.display());
}

#[test]
fn train_writes_all_outputs() {
    let (dir, _) = setup(DENSE);
    let out = neglearn(dir.path(), &["train", "--config", "run.toml", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("o");
    assert!(o.join("model.nlrn").is_file());
    assert_csv(&o.join("scores.csv"), "sample_id,label,dissimilarity");
    assert_csv(&o.join("roc.csv"), "threshold,fpr,tpr");
    assert_csv(&o.join("histogram.csv"), "bin_lo,bin_hi,normal,anomaly");
    let log = std::fs::read_to_string(o.join("train_log.csv")).unwrap();
    assert!(log.starts_with("# neglearn seed=3 "));
    assert_eq!(log.lines().count(), 2 + 3);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(o.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["q_negative"], 1);
    let auroc = summary["auroc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auroc));
}

#[test]
fn overrides_reach_the_run() {
    let (dir, _) = setup(DENSE);
    let args = ["train", "--config", "run.toml", "--out", "o", "--seed", "9", "--epochs", "2", "--q", "0"];
    assert_eq!(code(&neglearn(dir.path(), &args)), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!((summary["seed"].as_u64(), summary["epochs"].as_u64()), (Some(9), Some(2)));
    assert_eq!(summary["q_negative"], 0);
}

#[test]
fn output_root_comes_from_the_environment() {
    let (dir, _) = setup(DENSE);
    let root = dir.path().join("elsewhere");
    let out = Command::new(BIN)
        .args(["train", "--config", "run.toml", "--epochs", "1"])
        .current_dir(dir.path())
        .env("NEGLEARN_OUT", &root)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("tiny/model.nlrn").is_file());
}

#[test]
fn eval_scores_a_saved_model() {
    let (dir, _) = setup(DENSE);
    assert_eq!(code(&neglearn(dir.path(), &["train", "--config", "run.toml", "--out", "o"])), 0);
    let args = [
        "eval",
        "--model",
        "o/model.nlrn",
        "--normal",
        "texture?n=20&size=8&seed=5",
        "--anomaly",
        "pgm:image.pgm?patch=8&n=10",
        "--out",
        "e",
    ];
    let out = neglearn(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let e = dir.path().join("e");
    assert_csv(&e.join("scores.csv"), "sample_id,label,dissimilarity");
    assert_csv(&e.join("roc.csv"), "threshold,fpr,tpr");
    assert_csv(&e.join("histogram.csv"), "bin_lo,bin_hi,normal,anomaly");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(e.join("summary.json")).unwrap()).unwrap();
    assert_eq!((summary["n_normal"].as_u64(), summary["n_anomaly"].as_u64()), (Some(20), Some(10)));

    let wrong_width = ["eval", "--model", "o/model.nlrn", "--normal", "texture?n=5&size=4", "--anomaly", "texture?n=5&size=4", "--out", "e2"];
    assert_eq!(code(&neglearn(dir.path(), &wrong_width)), 3);
    let missing = ["eval", "--model", "nope.nlrn", "--normal", "texture?n=5&size=8", "--anomaly", "texture?n=5&size=8", "--out", "e3"];
    assert_eq!(code(&neglearn(dir.path(), &missing)), 3);
}

#[test]
fn sweep_writes_one_run_per_q() {
    let (dir, _) = setup(DENSE);
    let out = neglearn(dir.path(), &["sweep", "--config", "run.toml", "--q", "0,2", "--out", "s", "--epochs", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = dir.path().join("s");
    assert!(s.join("q0/model.nlrn").is_file());
    assert!(s.join("q2/model.nlrn").is_file());
    let table = std::fs::read_to_string(s.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("# neglearn seed=3 "));
    assert_eq!(lines[1], "q_negative,auroc,diverged");
    assert!(lines[2].starts_with("0,") && lines[3].starts_with("2,"));
}

#[test]
fn duplicate_q_values_are_a_config_error() {
    let (dir, _) = setup(DENSE);
    let out = neglearn(dir.path(), &["sweep", "--config", "run.toml", "--q", "0,1,5,1"]);
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    for (table, key) in [("[training]", "epochs = 3"), ("[model]", "kind = \"dense\""), ("[data]", "normal =")] {
        let typo = DENSE.replacen(key, &format!("mystery = 1\n{key}"), 1);
        assert!(typo.contains(table));
        let (dir, _) = setup(&typo);
        let out = neglearn(dir.path(), &["train", "--config", "run.toml"]);
        assert_eq!(code(&out), 2, "{table}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("mystery"));
    }
    let (dir, _) = setup(&format!("colour = \"red\"\n{DENSE}"));
    assert_eq!(code(&neglearn(dir.path(), &["train", "--config", "run.toml"])), 2);
}

#[test]
fn config_and_usage_errors_exit_2() {
    let (dir, _) = setup(DENSE);
    assert_eq!(code(&neglearn(dir.path(), &["train", "--config", "missing.toml"])), 2);
    assert_eq!(code(&neglearn(dir.path(), &["train"])), 2);
    assert_eq!(code(&neglearn(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&neglearn(dir.path(), &["--help"])), 0);
    let rbm_adam = DENSE.replace("kind = \"dense\"", "kind = \"rbm\"").replace("output_activation = \"sigmoid\"\n", "");
    let (dir, _) = setup(&rbm_adam);
    assert_eq!(code(&neglearn(dir.path(), &["train", "--config", "run.toml"])), 2);
}

#[test]
fn missing_data_exits_3() {
    let (dir, _) = setup(&DENSE.replace("image.pgm", "absent.pgm"));
    assert_eq!(code(&neglearn(dir.path(), &["train", "--config", "run.toml"])), 3);
}

#[test]
fn divergence_exits_4_and_keeps_the_last_good_model() {
    let exploding = DENSE
        .replace("\"adam\"", "\"sgd\"")
        .replace("learning_rate = 0.01", "learning_rate = 1e6")
        .replace("\"sigmoid\"", "\"identity\"");
    let (dir, _) = setup(&exploding);
    let out = neglearn(dir.path(), &["train", "--config", "run.toml", "--out", "o"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/model.nlrn").is_file());
    assert!(dir.path().join("o/train_log.csv").is_file());
}

#[test]
fn rbm_runs_end_to_end() {
    let rbm = DENSE
        .replace("kind = \"dense\"", "kind = \"rbm\"")
        .replace("output_activation = \"sigmoid\"\n", "")
        .replace("kind = \"adam\"\nlearning_rate = 0.01", "kind = \"cd1\"\nlearning_rate = 0.1\nhidden_sampling = \"mean-field\"");
    let (dir, _) = setup(&rbm);
    let out = neglearn(dir.path(), &["train", "--config", "run.toml", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(dir.path().join("o/model.nlrn")).unwrap();
    assert_eq!(code(&neglearn(dir.path(), &["train", "--config", "run.toml", "--out", "p"])), 0);
    assert_eq!(first, std::fs::read(dir.path().join("p/model.nlrn")).unwrap());
}
