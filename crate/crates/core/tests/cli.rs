use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_vaoi-fl");

const SMALL: &str = r#"
[data]
n_samples = 400
n_features = 4
n_classes = 3

[partition]
num_clients = 8

[scheduler]
num_selected = 2

[experiment]
rounds = 6
trials = 2
master_seed = 5
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("VAOI_OUT_DIR")
        .output()
        .unwrap()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sha(p: &Path) -> String {
    Sha256::digest(std::fs::read(p).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn data_lines(p: &Path) -> Vec<String> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(2)
        .map(str::to_string)
        .collect()
}

fn run_small(dir: &TempDir, out: &str) -> PathBuf {
    let config = write_config(dir, "small.toml", SMALL);
    let out = dir.path().join(out);
    let res = cli(&["run", "-c", s(&config), "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

#[test]
fn run_writes_one_row_per_trial_and_round() {
    let dir = TempDir::new().unwrap();
    let out = run_small(&dir, "a");
    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# vaoi-fl metrics v1"));
    assert_eq!(
        lines.next(),
        Some("trial,round,policy,test_accuracy,global_loss,avg_version_age,max_version_age,selected_ids")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 6);
    assert!(rows[0].starts_with("0,1,vas,"));
    assert!(rows[11].starts_with("1,6,vas,"));
    assert!(out.join("config.snapshot.toml").exists());
}

#[test]
fn unknown_key_is_a_user_error_naming_the_key() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "bad.toml", "[training]\nlearning_rte = 0.1\n");
    let res = cli(&["run", "-c", s(&config), "--out", s(&dir.path().join("o"))]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("learning_rte"));
}

#[test]
fn bad_value_and_bad_arguments_exit_one() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "small.toml", SMALL);
    let out = s(&dir.path().join("o")).to_string();
    let res = cli(&["run", "-c", s(&config), "--out", &out, "--set", "experiment.rounds=0"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("experiment.rounds"));
    assert_eq!(cli(&["run"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "-c", "/nonexistent/x.toml"]).status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = run_small(&dir, "a");
    let b = run_small(&dir, "b");
    assert_eq!(sha(&a.join("metrics.csv")), sha(&b.join("metrics.csv")));
}

#[test]
fn snapshot_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let a = run_small(&dir, "a");
    let snapshot = a.join("config.snapshot.toml");
    let text = std::fs::read_to_string(&snapshot).unwrap();
    assert!(text.contains("num_selected = 2"));
    let again = dir.path().join("again");
    let res = cli(&["run", "-c", s(&snapshot), "--out", s(&again)]);
    assert!(res.status.success());
    assert_eq!(sha(&a.join("metrics.csv")), sha(&again.join("metrics.csv")));
}

#[test]
fn out_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "small.toml", SMALL);
    let env_out = dir.path().join("from-env");
    let res = Command::new(BIN)
        .args(["run", "-c", s(&config)])
        .env("VAOI_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(env_out.join("metrics.csv").exists());

    // An explicit --out still wins.
    let flag_out = dir.path().join("from-flag");
    let res = Command::new(BIN)
        .args(["run", "-c", s(&config), "--out", s(&flag_out)])
        .env("VAOI_OUT_DIR", env_out.join("unused"))
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(flag_out.join("metrics.csv").exists());
    assert!(!env_out.join("unused").exists());
}

#[test]
fn compare_writes_per_policy_and_merged_files() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "small.toml", SMALL);
    let out = dir.path().join("cmp");
    let res = cli(&["compare", "-c", s(&config), "-p", "vas,random", "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let vas = data_lines(&out.join("metrics-vas.csv"));
    let random = data_lines(&out.join("metrics-random.csv"));
    let merged = data_lines(&out.join("metrics-merged.csv"));
    assert_eq!(vas.len(), 12);
    assert_eq!(random.len(), 12);
    assert_eq!(merged.len(), 24);

    // Every (trial, round) appears once per policy, in policy order.
    for (i, pair) in merged.chunks(2).enumerate() {
        assert_eq!(pair[0], vas[i]);
        assert_eq!(pair[1], random[i]);
    }
}

#[test]
fn single_policy_merge_equals_its_file() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "small.toml", SMALL);
    let out = dir.path().join("cmp");
    assert!(cli(&["compare", "-c", s(&config), "-p", "vas", "--out", s(&out)]).status.success());
    assert_eq!(
        std::fs::read(out.join("metrics-vas.csv")).unwrap(),
        std::fs::read(out.join("metrics-merged.csv")).unwrap()
    );
    // The single-policy comparison is the same experiment as `run`.
    let single = run_small(&dir, "single");
    assert_eq!(sha(&single.join("metrics.csv")), sha(&out.join("metrics-vas.csv")));
}

#[test]
fn unknown_policy_exits_one() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "small.toml", SMALL);
    let res = cli(&["compare", "-c", s(&config), "-p", "vas,greedy", "--out", s(&dir.path().join("o"))]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn plot_draws_one_line_per_policy() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "small.toml", SMALL);
    let out = dir.path().join("cmp");
    assert!(cli(&["compare", "-c", s(&config), "-p", "vas,random", "--out", s(&out)]).status.success());

    let one = dir.path().join("one.svg");
    let res = cli(&["plot", "-o", s(&one), s(&out.join("metrics-vas.csv"))]);
    assert!(res.status.success());
    let svg = std::fs::read_to_string(&one).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.contains(">round</text>"));

    let two = dir.path().join("two.svg");
    let res = cli(&["plot", "-s", "accuracy", "-o", s(&two), s(&out.join("metrics-merged.csv"))]);
    assert!(res.status.success());
    let svg = std::fs::read_to_string(&two).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">test accuracy</text>"));
}

#[test]
fn plot_of_empty_metrics_is_no_data() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(
        &empty,
        "# vaoi-fl metrics v1\ntrial,round,policy,test_accuracy,global_loss,avg_version_age,max_version_age,selected_ids\n",
    )
    .unwrap();
    let res = cli(&["plot", "-o", s(&dir.path().join("x.svg")), s(&empty)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no data"));
}

#[test]
fn gen_data_round_trips_through_a_csv_run() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("blobs.csv");
    let args = [
        "gen-data", "--n-samples", "100", "--n-features", "2", "--n-classes", "3", "--seed", "4",
        "-o", s(&csv),
    ];
    assert!(cli(&args).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], "f0,f1,label");

    let again = dir.path().join("again.csv");
    let mut args2 = args;
    args2[10] = s(&again);
    assert!(cli(&args2).status.success());
    assert_eq!(sha(&csv), sha(&again));

    // Relative data paths resolve against the config file's directory.
    let config = write_config(
        &dir,
        "csv.toml",
        "[data]\nsource = \"csv\"\npath = \"blobs.csv\"\n[partition]\nnum_clients = 4\n\
         [scheduler]\nnum_selected = 2\n[experiment]\nrounds = 3\ntrials = 1\n",
    );
    let out = dir.path().join("csv-run");
    let res = cli(&["run", "-c", s(&config), "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(data_lines(&out.join("metrics.csv")).len(), 3);
}

#[test]
fn shipped_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scaled_trend.toml");
    let cfg = vaoi_fl::cli_io::ConfigFile::load(&path, &[]).unwrap();
    let exp = cfg.experiment_config().unwrap();
    assert_eq!(exp.num_clients, 100);
    assert_eq!(exp.num_selected(), 10);
    assert_eq!(exp.rounds, 300);
    assert_eq!(exp.trials, 3);
}
