use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qrbm(args: &[&str]) -> Output {
    qrbm_env(args, None)
}

fn qrbm_env(args: &[&str], output_dir_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qrbm"));
    cmd.args(args).env_remove("QRBM_OUTPUT_DIR");
    if let Some(d) = output_dir_env {
        cmd.env("QRBM_OUTPUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = qrbm(args);
    assert!(
        out.status.success(),
        "qrbm {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic CSV plus its column config.
fn synth(dir: &Path) -> (PathBuf, PathBuf) {
    let csv = dir.join("tx.csv");
    let cols = dir.join("cols.toml");
    ok(&[
        "synth", "--rows", "600", "--numeric", "2", "--categorical", "2", "--fraud-rate", "0.3", "--seed", "9",
        "--out", s(&csv), "--columns-out", s(&cols),
    ]);
    (csv, cols)
}

fn small_train(csv: &Path, cols: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![
        "train", "--preset", "classical", "--data", s(csv), "--columns", s(cols), "--epochs", "4", "--n-hidden", "6",
        "--batch-size", "64", "--output-dir", s(out),
    ];
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn train_writes_trace_with_one_row_per_epoch_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let stdout = small_train(&csv, &cols, &a, &[]);
    assert!(stdout.contains("sampler pcd-gibbs"));
    small_train(&csv, &cols, &b, &[]);

    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 4);
    assert_eq!(trace.lines().next().unwrap(), "epoch,accuracy,precision,recall,f1,lr");
    for f in ["trace.csv", "trace.json", "model.json", "model_best.json", "metrics.json", "specs.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sa_run_records_sampler_and_anneal_config() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let out = dir.path().join("sa");
    let args = [
        "train", "--preset", "sa", "--data", s(&csv), "--columns", s(&cols), "--epochs", "2", "--n-hidden", "4",
        "--sweeps", "20", "--num-reads", "16", "--output-dir", s(&out),
    ];
    ok(&args);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["sampler"], "simulated-anneal");
    assert_eq!(m["anneal"]["sweeps"], 20);
    assert_eq!(m["anneal"]["num_reads"], 16);
    assert_eq!(m["seeds"]["anneal"], m["anneal"]["seed"]);
    assert_eq!(m["epoch_wall_ms"].as_array().unwrap().len(), 2);
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let a = dir.path().join("a");
    small_train(&csv, &cols, &a, &["--sampler", "mock", "--sweeps", "10", "--num-reads", "8"]);
    let b = dir.path().join("b");
    ok(&["train", "--config", s(&a.join("manifest.json")), "--output-dir", s(&b)]);
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
}

#[test]
fn record_then_replay_matches_mock() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let rec = dir.path().join("rec");
    let mock = dir.path().join("mock");
    let flags = ["--sweeps", "10", "--num-reads", "8"];
    let mut a = vec!["--sampler", "mock", "--record-dir", s(&rec)];
    a.extend_from_slice(&flags);
    small_train(&csv, &cols, &mock, &a);
    assert!(fs::read_dir(&rec).unwrap().count() > 0);

    let replay = dir.path().join("replay");
    let sel = format!("replay:{}", rec.display());
    let mut b = vec!["--sampler", sel.as_str()];
    b.extend_from_slice(&flags);
    small_train(&csv, &cols, &replay, &b);
    assert_eq!(fs::read(mock.join("model.json")).unwrap(), fs::read(replay.join("model.json")).unwrap());
}

#[test]
fn eval_prints_metrics_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let run = dir.path().join("run");
    small_train(&csv, &cols, &run, &[]);
    let out = dir.path().join("eval.json");
    let text = ok(&[
        "eval", "--model", s(&run.join("model_best.json")), "--data", s(&csv), "--specs", s(&run.join("specs.json")),
        "--out", s(&out),
    ]);
    assert!(text.contains("accuracy") && text.contains("f1"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let mut expected = ["accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "epoch"];
    expected.sort_unstable();
    let mut got = keys.clone();
    got.sort_unstable();
    assert_eq!(got, expected);
    assert!(v["epoch"].is_null());
    let total: u64 = ["tp", "fp", "fn", "tn"].iter().map(|k| v[k].as_u64().unwrap()).sum();
    assert_eq!(total, 600);
    for k in ["accuracy", "precision", "recall", "f1"] {
        let x = v[k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&x));
    }

    let json = ok(&[
        "eval", "--model", s(&run.join("model_best.json")), "--data", s(&csv), "--specs", s(&run.join("specs.json")),
        "--json",
    ]);
    assert_eq!(json, fs::read_to_string(&out).unwrap());
}

#[test]
fn eval_rejects_empty_csv_and_mismatched_model() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let run = dir.path().join("run");
    small_train(&csv, &cols, &run, &[]);
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = qrbm(&["eval", "--model", s(&run.join("model.json")), "--data", s(&empty), "--specs", s(&run.join("specs.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // specs from a table with an extra numeric column
    let other = dir.path().join("other");
    fs::create_dir(&other).unwrap();
    let csv3 = other.join("tx.csv");
    let cols3 = other.join("cols.toml");
    ok(&["synth", "--rows", "200", "--numeric", "3", "--categorical", "2", "--out", s(&csv3), "--columns-out", s(&cols3)]);
    let run3 = dir.path().join("run3");
    small_train(&csv3, &cols3, &run3, &[]);
    let out = qrbm(&["eval", "--model", s(&run.join("model.json")), "--data", s(&csv3), "--specs", s(&run3.join("specs.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("visible units"));
}

#[test]
fn gridsearch_ranks_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let grid = dir.path().join("grid.toml");
    fs::write(&grid, "n_hidden = [8, 16]\n").unwrap();
    let out = dir.path().join("grid");
    ok(&[
        "gridsearch", "--preset", "classical", "--data", s(&csv), "--columns", s(&cols), "--epochs", "3", "--batch-size",
        "64", "--grid", s(&grid), "--output-dir", s(&out),
    ]);
    let ranked = fs::read_to_string(out.join("ranked.csv")).unwrap();
    let rows: Vec<&str> = ranked.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    let mut cells: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    cells.sort_unstable();
    assert_eq!(cells, ["0", "1"]);
    assert!(out.join("cell000/trace.csv").exists() && out.join("cell001/trace.csv").exists());

    fs::write(&grid, "n_hidden = []\n").unwrap();
    let bad = qrbm(&["gridsearch", "--preset", "classical", "--grid", s(&grid), "--output-dir", s(&out)]);
    assert!(!bad.status.success());
}

#[test]
fn compare_prints_table_one_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    small_train(&csv, &cols, &a, &["--name", "pcd"]);
    small_train(&csv, &cols, &b, &["--name", "sa", "--sampler", "simulated-anneal", "--sweeps", "10", "--num-reads", "8"]);
    let out = dir.path().join("cmp.csv");
    let table = ok(&["compare", s(&a), s(&b.join("manifest.json")), "--csv", s(&out)]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    for col in ["Method", "Accuracy", "Precision", "Recall", "F1-Score", "Total Time"] {
        assert!(lines[0].contains(col));
    }
    assert!(lines[1].starts_with("pcd") && lines[2].starts_with("sa"));
    assert!(fs::read_to_string(out).unwrap().starts_with("method,accuracy,precision,recall,f1,total_time_s\n"));
}

#[test]
fn sample_runs_sa_mock_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p.ising");
    fs::write(&problem, "qrbm-ising 1\nn 3\noffset 0\nlinear 0 0.5\nquadratic 0 1 -1\nquadratic 1 2 0.75\n").unwrap();
    let sa = ok(&["sample", s(&problem), "--num-reads", "50", "--sweeps", "20", "--seed", "3"]);
    assert!(sa.starts_with("qrbm-samples 1\n"));
    assert!(sa.contains("source simulated-anneal"));
    let reads: u64 = sa
        .lines()
        .filter(|l| l.starts_with("sample "))
        .map(|l| l.split_whitespace().nth(2).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(reads, 50);

    let rec = dir.path().join("rec.samples");
    ok(&["sample", s(&problem), "--client", "mock", "--num-reads", "50", "--sweeps", "20", "--seed", "3", "--out", s(&rec)]);
    let mock = fs::read_to_string(&rec).unwrap();
    assert_eq!(mock.replace("mock-annealer", "simulated-anneal"), sa);

    let sel = format!("replay:{}", rec.display());
    let replayed = ok(&["sample", s(&problem), "--client", &sel, "--num-reads", "50"]);
    assert_eq!(replayed, mock);

    let other = dir.path().join("q.ising");
    fs::write(&other, "qrbm-ising 1\nn 3\noffset 0\nlinear 0 -0.5\n").unwrap();
    let out = qrbm(&["sample", s(&other), "--client", &sel, "--num-reads", "50"]);
    assert!(!out.status.success(), "replay of a different problem must fail");

    let qubo = dir.path().join("p.qubo");
    fs::write(&qubo, "qrbm-qubo 1\nn 2\noffset 0\nlinear 0 -1\nquadratic 0 1 2\n").unwrap();
    assert!(ok(&["sample", s(&qubo), "--num-reads", "10", "--sweeps", "5"]).contains("n 2"));
    let unknown = dir.path().join("p.txt");
    fs::write(&unknown, "").unwrap();
    assert!(!qrbm(&["sample", s(&unknown)]).status.success());
}

#[test]
fn output_dir_defaults_to_env_then_name() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let env_dir = dir.path().join("env");
    let out = qrbm_env(
        &[
            "train", "--preset", "classical", "--data", s(&csv), "--columns", s(&cols), "--epochs", "2", "--n-hidden",
            "4", "--name", "envrun",
        ],
        Some(&env_dir),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.join("envrun/manifest.json").exists());
}

#[test]
fn divergence_and_bad_configs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, cols) = synth(dir.path());
    let out = qrbm(&[
        "train", "--preset", "classical", "--data", s(&csv), "--columns", s(&cols), "--epochs", "3", "--lr", "1e9",
        "--output-dir", s(&dir.path().join("boom")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged at epoch"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "name = \"x\"\n").unwrap();
    assert!(!qrbm(&["train", "--config", s(&cfg)]).status.success());
    assert!(!qrbm(&["train"]).status.success());
    assert!(!qrbm(&["train", "--preset", "classical", "--sweeps", "5"]).status.success());
    assert!(!qrbm(&["train", "--preset", "classical", "--sampler", "replay:/does/not/exist"]).status.success());
}

#[test]
fn presets_print_as_loadable_configs() {
    let dir = tempfile::tempdir().unwrap();
    for p in ["classical", "sa", "annealer"] {
        let text = ok(&["preset", p]);
        let path = dir.path().join(format!("{p}.toml"));
        fs::write(&path, &text).unwrap();
        qrbm::experiment::ExperimentConfig::load(&path).unwrap();
    }
}
