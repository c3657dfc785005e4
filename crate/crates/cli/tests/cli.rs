use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn prt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prt"))
        .current_dir(dir)
        .env_remove("PRT_DATASET_ROOT")
        .args(args)
        .output()
        .expect("spawn prt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        stderr(&o)
    );
    o
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Toy config plus a small synthetic cohort in `data/`.
fn toy_workspace(subjects: usize, duration_s: u32) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(prt(
        dir.path(),
        &["init-config", "--preset", "toy", "--out", "toy.toml"],
    ));
    ok(prt(
        dir.path(),
        &[
            "--config",
            "toy.toml",
            "--dataset-root",
            "data",
            "synth",
            "--subjects",
            &subjects.to_string(),
            "--duration-s",
            &duration_s.to_string(),
        ],
    ));
    dir
}

#[test]
fn estimate_prints_rate_of_quarter_hertz_tone() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("time_s,value\n");
    for i in 0..1800 {
        let t = i as f64 / 30.0;
        csv.push_str(&format!(
            "{t},{}\n",
            (2.0 * std::f64::consts::PI * 0.25 * t).sin()
        ));
    }
    std::fs::write(dir.path().join("tone.csv"), csv).unwrap();
    for method in ["count", "spectral"] {
        let o = ok(prt(
            dir.path(),
            &["estimate", "--input", "tone.csv", "--method", method],
        ));
        let out = stdout(&o);
        let rate: f64 = out.split_whitespace().next().unwrap().parse().unwrap();
        assert!((rate - 15.0).abs() <= 1.0, "{method}: {out}");
        assert!(out.contains(" brpm"), "{out}");
    }
    assert!(dir.path().join("runs/estimate/run_manifest.json").exists());
}

#[test]
fn empty_dataset_directory_fails_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("nothing_here")).unwrap();
    let o = prt(dir.path(), &["--dataset-root", "nothing_here", "prepare"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nothing_here"), "{}", stderr(&o));
    let o = prt(dir.path(), &["--dataset-root", "missing_dir", "prepare"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("missing_dir"), "{}", stderr(&o));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(prt(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(prt(dir.path(), &["estimate"]).status.code(), Some(1));
    std::fs::write(dir.path().join("bad.toml"), "k_folds = \"five\"\n").unwrap();
    let o = prt(dir.path(), &["--config", "bad.toml", "prepare"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.toml"));
    assert!(prt(dir.path(), &["--help"]).status.success());
}

#[test]
fn prepare_is_idempotent_and_does_not_touch_inputs() {
    let ws = toy_workspace(2, 120);
    let root = ws.path();
    let data_before = snapshot(&root.join("data"));
    let o = ok(prt(
        root,
        &["--config", "toy.toml", "--dataset-root", "data", "prepare"],
    ));
    assert_eq!(
        stdout(&o).lines().next().unwrap(),
        "2 subjects, 8 window pairs (8 training windows)"
    );
    let first = snapshot(&root.join("runs/prepared"));
    assert!(first.contains_key(Path::new("windows/manifest.csv")));
    assert!(first.contains_key(Path::new("run_manifest.json")));
    ok(prt(
        root,
        &["--config", "toy.toml", "--dataset-root", "data", "prepare"],
    ));
    assert_eq!(snapshot(&root.join("runs/prepared")), first);
    assert_eq!(snapshot(&root.join("data")), data_before);
}

#[test]
fn one_epoch_training_is_reproducible() {
    let ws = toy_workspace(3, 120);
    let root = ws.path();
    ok(prt(
        root,
        &["--config", "toy.toml", "--dataset-root", "data", "prepare"],
    ));
    let run = || {
        let o = ok(prt(
            root,
            &[
                "--config", "toy.toml", "--seed", "3", "train", "--epochs", "1",
            ],
        ));
        let line = stdout(&o)
            .lines()
            .find(|l| l.starts_with("epoch 1:"))
            .unwrap()
            .to_string();
        (line, snapshot(&root.join("runs/train")))
    };
    let (line_a, files_a) = run();
    let (line_b, files_b) = run();
    assert_eq!(line_a, line_b);
    assert_eq!(files_a, files_b);
    let manifest: serde_json::Value =
        serde_json::from_slice(&files_a[Path::new("run_manifest.json")]).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["translator"]["seed"], 3);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);

    let mut csv = String::from("value\n");
    for i in 0..(125 * 70) {
        csv.push_str(&format!("{}\n", (i as f64 * 0.05).sin()));
    }
    std::fs::write(root.join("ppg.csv"), csv).unwrap();
    let o = ok(prt(
        root,
        &[
            "--config",
            "toy.toml",
            "translate",
            "--checkpoint",
            "runs/train/model.ckpt",
            "--input",
            "ppg.csv",
            "--fs",
            "125",
        ],
    ));
    assert!(stdout(&o).starts_with("2 windows"), "{}", stdout(&o));
    let out = std::fs::read_to_string(root.join("runs/translate/ppg_resp.csv")).unwrap();
    assert_eq!(out.lines().count(), 1 + 1800);

    ok(prt(
        root,
        &[
            "--config",
            "toy.toml",
            "plot",
            "--checkpoint",
            "runs/train/model.ckpt",
            "--subject",
            "synth_02",
        ],
    ));
    assert!(root.join("runs/plot/synth_02_0-2.png").exists());
    let o = prt(
        root,
        &[
            "--config",
            "toy.toml",
            "plot",
            "--checkpoint",
            "runs/train/model.ckpt",
            "--subject",
            "synth_09",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_writes_one_entry_per_fold() {
    let ws = toy_workspace(3, 120);
    let root = ws.path();
    ok(prt(
        root,
        &["--config", "toy.toml", "--dataset-root", "data", "prepare"],
    ));
    let o = ok(prt(
        root,
        &[
            "--config", "toy.toml", "evaluate", "--k", "3", "--epochs", "1",
        ],
    ));
    assert!(stdout(&o).contains("over 3 fold(s)"), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(root.join("runs/evaluate/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
    assert_eq!(report["partial"], false);
    assert!(root.join("runs/evaluate/fold_0.ckpt").exists());
    assert!(root.join("runs/evaluate/run_manifest.json").exists());
}
