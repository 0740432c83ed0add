use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diarcluster"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn small_suite(dir: &Path) {
    let o = bin(&["synth", "--suite", "easy", "--seed", "2", "--out", "data", "--set", "n_segments=40"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    small_suite(dir.path());
    let m = json(dir.path().join("data/manifest.json"));
    let sessions = m["sessions"].as_array().unwrap();
    assert_eq!(sessions.len(), 5);
    assert_eq!(m["suite"], "easy");
    for s in sessions {
        let id = s["session_id"].as_str().unwrap();
        for ext in ["frames", "rttm", "profiles.json"] {
            assert!(dir.path().join("data").join(format!("{id}.{ext}")).exists());
        }
    }
}

#[test]
fn synth_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.json"), r#"{"n_speakers": 3, "dim": 16, "n_segments": 12}"#).unwrap();
    let o = bin(&["synth", "--config", "g.json", "--seed", "4", "--out", "one"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(dir.path().join("one/manifest.json"));
    assert_eq!(m["sessions"][0]["num_speakers"], 3);
    let o = bin(&["synth", "--suite", "nope", "--out", "x"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn run_writes_reports_and_scores_well() {
    let dir = tempfile::tempdir().unwrap();
    small_suite(dir.path());
    let o = bin(&["run", "--manifest", "data/manifest.json", "--out", "out", "--set", "pca_dim=4"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("kmeans"));
    assert_eq!(stdout, fs::read_to_string(dir.path().join("out/report.txt")).unwrap());
    let report = json(dir.path().join("out/report.json"));
    assert_eq!(report["config"]["pca_dim"], 4);
    assert_eq!(report["config"]["seed"], 0);
    assert!(report["aggregate"]["recall_pct"].as_f64().unwrap() > 95.0);
}

#[test]
fn config_file_then_overrides_then_seed() {
    let dir = tempfile::tempdir().unwrap();
    small_suite(dir.path());
    fs::write(dir.path().join("c.json"), r#"{"pca_dim": 4, "aggregation": "mean", "seed": 99}"#).unwrap();
    let o = bin(
        &["run", "--manifest", "data/manifest.json", "--out", "out", "--config", "c.json", "--set", "pca_dim=6", "--seed", "5"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let cfg = &json(dir.path().join("out/report.json"))["config"];
    assert_eq!(cfg["pca_dim"], 6);
    assert_eq!(cfg["aggregation"], "mean");
    assert_eq!(cfg["seed"], 5);
}

#[test]
fn hard_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    small_suite(dir.path());
    for args in [
        vec!["run", "--manifest", "data/manifest.json", "--out", "o", "--set", "bogus=1"],
        vec!["run", "--manifest", "missing.json", "--out", "o"],
        vec!["sweep", "--manifest", "data/manifest.json", "--out", "o", "--axis", "colour"],
        vec!["run", "--manifest", "data/manifest.json", "--out", "o", "--set", "k=0"],
    ] {
        let o = bin(&args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn failed_session_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    small_suite(dir.path());
    let m = json(dir.path().join("data/manifest.json"));
    let first = m["sessions"][0]["frames_path"].as_str().unwrap();
    fs::write(dir.path().join("data").join(first), b"garbage").unwrap();
    let o = bin(&["run", "--manifest", "data/manifest.json", "--out", "out", "--set", "pca_dim=8"], dir.path());
    assert_eq!(code(&o), 2);
    let report = json(dir.path().join("out/report.json"));
    assert_eq!(report["aggregate"]["n_failed"], 1);
    assert_eq!(report["sessions"][0]["ok"], false);
    assert_eq!(report["sessions"][1]["ok"], true);
}

#[test]
fn score_agrees_with_the_run_report() {
    let dir = tempfile::tempdir().unwrap();
    small_suite(dir.path());
    let o = bin(&["run", "--manifest", "data/manifest.json", "--out", "out", "--set", "pca_dim=8"], dir.path());
    assert_eq!(code(&o), 0);
    let report = json(dir.path().join("out/report.json"));
    for s in report["sessions"].as_array().unwrap() {
        let id = s["session_id"].as_str().unwrap();
        let reference = format!("data/{id}.rttm");
        let hyp = format!("out/sessions/{id}/hyp.rttm");
        let o = bin(&["score", "--reference", &reference, "--hypothesis", &hyp], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let scored: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let a = scored["recall_pct"].as_f64().unwrap();
        let b = s["score"]["recall_pct"].as_f64().unwrap();
        assert!((a - b).abs() < 1e-6, "{id}: {a} vs {b}");
        // without the collar merge the result is the unmerged score
        let o = bin(&["score", "--reference", &reference, "--hypothesis", &hyp, "--set", "collar=0"], dir.path());
        let scored: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let u = s["unmerged_score"]["recall_pct"].as_f64().unwrap();
        assert!((scored["recall_pct"].as_f64().unwrap() - u).abs() < 1e-6);
    }
}

#[test]
fn sweep_lists_every_value() {
    let dir = tempfile::tempdir().unwrap();
    small_suite(dir.path());
    let o = bin(
        &["sweep", "--manifest", "data/manifest.json", "--out", "sw", "--axis", "min_duration", "--set", "pca_dim=8"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8(o.stdout).unwrap();
    for v in ["0", "0.5", "1.0", "1.5"] {
        assert!(dir.path().join(format!("sw/min_duration={v}/report.json")).exists(), "{v}");
    }
    assert!(table.lines().next().unwrap().contains("min_duration"));
    let sweep = json(dir.path().join("sw/sweep.json"));
    assert_eq!(sweep["values"].as_array().unwrap().len(), 4);
}

#[test]
fn pretrain_then_run_dec_from_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["synth", "--suite", "easy", "--out", "data", "--set", "n_segments=30", "--set", "dim=24"], dir.path());
    assert_eq!(code(&o), 0);
    let net = "dec.pretrain.layer_sizes=[24,16,16,4,16,16,24]";
    let o = bin(
        &["pretrain", "--manifest", "data/manifest.json", "--out", "pre", "--set", net, "--set", "dec.pretrain.epochs=5"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("pre/pretrain_loss.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.starts_with("epoch,l_c,l_r,l_u,l_mse,total"));
    let o = bin(
        &[
            "run", "--manifest", "data/manifest.json", "--out", "out",
            "--set", "algorithm=dec_improved", "--set", "pretrained_path=\"pre/autoencoder.ckpt\"",
            "--set", "dec.epochs=3",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(dir.path().join("out/report.json"));
    let id = report["sessions"][0]["session_id"].as_str().unwrap().to_string();
    let loss = fs::read_to_string(dir.path().join(format!("out/sessions/{id}/loss.csv"))).unwrap();
    assert_eq!(loss.lines().count(), 1 + 4);
    // a checkpoint for another input width fails each session, not the run
    let o = bin(&["synth", "--suite", "easy", "--out", "narrow", "--set", "n_segments=30", "--set", "dim=12"], dir.path());
    assert_eq!(code(&o), 0);
    let o = bin(
        &[
            "run", "--manifest", "narrow/manifest.json", "--out", "bad",
            "--set", "algorithm=dec_improved", "--set", "pretrained_path=\"pre/autoencoder.ckpt\"",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let report = json(dir.path().join("bad/report.json"));
    assert_eq!(report["aggregate"]["n_failed"], 5);
}
