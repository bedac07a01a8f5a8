use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fractvox::audio::encode_pcm16;
use fractvox::signals::{SpeechStyle, speech_like};

fn fractvox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fractvox")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Three speech-like WAVs plus a manifest in `dir`; with `corrupt`, the
/// second file holds garbage bytes.
fn corpus(dir: &Path, corrupt: bool) -> PathBuf {
    let specs = [("a.wav", SpeechStyle::fluent(), "CR"), ("b.wav", SpeechStyle::hesitant(), "ES"), ("c.wav", SpeechStyle::fluent(), "CR")];
    let mut manifest = String::from("path,speaker,label\n");
    for (i, (name, style, label)) in specs.into_iter().enumerate() {
        let bytes = if corrupt && i == 1 {
            b"RIFF not really a wave file".to_vec()
        } else {
            let x = speech_like(style, 1.5, 16_000, i as u64);
            encode_pcm16(&[&x], 16_000).unwrap()
        };
        std::fs::write(dir.join(name), bytes).unwrap();
        manifest.push_str(&format!("{name},spk{i},{label}\n"));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn extract_three_recordings() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), false);
    let out = dir.path().join("features.csv");
    let run = fractvox(&["extract", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(run.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("voiced_hist_0,"));
    assert!(dir.path().join("features.et.txt").exists());

    let again = dir.path().join("again.csv");
    assert_eq!(code(&fractvox(&["--threads", "1", "extract", "--manifest", p(&manifest), "--out", p(&again)])), 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn extract_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), true);
    let out = dir.path().join("features.csv");
    let run = fractvox(&["extract", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&run), 1);
    assert!(String::from_utf8_lossy(&run.stderr).contains("b.wav"));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 3);
}

#[test]
fn extract_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), false);
    let out = dir.path().join("f.csv");
    assert_eq!(code(&fractvox(&["extract", "--manifest", p(&manifest), "--out", p(&out), "--window", "500"])), 2);
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&fractvox(&["extract", "--manifest", p(&missing), "--out", p(&out)])), 1);
}

#[test]
fn synth_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let args = |o: &Path| ["synth", "--out", p(o), "--seed", "7"].map(String::from).to_vec();
    for o in [&a, &b] {
        let out = Command::new(env!("CARGO_BIN_EXE_fractvox")).args(args(o)).output().unwrap();
        assert_eq!(code(&out), 0);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 106);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let cr_only = dir.path().join("cr.csv");
    assert_eq!(code(&fractvox(&["synth", "--out", p(&cr_only), "--n-outlier", "0"])), 0);
    let text = std::fs::read_to_string(&cr_only).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",CR")));
}

#[test]
fn experiment_grid_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("synth.csv");
    let synth = ["synth", "--out", p(&features), "--n-target", "30", "--n-outlier", "10", "--dims", "4", "--separation", "2"];
    assert_eq!(code(&fractvox(&synth)), 0);

    let out = dir.path().join("run");
    let run = fractvox(&["experiment", "--features", p(&features), "--out", p(&out), "--seed", "3"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 19);
    assert_eq!(std::fs::read_dir(out.join("models")).unwrap().count(), 18);
    assert!(std::fs::read_to_string(out.join("config.txt")).unwrap().contains("seed = 3"));

    let out2 = dir.path().join("run2");
    let run = fractvox(&["--threads", "2", "experiment", "--features", p(&features), "--out", p(&out2), "--seed", "3"]);
    assert_eq!(code(&run), 0);
    assert_eq!(grid, std::fs::read_to_string(out2.join("grid.csv")).unwrap());

    let report = fractvox(&["report", "--grid", p(&out.join("grid.csv"))]);
    assert_eq!(code(&report), 0);
    assert_eq!(String::from_utf8_lossy(&report.stdout).lines().count(), 19);
}

#[test]
fn experiment_filters_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("synth.csv");
    assert_eq!(code(&fractvox(&["synth", "--out", p(&features), "--n-target", "20", "--n-outlier", "5", "--dims", "4"])), 0);
    let out = dir.path().join("run");
    let run = fractvox(&[
        "experiment", "--features", p(&features), "--out", p(&out), "--scheme", "oneclass_mlp", "--featureset", "ssf_ef_et_vhfd",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert!(grid.lines().skip(1).all(|l| l.starts_with("oneclass_mlp,ssf_ef_et_vhfd,")));

    let bad_set = fractvox(&["experiment", "--features", p(&features), "--out", p(&out), "--featureset", "mfcc"]);
    assert_eq!(code(&bad_set), 2);
    let too_many_folds = fractvox(&["experiment", "--features", p(&features), "--out", p(&out), "--folds", "100"]);
    assert_eq!(code(&too_many_folds), 2);
    assert_eq!(code(&fractvox(&["bogus"])), 2);

    let config = dir.path().join("cfg.txt");
    std::fs::write(&config, "window_points = 999\n").unwrap();
    assert_eq!(code(&fractvox(&["experiment", "--features", p(&features), "--out", p(&out), "--config", p(&config)])), 2);

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "mystery,stage_label\n1.0,CR\n").unwrap();
    let run = fractvox(&["experiment", "--features", p(&broken), "--out", p(&out)]);
    assert_eq!(code(&run), 1);
    assert!(String::from_utf8_lossy(&run.stderr).contains("mystery"));
}
