use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tinyrec::ctc::LogProbMatrix;
use tinyrec::Charset;

fn tinyrec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tinyrec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run-manifest.json")).unwrap()).unwrap()
}

/// Writes a small synthetic corpus and its charset into `dir`.
fn corpus(dir: &Path, samples: usize) {
    let o = tinyrec(&["synth", "--out", "syn", "--samples", &samples.to_string(), "--max-len", "4"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = tinyrec(&["charset", "--data", "syn/annotations.tsv", "--out", "charset.txt"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

/// Writes a small network config sized to `charset.txt` in `dir`.
fn tiny_net(dir: &Path, keep: f64) {
    let vocab = Charset::load(&dir.join("charset.txt")).unwrap().vocab_size();
    let net = serde_json::json!({
        "input_height": 16, "input_width": 64, "input_channels": 1,
        "stages": [
            {"out_channels": 4, "kernel": 3, "stride_h": 2, "stride_w": 2},
            {"out_channels": 6, "kernel": 3, "stride_h": 2, "stride_w": 1}
        ],
        "width_multiplier": 1.0, "neck_hidden": 6, "neck_layers": 1, "vocab": vocab,
        "dropout_keep_prob": keep, "seed": 3
    });
    fs::write(dir.join("net.json"), net.to_string()).unwrap();
}

#[test]
fn no_arguments_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tinyrec(&[], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));

    let o = tinyrec(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        vec!["--help"],
        vec!["stats", "--help"],
        vec!["charset", "--help"],
        vec!["augment", "preview", "--help"],
        vec!["train", "--help"],
        vec!["eval", "--help"],
        vec!["decode", "--help"],
        vec!["overfit", "--help"],
        vec!["synth", "--help"],
    ] {
        let o = tinyrec(&sub, dir.path());
        assert_eq!(o.status.code(), Some(0), "{sub:?}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"), "{sub:?}");
    }
}

#[test]
fn stats_writes_reports_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 30);
    let o = tinyrec(&["--seed", "5", "stats", "--data", "syn/annotations.tsv", "--out", "rpt"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rpt = dir.path().join("rpt");
    for f in ["report.json", "report.csv", "lengths_all.svg", "frequency_train.svg", "heights_val.svg"] {
        assert!(rpt.join(f).is_file(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(rpt.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["splits"]["all"]["samples"], 30);
    let m = manifest(&rpt);
    assert_eq!(m["command"], "stats");
    assert_eq!(m["seed"], 5);
}

#[test]
fn stats_with_unreadable_image_is_partial() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 10);
    fs::write(dir.path().join("syn/img/00003.pgm"), b"not an image").unwrap();
    let o = tinyrec(&["stats", "--data", "syn/annotations.tsv", "--out", "rpt"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(dir.path().join("rpt/report.json").is_file());
}

#[test]
fn charset_orders_by_first_occurrence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ann.tsv"), "a.png\tBA A\nb.png\tCB\n").unwrap();
    let o = tinyrec(&["charset", "--data", "ann.tsv", "--out", "cs.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cs = Charset::load(&dir.path().join("cs.txt")).unwrap();
    assert_eq!(cs.vocab_size(), 4);
    assert_eq!(cs.encode("BAC").unwrap(), vec![1, 2, 3]);
}

#[test]
fn train_with_missing_charset_fails_descriptively() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 8);
    let o = tinyrec(
        &["train", "--data", "syn/annotations.tsv", "--charset", "nope.txt", "--out", "run"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.txt"), "{}", stderr(&o));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 24);
    tiny_net(dir.path(), 0.9);
    fs::write(dir.path().join("train.toml"), "batch_size = 4\nrestart_period_epochs = 2.0\n").unwrap();
    let o = tinyrec(
        &[
            "--seed", "9", "train", "--config", "train.toml", "--net", "net.json", "--data", "syn/annotations.tsv",
            "--charset", "charset.txt", "--split-ratio", "0.75", "--out", "run", "--epochs", "2",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let run = dir.path().join("run");
    for f in ["metrics.jsonl", "best.ckpt", "last.ckpt", "train-config.toml", "net-config.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let lines: Vec<serde_json::Value> = fs::read_to_string(run.join("metrics.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["epoch"], 1);
    let resolved = fs::read_to_string(run.join("train-config.toml")).unwrap();
    assert!(resolved.contains("seed = 9"), "{resolved}");
    assert!(resolved.contains("batch_size = 4"), "{resolved}");
    assert_eq!(manifest(&run)["seed"], 9);

    let o = tinyrec(
        &[
            "eval", "--checkpoint", "run/last.ckpt", "--charset", "charset.txt", "--data", "syn/annotations.tsv",
            "--out", "ev", "--greedy", "--beam-width", "3", "--dump-preds", "preds.tsv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ev/eval.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
    assert_eq!(reports[0]["n_samples"], 24);
    let preds = fs::read_to_string(dir.path().join("preds.tsv")).unwrap();
    assert_eq!(preds.lines().count(), 24);
    assert!(preds.lines().all(|l| l.split('\t').count() == 4));

    let o = tinyrec(
        &["eval", "--checkpoint", "run/last.ckpt", "--charset", "syn/annotations.tsv", "--data", "syn/annotations.tsv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn decode_greedy_and_beam() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ann.tsv"), "a.png\tab\n").unwrap();
    assert_eq!(tinyrec(&["charset", "--data", "ann.tsv", "--out", "cs.txt"], dir.path()).status.code(), Some(0));
    // Two frames of (blank 0.6, a 0.4, b 0.0): greedy says "", beam finds "a".
    let m = LogProbMatrix::from_probs(2, 3, &[0.6, 0.4, 0.0, 0.6, 0.4, 0.0]).unwrap();
    fs::write(dir.path().join("m.bin"), m.to_bytes()).unwrap();

    let o = tinyrec(&["decode", "--matrix", "m.bin", "--charset", "cs.txt", "--greedy"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "");
    let o = tinyrec(&["decode", "--matrix", "m.bin", "--charset", "cs.txt", "--beam-width", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "a");

    fs::write(dir.path().join("bad.bin"), [1u8, 2, 3]).unwrap();
    let o = tinyrec(&["decode", "--matrix", "bad.bin", "--charset", "cs.txt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn augment_preview_writes_variants() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 2);
    let o = tinyrec(
        &["augment", "preview", "--image", "syn/img/00000.pgm", "--count", "3", "--out", "prev", "--format", "pnm"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let prev = dir.path().join("prev");
    let variants = fs::read_dir(&prev)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("variant_"))
        .count();
    assert_eq!(variants, 3);
    assert!(prev.join("contact.svg").is_file());

    // Same seed, same variants.
    let o = tinyrec(
        &["augment", "preview", "--image", "syn/img/00000.pgm", "--count", "3", "--out", "prev2", "--format", "pnm"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    for i in 0..3 {
        let name = format!("variant_{i:03}.pgm");
        assert_eq!(fs::read(prev.join(&name)).unwrap(), fs::read(dir.path().join("prev2").join(&name)).unwrap());
    }
}

#[test]
fn overfit_reports_rungs() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 100);
    tiny_net(dir.path(), 1.0);
    let o = tinyrec(
        &[
            "overfit", "--data", "syn/annotations.tsv", "--charset", "charset.txt", "--net", "net.json", "--out", "of",
            "--max-iterations", "3",
        ],
        dir.path(),
    );
    // Three iterations cannot fit anything: the ladder fails, which is a
    // result rather than an error.
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("of/overfit.json")).unwrap()).unwrap();
    let rungs = report["rungs"].as_array().unwrap();
    assert!(!rungs.is_empty());
    assert_eq!(rungs[0]["passed"], false);
}
