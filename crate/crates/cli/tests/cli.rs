use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sonocl::data::{read_container, read_epochs, write_markers, write_recording, markers_from_csv};
use sonocl::features::welch_psd;
use sonocl::session::{NextTrial, ResponseInput, Session, SessionConfig, TlxInput};
use sonocl::stimulus::read_wav;
use sonocl::{ClLabel, Matrix, RawRecording, Response, SessionKind};

fn sonocl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sonocl")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = sonocl(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Exit status plus the parsed single-line error.
fn failure(args: &[&str]) -> (i32, Value) {
    let out = sonocl(args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    (out.status.code().unwrap(), serde_json::from_str(stderr.trim()).unwrap())
}

#[test]
fn synth_pitch_writes_ten_levels() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--param", "pitch", "--out", p(dir.path())]);
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 10);
    assert_eq!(names[0], "pitch_01.wav");

    let audio = read_wav(&dir.path().join("pitch_01.wav")).unwrap();
    let fs_hz = audio.sample_rate as f64;
    let (f, pxx) = welch_psd(&audio.samples, fs_hz, 8192, 4096).unwrap();
    let peak = (0..pxx.len()).max_by(|&a, &b| pxx[a].total_cmp(&pxx[b])).unwrap();
    let bin = fs_hz / 8192.0;
    assert!((f[peak] - 261.63).abs() <= bin, "peak at {} Hz", f[peak]);
}

#[test]
fn synth_visual_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"image_size": 32}"#).unwrap();
    ok(&["--config", p(&cfg), "synth", "--param", "visualcomb", "--out", p(&dir.path().join("s"))]);
    let n = |ext: &str| {
        fs::read_dir(dir.path().join("s"))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == ext)
            .count()
    };
    assert_eq!((n("wav"), n("pgm")), (10, 10));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.snld");
    let b = dir.path().join("b.snld");
    ok(&["simulate", "--effect", "0", "--seed", "7", "--out", p(&a)]);
    ok(&["simulate", "--effect", "0", "--seed", "7", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(read_epochs(&a).unwrap().len(), 400);
    ok(&["simulate", "--effect", "0", "--seed", "8", "--out", p(&b)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn features_container_has_one_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let epochs = dir.path().join("e.snld");
    let feats = dir.path().join("f.snld");
    ok(&["simulate", "--n", "20", "--seed", "1", "--out", p(&epochs)]);
    ok(&["features", "--input", p(&epochs), "--feature", "psd", "--out", p(&feats)]);
    let (header, values) = read_container(&feats).unwrap();
    assert_eq!(header.content, "features");
    assert_eq!((header.count, header.sample_shape.clone()), (20, vec![70]));
    assert_eq!(values.len(), 20 * 70);
    assert_eq!(header.labels.len(), 20);
}

#[test]
fn eval_svm_recovers_planted_signal() {
    let dir = tempfile::tempdir().unwrap();
    let epochs = dir.path().join("e.snld");
    ok(&["simulate", "--n", "300", "--seed", "3", "--out", p(&epochs)]);
    let out = ok(&["eval", "--input", p(&epochs), "--arch", "svm-rbf", "--repetitions", "2"]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["heads"][0]["runs"], 10);
    assert!(report["heads"][0]["f1"]["mean"].as_f64().unwrap() > 0.8, "{report}");
}

#[test]
fn eval_fusion_reports_fifty_runs() {
    let dir = tempfile::tempdir().unwrap();
    let epochs = dir.path().join("e.snld");
    let cfg = dir.path().join("cfg.json");
    let report = dir.path().join("r.json");
    fs::write(&cfg, r#"{"train": {"max_epochs": 1, "batch_size": 16}}"#).unwrap();
    ok(&["simulate", "--n", "50", "--seed", "2", "--out", p(&epochs)]);
    let table = ok(&[
        "--config", p(&cfg), "eval", "--input", p(&epochs), "--feature", "topo", "--arch", "fusion", "--out",
        p(&report), "--table",
    ]);
    assert!(table.contains("fusion"));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let names: Vec<&str> = r["heads"].as_array().unwrap().iter().map(|h| h["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["fusion", "eegnet/raw", "topo-a/topo"]);
    for h in r["heads"].as_array().unwrap() {
        assert_eq!(h["runs"], 50);
        assert_eq!(h["per_run"].as_array().unwrap().len(), 50);
    }
}

#[test]
fn train_writes_loadable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let epochs = dir.path().join("e.snld");
    ok(&["simulate", "--n", "40", "--seed", "4", "--out", p(&epochs)]);
    let lda = dir.path().join("lda.json");
    ok(&["train", "--input", p(&epochs), "--arch", "lda", "--out", p(&lda)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&lda).unwrap()).unwrap();
    assert_eq!(v["model"]["kind"], "lda");

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"train": {"max_epochs": 2}}"#).unwrap();
    let ckpt = dir.path().join("topo.snld");
    ok(&["--config", p(&cfg), "train", "--input", p(&epochs), "--arch", "topo-b", "--out", p(&ckpt)]);
    let model = sonocl::neural::load_checkpoint(&ckpt).unwrap();
    assert_eq!(model.spec.arch.to_string(), "topo-b");
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("topo.snld.json")).unwrap()).unwrap();
    assert_eq!(side["feature"], "topo");
    assert_eq!(side["normalizer"]["mean"].as_array().unwrap().len(), 5 * 32 * 32);
}

fn completed_session() -> sonocl::session::ExportBundle {
    let config = SessionConfig {
        participant: "p03".into(),
        kind: SessionKind::IR,
        seed: 5,
        practice: false,
    };
    let mut s = Session::new(config, 0).unwrap();
    let mut now = 0;
    loop {
        match s.next(now).unwrap() {
            NextTrial::Trial(t) => {
                now += 3200;
                let input = ResponseInput {
                    trial_id: t.trial_id,
                    response: Some(Response::Rating(6)),
                    latency_ms: Some(700),
                };
                s.respond(&input, now).unwrap();
                now += 100;
            }
            NextTrial::TlxRequired { .. } => {
                let tlx = TlxInput {
                    effort: 3,
                    mental_demand: 2,
                    frustration: 4,
                };
                s.submit_tlx(&tlx).unwrap();
            }
            NextTrial::Complete => return s.export().unwrap(),
        }
    }
}

#[test]
fn exported_markers_drive_preprocess_and_labelling() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = completed_session();
    let bundle_path = dir.path().join("bundle.json");
    fs::write(&bundle_path, serde_json::to_string(&bundle).unwrap()).unwrap();
    let markers = markers_from_csv(&bundle.markers_csv).unwrap();
    let markers_path = dir.path().join("markers.csv");
    write_markers(&markers, &markers_path).unwrap();

    let len = markers.last().unwrap().onset + 400;
    let data: Vec<f64> = (0..14 * len)
        .map(|i| 5.0 * ((i % len) as f64 * 0.37 + (i / len) as f64).sin())
        .collect();
    let rec = RawRecording::new(Matrix::from_vec(14, len, data).unwrap(), Vec::new()).unwrap();
    let rec_path = dir.path().join("rec.csv");
    write_recording(&rec, &rec_path).unwrap();

    let out = dir.path().join("epochs.snld");
    let summary = ok(&[
        "preprocess", "--input", p(&rec_path), "--markers", p(&markers_path), "--bundle", p(&bundle_path),
        "--out", p(&out),
    ]);
    let v: Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["epochs"], 180);
    assert_eq!(v["labelled"], 180);
    let epochs = read_epochs(&out).unwrap();
    assert_eq!(epochs.len(), 180);
    assert!(epochs.iter().all(|e| e.labels.cl_label == Some(ClLabel::High)));

    let mapping = ok(&["mapping", "--bundle", p(&bundle_path)]);
    let m: Value = serde_json::from_str(&mapping).unwrap();
    assert_eq!(m["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seeed": 3}"#).unwrap();
    let (code, err) = failure(&["--config", p(&cfg), "simulate", "--out", p(&dir.path().join("x"))]);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "usage");
    assert!(err["message"].as_str().unwrap().contains("seeed"));

    fs::write(&cfg, r#"{"train": {"learning_rate": 0.1}}"#).unwrap();
    let (code, _) = failure(&["--config", p(&cfg), "simulate", "--out", p(&dir.path().join("x"))]);
    assert_eq!(code, 1);
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = failure(&["eval", "--input", p(&dir.path().join("missing.snld")), "--arch", "gnb"]);
    assert_eq!((code, err["error"].as_str().unwrap()), (2, "data"));

    let (code, _) = failure(&["eval", "--arch", "gnb"]);
    assert_eq!(code, 1, "missing --input");
    let (code, _) = failure(&["frobnicate"]);
    assert_eq!(code, 1);
    let (code, _) = failure(&["synth", "--param", "loudness", "--out", p(dir.path())]);
    assert_eq!(code, 1);

    let junk = dir.path().join("junk.snld");
    fs::write(&junk, b"SNLD1garbage").unwrap();
    let (code, _) = failure(&["features", "--input", p(&junk), "--feature", "psd", "--out", p(&dir.path().join("f"))]);
    assert_eq!(code, 2, "schema mismatch");

    let epochs = dir.path().join("e.snld");
    ok(&["simulate", "--n", "20", "--out", p(&epochs)]);
    let (code, _) = failure(&["eval", "--input", p(&epochs), "--arch", "eegnet", "--feature", "psd"]);
    assert_eq!(code, 1, "feature does not fit the network");

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"preprocess": {"filter": {"order": 6, "low_hz": 0.1, "high_hz": 90.0, "sample_rate": 128.0}}}"#).unwrap();
    let rec = dir.path().join("rec.csv");
    let r = RawRecording::new(Matrix::zeros(14, 400), Vec::new()).unwrap();
    write_recording(&r, &rec).unwrap();
    write_markers(&[], &dir.path().join("m.csv")).unwrap();
    let (code, err) = failure(&[
        "--config", p(&cfg), "preprocess", "--input", p(&rec), "--markers", p(&dir.path().join("m.csv")), "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!((code, err["error"].as_str().unwrap()), (3, "numeric"), "{err}");
}
