use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stereo_focus::simulate::{synthetic_talker, SceneSpec};
use stereo_focus::wav::{read_wav, write_wav};
use stereo_focus::StereoSignal;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stereo-focus"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn stereo-focus")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stereo_input(dir: &Path, name: &str, seconds: f64) -> PathBuf {
    let a = synthetic_talker(seconds, 16_000, 1);
    let b = synthetic_talker(seconds, 16_000, 2);
    let left: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.8 * x + 0.3 * y).collect();
    let right: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * x - 0.6 * y).collect();
    let path = dir.join(name);
    write_wav(&path, &StereoSignal::new(left, right, 16_000).unwrap()).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn invalid_mode_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 0.2);
    let o = run(&["enhance", "--mode", "triple-path", s(&input), s(&dir.path().join("o.wav"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn passthrough_reproduces_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 1.5);
    let out = dir.path().join("out.wav");
    let o = run(&["enhance", "--mode", "dual-proposed", "--enhancer", "passthrough", s(&input), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let x: StereoSignal<f64> = read_wav(&input).unwrap();
    let y: StereoSignal<f64> = read_wav(&out).unwrap();
    assert_eq!(x.len(), y.len());
    assert!(y.max_abs_diff(&x) <= 1e-5, "{}", y.max_abs_diff(&x));
}

#[test]
fn passthrough_reproduces_input_in_f32() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 1.0);
    let out = dir.path().join("out.wav");
    let o = run(&["enhance", "--enhancer", "passthrough", "--precision", "f32", s(&input), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let x: StereoSignal<f64> = read_wav(&input).unwrap();
    let y: StereoSignal<f64> = read_wav(&out).unwrap();
    assert!(y.max_abs_diff(&x) <= 1e-5);
}

#[test]
fn enhance_writes_output_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 1.0);
    let out = dir.path().join("out.wav");
    let report = dir.path().join("run.json");
    let o = run(&["enhance", "--mode", "dual-proposed", "--enhancer", "specsub", "--report", s(&report), s(&input), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let y: StereoSignal<f64> = read_wav(&out).unwrap();
    assert_eq!(y.len(), 16_000);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["mode"], "dual-proposed");
    assert_eq!(r["latency_ms"], 40.0);
    assert!(r["rtf"].as_f64().unwrap() > 0.0);
    assert!(r["frames"].as_u64().unwrap() >= 100);
    for stage in ["analysis", "beamform", "enhance", "gain", "tracking", "synthesis"] {
        assert!(r["per_stage_us"].get(stage).is_some(), "missing stage {stage}");
    }
}

#[test]
fn enhance_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 1.0);
    let a = dir.path().join("a.wav");
    let b = dir.path().join("b.wav");
    for out in [&a, &b] {
        assert!(run(&["enhance", s(&input), s(out), "--report", s(&dir.path().join("r.json"))]).status.success());
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 0.5);
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"mode": "discrete", "enhancer": "passthrough", "lookahead_frames": 0}"#).unwrap();
    let report = dir.path().join("r.json");
    let out = dir.path().join("o.wav");
    let o = run(&["--config", s(&cfg), "enhance", "--mode", "dual-nsv", "--report", s(&report), s(&input), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["mode"], "dual-nsv");
    assert_eq!(r["enhancer"], "passthrough");
    assert_eq!(r["latency_ms"], 10.0);
}

#[test]
fn oracle_without_reference_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 0.3);
    let o = run(&["enhance", "--enhancer", "oracle", s(&input), s(&dir.path().join("o.wav"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("reference"));
}

#[test]
fn bad_wav_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.wav");
    std::fs::write(&bad, b"definitely not RIFF").unwrap();
    let o = run(&["enhance", s(&bad), s(&dir.path().join("o.wav"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
}

#[test]
fn evaluate_identical_files_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 1.0);
    let o = run(&["evaluate", "--output", s(&input), "--reference", s(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    assert_eq!(rows[0][col("ipd_error")].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][col("ild_error")].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn evaluate_missing_reference_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 0.3);
    let o = run(&["evaluate", "--output", s(&input), "--reference", s(&dir.path().join("nope.wav"))]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn evaluate_rejects_channel_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let input = stereo_input(dir.path(), "in.wav", 0.3);
    let mono = dir.path().join("mono.wav");
    write_mono_pcm16(&mono);
    let o = run(&["evaluate", "--output", s(&input), "--reference", s(&mono)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("channels"));
}

/// 16-bit mono WAV written byte by byte.
fn write_mono_pcm16(path: &Path) {
    let samples: Vec<i16> = (0..4800).map(|i| ((i as f64 * 0.05).sin() * 8000.0) as i16).collect();
    let data_len = (samples.len() * 2) as u32;
    let mut b = Vec::new();
    b.extend_from_slice(b"RIFF");
    b.extend_from_slice(&(36 + data_len).to_le_bytes());
    b.extend_from_slice(b"WAVEfmt ");
    b.extend_from_slice(&16u32.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&16_000u32.to_le_bytes());
    b.extend_from_slice(&32_000u32.to_le_bytes());
    b.extend_from_slice(&2u16.to_le_bytes());
    b.extend_from_slice(&16u16.to_le_bytes());
    b.extend_from_slice(b"data");
    b.extend_from_slice(&data_len.to_le_bytes());
    for v in samples {
        b.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, b).unwrap();
}

#[test]
fn simulate_then_evaluate_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    let o = run(&["simulate", s(&scenes), "--count", "4", "--seed", "20", "--overlap", "1.0,0.2", "--snr", "5", "--duration", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = scenes.join("manifest.txt");
    assert_eq!(std::fs::read_to_string(&manifest).unwrap().lines().count(), 4);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenes.join("scene_000/scene.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 20);
    assert_eq!(meta["sources"].as_array().unwrap().len(), 2);
    for f in ["mixture.wav", "clean.wav", "noise.wav", "source0.wav", "source1.wav"] {
        assert!(scenes.join("scene_001").join(f).exists(), "{f}");
    }

    let report = dir.path().join("metrics.json");
    let o = run(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--modes",
        "discrete,dual-proposed",
        "--enhancer",
        "oracle",
        "--report",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    let mean = |mode: &str| {
        let v: Vec<f64> = rows.iter().filter(|r| r["mode"] == mode).map(|r| r["ipd_error"].as_f64().unwrap()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean("dual-proposed") < mean("discrete"), "{} vs {}", mean("dual-proposed"), mean("discrete"));

    // same run, CSV, is deterministic
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    for p in [&csv_a, &csv_b] {
        let o = run(&["evaluate", "--manifest", s(&manifest), "--modes", "dual-nsv", "--enhancer", "specsub", "--report", s(p)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&csv_a).unwrap(), std::fs::read(&csv_b).unwrap());
}

#[test]
fn simulate_from_scene_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("scene.json");
    let spec = SceneSpec::single(3.0, 0.5, None, 0.5, 0);
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = run(&["simulate", s(&out), "--spec", s(&spec_path), "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("scene_000/scene.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["sources"][0]["delay"], 3.0);
    assert!(meta["snr_db"].is_null());
}

#[test]
fn bench_reports_every_mode() {
    let o = run(&["bench", "--duration", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reports: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports.len(), 5);
    let find = |mode: &str| reports.iter().find(|r| r["mode"] == mode).unwrap().clone();
    for r in &reports {
        let rtf = r["rtf"].as_f64().unwrap();
        assert!(rtf > 0.0 && rtf < 1.0, "{r}");
    }
    let enhance_us = |mode: &str| find(mode)["per_stage_us"]["enhance"].as_u64().unwrap();
    assert!(enhance_us("dual-proposed") > enhance_us("common-single-proposed"));
    assert!(find("dual-proposed")["rtf"].as_f64() > find("common-single-baseline")["rtf"].as_f64());
}
