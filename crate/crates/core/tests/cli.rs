use std::path::Path;
use std::process::Command;

use stylevar::dataset::{save_manifest, StyleId};
use stylevar::harness::cli;
use stylevar::harness::MetricReport;
use stylevar::pipeline::read_run_log;
use stylevar::synthetic::{benchmark_manifest, synthetic_manifest, write_synthetic_index, SyntheticIndexConfig};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["stylevar"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn ingest_reports_per_style_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    save_manifest(&benchmark_manifest(), &path).unwrap();
    let (code, out, _) = call(&["ingest", "--manifest", p(&path)]);
    assert_eq!(code, 0);
    for line in [
        "realistic-oil\t804",
        "impression\t908",
        "abstract\t965",
        "ink-painting\t1021",
        "chinese-freehand\t940",
        "anime\t1072",
        "total\t5710",
    ] {
        assert!(out.lines().any(|l| l == line), "{line} missing from\n{out}");
    }
}

#[test]
fn ingest_rejects_bad_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"records\": [").unwrap();
    let (code, _, err) = call(&["ingest", "--manifest", p(&path)]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
    let (code, _, _) = call(&["ingest", "--manifest", p(&dir.path().join("absent.json"))]);
    assert_eq!(code, 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(call(&[]).0, 1);
    assert_eq!(call(&["frobnicate"]).0, 1);
    assert_eq!(call(&["run", "--manifest", "m.json"]).0, 1);
    assert_eq!(call(&["report", "--reference", "summary", "--format", "xml"]).0, 1);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["ingest", "run", "eval", "report", "simulate"] {
        assert!(out.contains(sub));
    }
}

#[test]
fn mock_run_is_reproducible_across_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    save_manifest(
        &synthetic_manifest(16, &[StyleId::Photo, StyleId::InkPainting]),
        &manifest,
    )
    .unwrap();
    let mut logs = Vec::new();
    for par in ["1", "4"] {
        let out = dir.path().join(format!("runs-{par}.jsonl"));
        let (code, _, err) = call(&[
            "run",
            "--manifest",
            p(&manifest),
            "--targets",
            "anime,impression",
            "--mock",
            "--parallelism",
            par,
            "--frozen-clock",
            "--out",
            p(&out),
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(err.contains("runs: 32 ok, 0 failed"), "{err}");
        logs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn run_eval_report_chain() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    save_manifest(&synthetic_manifest(8, &[StyleId::Photo]), &manifest).unwrap();
    let runs_path = dir.path().join("runs.jsonl");
    let (code, _, err) = call(&[
        "run",
        "--manifest",
        p(&manifest),
        "--targets",
        "anime",
        "--mock",
        "--frozen-clock",
        "--out",
        p(&runs_path),
    ]);
    assert_eq!(code, 0, "{err}");
    let runs = read_run_log(&runs_path).unwrap();
    let tensors = dir.path().join("tensors");
    let cfg = SyntheticIndexConfig {
        baselines: vec!["AdaIn".into()],
        ..Default::default()
    };
    write_synthetic_index(&tensors, &runs, &cfg).unwrap();

    let report_path = dir.path().join("report.json");
    let csv_path = dir.path().join("grid.csv");
    let index = tensors.join("index.json");
    let eval_args = [
        "eval",
        "--runs",
        p(&runs_path),
        "--index",
        p(&index),
        "--baselines",
        "AdaIn",
        "--manifest",
        p(&manifest),
        "--frozen-clock",
        "--out",
        p(&report_path),
        "--csv",
        p(&csv_path),
    ];
    let (code, _, err) = call(&eval_args);
    assert_eq!(code, 0, "{err}");
    let report = MetricReport::from_json(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(report.provenance.manifest_sha256.is_some());
    assert_eq!(report.provenance.generated_ms, 0);
    let first = std::fs::read(&report_path).unwrap();
    assert_eq!(call(&eval_args).0, 0);
    assert_eq!(std::fs::read(&report_path).unwrap(), first);

    let (code, out, _) = call(&["report", "--grid", p(&report_path), "--summary"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("method,sml,cms,fid,clips\nOurs,"));
    assert!(out.contains("\nAdaIn,"));
    let (code, from_csv, _) = call(&["report", "--grid", p(&csv_path)]);
    assert_eq!(code, 0);
    assert_eq!(from_csv, std::fs::read_to_string(&csv_path).unwrap());
    let (code, md, _) = call(&["report", "--grid", p(&csv_path), "--format", "markdown"]);
    assert_eq!(code, 0);
    assert!(md.contains("| method |"));

    // a deleted tensor is a validation failure naming the file
    let entry = &report.grid; // keep the report alive for clarity
    assert!(!entry.methods().is_empty());
    let victim = std::fs::read_dir(tensors.join("items"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    std::fs::remove_file(&victim).unwrap();
    let (code, _, err) = call(&eval_args);
    assert_eq!(code, 1);
    assert!(err.contains(victim.file_name().unwrap().to_str().unwrap()), "{err}");
}

#[test]
fn reference_tables_render() {
    let (code, out, _) = call(&["report", "--reference", "summary"]);
    assert_eq!(code, 0);
    assert!(out.ends_with("Ours,6.36,0.57,17.03,27.42\n"));
    let (code, out, _) = call(&["report", "--reference", "image-driven"]);
    assert_eq!(code, 0);
    assert!(out.contains("\nink-painting,Ours,6.56,0.813,14.48,24.37,5.01,0.315,18.35,24.11,-,-,-,-,"));
}

#[test]
fn simulate_gate_reports_divergence() {
    let (code, out, _) = call(&["simulate", "gate", "--steps", "50", "--gate", "30", "--seed", "7"]);
    assert_eq!(code, 0);
    assert!(out.contains("first divergence step: 31"), "{out}");
    let (code, out, _) = call(&["simulate", "gate", "--steps", "10", "--gate", "10"]);
    assert_eq!(code, 0);
    assert!(out.contains("first divergence step: none"), "{out}");
    assert_eq!(call(&["simulate", "gate", "--steps", "10", "--gate", "11"]).0, 1);
    let (code, out, _) = call(&[
        "simulate",
        "attention",
        "--height",
        "4",
        "--width",
        "4",
        "--window",
        "2",
    ]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(
        call(&[
            "simulate",
            "attention",
            "--height",
            "5",
            "--width",
            "4",
            "--window",
            "2"
        ])
        .0,
        1
    );
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_stylevar");
    let ok = Command::new(bin)
        .args(["report", "--reference", "summary"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("method,sml,cms,fid,clips\n"));
    let bad = Command::new(bin)
        .args(["ingest", "--manifest", "/nonexistent/m.json"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
