//! End to end: a synthetic manifest is run through the mock pipeline in
//! parallel, scored against a synthetic tensor index, and rendered as a
//! grid and per-method summary. Pass a directory to keep the artifacts.

use std::sync::Arc;

use stylevar::backends::mock::MockServer;
use stylevar::backends::{BackendEndpoint, Backends, ServiceEndpoints};
use stylevar::dataset::{manifest_to_string, ExclusionMask, StyleId};
use stylevar::harness::{
    evaluate, render_grid, render_summary_markdown, EvalOptions, MetricReport, Provenance, ReportFormat,
};
use stylevar::pipeline::{run_log_to_string, FixedClock, Pipeline, PipelineConfig};
use stylevar::synthetic::{mock_fixtures_for, synthetic_manifest, write_synthetic_index, SyntheticIndexConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let keep = std::env::args().nth(1);
    let tmp = tempfile::tempdir()?;
    let dir = keep
        .as_deref()
        .map_or(tmp.path().to_path_buf(), std::path::PathBuf::from);
    std::fs::create_dir_all(&dir)?;

    let manifest = synthetic_manifest(24, &[StyleId::Photo, StyleId::InkPainting, StyleId::Anime]);
    let server = MockServer::start(mock_fixtures_for(&manifest))?;
    let backends = Backends::http(&ServiceEndpoints::single(BackendEndpoint::new(server.url())))?;
    let config = PipelineConfig::default();
    let pipeline = Pipeline::new(backends, config.clone())?.with_clock(Arc::new(FixedClock(0)));

    let targets = [StyleId::RealisticOil, StyleId::InkPainting, StyleId::Anime];
    let mask = ExclusionMask::benchmark_default();
    let runs = pipeline.run_batch(&manifest, &targets, &mask, 4)?;
    let retried = runs
        .iter()
        .filter(|r| r.content.as_ref().is_some_and(|c| c.attempts > 1))
        .count();
    println!("{} runs, {} needed a conditioned re-caption", runs.len(), retried);
    std::fs::write(dir.join("runs.jsonl"), run_log_to_string(&runs))?;
    let manifest_text = manifest_to_string(&manifest);
    std::fs::write(dir.join("manifest.json"), &manifest_text)?;

    let index_cfg = SyntheticIndexConfig {
        baselines: vec!["AdaIn".into(), "styTR".into()],
        ..SyntheticIndexConfig::default()
    };
    let index = write_synthetic_index(dir.join("tensors"), &runs, &index_cfg)?;
    let corpus = index.corpus_grams()?;
    let options = EvalOptions {
        baselines: index_cfg.baselines.clone(),
        mask,
        input_styles: Some(vec![StyleId::Photo, StyleId::InkPainting, StyleId::Anime]),
        target_styles: Some(targets.to_vec()),
        ..EvalOptions::default()
    };
    let grid = evaluate(&runs, &index, &corpus, &options)?;
    let config_text = serde_json::to_string(&config)?;
    let report = MetricReport::new(
        grid,
        Provenance::new(Some(manifest_text.as_bytes()), Some(config_text.as_bytes()), 0),
    );

    println!("\n{}", render_grid(&report.grid, ReportFormat::Markdown));
    println!("{}", render_summary_markdown(&report.summary()));
    std::fs::write(dir.join("grid.csv"), render_grid(&report.grid, ReportFormat::Csv))?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    if keep.is_some() {
        println!("artifacts in {}", dir.display());
    }
    Ok(())
}
