mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use proptest::prelude::*;
use stylevar::backends::mock::MockTransport;
use stylevar::backends::Backends;
use stylevar::dataset::{ExclusionMask, StyleId};
use stylevar::harness::{
    evaluate, parse_grid, render_grid, BenchGrid, EvalOptions, HarnessError, Metric, MetricCell, ReportFormat,
};
use stylevar::pipeline::{Pipeline, PipelineConfig, RunRecord};
use stylevar::synthetic::{mock_fixtures_for, synthetic_manifest, write_synthetic_index, SyntheticIndexConfig};
use stylevar::tensor::TensorIndex;

fn runs(n: usize, styles: &[StyleId], targets: &[StyleId]) -> Vec<RunRecord> {
    let manifest = synthetic_manifest(n, styles);
    let p = Pipeline::new(
        Backends::uniform(Arc::new(MockTransport::new(mock_fixtures_for(&manifest)))),
        PipelineConfig::default(),
    )
    .unwrap();
    p.run_batch(&manifest, targets, &ExclusionMask::default(), 2).unwrap()
}

fn load(index: &TensorIndex, rel: &str) -> Vec<f64> {
    index.read(rel).unwrap().data().iter().map(|v| *v as f64).collect()
}

fn oracle_gram(index: &TensorIndex, rel: &str) -> common::Mat {
    let t = index.read(rel).unwrap();
    let d = t.dims().to_vec();
    common::gram(
        d[0],
        d[1],
        d[2],
        &t.data().iter().map(|v| *v as f64).collect::<Vec<_>>(),
    )
}

struct Fixture {
    _dir: tempfile::TempDir,
    runs: Vec<RunRecord>,
    index: TensorIndex,
}

fn fixture(cfg: &SyntheticIndexConfig) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let runs = runs(
        12,
        &[StyleId::Photo, StyleId::InkPainting],
        &[StyleId::Anime, StyleId::Impression],
    );
    let index = write_synthetic_index(dir.path(), &runs, cfg).unwrap();
    Fixture { _dir: dir, runs, index }
}

#[test]
fn evaluate_matches_loop_oracle() {
    let cfg = SyntheticIndexConfig {
        baselines: vec!["AdaIn".into()],
        ..Default::default()
    };
    let fx = fixture(&cfg);
    let index = &fx.index;
    let options = EvalOptions {
        baselines: vec!["AdaIn".into()],
        ..Default::default()
    };
    let grid = evaluate(&fx.runs, index, &index.corpus_grams().unwrap(), &options).unwrap();
    assert_eq!(grid.input_styles(), &[StyleId::InkPainting, StyleId::Photo]);
    assert_eq!(grid.target_styles(), &[StyleId::Impression, StyleId::Anime]);
    assert_eq!(grid.methods(), &["Ours".to_string(), "AdaIn".to_string()]);

    let corpus: BTreeMap<StyleId, Vec<common::Mat>> = index
        .style_corpus
        .iter()
        .map(|(s, files)| (*s, files.iter().map(|f| oracle_gram(index, f)).collect()))
        .collect();
    let mut checked = 0;
    for ((input, target, method), cell) in grid.cells() {
        let entries: Vec<_> = index
            .entries
            .iter()
            .filter(|e| e.input_style == *input && e.target_style == *target && e.method == *method)
            .collect();
        assert_eq!(entries.len(), 6);
        let n = entries.len() as f64;
        let text = load(index, &index.style_text[target]);
        let mut sml = 0.0;
        let mut cms = 0.0;
        let mut clips = 0.0;
        let mut images = Vec::new();
        for e in &entries {
            sml += common::sml(&oracle_gram(index, &e.features), &corpus[target]) / n;
            cms += common::cosine(&load(index, &e.source_text), &load(index, &e.result_text)) / n;
            let image = load(index, &e.image);
            clips += 100.0 * common::cosine(&image, &text).max(0.0) / n;
            images.push(image);
        }
        let reference = index.read(&index.reference[target]).unwrap();
        let d = reference.dims()[1];
        let ref_rows = common::from_flat(reference.dims()[0], d, &load(index, &index.reference[target]));
        let (ma, ca) = common::mean_cov(&images);
        let (mb, cb) = common::mean_cov(&ref_rows);
        let fid = common::fid_psd(&ma, &ca, &mb, &cb);

        assert!((cell.sml.unwrap() - sml).abs() < 1e-6 * sml.max(1.0));
        assert!((cell.cms.unwrap() - cms).abs() < 1e-6);
        assert!((cell.clips.unwrap() - clips).abs() < 1e-6 * clips.max(1.0));
        assert!(
            (cell.fid.unwrap() - fid).abs() < 1e-6 * fid.max(1.0),
            "{} vs {fid}",
            cell.fid.unwrap()
        );
        checked += 1;
    }
    assert_eq!(checked, 8);
}

fn copy(index: &TensorIndex, from: &str, to: &str) {
    std::fs::copy(index.resolve(from), index.resolve(to)).unwrap();
}

#[test]
fn degenerate_items_hit_metric_bounds() {
    let cfg = SyntheticIndexConfig {
        corpus_size: 1,
        ..Default::default()
    };
    let fx = fixture(&cfg);
    let index = &fx.index;
    for e in &index.entries {
        copy(index, &index.style_corpus[&e.target_style][0], &e.features);
        copy(index, &e.source_text, &e.result_text);
    }
    let grid = evaluate(&fx.runs, index, &index.corpus_grams().unwrap(), &EvalOptions::default()).unwrap();
    for (_, cell) in grid.cells() {
        assert_eq!(cell.sml, Some(0.0));
        assert!((cell.cms.unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_item_cells_have_no_fid() {
    let dir = tempfile::tempdir().unwrap();
    let runs = runs(1, &[StyleId::Photo], &[StyleId::Anime]);
    let index = write_synthetic_index(dir.path(), &runs, &SyntheticIndexConfig::default()).unwrap();
    let grid = evaluate(&runs, &index, &index.corpus_grams().unwrap(), &EvalOptions::default()).unwrap();
    let cell = grid.cell(StyleId::Photo, StyleId::Anime, "Ours").unwrap();
    assert!(cell.sml.is_some() && cell.fid.is_none());
}

#[test]
fn missing_tensors_are_listed_together() {
    let fx = fixture(&SyntheticIndexConfig::default());
    let index = &fx.index;
    let victims = [index.entries[0].image.clone(), index.entries[5].features.clone()];
    for v in &victims {
        std::fs::remove_file(index.resolve(v)).unwrap();
    }
    let mut grams = index.corpus_grams().unwrap();
    grams.remove(&StyleId::Anime);
    let mut trimmed = index.clone();
    trimmed.entries.retain(|e| e.record_id != "img-0002");
    match evaluate(&fx.runs, &trimmed, &grams, &EvalOptions::default()) {
        Err(HarnessError::MissingTensors(list)) => {
            for v in &victims {
                let name = Path::new(v).file_name().unwrap().to_str().unwrap();
                if trimmed.entries.iter().any(|e| e.image == *v || e.features == *v) {
                    assert!(list.iter().any(|m| m.contains(name)), "{name} not in {list:?}");
                }
            }
            assert!(list.iter().any(|m| m.contains("style corpus Grams for anime")));
            assert_eq!(list.iter().filter(|m| m.contains("img-0002")).count(), 2);
            let text = HarnessError::MissingTensors(list.clone()).to_string();
            assert!(list.iter().all(|m| text.contains(m.as_str())));
        }
        other => panic!("expected missing tensors, got {other:?}"),
    }
}

#[test]
fn evaluation_is_deterministic_and_respects_mask() {
    let fx = fixture(&SyntheticIndexConfig::default());
    let grams = fx.index.corpus_grams().unwrap();
    let a = evaluate(&fx.runs, &fx.index, &grams, &EvalOptions::default()).unwrap();
    let b = evaluate(&fx.runs, &fx.index, &grams, &EvalOptions::default()).unwrap();
    assert_eq!(render_grid(&a, ReportFormat::Json), render_grid(&b, ReportFormat::Json));

    let options = EvalOptions {
        mask: ExclusionMask::default().exclude_pair(StyleId::Photo, StyleId::Anime),
        ..Default::default()
    };
    let masked = evaluate(&fx.runs, &fx.index, &grams, &options).unwrap();
    assert!(masked.cell(StyleId::Photo, StyleId::Anime, "Ours").unwrap().excluded);
    assert_eq!(
        masked.cell(StyleId::Photo, StyleId::Impression, "Ours"),
        a.cell(StyleId::Photo, StyleId::Impression, "Ours")
    );
}

fn brute_mean(grid: &BenchGrid, method: &str, metric: Metric) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0;
    for i in grid.input_styles() {
        for t in grid.target_styles() {
            let c = grid.cell(*i, *t, method).unwrap();
            if let (false, Some(v)) = (c.excluded, c.get(metric)) {
                sum += v;
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn value() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![1 => Just(None), 4 => (-1.0e6..1.0e6f64).prop_map(Some)]
}

fn grid_strategy() -> impl Strategy<Value = BenchGrid> {
    let styles = proptest::sample::subsequence(StyleId::ALL.to_vec(), 1..=4);
    let targets = proptest::sample::subsequence(StyleId::ALL.to_vec(), 0..=4);
    let methods = proptest::sample::subsequence(vec!["Ours", "AdaIn", "styTR", "Text Inv,ersion"], 1..=3);
    (styles, targets, methods).prop_flat_map(|(inputs, targets, methods)| {
        let n = inputs.len() * targets.len() * methods.len();
        let cells = proptest::collection::vec((value(), value(), value(), value(), proptest::bool::weighted(0.2)), n);
        (Just(inputs), Just(targets), Just(methods), cells).prop_map(|(inputs, targets, methods, cells)| {
            let methods: Vec<String> = methods.into_iter().map(String::from).collect();
            let mut grid = BenchGrid::new(
                inputs.clone(),
                targets.clone(),
                methods.clone(),
                &ExclusionMask::default(),
            );
            let mut it = cells.into_iter();
            for i in &inputs {
                for t in &targets {
                    for m in &methods {
                        let (sml, cms, fid, clips, drop) = it.next().unwrap();
                        let cell = MetricCell {
                            sml,
                            cms,
                            fid,
                            clips,
                            excluded: false,
                        };
                        if !drop && !grid.cell(*i, *t, m).unwrap().excluded {
                            grid.set_cell(*i, *t, m, cell).unwrap();
                        }
                    }
                }
            }
            grid
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reports_round_trip(grid in grid_strategy()) {
        for format in [ReportFormat::Csv, ReportFormat::Json] {
            let text = render_grid(&grid, format);
            let back = parse_grid(&text, format).unwrap();
            prop_assert_eq!(&back, &grid);
            prop_assert_eq!(render_grid(&back, format), text);
        }
    }

    #[test]
    fn aggregates_are_cell_means(grid in grid_strategy()) {
        for m in grid.methods() {
            let agg = grid.aggregate(m);
            for metric in Metric::ALL {
                match (agg.get(metric), brute_mean(&grid, m, metric)) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0)),
                    (a, b) => prop_assert_eq!(a, b),
                }
            }
        }
    }
}
