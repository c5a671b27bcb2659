//! Deterministic synthetic data: the benchmark-sized manifest, mock service
//! fixtures covering any manifest, and tensor indexes for evaluation demos.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::backends::mock::{FuseFixture, GenerateFixture, ImageFixture, MockFixtures};
use crate::backends::ObjectLocation;
use crate::dataset::{DatasetManifest, ImageRecord, StyleId};
use crate::pipeline::RunRecord;
use crate::tensor::{IndexEntry, Tensor, TensorError, TensorIndex, DEFAULT_METHOD};

/// Per-style image and subcategory counts of the full benchmark corpus.
pub const BENCHMARK_COUNTS: [(StyleId, usize, usize); 6] = [
    (StyleId::RealisticOil, 804, 3),
    (StyleId::Impression, 908, 3),
    (StyleId::Abstract, 965, 5),
    (StyleId::InkPainting, 1021, 0),
    (StyleId::ChineseFreehand, 940, 3),
    (StyleId::Anime, 1072, 3),
];

const SCENES: [(&str, &[(&str, &str)]); 7] = [
    (
        "a boat on a river near a bridge",
        &[("boat", "center"), ("bridge", "left")],
    ),
    (
        "a cat sleeping on a wooden chair",
        &[("cat", "center"), ("chair", "bottom")],
    ),
    (
        "a lighthouse on a rocky coast at dusk",
        &[("lighthouse", "right"), ("rocks", "bottom")],
    ),
    ("two horses grazing in a meadow", &[("horses", "center")]),
    ("a bowl of fruit on a table", &[("bowl", "center"), ("table", "bottom")]),
    ("an empty misty landscape", &[]),
    (
        "a woman holding an umbrella in the rain",
        &[("woman", "center"), ("umbrella", "top")],
    ),
];

/// Style descriptions the mock language model returns, keyed by keyword.
pub fn style_descriptions() -> BTreeMap<String, String> {
    let text = |s: StyleId| {
        match s {
        StyleId::RealisticOil => {
            "rich colours of the oil painting, filling the background with objects, visible impasto brushwork, warm natural light"
        }
        StyleId::Impression => "loose broken brushstrokes, shimmering outdoor light, soft edges and vivid complementary colours",
        StyleId::Abstract => "bold geometric shapes, flat saturated colour fields and no literal perspective",
        StyleId::InkPainting => "monochrome ink washes on rice paper, generous empty space, graded tones from deep black to mist",
        StyleId::ChineseFreehand => "swift expressive brush marks, light colour washes and a sense of spontaneous movement",
        StyleId::Anime => "clean line art, cel shading, bright flat colours and expressive stylised faces",
        StyleId::Photo => "natural lighting, photographic depth of field and realistic textures",
    }
    };
    StyleId::ALL
        .iter()
        .map(|s| (s.keyword().to_string(), text(*s).to_string()))
        .collect()
}

fn scene(i: usize) -> (&'static str, &'static [(&'static str, &'static str)]) {
    SCENES[i % SCENES.len()]
}

/// A 5710-record manifest with the benchmark's per-style counts and
/// declared totals. Ink painting records carry no subcategory.
pub fn benchmark_manifest() -> DatasetManifest {
    let mut records = Vec::new();
    let mut declared = BTreeMap::new();
    for (style, count, subcategories) in BENCHMARK_COUNTS {
        declared.insert(style, count);
        for k in 0..count {
            records.push(ImageRecord {
                id: format!("{style}-{:04}", k + 1),
                path: format!("{style}/{:04}.png", k + 1),
                style,
                subcategory: (subcategories > 0).then(|| format!("group-{}", k % subcategories + 1)),
                annotation: scene(k).0.to_string(),
            });
        }
    }
    DatasetManifest::new(records, Some(declared)).expect("benchmark manifest is valid")
}

/// `n` records cycling through `styles` in order.
pub fn synthetic_manifest(n: usize, styles: &[StyleId]) -> DatasetManifest {
    assert!(!styles.is_empty(), "need at least one style");
    let records = (0..n)
        .map(|k| {
            let style = styles[k % styles.len()];
            ImageRecord {
                id: format!("img-{:04}", k + 1),
                path: format!("images/{:04}.png", k + 1),
                style,
                subcategory: None,
                annotation: scene(k).0.to_string(),
            }
        })
        .collect();
    DatasetManifest::new(records, None).expect("synthetic manifest is valid")
}

/// Mock fixtures answering for every record of `manifest`. The scene is
/// picked from the annotation when it matches a known one. Every fifth
/// image has a weak first object (score 0.3) that only a conditioned
/// caption lifts above the verification threshold.
pub fn mock_fixtures_for(manifest: &DatasetManifest) -> MockFixtures {
    let mut images = BTreeMap::new();
    for (k, record) in manifest.records.iter().enumerate() {
        let objects = SCENES
            .iter()
            .find(|(caption, _)| *caption == record.annotation)
            .map_or(scene(k).1, |(_, objects)| *objects);
        let conditional = format!("{}, every object clearly in view", record.annotation);
        let weak = k % 5 == 4 && !objects.is_empty();
        let scores: BTreeMap<String, f64> = objects
            .iter()
            .enumerate()
            .map(|(j, (name, _))| {
                (
                    name.to_string(),
                    if weak && j == 0 { 0.3 } else { [0.8, 0.85, 0.9][j % 3] },
                )
            })
            .collect();
        let conditional_scores = if weak {
            objects.iter().map(|(name, _)| (name.to_string(), 0.75)).collect()
        } else {
            BTreeMap::new()
        };
        images.insert(
            record.path.clone(),
            ImageFixture {
                caption: Some(record.annotation.clone()),
                conditional_caption: Some(conditional),
                objects: objects.iter().map(|(n, p)| ObjectLocation::new(*n, *p)).collect(),
                scores,
                conditional_scores,
                default_score: 0.0,
                raw: BTreeMap::new(),
            },
        );
    }
    MockFixtures {
        images,
        styles: style_descriptions(),
        fuse: Some(FuseFixture::default()),
        generate: Some(GenerateFixture::default()),
        ..Default::default()
    }
}

/// Shapes and seed of a synthetic tensor index.
#[derive(Debug, Clone)]
pub struct SyntheticIndexConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub embed_dim: usize,
    pub corpus_size: usize,
    pub reference_size: usize,
    pub seed: u64,
    /// Extra methods to emit entries for, alongside the run records' own.
    pub baselines: Vec<String>,
}

impl Default for SyntheticIndexConfig {
    fn default() -> Self {
        SyntheticIndexConfig {
            channels: 4,
            height: 4,
            width: 4,
            embed_dim: 8,
            corpus_size: 4,
            reference_size: 16,
            seed: 0,
            baselines: Vec::new(),
        }
    }
}

fn rng_for(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    let digest = h.finalize();
    ChaCha8Rng::from_seed(digest.into())
}

fn noisy(rng: &mut ChaCha8Rng, base: &[f64], scale: f64) -> Vec<f64> {
    base.iter().map(|b| b + scale * rng.random_range(-1.0..1.0)).collect()
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Writes tensors for every successful run (and each baseline method)
/// under `dir`, plus per-target style text, reference sets and Gram
/// corpora, then saves `dir/index.json`.
pub fn write_synthetic_index(
    dir: impl AsRef<Path>,
    runs: &[RunRecord],
    cfg: &SyntheticIndexConfig,
) -> Result<TensorIndex, TensorError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| TensorError::Io { path, source }
    };
    for sub in ["styles", "items"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(io(&dir.join(sub)))?;
    }
    let feat_len = cfg.channels * cfg.height * cfg.width;
    let feat_dims = vec![cfg.channels, cfg.height, cfg.width];
    let put = |rel: String, dims: Vec<usize>, values: &[f64]| -> Result<String, TensorError> {
        Tensor::from_f64(dims, values)?.write(dir.join(&rel))?;
        Ok(rel)
    };

    let mut targets: Vec<StyleId> = runs.iter().filter(|r| r.is_ok()).map(|r| r.target_style).collect();
    targets.sort();
    targets.dedup();

    let mut index = TensorIndex::default();
    let mut style_base = BTreeMap::new();
    for &t in &targets {
        let mut rng = rng_for(cfg.seed, &["style", t.label()]);
        let text = random(&mut rng, cfg.embed_dim);
        let features = random(&mut rng, feat_len);
        let reference: Vec<f64> = (0..cfg.reference_size)
            .flat_map(|_| noisy(&mut rng, &text, 0.5))
            .collect();
        index
            .style_text
            .insert(t, put(format!("styles/{t}-text.tns"), vec![cfg.embed_dim], &text)?);
        index.reference.insert(
            t,
            put(
                format!("styles/{t}-reference.tns"),
                vec![cfg.reference_size, cfg.embed_dim],
                &reference,
            )?,
        );
        let corpus = (0..cfg.corpus_size)
            .map(|k| {
                put(
                    format!("styles/{t}-corpus-{k}.tns"),
                    feat_dims.clone(),
                    &noisy(&mut rng, &features, 0.3),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        index.style_corpus.insert(t, corpus);
        style_base.insert(t, (text, features));
    }

    let mut methods = vec![DEFAULT_METHOD.to_string()];
    methods.extend(cfg.baselines.iter().cloned());
    for run in runs.iter().filter(|r| r.is_ok()) {
        let (text, features) = &style_base[&run.target_style];
        let mut src_rng = rng_for(cfg.seed, &["source", &run.record_id]);
        let source = random(&mut src_rng, cfg.embed_dim);
        for (mi, method) in methods.iter().enumerate() {
            // baselines drift further from both the source and the style
            let drift = 0.2 + 0.3 * mi as f64;
            let mut rng = rng_for(cfg.seed, &["item", &run.record_id, run.target_style.label(), method]);
            let stem = format!(
                "items/{}-{}-{}",
                file_stem(&run.record_id),
                run.target_style,
                file_stem(method)
            );
            index.entries.push(IndexEntry {
                record_id: run.record_id.clone(),
                input_style: run.input_style,
                target_style: run.target_style,
                method: method.clone(),
                features: put(
                    format!("{stem}-features.tns"),
                    feat_dims.clone(),
                    &noisy(&mut rng, features, drift),
                )?,
                source_text: put(format!("{stem}-source.tns"), vec![cfg.embed_dim], &source)?,
                result_text: put(
                    format!("{stem}-result.tns"),
                    vec![cfg.embed_dim],
                    &noisy(&mut rng, &source, drift),
                )?,
                image: put(
                    format!("{stem}-image.tns"),
                    vec![cfg.embed_dim],
                    &noisy(&mut rng, text, drift),
                )?,
            });
        }
    }
    index.save(dir.join("index.json"))?;
    Ok(index.with_base_dir(dir))
}
