use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::grid::{BenchGrid, CellKey, MetricCell};
use super::HarnessError;
use crate::dataset::{ExclusionMask, StyleId};
use crate::metrics::{self, EmbeddingSet, EmbeddingVec, GaussianStats, GramMatrix, MetricsError};
use crate::pipeline::RunRecord;
use crate::tensor::{IndexEntry, TensorIndex, DEFAULT_METHOD};

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Method name the run records are scored under.
    pub method: String,
    /// Extra methods scored straight from index entries (no run records).
    pub baselines: Vec<String>,
    pub mask: ExclusionMask,
    /// Row order; derived from the scored items when `None`.
    pub input_styles: Option<Vec<StyleId>>,
    /// Column order; derived from the scored items when `None`.
    pub target_styles: Option<Vec<StyleId>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            method: DEFAULT_METHOD.to_string(),
            baselines: Vec::new(),
            mask: ExclusionMask::default(),
            input_styles: None,
            target_styles: None,
        }
    }
}

struct Item<'a> {
    key: CellKey,
    entry: &'a IndexEntry,
}

struct ItemScore {
    sml: f64,
    cms: f64,
    clips: f64,
    image: EmbeddingVec,
}

fn metric_err(item: &str) -> impl Fn(MetricsError) -> HarnessError + '_ {
    move |source| HarnessError::Metric {
        item: item.to_string(),
        source,
    }
}

/// Scores successful runs (and any baseline entries) into a grid.
///
/// Per item: SML of the result Gram against the target style's corpus,
/// CMS between source and result caption embeddings, CLIPS between the
/// result image embedding and the target style text. Cells hold the item
/// means; FID compares a cell's image embeddings (two or more) with the
/// target style's reference set when the index has one.
pub fn evaluate(
    runs: &[RunRecord],
    index: &TensorIndex,
    corpus_grams: &BTreeMap<StyleId, Vec<GramMatrix>>,
    options: &EvalOptions,
) -> Result<BenchGrid, HarnessError> {
    let in_scope = |i: StyleId, t: StyleId| {
        !options.mask.is_excluded(i, t)
            && options.input_styles.as_ref().is_none_or(|s| s.contains(&i))
            && options.target_styles.as_ref().is_none_or(|s| s.contains(&t))
    };

    let mut missing = Vec::new();
    let mut items = Vec::new();
    for run in runs
        .iter()
        .filter(|r| r.is_ok() && in_scope(r.input_style, r.target_style))
    {
        match index.entry(&run.record_id, run.target_style, &options.method) {
            Some(entry) => items.push(Item {
                key: (run.input_style, run.target_style, options.method.clone()),
                entry,
            }),
            None => missing.push(format!(
                "index entry for {} -> {} ({})",
                run.record_id, run.target_style, options.method
            )),
        }
    }
    for entry in &index.entries {
        if options.baselines.contains(&entry.method) && in_scope(entry.input_style, entry.target_style) {
            items.push(Item {
                key: (entry.input_style, entry.target_style, entry.method.clone()),
                entry,
            });
        }
    }
    items.sort_by(|a, b| a.key.cmp(&b.key).then(a.entry.record_id.cmp(&b.entry.record_id)));

    let targets_used: BTreeSet<StyleId> = items.iter().map(|it| it.key.1).collect();
    for t in &targets_used {
        if !index.style_text.contains_key(t) {
            missing.push(format!("style text embedding for {t}"));
        }
        if corpus_grams.get(t).is_none_or(Vec::is_empty) {
            missing.push(format!("style corpus Grams for {t}"));
        }
    }
    let mut files: Vec<&str> = items
        .iter()
        .flat_map(|it| {
            let e = it.entry;
            [
                e.features.as_str(),
                e.source_text.as_str(),
                e.result_text.as_str(),
                e.image.as_str(),
            ]
        })
        .chain(
            targets_used
                .iter()
                .filter_map(|t| index.style_text.get(t).map(String::as_str)),
        )
        .chain(
            targets_used
                .iter()
                .filter_map(|t| index.reference.get(t).map(String::as_str)),
        )
        .collect();
    files.sort_unstable();
    files.dedup();
    for f in files {
        if !index.resolve(f).is_file() {
            missing.push(format!("tensor file {}", index.resolve(f).display()));
        }
    }
    if !missing.is_empty() {
        return Err(HarnessError::MissingTensors(missing));
    }

    let style_text: BTreeMap<StyleId, EmbeddingVec> = targets_used
        .iter()
        .map(|t| Ok((*t, index.read(&index.style_text[t])?.to_embedding()?)))
        .collect::<Result<_, HarnessError>>()?;
    let reference: BTreeMap<StyleId, GaussianStats> = targets_used
        .iter()
        .filter_map(|t| index.reference.get(t).map(|f| (*t, f)))
        .map(|(t, f)| {
            let set = index.read(f)?.to_embedding_set()?;
            let stats = metrics::gaussian_stats(&set).map_err(metric_err(&format!("reference set for {t}")))?;
            Ok((t, stats))
        })
        .collect::<Result<_, HarnessError>>()?;

    let scores: Vec<ItemScore> = items
        .par_iter()
        .map(|it| {
            let (_, target, method) = &it.key;
            let e = it.entry;
            let label = format!("{} -> {} ({method})", e.record_id, target);
            let gram = index.read(&e.features)?.to_gram()?;
            let source = index.read(&e.source_text)?.to_embedding()?;
            let result = index.read(&e.result_text)?.to_embedding()?;
            let image = index.read(&e.image)?.to_embedding()?;
            Ok(ItemScore {
                sml: metrics::sml(&gram, &corpus_grams[target]).map_err(metric_err(&label))?,
                cms: metrics::cms(&source, &result).map_err(metric_err(&label))?,
                clips: metrics::clips(&image, &style_text[target]).map_err(metric_err(&label))?,
                image,
            })
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut groups: BTreeMap<&CellKey, Vec<&ItemScore>> = BTreeMap::new();
    for (it, score) in items.iter().zip(&scores) {
        groups.entry(&it.key).or_default().push(score);
    }
    let cells: Vec<(CellKey, MetricCell)> = groups
        .into_par_iter()
        .map(|(key, group)| {
            let n = group.len() as f64;
            let mean = |f: fn(&ItemScore) -> f64| group.iter().map(|s| f(s)).sum::<f64>() / n;
            let fid = match reference.get(&key.1) {
                Some(r) if group.len() >= 2 => {
                    let label = format!("{} -> {} ({})", key.0, key.1, key.2);
                    let images: Vec<EmbeddingVec> = group.iter().map(|s| s.image.clone()).collect();
                    let set = EmbeddingSet::from_rows(&images).map_err(metric_err(&label))?;
                    let stats = metrics::gaussian_stats(&set).map_err(metric_err(&label))?;
                    Some(metrics::fid(&stats, r).map_err(metric_err(&label))?)
                }
                _ => None,
            };
            let cell = MetricCell {
                sml: Some(mean(|s| s.sml)),
                cms: Some(mean(|s| s.cms)),
                fid,
                clips: Some(mean(|s| s.clips)),
                excluded: false,
            };
            Ok((key.clone(), cell))
        })
        .collect::<Result<_, HarnessError>>()?;

    let inputs = options.input_styles.clone().unwrap_or_else(|| {
        items
            .iter()
            .map(|it| it.key.0)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    });
    let targets = options
        .target_styles
        .clone()
        .unwrap_or_else(|| targets_used.iter().copied().collect());
    let mut methods = vec![options.method.clone()];
    methods.extend(options.baselines.iter().filter(|b| **b != options.method).cloned());

    let mut grid = BenchGrid::new(inputs, targets, methods, &options.mask);
    for ((i, t, m), cell) in cells {
        grid.set_cell(i, t, &m, cell)?;
    }
    Ok(grid)
}
