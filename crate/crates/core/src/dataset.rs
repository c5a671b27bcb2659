//! Benchmark manifests: style labels, image records, exclusion masks and
//! pair selection for the style-transfer grid.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown style label {0:?}")]
    UnknownStyle(String),
    #[error("failed to read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record at index {0} has an empty id")]
    EmptyId(usize),
    #[error("record {0:?} has an empty annotation")]
    EmptyAnnotation(String),
    #[error("declared count for {style} is {declared} but manifest holds {actual} records")]
    CountMismatch {
        style: StyleId,
        declared: usize,
        actual: usize,
    },
}

/// The closed set of benchmark styles.
///
/// Ordering follows declaration order and is used for every sorted output
/// (pair lists, run logs, report columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StyleId {
    RealisticOil,
    Impression,
    Abstract,
    InkPainting,
    ChineseFreehand,
    Anime,
    Photo,
}

impl StyleId {
    pub const ALL: [StyleId; 7] = [
        StyleId::RealisticOil,
        StyleId::Impression,
        StyleId::Abstract,
        StyleId::InkPainting,
        StyleId::ChineseFreehand,
        StyleId::Anime,
        StyleId::Photo,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StyleId::RealisticOil => "realistic-oil",
            StyleId::Impression => "impression",
            StyleId::Abstract => "abstract",
            StyleId::InkPainting => "ink-painting",
            StyleId::ChineseFreehand => "chinese-freehand",
            StyleId::Anime => "anime",
            StyleId::Photo => "photo",
        }
    }

    /// Natural-language keyword handed to the style elaboration stage.
    pub fn keyword(self) -> &'static str {
        match self {
            StyleId::RealisticOil => "realistic oil painting",
            StyleId::Impression => "impressionist oil painting",
            StyleId::Abstract => "abstract painting",
            StyleId::InkPainting => "Chinese ink painting",
            StyleId::ChineseFreehand => "Chinese freehand painting",
            StyleId::Anime => "anime",
            StyleId::Photo => "real photograph",
        }
    }
}

impl fmt::Display for StyleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StyleId {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StyleId::ALL
            .into_iter()
            .find(|style| style.label() == s)
            .ok_or_else(|| DatasetError::UnknownStyle(s.to_string()))
    }
}

impl TryFrom<String> for StyleId {
    type Error = DatasetError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<StyleId> for String {
    fn from(style: StyleId) -> Self {
        style.label().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    /// Relative path or URL of the image. Never opened here.
    pub path: String,
    pub style: StyleId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcategory: Option<String>,
    pub annotation: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<ImageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_counts: Option<BTreeMap<StyleId, usize>>,
}

impl DatasetManifest {
    /// Builds a manifest and checks every invariant.
    pub fn new(
        records: Vec<ImageRecord>,
        declared_counts: Option<BTreeMap<StyleId, usize>>,
    ) -> Result<Self, DatasetError> {
        let manifest = DatasetManifest {
            records,
            declared_counts,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for (idx, record) in self.records.iter().enumerate() {
            if record.id.is_empty() {
                return Err(DatasetError::EmptyId(idx));
            }
            if !seen.insert(record.id.as_str()) {
                return Err(DatasetError::DuplicateId(record.id.clone()));
            }
            if record.annotation.trim().is_empty() {
                return Err(DatasetError::EmptyAnnotation(record.id.clone()));
            }
        }
        if let Some(declared) = &self.declared_counts {
            let actual = style_stats(self);
            for style in StyleId::ALL {
                let want = declared.get(&style).copied().unwrap_or(0);
                let got = actual.get(&style).copied().unwrap_or(0);
                if want != got {
                    return Err(DatasetError::CountMismatch {
                        style,
                        declared: want,
                        actual: got,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Styles present in the records, in canonical order.
    pub fn styles(&self) -> Vec<StyleId> {
        let set: BTreeSet<StyleId> = self.records.iter().map(|r| r.style).collect();
        set.into_iter().collect()
    }
}

pub fn parse_manifest(text: &str) -> Result<DatasetManifest, DatasetError> {
    let manifest: DatasetManifest = serde_json::from_str(text)?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text)
}

pub fn manifest_to_string(manifest: &DatasetManifest) -> String {
    serde_json::to_string_pretty(manifest).expect("manifest serialization is infallible")
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    std::fs::write(path, manifest_to_string(manifest)).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Per-style record counts. Styles with no records are absent.
pub fn style_stats(manifest: &DatasetManifest) -> BTreeMap<StyleId, usize> {
    let mut counts = BTreeMap::new();
    for record in &manifest.records {
        *counts.entry(record.style).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionMask {
    #[serde(default)]
    pub excluded_input_styles: BTreeSet<StyleId>,
    #[serde(default)]
    pub excluded_output_styles: BTreeSet<StyleId>,
    #[serde(default)]
    pub excluded_pairs: BTreeSet<(StyleId, StyleId)>,
}

impl ExclusionMask {
    /// Abstract inputs and photo outputs are never part of the benchmark grid.
    pub fn benchmark_default() -> Self {
        ExclusionMask {
            excluded_input_styles: [StyleId::Abstract].into(),
            excluded_output_styles: [StyleId::Photo].into(),
            excluded_pairs: BTreeSet::new(),
        }
    }

    pub fn exclude_input(mut self, style: StyleId) -> Self {
        self.excluded_input_styles.insert(style);
        self
    }

    pub fn exclude_output(mut self, style: StyleId) -> Self {
        self.excluded_output_styles.insert(style);
        self
    }

    pub fn exclude_pair(mut self, input: StyleId, output: StyleId) -> Self {
        self.excluded_pairs.insert((input, output));
        self
    }

    /// Identity pairs are always excluded.
    pub fn is_excluded(&self, input: StyleId, output: StyleId) -> bool {
        input == output
            || self.excluded_input_styles.contains(&input)
            || self.excluded_output_styles.contains(&output)
            || self.excluded_pairs.contains(&(input, output))
    }
}

/// Enumerates (record, target) pairs that survive the mask, ordered by
/// record id then target style.
pub fn select_pairs<'a>(
    manifest: &'a DatasetManifest,
    targets: &[StyleId],
    mask: &ExclusionMask,
) -> Vec<(&'a ImageRecord, StyleId)> {
    let targets: BTreeSet<StyleId> = targets.iter().copied().collect();
    let mut pairs: Vec<(&ImageRecord, StyleId)> = manifest
        .records
        .iter()
        .flat_map(|record| {
            targets
                .iter()
                .filter(move |&&target| !mask.is_excluded(record.style, target))
                .map(move |&target| (record, target))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.id.cmp(&b.0.id).then(a.1.cmp(&b.1)));
    pairs
}
