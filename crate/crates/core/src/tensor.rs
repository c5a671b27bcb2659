//! Binary tensor container and its sidecar index.
//!
//! Layout of a container file (all integers little-endian):
//!
//! ```text
//! b"ZSTDTNS1" | rank: u32 | dims: [u32; rank] | payload: [f32; prod(dims)]
//! ```
//!
//! The payload is row-major. One tensor per file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::StyleId;
use crate::metrics::{gram, EmbeddingSet, EmbeddingVec, FeatureMap, GramMatrix, MetricsError};

pub const MAGIC: &[u8; 8] = b"ZSTDTNS1";

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic header")]
    BadMagic,
    #[error("truncated tensor: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("expected rank {expected} tensor, got shape {got:?}")]
    Rank { expected: &'static str, got: Vec<usize> },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("index parse error: {0}")]
    Index(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let need: usize = dims.iter().product();
        if need != data.len() {
            return Err(TensorError::Truncated { need, have: data.len() });
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_f64(dims: Vec<usize>, data: &[f64]) -> Result<Self, TensorError> {
        Self::new(dims, data.iter().map(|&v| v as f32).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn data_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        let mut cursor = Reader { bytes, pos: 0 };
        if cursor.take(8)? != MAGIC {
            return Err(TensorError::BadMagic);
        }
        let rank = cursor.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cursor.u32()? as usize);
        }
        let count: usize = dims.iter().product();
        let payload = cursor.take(count * 4)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let rest = bytes.len() - cursor.pos;
        if rest != 0 {
            return Err(TensorError::TrailingBytes(rest));
        }
        Ok(Tensor { dims, data })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TensorError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| TensorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TensorError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| TensorError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_feature_map(&self) -> Result<FeatureMap, TensorError> {
        match self.dims[..] {
            [c, h, w] => Ok(FeatureMap::new(c, h, w, self.data_f64())?),
            _ => Err(self.rank_error("3 (C,H,W)")),
        }
    }

    /// Rank 1, or rank 2 with a single row.
    pub fn to_embedding(&self) -> Result<EmbeddingVec, TensorError> {
        match self.dims[..] {
            [_] | [1, _] => Ok(EmbeddingVec::new(self.data_f64())?),
            _ => Err(self.rank_error("1 (n)")),
        }
    }

    pub fn to_embedding_set(&self) -> Result<EmbeddingSet, TensorError> {
        match self.dims[..] {
            [m, n] => Ok(EmbeddingSet::new(m, n, &self.data_f64())?),
            _ => Err(self.rank_error("2 (m,n)")),
        }
    }

    /// A rank-3 tensor is treated as a feature map and reduced to its Gram;
    /// a square rank-2 tensor is taken as a precomputed Gram.
    pub fn to_gram(&self) -> Result<GramMatrix, TensorError> {
        match self.dims[..] {
            [_, _, _] => Ok(gram(&self.to_feature_map()?)),
            [c, d] if c == d => {
                // f32 storage loses exact symmetry; restore it from the upper triangle
                let mut m = DMatrix::from_row_slice(c, c, &self.data_f64());
                for i in 0..c {
                    for j in (i + 1)..c {
                        m[(j, i)] = m[(i, j)];
                    }
                }
                Ok(GramMatrix::new(m)?)
            }
            _ => Err(self.rank_error("3 (C,H,W) or square 2")),
        }
    }

    fn rank_error(&self, expected: &'static str) -> TensorError {
        TensorError::Rank {
            expected,
            got: self.dims.clone(),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TensorError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(TensorError::Truncated {
                need: self.pos.saturating_add(n),
                have: self.bytes.len(),
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, TensorError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub const DEFAULT_METHOD: &str = "Ours";

fn default_method() -> String {
    DEFAULT_METHOD.to_string()
}

/// Tensor files for one generated image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub record_id: String,
    pub input_style: StyleId,
    pub target_style: StyleId,
    #[serde(default = "default_method")]
    pub method: String,
    /// Feature map of the result image (Gram source).
    pub features: String,
    /// Caption embedding of the source image.
    pub source_text: String,
    /// Caption embedding of the result image.
    pub result_text: String,
    /// Image embedding of the result.
    pub image: String,
}

/// Sidecar index mapping record ids to tensor files. Paths are relative
/// to the index file's directory unless absolute.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorIndex {
    #[serde(default)]
    pub entries: Vec<IndexEntry>,
    /// Text embedding of each target style prompt.
    #[serde(default)]
    pub style_text: BTreeMap<StyleId, String>,
    /// Reference embedding set (`m x n`) of each style's corpus.
    #[serde(default)]
    pub reference: BTreeMap<StyleId, String>,
    /// Feature maps (or Grams) of each style's corpus images.
    #[serde(default)]
    pub style_corpus: BTreeMap<StyleId, Vec<String>>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl TensorIndex {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TensorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TensorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut index: TensorIndex = serde_json::from_str(&text)?;
        index.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(index)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TensorError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|source| TensorError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn read(&self, rel: &str) -> Result<Tensor, TensorError> {
        Tensor::read(self.resolve(rel))
    }

    pub fn entry(&self, record_id: &str, target: StyleId, method: &str) -> Option<&IndexEntry> {
        self.entries
            .iter()
            .find(|e| e.record_id == record_id && e.target_style == target && e.method == method)
    }

    /// Loads the Gram corpus of every style listed under `style_corpus`.
    pub fn corpus_grams(&self) -> Result<BTreeMap<StyleId, Vec<GramMatrix>>, TensorError> {
        self.style_corpus
            .iter()
            .map(|(style, files)| {
                let grams = files
                    .iter()
                    .map(|f| self.read(f)?.to_gram())
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((*style, grams))
            })
            .collect()
    }
}
