//! Evaluation runner, report rendering and the command-line front end.

pub mod cli;
mod evaluate;
mod grid;
pub mod reference;
mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use evaluate::{evaluate, EvalOptions};
pub use grid::{Aggregate, BenchGrid, CellKey, Metric, MetricCell};
pub use report::{
    parse_grid, parse_summary, render_grid, render_summary, render_summary_markdown, ReportFormat, SummaryRow,
};

use crate::metrics::MetricsError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("missing tensor entries:\n  {}", .0.join("\n  "))]
    MissingTensors(Vec<String>),
    #[error("{item}: {source}")]
    Metric {
        item: String,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("report parse error: {0}")]
    Parse(String),
    #[error("{format} cannot be parsed back into a grid")]
    Unparseable { format: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Where a report's numbers came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Hex SHA-256 of the manifest bytes, if known.
    pub manifest_sha256: Option<String>,
    /// Hex SHA-256 of the pipeline config bytes, if known.
    pub config_sha256: Option<String>,
    /// Milliseconds since the Unix epoch.
    pub generated_ms: u64,
}

impl Provenance {
    pub fn new(manifest: Option<&[u8]>, config: Option<&[u8]>, generated_ms: u64) -> Self {
        Provenance {
            manifest_sha256: manifest.map(sha256_hex),
            config_sha256: config.map(sha256_hex),
            generated_ms,
        }
    }

    pub fn from_files(manifest: Option<&Path>, config: Option<&Path>, generated_ms: u64) -> Result<Self, HarnessError> {
        let read = |p: &Path| {
            std::fs::read(p).map_err(|source| HarnessError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let manifest = manifest.map(read).transpose()?;
        let config = config.map(read).transpose()?;
        Ok(Provenance::new(manifest.as_deref(), config.as_deref(), generated_ms))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    #[serde(flatten)]
    pub aggregate: Aggregate,
}

/// A grid together with its per-method means and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub grid: BenchGrid,
    pub aggregates: Vec<MethodAggregate>,
    pub provenance: Provenance,
}

impl MetricReport {
    pub fn new(grid: BenchGrid, provenance: Provenance) -> Self {
        let aggregates = grid
            .methods()
            .iter()
            .map(|m| MethodAggregate {
                method: m.clone(),
                aggregate: grid.aggregate(m),
            })
            .collect();
        MetricReport {
            grid,
            aggregates,
            provenance,
        }
    }

    pub fn aggregate(&self, method: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method)
            .map(|a| &a.aggregate)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.aggregates
            .iter()
            .map(|a| SummaryRow {
                method: a.method.clone(),
                sml: a.aggregate.sml,
                cms: a.aggregate.cms,
                fid: a.aggregate.fid,
                clips: a.aggregate.clips,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ExclusionMask, StyleId};

    #[test]
    fn report_json_round_trip() {
        let mut g = BenchGrid::new(
            vec![StyleId::Photo],
            vec![StyleId::Anime],
            vec!["Ours".into()],
            &ExclusionMask::default(),
        );
        g.set_cell(
            StyleId::Photo,
            StyleId::Anime,
            "Ours",
            MetricCell::scored(6.31, 0.581, 18.32, 27.33),
        )
        .unwrap();
        let r = MetricReport::new(g, Provenance::new(Some(b"m"), None, 5));
        assert_eq!(r.aggregate("Ours").unwrap().sml, Some(6.31));
        assert_eq!(MetricReport::from_json(&r.to_json()).unwrap(), r);
        assert_eq!(r.provenance.manifest_sha256.as_deref().unwrap().len(), 64);
    }
}
