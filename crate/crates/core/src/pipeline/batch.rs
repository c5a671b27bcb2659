use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::{Pipeline, PipelineError, RunRecord};
use crate::dataset::{select_pairs, DatasetManifest, ExclusionMask, StyleId};

/// Optional hooks for a batch: a cancellation flag checked before each run
/// and a callback invoked as each run completes (in completion order).
#[derive(Default)]
pub struct BatchControl<'a> {
    pub cancel: Option<Arc<AtomicBool>>,
    pub on_record: Option<&'a (dyn Fn(&RunRecord) + Sync)>,
}

impl Pipeline {
    /// One run per selected (record, target) pair, ordered by record id then
    /// target style regardless of `parallelism`.
    pub fn run_batch(
        &self,
        manifest: &DatasetManifest,
        targets: &[StyleId],
        mask: &ExclusionMask,
        parallelism: usize,
    ) -> Result<Vec<RunRecord>, PipelineError> {
        self.run_batch_with(manifest, targets, mask, parallelism, &BatchControl::default())
    }

    pub fn run_batch_with(
        &self,
        manifest: &DatasetManifest,
        targets: &[StyleId],
        mask: &ExclusionMask,
        parallelism: usize,
        control: &BatchControl<'_>,
    ) -> Result<Vec<RunRecord>, PipelineError> {
        if parallelism == 0 {
            return Err(PipelineError::Config("parallelism must be at least 1".into()));
        }
        let pairs = select_pairs(manifest, targets, mask);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
        let cancelled = || control.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst));

        let results: Vec<Option<RunRecord>> = pool.install(|| {
            pairs
                .par_iter()
                .map(|(record, target)| {
                    if cancelled() {
                        return Ok(None);
                    }
                    let run = self.run_variation(record, *target)?;
                    if let Some(cb) = control.on_record {
                        cb(&run);
                    }
                    Ok(Some(run))
                })
                .collect::<Result<_, PipelineError>>()
        })?;
        let mut runs: Vec<RunRecord> = results.into_iter().flatten().collect();
        runs.sort_by(|a, b| a.record_id.cmp(&b.record_id).then(a.target_style.cmp(&b.target_style)));
        Ok(runs)
    }
}

/// One JSON object per line.
pub fn run_log_to_string(runs: &[RunRecord]) -> String {
    let mut out = String::new();
    for run in runs {
        out.push_str(&serde_json::to_string(run).expect("run records serialize"));
        out.push('\n');
    }
    out
}

pub fn read_run_log(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, PipelineError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut runs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        runs.push(serde_json::from_str(&line)?);
    }
    Ok(runs)
}

/// Append-only run log shared between workers.
#[derive(Debug)]
pub struct RunLogWriter {
    path: String,
    file: Mutex<File>,
}

impl RunLogWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| PipelineError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(RunLogWriter {
            path: path.display().to_string(),
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, run: &RunRecord) -> Result<(), PipelineError> {
        let mut line = serde_json::to_string(run)?;
        line.push('\n');
        let mut file = self.file.lock().expect("log mutex poisoned");
        file.write_all(line.as_bytes()).map_err(|source| PipelineError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::mock::{MockFixtures, MockTransport};
    use crate::backends::Backends;
    use crate::dataset::ImageRecord;
    use crate::pipeline::{FixedClock, PipelineConfig};

    fn manifest() -> DatasetManifest {
        let records = ["c", "a", "b"]
            .iter()
            .map(|id| ImageRecord {
                id: id.to_string(),
                path: "boat.png".into(),
                style: StyleId::Photo,
                subcategory: None,
                annotation: "a boat".into(),
            })
            .collect();
        DatasetManifest::new(records, None).unwrap()
    }

    fn pipeline() -> Pipeline {
        let backends = Backends::uniform(Arc::new(MockTransport::new(MockFixtures::boat_scene())));
        Pipeline::new(backends, PipelineConfig::default())
            .unwrap()
            .with_clock(Arc::new(FixedClock(0)))
    }

    #[test]
    fn batch_counts_and_orders() {
        let runs = pipeline()
            .run_batch(
                &manifest(),
                &[StyleId::Anime, StyleId::RealisticOil],
                &ExclusionMask::default(),
                2,
            )
            .unwrap();
        assert_eq!(runs.len(), 6);
        let keys: Vec<(&str, StyleId)> = runs.iter().map(|r| (r.record_id.as_str(), r.target_style)).collect();
        assert_eq!(keys[0], ("a", StyleId::RealisticOil));
        assert_eq!(keys[5], ("c", StyleId::Anime));
        assert!(runs.iter().all(RunRecord::is_ok));
    }

    #[test]
    fn empty_pair_set() {
        let runs = pipeline()
            .run_batch(&manifest(), &[StyleId::Photo], &ExclusionMask::default(), 1)
            .unwrap();
        assert!(runs.is_empty());
    }

    #[test]
    fn zero_parallelism_rejected() {
        assert!(pipeline()
            .run_batch(&manifest(), &[StyleId::Anime], &ExclusionMask::default(), 0)
            .is_err());
    }

    #[test]
    fn cancelled_batch_runs_nothing() {
        let control = BatchControl {
            cancel: Some(Arc::new(AtomicBool::new(true))),
            on_record: None,
        };
        let runs = pipeline()
            .run_batch_with(&manifest(), &[StyleId::Anime], &ExclusionMask::default(), 1, &control)
            .unwrap();
        assert!(runs.is_empty());
    }

    #[test]
    fn log_writer_appends_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        let runs = pipeline()
            .run_batch(&manifest(), &[StyleId::Anime], &ExclusionMask::default(), 1)
            .unwrap();
        let writer = RunLogWriter::open(&path).unwrap();
        for r in &runs {
            writer.append(r).unwrap();
        }
        assert_eq!(read_run_log(&path).unwrap(), runs);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), run_log_to_string(&runs));
    }
}
