use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dataset::{ExclusionMask, StyleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Sml,
    Cms,
    Fid,
    Clips,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Sml, Metric::Cms, Metric::Fid, Metric::Clips];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sml => "sml",
            Metric::Cms => "cms",
            Metric::Fid => "fid",
            Metric::Clips => "clips",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Cms | Metric::Clips)
    }
}

/// Scores of one (input style, target style, method) combination.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sml: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clips: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub excluded: bool,
}

impl MetricCell {
    pub fn excluded() -> Self {
        MetricCell {
            excluded: true,
            ..Default::default()
        }
    }

    pub fn scored(sml: f64, cms: f64, fid: f64, clips: f64) -> Self {
        MetricCell {
            sml: Some(sml),
            cms: Some(cms),
            fid: Some(fid),
            clips: Some(clips),
            excluded: false,
        }
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Sml => self.sml,
            Metric::Cms => self.cms,
            Metric::Fid => self.fid,
            Metric::Clips => self.clips,
        }
    }

    pub fn set(&mut self, metric: Metric, value: Option<f64>) {
        match metric {
            Metric::Sml => self.sml = value,
            Metric::Cms => self.cms = value,
            Metric::Fid => self.fid = value,
            Metric::Clips => self.clips = value,
        }
    }

    /// Excluded cells carry no scores; scores are finite.
    pub fn is_valid(&self) -> bool {
        let mut values = Metric::ALL.iter().filter_map(|m| self.get(*m));
        if self.excluded {
            values.next().is_none()
        } else {
            values.all(f64::is_finite)
        }
    }
}

pub type CellKey = (StyleId, StyleId, String);

/// Input-style × target-style × method table of metric cells. Every
/// combination has a cell; excluded ones carry no scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridDoc", try_from = "GridDoc")]
pub struct BenchGrid {
    input_styles: Vec<StyleId>,
    target_styles: Vec<StyleId>,
    methods: Vec<String>,
    cells: BTreeMap<CellKey, MetricCell>,
}

impl BenchGrid {
    /// Empty grid; cells the mask rules out (including identity pairs)
    /// are marked excluded.
    pub fn new(
        input_styles: Vec<StyleId>,
        target_styles: Vec<StyleId>,
        methods: Vec<String>,
        mask: &ExclusionMask,
    ) -> Self {
        let mut cells = BTreeMap::new();
        for &i in &input_styles {
            for &t in &target_styles {
                for m in &methods {
                    let cell = if mask.is_excluded(i, t) {
                        MetricCell::excluded()
                    } else {
                        MetricCell::default()
                    };
                    cells.insert((i, t, m.clone()), cell);
                }
            }
        }
        BenchGrid {
            input_styles,
            target_styles,
            methods,
            cells,
        }
    }

    pub fn input_styles(&self) -> &[StyleId] {
        &self.input_styles
    }

    pub fn target_styles(&self) -> &[StyleId] {
        &self.target_styles
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn cell(&self, input: StyleId, target: StyleId, method: &str) -> Option<&MetricCell> {
        self.cells.get(&(input, target, method.to_string()))
    }

    /// Replaces a cell's scores. Writing scores into an excluded cell is an error.
    pub fn set_cell(
        &mut self,
        input: StyleId,
        target: StyleId,
        method: &str,
        cell: MetricCell,
    ) -> Result<(), HarnessError> {
        let slot = self
            .cells
            .get_mut(&(input, target, method.to_string()))
            .ok_or_else(|| HarnessError::Grid(format!("no cell {input}->{target} for {method:?}")))?;
        if slot.excluded && !cell.excluded {
            return Err(HarnessError::Grid(format!(
                "cell {input}->{target} for {method:?} is excluded"
            )));
        }
        if !cell.is_valid() {
            return Err(HarnessError::Grid(format!(
                "invalid scores for {input}->{target} {method:?}"
            )));
        }
        *slot = cell;
        Ok(())
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &MetricCell)> {
        self.cells.iter()
    }

    /// Unweighted mean of each metric over the non-excluded cells of
    /// `method` that carry a value.
    pub fn aggregate(&self, method: &str) -> Aggregate {
        let mut agg = Aggregate::default();
        for metric in Metric::ALL {
            let values: Vec<f64> = self
                .cells
                .iter()
                .filter(|((_, _, m), c)| m == method && !c.excluded)
                .filter_map(|(_, c)| c.get(metric))
                .collect();
            let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
            agg.set(metric, mean);
        }
        agg.cells = self
            .cells
            .iter()
            .filter(|((_, _, m), c)| m == method && !c.excluded)
            .count();
        agg
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sml: Option<f64>,
    pub cms: Option<f64>,
    pub fid: Option<f64>,
    pub clips: Option<f64>,
    /// Non-excluded cells considered.
    pub cells: usize,
}

impl Aggregate {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Sml => self.sml,
            Metric::Cms => self.cms,
            Metric::Fid => self.fid,
            Metric::Clips => self.clips,
        }
    }

    fn set(&mut self, metric: Metric, value: Option<f64>) {
        match metric {
            Metric::Sml => self.sml = value,
            Metric::Cms => self.cms = value,
            Metric::Fid => self.fid = value,
            Metric::Clips => self.clips = value,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    input: StyleId,
    target: StyleId,
    method: String,
    #[serde(flatten)]
    cell: MetricCell,
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    input_styles: Vec<StyleId>,
    target_styles: Vec<StyleId>,
    methods: Vec<String>,
    cells: Vec<CellDoc>,
}

impl From<BenchGrid> for GridDoc {
    fn from(g: BenchGrid) -> Self {
        GridDoc {
            input_styles: g.input_styles,
            target_styles: g.target_styles,
            methods: g.methods,
            cells: g
                .cells
                .into_iter()
                .map(|((input, target, method), cell)| CellDoc {
                    input,
                    target,
                    method,
                    cell,
                })
                .collect(),
        }
    }
}

impl TryFrom<GridDoc> for BenchGrid {
    type Error = HarnessError;

    fn try_from(doc: GridDoc) -> Result<Self, Self::Error> {
        let mut cells = BTreeMap::new();
        for c in doc.cells {
            if cells.insert((c.input, c.target, c.method.clone()), c.cell).is_some() {
                return Err(HarnessError::Grid(format!(
                    "duplicate cell {}->{} {:?}",
                    c.input, c.target, c.method
                )));
            }
        }
        BenchGrid::from_cells(doc.input_styles, doc.target_styles, doc.methods, cells)
    }
}

impl BenchGrid {
    pub(crate) fn from_cells(
        input_styles: Vec<StyleId>,
        target_styles: Vec<StyleId>,
        methods: Vec<String>,
        cells: BTreeMap<CellKey, MetricCell>,
    ) -> Result<Self, HarnessError> {
        if let Some(((i, t, m), _)) = cells.iter().find(|(_, c)| !c.is_valid()) {
            return Err(HarnessError::Grid(format!("invalid scores for {i}->{t} {m:?}")));
        }
        let expected = input_styles.len() * target_styles.len() * methods.len();
        let complete = cells.len() == expected
            && input_styles.iter().all(|&i| {
                target_styles
                    .iter()
                    .all(|&t| methods.iter().all(|m| cells.contains_key(&(i, t, m.clone()))))
            });
        if !complete {
            return Err(HarnessError::Grid(
                "cells do not cover inputs x targets x methods".into(),
            ));
        }
        Ok(BenchGrid {
            input_styles,
            target_styles,
            methods,
            cells,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cells_start_excluded() {
        let g = BenchGrid::new(
            vec![StyleId::Photo, StyleId::Anime],
            vec![StyleId::Anime],
            vec!["Ours".into()],
            &ExclusionMask::default(),
        );
        assert!(g.cell(StyleId::Anime, StyleId::Anime, "Ours").unwrap().excluded);
        assert!(!g.cell(StyleId::Photo, StyleId::Anime, "Ours").unwrap().excluded);
    }

    #[test]
    fn cannot_score_excluded_cell() {
        let mut g = BenchGrid::new(
            vec![StyleId::Anime],
            vec![StyleId::Anime],
            vec!["m".into()],
            &ExclusionMask::default(),
        );
        assert!(g
            .set_cell(
                StyleId::Anime,
                StyleId::Anime,
                "m",
                MetricCell::scored(1.0, 1.0, 1.0, 1.0)
            )
            .is_err());
    }

    #[test]
    fn aggregate_skips_excluded_and_missing() {
        let mut g = BenchGrid::new(
            vec![StyleId::Photo, StyleId::InkPainting],
            vec![StyleId::InkPainting, StyleId::Anime],
            vec!["m".into()],
            &ExclusionMask::default(),
        );
        g.set_cell(
            StyleId::Photo,
            StyleId::InkPainting,
            "m",
            MetricCell::scored(2.0, 0.5, 10.0, 20.0),
        )
        .unwrap();
        g.set_cell(
            StyleId::Photo,
            StyleId::Anime,
            "m",
            MetricCell::scored(4.0, 0.7, 14.0, 30.0),
        )
        .unwrap();
        let partial = MetricCell {
            sml: Some(9.0),
            ..Default::default()
        };
        g.set_cell(StyleId::InkPainting, StyleId::Anime, "m", partial).unwrap();
        let a = g.aggregate("m");
        assert_eq!(a.cells, 3);
        assert_eq!(a.sml, Some(5.0));
        assert!((a.cms.unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(a.fid, Some(12.0));
    }

    #[test]
    fn incomplete_doc_rejected() {
        let text = r#"{"input_styles":["photo"],"target_styles":["anime"],"methods":["m"],"cells":[]}"#;
        assert!(serde_json::from_str::<BenchGrid>(text).is_err());
    }
}
