use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::{BenchGrid, CellKey, Metric, MetricCell};
use super::HarnessError;
use crate::dataset::StyleId;

const DASH: &str = "-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?} (csv, json, markdown)")),
        }
    }
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Four decimals at most, trailing zeros dropped; for human-facing tables.
fn fmt_short(v: Option<f64>) -> String {
    let Some(v) = v else { return String::new() };
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn parse_value(field: &str, what: &str) -> Result<Option<f64>, HarnessError> {
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field
        .parse()
        .map_err(|_| HarnessError::Parse(format!("{what}: {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(HarnessError::Parse(format!("{what}: {field:?} is not finite")));
    }
    Ok(Some(v))
}

/// Serializes a grid. CSV has one row per (input style, method) and one
/// `<target>:<metric>` column per target style and metric.
pub fn render_grid(grid: &BenchGrid, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(grid),
        ReportFormat::Json => serde_json::to_string_pretty(grid).expect("grids serialize") + "\n",
        ReportFormat::Markdown => render_markdown(grid),
    }
}

/// Inverse of [`render_grid`] for CSV and JSON.
pub fn parse_grid(text: &str, format: ReportFormat) -> Result<BenchGrid, HarnessError> {
    match format {
        ReportFormat::Csv => parse_csv(text),
        ReportFormat::Json => Ok(serde_json::from_str(text)?),
        ReportFormat::Markdown => Err(HarnessError::Unparseable { format: "markdown" }),
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn render_csv(grid: &BenchGrid) -> String {
    let mut header = vec!["input_style".to_string(), "method".to_string()];
    for t in grid.target_styles() {
        for m in Metric::ALL {
            header.push(format!("{t}:{}", m.name()));
        }
    }
    let mut out = csv_line(&header);
    for &i in grid.input_styles() {
        for method in grid.methods() {
            let mut row = vec![i.to_string(), method.clone()];
            for &t in grid.target_styles() {
                let cell = grid.cell(i, t, method).expect("complete grid");
                for m in Metric::ALL {
                    row.push(if cell.excluded {
                        DASH.to_string()
                    } else {
                        fmt_value(cell.get(m))
                    });
                }
            }
            out.push_str(&csv_line(&row));
        }
    }
    out
}

fn parse_csv(text: &str) -> Result<BenchGrid, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| HarnessError::Parse(e.to_string()))?
        .clone();
    if header.len() < 2 || &header[0] != "input_style" || &header[1] != "method" {
        return Err(HarnessError::Parse("header must start with input_style,method".into()));
    }
    let metric_cols = header.len() - 2;
    if metric_cols % Metric::ALL.len() != 0 {
        return Err(HarnessError::Parse("metric columns must come in groups of four".into()));
    }
    let mut targets = Vec::new();
    for group in 0..metric_cols / Metric::ALL.len() {
        let mut style = None;
        for (k, m) in Metric::ALL.iter().enumerate() {
            let col = &header[2 + group * Metric::ALL.len() + k];
            let (t, name) = col
                .rsplit_once(':')
                .ok_or_else(|| HarnessError::Parse(format!("column {col:?} is not <style>:<metric>")))?;
            if name != m.name() {
                return Err(HarnessError::Parse(format!(
                    "column {col:?}: expected metric {}",
                    m.name()
                )));
            }
            let t: StyleId = t.parse().map_err(|e| HarnessError::Parse(format!("{e}")))?;
            if style.is_some_and(|s| s != t) {
                return Err(HarnessError::Parse(format!("column {col:?} breaks its style group")));
            }
            style = Some(t);
        }
        targets.push(style.expect("four columns"));
    }

    let mut inputs: Vec<StyleId> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    let mut cells: BTreeMap<CellKey, MetricCell> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| HarnessError::Parse(e.to_string()))?;
        let input: StyleId = row[0]
            .parse()
            .map_err(|e| HarnessError::Parse(format!("row {}: {e}", line + 1)))?;
        let method = row[1].to_string();
        if !seen.insert((input, method.clone())) {
            return Err(HarnessError::Parse(format!(
                "row {}: duplicate row {input},{method}",
                line + 1
            )));
        }
        if !inputs.contains(&input) {
            inputs.push(input);
        }
        if !methods.contains(&method) {
            methods.push(method.clone());
        }
        for (g, &t) in targets.iter().enumerate() {
            let fields: Vec<&str> = (0..Metric::ALL.len())
                .map(|k| &row[2 + g * Metric::ALL.len() + k])
                .collect();
            let dashes = fields.iter().filter(|f| **f == DASH).count();
            let cell = if dashes == fields.len() {
                MetricCell::excluded()
            } else if dashes > 0 {
                return Err(HarnessError::Parse(format!(
                    "row {}: partially dashed {t} group",
                    line + 1
                )));
            } else {
                let mut cell = MetricCell::default();
                for (m, f) in Metric::ALL.iter().zip(&fields) {
                    cell.set(*m, parse_value(f, &format!("row {} {t}:{}", line + 1, m.name()))?);
                }
                cell
            };
            cells.insert((input, t, method.clone()), cell);
        }
    }
    BenchGrid::from_cells(inputs, targets, methods, cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    None,
    Best,
    Second,
}

/// Best and second-best marks for a column of values. Ties share a mark.
fn marks(values: &[Option<f64>], higher_is_better: bool) -> Vec<Mark> {
    let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if higher_is_better {
        distinct.reverse();
    }
    values
        .iter()
        .map(|v| match v {
            Some(v) if distinct.first() == Some(v) => Mark::Best,
            Some(v) if distinct.get(1) == Some(v) => Mark::Second,
            _ => Mark::None,
        })
        .collect()
}

fn marked(v: Option<f64>, mark: Mark) -> String {
    let s = fmt_short(v);
    match mark {
        Mark::Best => format!("**{s}**"),
        Mark::Second => format!("_{s}_"),
        Mark::None => s,
    }
}

fn render_markdown(grid: &BenchGrid) -> String {
    let mut out = String::new();
    for (n, &i) in grid.input_styles().iter().enumerate() {
        if n > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "### {i}\n");
        let mut header = String::from("| method |");
        let mut rule = String::from("|---|");
        for t in grid.target_styles() {
            for m in Metric::ALL {
                let _ = write!(header, " {t} {} |", m.name().to_uppercase());
                rule.push_str("---:|");
            }
        }
        let _ = writeln!(out, "{header}\n{rule}");

        let mut columns: Vec<Vec<String>> = Vec::new();
        for &t in grid.target_styles() {
            let group: Vec<&MetricCell> = grid
                .methods()
                .iter()
                .map(|m| grid.cell(i, t, m).expect("complete grid"))
                .collect();
            for m in Metric::ALL {
                let values: Vec<Option<f64>> = group.iter().map(|c| c.get(m)).collect();
                let col = marks(&values, m.higher_is_better())
                    .into_iter()
                    .zip(&group)
                    .map(|(mark, c)| {
                        if c.excluded {
                            DASH.to_string()
                        } else {
                            marked(c.get(m), mark)
                        }
                    })
                    .collect();
                columns.push(col);
            }
        }
        for (r, method) in grid.methods().iter().enumerate() {
            let _ = write!(out, "| {method} |");
            for col in &columns {
                let _ = write!(out, " {} |", col[r]);
            }
            out.push('\n');
        }
    }
    out
}

/// One row of a per-method summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub sml: Option<f64>,
    pub cms: Option<f64>,
    pub fid: Option<f64>,
    pub clips: Option<f64>,
}

impl SummaryRow {
    pub fn new(method: impl Into<String>, sml: f64, cms: f64, fid: f64, clips: f64) -> Self {
        SummaryRow {
            method: method.into(),
            sml: Some(sml),
            cms: Some(cms),
            fid: Some(fid),
            clips: Some(clips),
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

    fn set(&mut self, metric: Metric, value: Option<f64>) {
        match metric {
            Metric::Sml => self.sml = value,
            Metric::Cms => self.cms = value,
            Metric::Fid => self.fid = value,
            Metric::Clips => self.clips = value,
        }
    }
}

/// `method,sml,cms,fid,clips` CSV.
pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut header = vec!["method".to_string()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    let mut out = csv_line(&header);
    for row in rows {
        let mut fields = vec![row.method.clone()];
        fields.extend(Metric::ALL.iter().map(|m| fmt_value(row.get(*m))));
        out.push_str(&csv_line(&fields));
    }
    out
}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| HarnessError::Parse(e.to_string()))?
        .clone();
    let expected: Vec<&str> = std::iter::once("method")
        .chain(Metric::ALL.iter().map(|m| m.name()))
        .collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(HarnessError::Parse(format!(
            "summary header must be {}",
            expected.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::Parse(e.to_string()))?;
        let mut row = SummaryRow {
            method: rec[0].to_string(),
            sml: None,
            cms: None,
            fid: None,
            clips: None,
        };
        for (k, m) in Metric::ALL.iter().enumerate() {
            row.set(*m, parse_value(&rec[k + 1], &format!("row {} {}", line + 1, m.name()))?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Summary table with best (bold) and second-best (italic) marks per column.
pub fn render_summary_markdown(rows: &[SummaryRow]) -> String {
    let mut out = String::from("| method | SML | CMS | FID | CLIPS |\n|---|---:|---:|---:|---:|\n");
    let columns: Vec<Vec<Mark>> = Metric::ALL
        .iter()
        .map(|m| {
            let values: Vec<Option<f64>> = rows.iter().map(|r| r.get(*m)).collect();
            marks(&values, m.higher_is_better())
        })
        .collect();
    for (r, row) in rows.iter().enumerate() {
        let _ = write!(out, "| {} |", row.method);
        for (k, m) in Metric::ALL.iter().enumerate() {
            let _ = write!(out, " {} |", marked(row.get(*m), columns[k][r]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ExclusionMask;

    fn small_grid() -> BenchGrid {
        let mut g = BenchGrid::new(
            vec![StyleId::InkPainting, StyleId::Photo],
            vec![StyleId::RealisticOil, StyleId::InkPainting],
            vec!["Ours".into(), "AdaIn".into()],
            &ExclusionMask::default(),
        );
        g.set_cell(
            StyleId::InkPainting,
            StyleId::RealisticOil,
            "Ours",
            MetricCell::scored(6.56, 0.813, 14.48, 24.37),
        )
        .unwrap();
        g.set_cell(
            StyleId::Photo,
            StyleId::InkPainting,
            "AdaIn",
            MetricCell::scored(5.91, 0.468, 22.09, 23.3),
        )
        .unwrap();
        g
    }

    #[test]
    fn csv_layout() {
        let text = render_grid(&small_grid(), ReportFormat::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "input_style,method,realistic-oil:sml,realistic-oil:cms,realistic-oil:fid,realistic-oil:clips,\
             ink-painting:sml,ink-painting:cms,ink-painting:fid,ink-painting:clips"
        );
        assert_eq!(lines[1], "ink-painting,Ours,6.56,0.813,14.48,24.37,-,-,-,-");
        assert_eq!(lines[4], "photo,AdaIn,,,,,5.91,0.468,22.09,23.3");
    }

    #[test]
    fn csv_and_json_round_trip() {
        let g = small_grid();
        for f in [ReportFormat::Csv, ReportFormat::Json] {
            assert_eq!(parse_grid(&render_grid(&g, f), f).unwrap(), g);
        }
    }

    #[test]
    fn all_excluded_grid_is_all_dashes() {
        let g = BenchGrid::new(
            vec![StyleId::Anime],
            vec![StyleId::Anime],
            vec!["Ours".into()],
            &ExclusionMask::default(),
        );
        let text = render_grid(&g, ReportFormat::Csv);
        assert_eq!(text.lines().nth(1).unwrap(), "anime,Ours,-,-,-,-");
        assert_eq!(parse_grid(&text, ReportFormat::Csv).unwrap(), g);
    }

    #[test]
    fn partial_dash_rejected() {
        let text = "input_style,method,anime:sml,anime:cms,anime:fid,anime:clips\nphoto,m,-,1,2,3\n";
        assert!(parse_grid(text, ReportFormat::Csv).is_err());
    }

    #[test]
    fn missing_row_rejected() {
        let text = render_grid(&small_grid(), ReportFormat::Csv);
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(parse_grid(&cut, ReportFormat::Csv).is_err());
    }

    #[test]
    fn markdown_not_parseable() {
        assert!(matches!(
            parse_grid("", ReportFormat::Markdown),
            Err(HarnessError::Unparseable { .. })
        ));
    }

    #[test]
    fn marks_direction_and_ties() {
        let v = [Some(1.0), Some(3.0), Some(1.0), Some(2.0), None];
        assert_eq!(
            marks(&v, false),
            vec![Mark::Best, Mark::None, Mark::Best, Mark::Second, Mark::None]
        );
        assert_eq!(
            marks(&v, true),
            vec![Mark::None, Mark::Best, Mark::None, Mark::Second, Mark::None]
        );
    }

    #[test]
    fn short_format() {
        assert_eq!(fmt_short(Some(25.0)), "25");
        assert_eq!(fmt_short(Some(0.813)), "0.813");
        assert_eq!(fmt_short(Some(0.0022608)), "0.0023");
        assert_eq!(fmt_short(Some(-0.00001)), "0");
        assert_eq!(fmt_short(None), "");
    }

    #[test]
    fn summary_row_renders_exactly() {
        let rows = vec![SummaryRow::new("Ours", 6.36, 0.57, 17.03, 27.42)];
        let text = render_summary(&rows);
        assert_eq!(text, "method,sml,cms,fid,clips\nOurs,6.36,0.57,17.03,27.42\n");
        assert_eq!(parse_summary(&text).unwrap(), rows);
    }

    #[test]
    fn markdown_marks_best_per_group() {
        let mut g = BenchGrid::new(
            vec![StyleId::Photo],
            vec![StyleId::Anime],
            vec!["a".into(), "b".into()],
            &ExclusionMask::default(),
        );
        g.set_cell(
            StyleId::Photo,
            StyleId::Anime,
            "a",
            MetricCell::scored(1.0, 0.2, 10.0, 20.0),
        )
        .unwrap();
        g.set_cell(
            StyleId::Photo,
            StyleId::Anime,
            "b",
            MetricCell::scored(2.0, 0.4, 10.0, 30.0),
        )
        .unwrap();
        let md = render_grid(&g, ReportFormat::Markdown);
        assert!(md.contains("| a | **1** | _0.2_ | **10** | _20_ |"), "{md}");
        assert!(md.contains("| b | _2_ | **0.4** | **10** | **30** |"), "{md}");
    }
}
