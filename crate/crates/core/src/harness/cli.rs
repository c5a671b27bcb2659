//! `stylevar` command line: ingest, run, eval, report and simulate.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use super::{evaluate, reference, EvalOptions, MetricReport, Provenance, ReportFormat};
use super::{parse_grid, render_grid, render_summary, render_summary_markdown, BenchGrid, SummaryRow};
use crate::backends::mock::{MockFixtures, MockServer};
use crate::backends::Backends;
use crate::backends::{BackendEndpoint, ServiceEndpoints};
use crate::conditioning::{
    first_divergence, gated_sample, window_attention_traced, window_partition, AttentionWeights, SamplerConfig,
    TokenSequence, WindowConfig,
};
use crate::dataset::{load_manifest, style_stats, ExclusionMask, StyleId};
use crate::metrics::FeatureMap;
use crate::pipeline::{read_run_log, run_log_to_string, Clock, FixedClock, Pipeline, PipelineConfig, SystemClock};
use crate::synthetic;
use crate::tensor::TensorIndex;

#[derive(Debug, Parser)]
#[command(
    name = "stylevar",
    version,
    about = "Zero-shot style variation pipeline and benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a manifest and print per-style counts.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run the pipeline over a manifest and write a JSONL run log.
    Run(RunArgs),
    /// Score a run log against a tensor index.
    Eval(EvalArgs),
    /// Render a grid or one of the built-in reference tables.
    Report(ReportArgs),
    /// Conditioning demos.
    #[command(subcommand)]
    Simulate(Simulate),
}

#[derive(Debug, Args)]
struct MaskArgs {
    /// Skip abstract inputs and photo outputs.
    #[arg(long)]
    benchmark_mask: bool,
    #[arg(long, value_delimiter = ',')]
    exclude_inputs: Vec<StyleId>,
    #[arg(long, value_delimiter = ',')]
    exclude_outputs: Vec<StyleId>,
}

impl MaskArgs {
    fn mask(&self) -> ExclusionMask {
        let mut mask = if self.benchmark_mask {
            ExclusionMask::benchmark_default()
        } else {
            ExclusionMask::default()
        };
        for s in &self.exclude_inputs {
            mask = mask.exclude_input(*s);
        }
        for s in &self.exclude_outputs {
            mask = mask.exclude_output(*s);
        }
        mask
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<StyleId>,
    /// Serve mock backends on loopback instead of calling real services.
    #[arg(long)]
    mock: bool,
    /// Mock fixture file; defaults to fixtures synthesized from the manifest.
    #[arg(long, requires = "mock")]
    fixtures: Option<PathBuf>,
    /// Base URL shared by all services (per-service env overrides apply).
    #[arg(long, conflicts_with = "mock")]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 2)]
    retries: u32,
    /// Pipeline config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stamp every record with time 0 so logs are byte-reproducible.
    #[arg(long)]
    frozen_clock: bool,
    #[command(flatten)]
    mask: MaskArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value = crate::tensor::DEFAULT_METHOD)]
    method: String,
    /// Extra methods scored from index entries.
    #[arg(long, value_delimiter = ',')]
    baselines: Vec<String>,
    /// Manifest and config files, hashed into the report provenance.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report JSON destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the grid as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    frozen_clock: bool,
    #[command(flatten)]
    mask: MaskArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ReferenceTable {
    ImageDriven,
    TextDriven,
    Summary,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Grid file: CSV, grid JSON or report JSON.
    #[arg(long, required_unless_present = "reference", conflicts_with = "reference")]
    grid: Option<PathBuf>,
    /// Built-in published numbers (not reproducible here).
    #[arg(long, value_enum)]
    reference: Option<ReferenceTable>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Print per-method means instead of the grid.
    #[arg(long)]
    summary: bool,
}

#[derive(Debug, Subcommand)]
enum Simulate {
    /// Run the gated sampler under two conditions and report where they diverge.
    Gate {
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 30)]
        gate: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 16)]
        tokens: usize,
    },
    /// Window attention over a random feature map; prints the first window's weights.
    Attention {
        #[arg(long, default_value_t = 4)]
        height: usize,
        #[arg(long, default_value_t = 4)]
        width: usize,
        #[arg(long, default_value_t = 4)]
        channels: usize,
        #[arg(long, default_value_t = 2)]
        window: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Entry point for the binary; writes to the process's stdout and stderr.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Parses `argv` (program name first) and executes the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let (CliError::Validation(msg) | CliError::Runtime(msg)) = &e;
            let _ = writeln!(err, "error: {msg}");
            e.code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Ingest { manifest } => ingest(&manifest, out),
        Command::Run(args) => run_batch(args, out, err),
        Command::Eval(args) => eval(args, out),
        Command::Report(args) => report(args, out),
        Command::Simulate(sim) => simulate(sim, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(runtime)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn ingest(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = load_manifest(path).map_err(invalid)?;
    let mut text = String::new();
    for (style, count) in style_stats(&manifest) {
        text.push_str(&format!("{style}\t{count}\n"));
    }
    text.push_str(&format!("total\t{}\n", manifest.len()));
    emit(out, &text)
}

fn run_batch(args: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest).map_err(invalid)?;
    let mut config = match &args.config {
        Some(p) => PipelineConfig::load(p).map_err(invalid)?,
        None => PipelineConfig::default(),
    };
    if let [only] = args.targets[..] {
        config.target_style = only;
    }
    if args.parallelism == 0 {
        return Err(invalid("--parallelism must be at least 1"));
    }
    if args.timeout_ms == 0 {
        return Err(invalid("--timeout-ms must be positive"));
    }

    // keeps the mock server alive for the whole batch
    let mut _server = None;
    let base = if args.mock {
        let fixtures = match &args.fixtures {
            Some(p) => MockFixtures::load(p).map_err(invalid)?,
            None => synthetic::mock_fixtures_for(&manifest),
        };
        let server = MockServer::start(fixtures).map_err(runtime)?;
        let url = server.url();
        _server = Some(server);
        url
    } else {
        args.endpoint
            .clone()
            .ok_or_else(|| invalid("either --mock or --endpoint is required"))?
    };
    let endpoint = BackendEndpoint::new(base)
        .with_timeout(Duration::from_millis(args.timeout_ms))
        .with_retries(args.retries);
    let mut endpoints = ServiceEndpoints::single(endpoint);
    if !args.mock {
        endpoints = endpoints.with_env_overrides();
    }
    let backends = Backends::http(&endpoints).map_err(invalid)?;
    let clock: Arc<dyn Clock> = if args.frozen_clock {
        Arc::new(FixedClock(0))
    } else {
        Arc::new(SystemClock)
    };
    let pipeline = Pipeline::new(backends, config).map_err(invalid)?.with_clock(clock);
    let runs = pipeline
        .run_batch(&manifest, &args.targets, &args.mask.mask(), args.parallelism)
        .map_err(runtime)?;

    let log = run_log_to_string(&runs);
    match &args.out {
        Some(p) => write_file(p, &log)?,
        None => emit(out, &log)?,
    }
    let failed = runs.iter().filter(|r| !r.is_ok()).count();
    let _ = writeln!(err, "runs: {} ok, {failed} failed", runs.len() - failed);
    Ok(())
}

fn eval(args: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let runs = read_run_log(&args.runs).map_err(invalid)?;
    let index = TensorIndex::load(&args.index).map_err(invalid)?;
    let corpus = index.corpus_grams().map_err(runtime)?;
    let options = EvalOptions {
        method: args.method.clone(),
        baselines: args.baselines.clone(),
        mask: args.mask.mask(),
        ..EvalOptions::default()
    };
    let grid = evaluate(&runs, &index, &corpus, &options).map_err(|e| match e {
        super::HarnessError::MissingTensors(_) => invalid(e),
        other => runtime(other),
    })?;
    let now = if args.frozen_clock { 0 } else { SystemClock.now_ms() };
    let provenance = Provenance::from_files(args.manifest.as_deref(), args.config.as_deref(), now).map_err(invalid)?;
    if let Some(p) = &args.csv {
        write_file(p, &render_grid(&grid, ReportFormat::Csv))?;
    }
    let report = MetricReport::new(grid, provenance);
    let json = report.to_json() + "\n";
    match &args.out {
        Some(p) => write_file(p, &json),
        None => emit(out, &json),
    }
}

fn load_grid(path: &Path) -> Result<(BenchGrid, Option<MetricReport>), CliError> {
    let text = read_file(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return Ok((parse_grid(&text, ReportFormat::Csv).map_err(invalid)?, None));
    }
    if let Ok(report) = MetricReport::from_json(&text) {
        return Ok((report.grid.clone(), Some(report)));
    }
    Ok((parse_grid(&text, ReportFormat::Json).map_err(invalid)?, None))
}

fn render_rows(rows: &[SummaryRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_summary(rows),
        ReportFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
        ReportFormat::Markdown => render_summary_markdown(rows),
    }
}

fn report(args: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let grid = match (args.reference, &args.grid) {
        (Some(ReferenceTable::Summary), _) => return emit(out, &render_rows(&reference::summary_table(), args.format)),
        (Some(ReferenceTable::ImageDriven), _) => reference::image_driven_grid(),
        (Some(ReferenceTable::TextDriven), _) => reference::text_driven_grid(),
        (None, Some(path)) => {
            let (grid, report) = load_grid(path)?;
            if args.summary {
                let report = report.unwrap_or_else(|| MetricReport::new(grid, Provenance::new(None, None, 0)));
                return emit(out, &render_rows(&report.summary(), args.format));
            }
            grid
        }
        (None, None) => return Err(invalid("one of --grid or --reference is required")),
    };
    if args.summary {
        let report = MetricReport::new(grid, Provenance::new(None, None, 0));
        return emit(out, &render_rows(&report.summary(), args.format));
    }
    emit(out, &render_grid(&grid, args.format))
}

fn simulate(sim: Simulate, out: &mut dyn Write) -> Result<(), CliError> {
    match sim {
        Simulate::Gate {
            steps,
            gate,
            seed,
            dim,
            tokens,
        } => {
            let cfg = SamplerConfig {
                total_steps: steps,
                gate_step: gate,
                ..SamplerConfig::default()
            };
            cfg.validate().map_err(invalid)?;
            let weights = AttentionWeights::from_seed(dim, seed).map_err(invalid)?;
            let init = TokenSequence::random(tokens, dim, seed.wrapping_add(1)).map_err(invalid)?;
            let cond_a = TokenSequence::random(4, dim, seed.wrapping_add(2)).map_err(invalid)?;
            let cond_b = TokenSequence::random(4, dim, seed.wrapping_add(3)).map_err(invalid)?;
            let a = gated_sample(&init, &cond_a, &cfg, &weights).map_err(runtime)?;
            let b = gated_sample(&init, &cond_b, &cfg, &weights).map_err(runtime)?;
            let divergence = first_divergence(&a, &b);
            let identical = divergence.map_or(steps, |s| s - 1);
            let first = divergence.map_or("none".to_string(), |s| s.to_string());
            emit(
                out,
                &format!(
                    "steps: {steps}, gate: {gate}, seed: {seed}\nidentical through step: {identical}\nfirst divergence step: {first}\n"
                ),
            )
        }
        Simulate::Attention {
            height,
            width,
            channels,
            window,
            seed,
        } => {
            let tokens = TokenSequence::random(height * width, channels, seed).map_err(invalid)?;
            let fm =
                FeatureMap::new(channels, height, width, channel_major(&tokens, height, width)).map_err(invalid)?;
            let cfg = WindowConfig::new(window).map_err(invalid)?;
            let windows = window_partition(&fm, cfg).map_err(invalid)?;
            let weights = AttentionWeights::from_seed(channels, seed.wrapping_add(1)).map_err(invalid)?;
            let trace = window_attention_traced(&windows[0], &weights).map_err(runtime)?;
            let mut text = format!(
                "windows: {} of {} tokens; attention weights of window 0:\n",
                windows.len(),
                windows[0].len()
            );
            for r in 0..trace.weights.nrows() {
                let row: Vec<String> = trace.weights.row(r).iter().map(|w| format!("{w:.4}")).collect();
                text.push_str(&row.join(" "));
                text.push('\n');
            }
            emit(out, &text)
        }
    }
}

fn channel_major(tokens: &TokenSequence, height: usize, width: usize) -> Vec<f64> {
    let c = tokens.dim();
    let mut values = vec![0.0; c * height * width];
    for p in 0..height * width {
        for (ch, v) in tokens.row(p).into_iter().enumerate() {
            values[ch * height * width + p] = v;
        }
    }
    values
}
