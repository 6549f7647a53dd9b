// SPDX-License-Identifier: MIT OR Apache-2.0

//! `lbd`: changepoint detection with simultaneous confidence intervals.
//!
//! Exit codes: 0 success, 2 invalid input data, 3 invalid configuration.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use lbd_core::diagnostics::{self, ChangepointGeometry, DEFAULT_SLACK};
use lbd_core::grid::{triplet_count_bound, TripletFilter, TripletGrid};
use lbd_core::io::{parse_interval_list, parse_series_csv, Column};
use lbd_core::signals::{self, builtin_signal, coverage_experiment, hard_instance};
use lbd_core::{minimal_and_disjoint, DetectionResult, Detector, DetectorConfig, LbdError, TestModel, WilcoxonMode};

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "lbd", version, about = "Lean Bonferroni changepoint detection")]
struct Cli {
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long, global = true, env = "LBD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a series and report changepoint confidence intervals.
    Detect(DetectArgs),
    /// Inspect the triplet grid for a series length.
    Grid(GridArgs),
    /// Detectability and localisation diagnostics for one changepoint.
    Plan(PlanArgs),
    /// Minimal intervals and a largest disjoint family of an interval list.
    Intervals(IntervalsArgs),
    /// Monte Carlo coverage experiment on a benchmark or stress signal.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    GaussianKnown,
    GaussianUnknown,
    Poisson,
    Exponential,
    Wilcoxon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// CSV file with one value per row, or several columns and `--column`.
    #[arg(long)]
    input: PathBuf,
    /// 0-based column index or header name.
    #[arg(long)]
    column: Option<String>,
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Noise standard deviation, required for gaussian-known.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Exact rank-sum critical values where affordable.
    #[arg(long)]
    wilcoxon_exact: bool,
    /// Only test windows with e - s <= n^p.
    #[arg(long, value_name = "P")]
    max_len_exp: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
    /// Write (index, value) rows, a blank line, then (lo, hi) rows of the
    /// minimal intervals.
    #[arg(long, value_name = "TSV")]
    emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    n: usize,
    /// Per-level and per-block counts (the default without `--json`).
    #[arg(long)]
    stats: bool,
    /// Every triplet as a JSON line {s, m, e, level, block}.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    jump: f64,
    #[arg(long)]
    dleft: usize,
    #[arg(long)]
    dright: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_SLACK)]
    b: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct IntervalsArgs {
    /// JSON array of [lo, hi] pairs or {"lo", "hi"} objects.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "hard_instance", conflicts_with = "hard_instance")]
    signal: Option<String>,
    /// Alternating-tent signal at the detection boundary.
    #[arg(long, requires_all = ["n", "m", "eps"])]
    hard_instance: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    nsim: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModelKind::GaussianKnown)]
    model: ModelKind,
    #[arg(long)]
    json: bool,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<LbdError> for Failure {
    fn from(e: LbdError) -> Self {
        let message = match &e {
            LbdError::Parse { line, message } => format!("row {line}: {message}"),
            _ => e.to_string(),
        };
        Failure {
            code: if e.is_data_error() { 2 } else { 3 },
            message,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lbd: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let threads = cli.threads.unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    let parallel = threads != 1;
    match cli.command {
        Command::Detect(args) => detect(args, parallel),
        Command::Grid(args) => grid(args),
        Command::Plan(args) => plan(args),
        Command::Intervals(args) => intervals(args),
        Command::Simulate(args) => simulate(args, parallel),
    }
}

fn model_from(kind: ModelKind, sigma: Option<f64>, wilcoxon_exact: bool) -> Result<TestModel, Failure> {
    let model = match kind {
        ModelKind::GaussianKnown => TestModel::GaussianKnown {
            sigma: sigma.ok_or_else(|| Failure::config("--sigma is required for gaussian-known"))?,
        },
        ModelKind::GaussianUnknown => TestModel::GaussianUnknown,
        ModelKind::Poisson => TestModel::Poisson,
        ModelKind::Exponential => TestModel::Exponential,
        ModelKind::Wilcoxon if wilcoxon_exact => TestModel::Wilcoxon(WilcoxonMode::exact()),
        ModelKind::Wilcoxon => TestModel::Wilcoxon(WilcoxonMode::Bound),
    };
    model.check()?;
    Ok(model)
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

/// Pretty JSON with a `schema_version` field; keys are sorted, so parsing and
/// re-serializing reproduces the text.
fn json_document(command: &str, body: impl Serialize) -> Result<String, Failure> {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("command".into(), json!(command));
    match serde_json::to_value(body).map_err(|e| Failure::config(e.to_string()))? {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("result".into(), other);
        }
    }
    serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| Failure::config(e.to_string()))
}

fn print(text: &str) -> CmdResult {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    Ok(())
}

fn detect(args: DetectArgs, parallel: bool) -> CmdResult {
    let model = model_from(args.model, args.sigma, args.wilcoxon_exact)?;
    if args.model != ModelKind::GaussianKnown && args.sigma.is_some() {
        return Err(Failure::config("--sigma only applies to gaussian-known"));
    }
    if args.wilcoxon_exact && args.model != ModelKind::Wilcoxon {
        return Err(Failure::config("--wilcoxon-exact only applies to wilcoxon"));
    }
    let mut config = DetectorConfig::new(model, args.alpha).with_parallel(parallel);
    if let Some(p) = args.max_len_exp {
        config = config.with_max_len_exp(p);
    }
    let text = read_input(&args.input)?;
    let column = args.column.as_deref().map(Column::parse);
    let series = parse_series_csv(&text, column.as_ref())?;
    let detector = Detector::new(config, series.values.len()).map_err(|e| match e {
        // too short a series is a property of the input
        LbdError::InvalidArgument(m) if series.values.len() < lbd_core::grid::MIN_SERIES_LEN => Failure::data(m),
        other => other.into(),
    })?;
    let result = detector
        .run(&series.values)
        .map_err(|e| Failure::from(series.locate(e)))?;
    if let Some(path) = &args.emit_plot_data {
        write_plot_data(path, &series.values, &result)?;
    }
    match args.output {
        OutputFormat::Json => print(&json_document("detect", &result)?),
        OutputFormat::Text => print(&detect_text(&result)),
    }
}

fn write_plot_data(path: &Path, y: &[f64], result: &DetectionResult) -> CmdResult {
    let mut tsv = String::with_capacity(y.len() * 12);
    for (i, v) in y.iter().enumerate() {
        let _ = writeln!(tsv, "{}\t{v}", i + 1);
    }
    tsv.push('\n');
    for iv in &result.minimal {
        let _ = writeln!(tsv, "{}\t{}", iv.lo, iv.hi);
    }
    fs::write(path, tsv).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn detect_text(r: &DetectionResult) -> String {
    let mut s = String::new();
    let c = &r.config;
    let _ = writeln!(s, "model: {}  alpha: {}  n: {}", c.model, c.alpha, c.n);
    let _ = writeln!(
        s,
        "triplets tested: {}  blocks: {:?}",
        c.triplets_evaluated, c.block_sizes
    );
    let _ = writeln!(s, "significant triplets: {}", r.detections.len());
    let _ = writeln!(s, "lower bound on number of changepoints: {}", r.lower_bound);
    let _ = writeln!(s, "minimal intervals:");
    for iv in &r.minimal {
        let _ = writeln!(s, "  [{}, {}]", iv.lo, iv.hi);
    }
    let _ = write!(s, "disjoint intervals:");
    for iv in &r.disjoint {
        let _ = write!(s, " [{}, {}]", iv.lo, iv.hi);
    }
    s
}

#[derive(Serialize)]
struct LevelRow {
    level: u32,
    spacing: usize,
    block: u32,
    intervals: u64,
    triplets: u64,
}

#[derive(Serialize)]
struct GridStats {
    n: usize,
    max_level: u32,
    first_block_levels: u32,
    lengths: usize,
    levels: Vec<LevelRow>,
    block_sizes: Vec<u64>,
    triplets: u64,
    triplet_bound: f64,
    within_bound: bool,
}

fn grid_stats(g: &TripletGrid) -> GridStats {
    let filter = TripletFilter::default();
    let counts = g.level_counts(&filter);
    let intervals = g.interval_counts();
    let levels: Vec<LevelRow> = g
        .levels()
        .iter()
        .map(|l| LevelRow {
            level: l.level,
            spacing: l.spacing,
            block: g.block_of_level(l.level),
            intervals: intervals[l.level as usize],
            triplets: counts[l.level as usize],
        })
        .collect();
    let triplets: u64 = counts.iter().sum();
    let bound = triplet_count_bound(g.n());
    GridStats {
        n: g.n(),
        max_level: g.levels().len() as u32 - 1,
        first_block_levels: g.first_block_levels(),
        lengths: g.lengths().len(),
        levels,
        block_sizes: g.block_sizes(&filter),
        triplets,
        triplet_bound: bound,
        within_bound: triplets as f64 <= bound,
    }
}

fn grid(args: GridArgs) -> CmdResult {
    let g = TripletGrid::new(args.n)?;
    let stats = grid_stats(&g);
    if !args.json {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "n = {}, levels 0..={}, s_n = {}, |L_n| = {}",
            stats.n, stats.max_level, stats.first_block_levels, stats.lengths
        );
        let _ = writeln!(s, "level  spacing  block  intervals  triplets");
        for r in &stats.levels {
            let _ = writeln!(
                s,
                "{:>5}  {:>7}  {:>5}  {:>9}  {:>8}",
                r.level, r.spacing, r.block, r.intervals, r.triplets
            );
        }
        let _ = writeln!(s, "block sizes: {:?}", stats.block_sizes);
        let _ = write!(
            s,
            "triplets: {} <= 24 n (ln en)^(5/2) = {:.0}: {}",
            stats.triplets,
            stats.triplet_bound,
            if stats.within_bound { "yes" } else { "NO" }
        );
        return print(&s);
    }
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    if args.stats {
        let mut doc = serde_json::to_value(&stats).map_err(|e| Failure::config(e.to_string()))?;
        doc["schema_version"] = json!(SCHEMA_VERSION);
        let _ = writeln!(out, "{doc}");
    }
    let mut failed = false;
    g.for_each_triplet(&TripletFilter::default(), |t| {
        if !failed
            && writeln!(
                out,
                r#"{{"s":{},"m":{},"e":{},"level":{},"block":{}}}"#,
                t.s, t.m, t.e, t.level, t.block
            )
            .is_err()
        {
            failed = true;
        }
    });
    let _ = out.flush();
    Ok(())
}

fn plan(args: PlanArgs) -> CmdResult {
    let geo = ChangepointGeometry {
        jump: args.jump,
        d_left: args.dleft,
        d_right: args.dright,
        n: args.n,
        m: args.m,
        b: args.b,
    };
    let energy = diagnostics::energy(&geo)?;
    let detection = diagnostics::detection_threshold(&geo)?;
    let count = diagnostics::count_threshold(&geo)?;
    let detectable = energy >= detection;
    let precision = diagnostics::precision_bound(&geo);
    if args.json {
        let (bound, note) = match &precision {
            Ok(p) => (json!(p), Value::Null),
            Err(e) => (Value::Null, json!(e.to_string())),
        };
        let body = json!({
            "geometry": geo,
            "energy": energy,
            "detection_threshold": detection,
            "count_threshold": count,
            "detectable": detectable,
            "separable": energy >= count,
            "precision": bound,
            "precision_note": note,
        });
        return print(&json_document("plan", body)?);
    }
    let mut s = String::new();
    let _ = writeln!(s, "energy:              {energy:.6}");
    let _ = writeln!(s, "detection threshold: {detection:.6}");
    let _ = writeln!(s, "count threshold:     {count:.6}");
    let _ = writeln!(s, "detectable:          {}", if detectable { "yes" } else { "no" });
    match precision {
        Ok(p) => {
            let _ = write!(s, "precision bound:     {:.6} ({:?} case)", p.delta, p.case);
        }
        Err(e) => {
            let _ = write!(s, "precision bound:     n/a ({e})");
        }
    }
    print(&s)
}

fn intervals(args: IntervalsArgs) -> CmdResult {
    let list = parse_interval_list(&read_input(&args.input)?)?;
    let summary = minimal_and_disjoint(&list)?;
    if args.json {
        return print(&json_document("intervals", &summary)?);
    }
    let fmt = |v: &[lbd_core::ClosedInterval]| {
        v.iter()
            .map(|iv| format!("[{}, {}]", iv.lo, iv.hi))
            .collect::<Vec<_>>()
            .join(" ")
    };
    print(&format!(
        "minimal: {}\ndisjoint: {}\ncount: {}",
        fmt(&summary.minimal),
        fmt(&summary.disjoint),
        summary.count
    ))
}

fn simulate(args: SimulateArgs, parallel: bool) -> CmdResult {
    let spec = match (&args.signal, args.hard_instance) {
        (Some(name), false) => builtin_signal(name)?,
        (None, true) => hard_instance(args.n.unwrap_or(0), args.m.unwrap_or(0), args.eps.unwrap_or(f64::NAN))?,
        _ => return Err(Failure::config("give exactly one of --signal or --hard-instance")),
    };
    let sigma = (args.model == ModelKind::GaussianKnown).then_some(spec.sigma);
    let model = model_from(args.model, sigma, false)?;
    let config = DetectorConfig::new(model, args.alpha).with_parallel(parallel);
    let report = coverage_experiment(&spec, &config, args.nsim, args.seed)?;
    if args.json {
        return print(&json_document("simulate", &report)?);
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "signal: {}  n: {}  K: {}  model: {}",
        report.signal, spec.length, report.k, report.model
    );
    let _ = writeln!(
        s,
        "alpha: {}  replicates: {}  seed: {}",
        report.alpha, report.n_sim, report.seed
    );
    let _ = writeln!(s, "generator: {}", signals::GENERATOR);
    let _ = writeln!(
        s,
        "p1_hat: {:.4}  p2_hat: {:.4}  mean N: {:.4}",
        report.p1_hat, report.p2_hat, report.mean_n
    );
    let _ = write!(s, "N - K:");
    for (d, p) in &report.hist_n_minus_k {
        let _ = write!(s, "  {d}: {p:.4}");
    }
    print(&s)
}
