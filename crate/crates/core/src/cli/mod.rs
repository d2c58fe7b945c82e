//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.

mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use serde::Serialize;

use crate::engine::AsyncState;
use crate::error::Error;
use crate::events::{
    generate_synthetic, parse_events, subsample_random, subsample_uniform, write_bin, write_csv, EventFormat,
    EventList, Pattern, Resolution, SynthParams,
};
use crate::flops::FlopsReport;
use crate::graph::{build_graph, EventGraph, GraphParams, DEFAULT_MAX_DEGREE, DEFAULT_RADIUS};
use crate::model::{load_weights, preset, Model};
use crate::nn::{dense_forward, FeatureMap, NetworkState, Schedule};
use report::{write_atomic, Csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Recognition,
    Detection,
}

impl PresetName {
    fn as_str(self) -> &'static str {
        match self {
            PresetName::Recognition => "recognition",
            PresetName::Detection => "detection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternArg {
    MovingEdge,
    RandomNoise,
    Mixed,
}

impl From<PatternArg> for Pattern {
    fn from(p: PatternArg) -> Pattern {
        match p {
            PatternArg::MovingEdge => Pattern::MovingEdge,
            PatternArg::RandomNoise => Pattern::RandomNoise,
            PatternArg::Mixed => Pattern::Mixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Bin,
}

fn parse_voxels(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != 3 {
        return Err(format!("{s:?} is not NXxNYxNT"));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("{s:?} is not NXxNYxNT"))?;
        if *o == 0 {
            return Err(format!("{s:?} has a zero dimension"));
        }
    }
    Ok(out)
}

fn parse_resolution(s: &str) -> Result<Resolution, String> {
    s.parse::<Resolution>().map_err(|e| e.to_string())
}

fn parse_degree(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(d @ 1..=3) => Ok(d),
        _ => Err(format!("degree must be 1, 2 or 3, got {s:?}")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "evgraph", version, about = "Incremental graph neural network inference over event streams")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Network architecture.
    #[arg(long, global = true, value_enum, default_value = "recognition")]
    preset: PresetName,
    /// Connection radius in normalized units.
    #[arg(long, global = true, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    /// Maximum neighbors per node.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_DEGREE)]
    dmax: usize,
    /// Time scale; defaults to mapping the window onto the sensor's larger side.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Pooling grid as NXxNYxNT.
    #[arg(long, global = true, default_value = "12x16x16", value_parser = parse_voxels)]
    voxels: [usize; 3],
    /// Keep every K-th input event.
    #[arg(long, global = true, default_value_t = 10)]
    subsample: usize,
    /// Thin randomly (probability 1/K, seeded) instead of by index.
    #[arg(long, global = true)]
    random_thin: bool,
    /// B-spline degree of every convolution.
    #[arg(long, global = true, default_value = "1", value_parser = parse_degree)]
    degree: usize,
    /// Seed for weights and synthetic streams.
    #[arg(long, global = true, default_value_t = 3)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Maximum absolute deviation accepted by `verify`.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tolerance: f64,
}

/// Where events come from: a file, or a synthetic generator.
#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Event file (.csv or .bin).
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Generate a synthetic stream instead of reading a file.
    #[arg(long, value_enum)]
    synthetic: Option<PatternArg>,
    /// Sensor resolution WxH (required for synthetic input; optional for CSV).
    #[arg(long, value_parser = parse_resolution)]
    res: Option<Resolution>,
    /// Synthetic event count (before subsampling).
    #[arg(long, default_value_t = 20_000)]
    events: usize,
    /// Synthetic stream duration in microseconds.
    #[arg(long, default_value_t = 1_000_000)]
    duration_us: u64,
    /// Background rate for the mixed pattern, events per second.
    #[arg(long, default_value_t = 2_000.0)]
    noise_rate: f64,
    /// Graph window in microseconds; defaults to the stream's time span.
    #[arg(long)]
    window_us: Option<u64>,
    /// Weight file; random weights from `--seed` otherwise.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StreamArgs {
    /// Events used for the dense initialization; defaults to `--init-fraction`.
    #[arg(long)]
    init_events: Option<usize>,
    /// Fraction of the stream used for initialization.
    #[arg(long, default_value_t = 0.8)]
    init_fraction: f64,
    /// Stop after this many incremental events.
    #[arg(long)]
    max_events: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic event file.
    Synth {
        #[arg(long, value_enum, default_value = "mixed")]
        pattern: PatternArg,
        #[arg(long, default_value = "64x64", value_parser = parse_resolution)]
        res: Resolution,
        /// Exact event count; a Poisson count from `--rate` otherwise.
        #[arg(long)]
        events: Option<usize>,
        /// Events per second when `--events` is absent.
        #[arg(long, default_value_t = 50_000.0)]
        rate: f64,
        #[arg(long, default_value_t = 2_000.0)]
        noise_rate: f64,
        #[arg(long, default_value_t = 1_000_000)]
        duration_us: u64,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Output file; `<out>/events.csv` by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build the event graph and report its size.
    BuildGraph(#[command(flatten)] InputArgs),
    /// Print the event graph in text form.
    DumpGraph {
        #[command(flatten)]
        input: InputArgs,
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Dense forward pass over the whole graph.
    RunDense(#[command(flatten)] InputArgs),
    /// Initialize densely, then stream the remaining events incrementally.
    RunAsync {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        stream: StreamArgs,
    },
    /// Check incremental results against a dense recomputation after every event.
    Verify {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        stream: StreamArgs,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Per-event FLOPs and latency of incremental vs dense processing.
    Bench {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        stream: StreamArgs,
        /// Run convolutions through the counted reference schedule.
        #[arg(long)]
        reference: bool,
    },
    /// Write randomly initialized weights.
    InitWeights {
        /// Output file; `<out>/weights.aegw` by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
struct RunConfig<'a> {
    command: &'a str,
    preset: &'a str,
    graph: Option<&'a GraphParams>,
    subsample: usize,
    random_thin: bool,
    degree: usize,
    voxels: [usize; 3],
    seed: u64,
    tolerance: f64,
    input: Option<&'a InputArgs>,
    stream: Option<&'a StreamArgs>,
    out: &'a Path,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("AEGNN_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Io(m)) => {
            eprintln!("I/O error: {m}");
            EXIT_IO
        }
        Err(CliError::Failed(m)) => {
            eprintln!("FAILED: {m}");
            EXIT_FAILED
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<i32> {
    let g = &cli.global;
    if g.subsample == 0 {
        return Err(CliError::Usage("--subsample must be >= 1".into()));
    }
    if !(g.tolerance >= 0.0) {
        return Err(CliError::Usage("--tolerance must be >= 0".into()));
    }
    std::fs::create_dir_all(&g.out).map_err(|e| io_err(&g.out, e))?;
    match &cli.command {
        Command::Synth { pattern, res, events, rate, noise_rate, duration_us, format, output } => {
            let params = SynthParams {
                resolution: *res,
                duration_us: *duration_us,
                rate_hz: match events {
                    Some(n) => *n as f64 / (*duration_us as f64 * 1e-6),
                    None => *rate,
                },
                noise_rate_hz: *noise_rate,
                count: *events,
                seed: g.seed,
            };
            let ev = generate_synthetic((*pattern).into(), &params)?;
            let path = output.clone().unwrap_or_else(|| g.out.join("events.csv"));
            let fmt = match format {
                Some(FormatArg::Csv) => EventFormat::Csv,
                Some(FormatArg::Bin) => EventFormat::Bin,
                None => EventFormat::from_path(&path),
            };
            let mut buf = Vec::new();
            match fmt {
                EventFormat::Csv => write_csv(&ev, &mut buf),
                EventFormat::Bin => write_bin(&ev, &mut buf),
            }
            .map_err(|e| io_err(&path, e))?;
            write_atomic(&path, &buf)?;
            info!("wrote {} events to {}", ev.len(), path.display());
            println!("{} events -> {}", ev.len(), path.display());
            Ok(EXIT_OK)
        }
        Command::BuildGraph(input) => {
            let (_, graph) = load_graph(g, input)?;
            write_run_config(g, "build-graph", Some(graph.params()), Some(input), None)?;
            let summary = serde_json::json!({
                "nodes": graph.num_nodes(),
                "directed_edges": graph.topology().num_directed_edges(),
                "mean_degree": graph.topology().num_directed_edges() as f64 / graph.num_nodes().max(1) as f64,
                "params": graph.params(),
            });
            let text = serde_json::to_string_pretty(&summary).expect("json");
            write_atomic(&g.out.join("graph_summary.json"), text.as_bytes())?;
            println!("{text}");
            Ok(EXIT_OK)
        }
        Command::DumpGraph { input, output } => {
            let (_, graph) = load_graph(g, input)?;
            let dump = graph.dump();
            match output {
                Some(p) => write_atomic(p, dump.as_bytes())?,
                None => print!("{dump}"),
            }
            Ok(EXIT_OK)
        }
        Command::RunDense(input) => cmd_run_dense(g, input),
        Command::RunAsync { input, stream } => cmd_run_async(g, input, stream),
        Command::Verify { input, stream, inject_fault } => cmd_verify(g, input, stream, *inject_fault),
        Command::Bench { input, stream, reference } => cmd_bench(g, input, stream, *reference),
        Command::InitWeights { output } => {
            let model = Model::random_init(&architecture(g)?, g.seed)?;
            let path = output.clone().unwrap_or_else(|| g.out.join("weights.aegw"));
            let bytes = crate::model::write_weights(&model);
            write_atomic(&path, &bytes)?;
            println!("{} -> {}", model.config().preset, path.display());
            Ok(EXIT_OK)
        }
    }
}

fn architecture(g: &GlobalArgs) -> CliResult<crate::model::ArchitectureConfig> {
    Ok(preset(g.preset.as_str())?.with_degree(g.degree).with_voxels(g.voxels))
}

fn load_model(g: &GlobalArgs, input: &InputArgs) -> CliResult<Arc<Model>> {
    let model = match &input.weights {
        Some(p) => load_weights(p).map_err(|e| match e {
            Error::Io(io) => io_err(p, io),
            other => CliError::Usage(format!("{}: {other}", p.display())),
        })?,
        None => Model::random_init(&architecture(g)?, g.seed)?,
    };
    Ok(Arc::new(model))
}

fn load_events(g: &GlobalArgs, input: &InputArgs) -> CliResult<EventList> {
    let ev = match (&input.input, input.synthetic) {
        (Some(path), _) => {
            let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
            parse_events(&bytes, EventFormat::from_path(path), input.res)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(pattern)) => {
            let res = input.res.ok_or_else(|| CliError::Usage("--synthetic needs --res".into()))?;
            let mut params = SynthParams::with_count(res, input.duration_us, input.events, g.seed);
            params.noise_rate_hz = input.noise_rate;
            generate_synthetic(pattern.into(), &params)?
        }
        (None, None) => return Err(CliError::Usage("one of --input or --synthetic is required".into())),
    };
    let ev = if g.random_thin { subsample_random(&ev, g.subsample, g.seed)? } else { subsample_uniform(&ev, g.subsample)? };
    if ev.is_empty() {
        return Err(CliError::Usage("the event stream is empty after subsampling".into()));
    }
    debug!("{} events after subsampling by {}", ev.len(), g.subsample);
    Ok(ev)
}

fn graph_params(g: &GlobalArgs, input: &InputArgs, ev: &EventList) -> CliResult<GraphParams> {
    let events = ev.events();
    let span = events.last().map_or(0, |e| e.t) - events.first().map_or(0, |e| e.t) + 1;
    let mut p = GraphParams::for_window(ev.resolution(), input.window_us.unwrap_or(span));
    if let Some(b) = g.beta {
        p.beta = b;
    }
    p.radius = g.radius;
    p.max_degree = g.dmax;
    p.validate()?;
    Ok(p)
}

fn load_graph(g: &GlobalArgs, input: &InputArgs) -> CliResult<(EventList, EventGraph)> {
    let ev = load_events(g, input)?;
    let params = graph_params(g, input, &ev)?;
    let graph = build_graph(&ev, &params)?;
    Ok((ev, graph))
}

fn write_run_config(
    g: &GlobalArgs,
    command: &str,
    graph: Option<&GraphParams>,
    input: Option<&InputArgs>,
    stream: Option<&StreamArgs>,
) -> CliResult<()> {
    let cfg = RunConfig {
        command,
        preset: g.preset.as_str(),
        graph,
        subsample: g.subsample,
        random_thin: g.random_thin,
        degree: g.degree,
        voxels: g.voxels,
        seed: g.seed,
        tolerance: g.tolerance,
        input,
        stream,
        out: &g.out,
    };
    let text = serde_json::to_string_pretty(&cfg).expect("run config serializes");
    write_atomic(&g.out.join("run_config.json"), text.as_bytes())
}

fn init_count(stream: &StreamArgs, total: usize) -> CliResult<usize> {
    let b = match stream.init_events {
        Some(b) => b,
        None => {
            if !(stream.init_fraction > 0.0 && stream.init_fraction <= 1.0) {
                return Err(CliError::Usage("--init-fraction must be in (0, 1]".into()));
            }
            ((total as f64 * stream.init_fraction).round() as usize).max(1)
        }
    };
    if b == 0 || b > total {
        return Err(CliError::Usage(format!("init batch {b} must be in 1..={total}")));
    }
    Ok(b)
}

fn cmd_run_dense(g: &GlobalArgs, input: &InputArgs) -> CliResult<i32> {
    let model = load_model(g, input)?;
    let (_, graph) = load_graph(g, input)?;
    write_run_config(g, "run-dense", Some(graph.params()), Some(input), None)?;
    let (state, costs) = dense_forward(&model, &graph, Schedule::Fast)?;
    let mut report = FlopsReport::default();
    report.push_costs(0, &costs);
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(|e| io_err(&g.out, e))?;
    write_atomic(&g.out.join("dense_flops.csv"), &buf)?;
    write_readout(g, &[(graph.num_nodes(), &state.readout)])?;
    println!("nodes={} readout={:?} flops={}", graph.num_nodes(), state.readout, report.total_measured());
    Ok(EXIT_OK)
}

fn write_readout(g: &GlobalArgs, rows: &[(usize, &Vec<f64>)]) -> CliResult<()> {
    let width = rows.first().map_or(0, |r| r.1.len());
    let mut csv = Csv::new(std::iter::once("nodes".to_string()).chain((0..width).map(|c| format!("out{c}"))));
    for (n, v) in rows {
        csv.row(std::iter::once(n.to_string()).chain(v.iter().map(|x| format!("{x:e}"))));
    }
    write_atomic(&g.out.join("readout.csv"), csv.as_bytes())
}

fn cmd_run_async(g: &GlobalArgs, input: &InputArgs, stream: &StreamArgs) -> CliResult<i32> {
    let model = load_model(g, input)?;
    let ev = load_events(g, input)?;
    let params = graph_params(g, input, &ev)?;
    let b = init_count(stream, ev.len())?;
    write_run_config(g, "run-async", Some(&params), Some(input), Some(stream))?;
    let mut state = AsyncState::initialize(model, build_graph(&ev.slice(0, b), &params)?, Schedule::Fast)?;
    let end = stream.max_events.map_or(ev.len(), |m| (b + m).min(ev.len()));
    let mut report = FlopsReport::default();
    let mut outputs = Vec::new();
    for (k, e) in ev.events()[b..end].iter().enumerate() {
        let (out, stats) = state.process_event(e)?;
        report.push_costs(b + k, &stats.layers);
        outputs.push((state.graph().num_nodes(), out));
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(|e| io_err(&g.out, e))?;
    write_atomic(&g.out.join("async_flops.csv"), &buf)?;
    let refs: Vec<(usize, &Vec<f64>)> = outputs.iter().map(|(n, v)| (*n, v)).collect();
    write_readout(g, &refs)?;
    println!(
        "init={b} streamed={} async_flops={} readout={:?}",
        end - b,
        report.total_measured(),
        state.readout()
    );
    Ok(EXIT_OK)
}

/// Largest absolute deviation over the readout and every cached activation.
fn state_diff(a: &NetworkState, b: &NetworkState) -> f64 {
    let vec_diff = |x: &[f64], y: &[f64]| {
        FeatureMap::from_rows(x.len().max(1), x.to_vec())
            .ok()
            .zip(FeatureMap::from_rows(y.len().max(1), y.to_vec()).ok())
            .map_or(f64::INFINITY, |(p, q)| p.max_abs_diff(&q))
    };
    let mut d = vec_diff(&a.readout, &b.readout);
    if a.acts.len() != b.acts.len() {
        return f64::INFINITY;
    }
    for (x, y) in a.acts.iter().zip(&b.acts) {
        d = d.max(x.max_abs_diff(y));
    }
    d
}

fn cmd_verify(g: &GlobalArgs, input: &InputArgs, stream: &StreamArgs, inject_fault: bool) -> CliResult<i32> {
    let model = load_model(g, input)?;
    let ev = load_events(g, input)?;
    let params = graph_params(g, input, &ev)?;
    let b = init_count(stream, ev.len())?;
    write_run_config(g, "verify", Some(&params), Some(input), Some(stream))?;
    let mut state = AsyncState::initialize(Arc::clone(&model), build_graph(&ev.slice(0, b), &params)?, Schedule::Fast)?;
    if inject_fault {
        state.corrupt_activation(0, 0, 1.0e3);
    }
    let end = stream.max_events.map_or(ev.len(), |m| (b + m).min(ev.len()));
    let mut csv = Csv::new(
        [
            "event_index",
            "node_id",
            "max_abs_diff",
            "recomputed_rows",
            "total_rows",
            "touched_fraction",
            "async_measured_flops",
            "dense_measured_flops",
        ]
        .map(String::from),
    );
    let mut first_failure = None;
    for idx in b..end {
        let e = ev.events()[idx];
        let prefix = ev.slice(0, idx + 1);
        // the oracle rebuilds the graph from scratch, concurrently with the update
        let (oracle, update) = std::thread::scope(|s| {
            let oracle = s.spawn(|| -> crate::Result<_> {
                let graph = build_graph(&prefix, &params)?;
                dense_forward(&model, &graph, Schedule::Fast)
            });
            let update = state.process_event(&e);
            (oracle.join().expect("oracle thread panicked"), update)
        });
        let (dense, dense_costs) = oracle?;
        let (_, stats) = update?;
        let diff = state_diff(state.cache(), &dense);
        let dense_flops: u64 = dense_costs.iter().map(|c| c.measured).sum();
        csv.row([
            idx.to_string(),
            stats.node.to_string(),
            format!("{diff:e}"),
            stats.touched.to_string(),
            stats.total_rows.to_string(),
            format!("{:.6}", stats.touched_fraction),
            stats.measured().to_string(),
            dense_flops.to_string(),
        ]);
        if !(diff <= g.tolerance) && first_failure.is_none() {
            first_failure = Some((idx, diff));
            break;
        }
    }
    write_atomic(&g.out.join("verify.csv"), csv.as_bytes())?;
    match first_failure {
        Some((idx, diff)) => {
            Err(CliError::Failed(format!("event {idx}: max abs diff {diff:e} exceeds tolerance {:e}", g.tolerance)))
        }
        None => {
            println!("verified {} events after init on {b}: all within {:e}", end - b, g.tolerance);
            Ok(EXIT_OK)
        }
    }
}

fn cmd_bench(g: &GlobalArgs, input: &InputArgs, stream: &StreamArgs, reference: bool) -> CliResult<i32> {
    let model = load_model(g, input)?;
    let ev = load_events(g, input)?;
    let params = graph_params(g, input, &ev)?;
    let b = init_count(stream, ev.len())?;
    write_run_config(g, "bench", Some(&params), Some(input), Some(stream))?;
    let schedule = if reference { Schedule::Reference } else { Schedule::Fast };
    let mut state = AsyncState::initialize(Arc::clone(&model), build_graph(&ev.slice(0, b), &params)?, schedule)?;
    let end = stream.max_events.map_or(ev.len(), |m| (b + m).min(ev.len()));
    let mut report = FlopsReport::default();
    let mut events = Csv::new(
        [
            "event_index",
            "async_analytic_flops",
            "async_measured_flops",
            "dense_analytic_flops",
            "dense_measured_flops",
            "ratio",
            "touched_fraction",
            "async_wall_us",
        ]
        .map(String::from),
    );
    let (mut total_async, mut total_dense) = (0u64, 0u64);
    let mut per_event = Vec::new();
    let mut wall = Vec::new();
    for idx in b..end {
        let t0 = Instant::now();
        let (_, stats) = state.process_event(&ev.events()[idx])?;
        let us = t0.elapsed().as_secs_f64() * 1e6;
        let (_, dense) = dense_forward(&model, state.graph(), schedule)?;
        let dense_measured: u64 = dense.iter().map(|c| c.measured).sum();
        let dense_analytic: u64 = dense.iter().map(|c| c.analytic).sum();
        report.push_costs(idx, &stats.layers);
        total_async += stats.measured();
        total_dense += dense_measured;
        per_event.push(stats.measured() as f64);
        wall.push(us);
        events.row([
            idx.to_string(),
            stats.analytic().to_string(),
            stats.measured().to_string(),
            dense_analytic.to_string(),
            dense_measured.to_string(),
            format!("{:.6}", stats.measured() as f64 / dense_measured as f64),
            format!("{:.6}", stats.touched_fraction),
            format!("{us:.1}"),
        ]);
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(|e| io_err(&g.out, e))?;
    write_atomic(&g.out.join("bench_flops.csv"), &buf)?;
    write_atomic(&g.out.join("bench_events.csv"), events.as_bytes())?;
    let n = per_event.len();
    let (mean, std) = mean_std(&per_event);
    let (wall_mean, _) = mean_std(&wall);
    let ratio = if total_dense == 0 { 0.0 } else { total_async as f64 / total_dense as f64 };
    let mut summary = Csv::new(
        [
            "events",
            "total_async_flops",
            "total_dense_flops",
            "ratio",
            "async_flops_per_event_mean",
            "async_flops_per_event_std",
            "async_wall_us_mean",
        ]
        .map(String::from),
    );
    summary.row([
        n.to_string(),
        total_async.to_string(),
        total_dense.to_string(),
        format!("{ratio:.6}"),
        format!("{mean:.1}"),
        format!("{std:.1}"),
        format!("{wall_mean:.1}"),
    ]);
    write_atomic(&g.out.join("bench_summary.csv"), summary.as_bytes())?;
    println!(
        "events={n} async={:.1}±{:.1} kFLOP/ev ratio={ratio:.4} ({:.1}x reduction)",
        mean / 1e3,
        std / 1e3,
        if ratio > 0.0 { 1.0 / ratio } else { f64::INFINITY }
    );
    Ok(EXIT_OK)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}
