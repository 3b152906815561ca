//! Command implementations behind the `canvas` binary. Each command returns
//! the text it would print so tests can drive it without spawning a process.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use canvas_bench::conditions::{run_condition, BenchError, Condition, ConditionResult, RunContext};
use canvas_bench::generate::{generate_cases, BenchmarkCase, Rendering, Variant};
use canvas_bench::rag::RagPreset;
use canvas_bench::recall::retrieval_recall_eval;
use canvas_bench::report::{
    read_cases, read_run_header, recall_markdown, summary_table, sweep_markdown, write_cases, write_run, ReportError,
    RunHeader, RESULT_FORMAT_VERSION,
};
use canvas_bench::sweep::{run_sweep, Arm, SweepAxis};
use canvas_core::backends::BackendError;
use canvas_core::config::{Backends, ConfigError, EngineConfig};
use canvas_core::extraction::ConversationTurn;
use canvas_core::graph_build::LinkThresholds;
use canvas_core::memory::{CanvasMemory, GraphSummary, IngestError};
use canvas_core::model::{deserialize_graph, serialize_graph, CanvasGraph, GraphError};
use canvas_core::retrieval::{RetrievalError, RetrievalOutcome, Retriever};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Usage(String),
    #[error("replay of {0} differs from the original result file")]
    ReplayMismatch(PathBuf),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "canvas", version, about = "Verbatim-grounded conversation memory and its benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract artifacts from a conversation into a graph file.
    Ingest(IngestArgs),
    /// Retrieve the injection block for a question.
    Query(QueryArgs),
    /// Benchmark runs, sweeps and retrieval-only evaluation.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Shorthand for `bench sweep`.
    Sweep(SweepArgs),
    /// List a graph's nodes and edges.
    Export(ExportArgs),
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Run conditions over generated or loaded cases.
    Run(RunArgs),
    /// Run one parameter grid.
    Sweep(SweepArgs),
    /// Keyword recall of the injection block alone, per hop count.
    RetrievalRecall(RecallArgs),
    /// Write generated cases to a case file.
    Generate(GenerateArgs),
}

/// Flags layered over the built-in defaults and the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct BaseArgs {
    /// TOML engine config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Retrieval preset (standard, locomo).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub hops: Option<u32>,
    /// Injection budget in tokens.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub no_gleaning: bool,
    #[arg(long)]
    pub no_rerank: bool,
    /// Worker threads for benchmark cases.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl BaseArgs {
    fn layered(&self) -> Result<EngineConfig> {
        let mut cfg = match &self.config {
            Some(p) => EngineConfig::load(p)?,
            None => EngineConfig::default(),
        };
        if let Some(p) = &self.preset {
            cfg.apply_preset(p)?;
        }
        if let Some(h) = self.hops {
            cfg.retrieval.hops = h;
        }
        if let Some(b) = self.budget {
            cfg.retrieval.budget_tokens = b;
        }
        if self.no_gleaning {
            cfg.gleaning = false;
        }
        if self.no_rerank {
            cfg.retrieval.rerank = false;
        }
        if let Some(j) = self.jobs {
            cfg.bench.jobs = j.max(1);
        }
        Ok(cfg)
    }

    /// Defaults, then the config file, then flags; resolved and validated.
    pub fn resolve(&self) -> Result<EngineConfig> {
        Ok(self.layered()?.resolve()?)
    }
}

/// Base flags plus the single-value knobs that sweeps vary.
#[derive(Debug, Clone, Default, Args)]
pub struct EngineArgs {
    #[command(flatten)]
    pub base: BaseArgs,
    /// Reference-edge threshold; the causal threshold follows 0.05 below.
    #[arg(long)]
    pub theta_ref: Option<f64>,
    #[arg(long)]
    pub theta_causal: Option<f64>,
    /// Semantic weight of the hybrid score.
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl EngineArgs {
    pub fn resolve(&self) -> Result<EngineConfig> {
        let mut cfg = self.base.layered()?;
        if let Some(t) = self.theta_ref {
            let derived = LinkThresholds::from_theta_ref(t);
            cfg.linking.thresholds.theta_ref = derived.theta_ref;
            cfg.linking.thresholds.theta_causal = derived.theta_causal;
        }
        if let Some(t) = self.theta_causal {
            cfg.linking.thresholds.theta_causal = t;
        }
        if let Some(a) = self.alpha {
            cfg.retrieval.weights.alpha = a;
        }
        Ok(cfg.resolve()?)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Conversation as a JSON array of turns or one turn object per line.
    pub conversation: PathBuf,
    /// Graph file to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Continue the graph already stored at `--out`.
    #[arg(long)]
    pub append: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub graph: PathBuf,
    pub question: String,
    /// Also ask the answering backend.
    #[arg(long, conflicts_with = "retrieval_only")]
    pub answer: bool,
    /// Stop at the injection block.
    #[arg(long)]
    pub retrieval_only: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Standard,
    MultiHop,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::MultiHop => Variant::MultiHop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderingArg {
    Tagged,
    Natural,
}

impl From<RenderingArg> for Rendering {
    fn from(r: RenderingArg) -> Self {
        match r {
            RenderingArg::Tagged => Rendering::Tagged,
            RenderingArg::Natural => Rendering::Natural,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CaseArgs {
    #[arg(long, value_enum, default_value = "standard")]
    pub variant: VariantArg,
    /// First case seed; defaults to the config's bench seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of cases; defaults to the config's bench case count.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Load cases from a case file instead of generating them.
    #[arg(long, conflicts_with_all = ["seed", "cases"])]
    pub cases_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tagged")]
    pub rendering: RenderingArg,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cases: CaseArgs,
    /// Conditions to run, comma separated; all five by default.
    #[arg(long, value_delimiter = ',')]
    pub condition: Vec<String>,
    /// RAG preset for the rag condition.
    #[arg(long)]
    pub rag: Option<String>,
    /// Result file to write.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Rerun with the config, seed and conditions embedded in a result file.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// With `--replay`, fail unless the rerun matches the file byte for byte.
    #[arg(long, requires = "replay")]
    pub check: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("axis").required(true)))]
pub struct SweepArgs {
    #[command(flatten)]
    pub cases: CaseArgs,
    /// Reference thresholds to try, comma separated.
    #[arg(long, value_delimiter = ',', group = "axis")]
    pub theta_ref: Vec<f64>,
    /// The four named threshold pairs.
    #[arg(long, group = "axis")]
    pub thresholds: bool,
    /// RAG presets by name, comma separated; `all` for every preset.
    #[arg(long, value_delimiter = ',', group = "axis")]
    pub rag: Vec<String>,
    /// Hybrid semantic weights, comma separated.
    #[arg(long, value_delimiter = ',', group = "axis")]
    pub alpha: Vec<f64>,
    /// Full pipeline and each single-component ablation.
    #[arg(long, group = "axis")]
    pub arms: bool,
    /// Write the table as JSON.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub engine: BaseArgs,
}

#[derive(Debug, Args)]
pub struct RecallArgs {
    #[command(flatten)]
    pub cases: CaseArgs,
    /// Hop counts to compare.
    #[arg(long = "hop-grid", value_delimiter = ',', default_value = "0,1,2,3")]
    pub hop_grid: Vec<u32>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub cases: CaseArgs,
    #[arg(short, long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: ExportFormat,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

pub fn load_graph(path: &Path) -> Result<CanvasGraph> {
    Ok(deserialize_graph(&read(path)?)?)
}

/// Parses a JSON array of turns, or one JSON turn per non-empty line.
pub fn load_conversation(path: &Path) -> Result<Vec<ConversationTurn>> {
    let text = String::from_utf8(read(path)?).map_err(|e| CliError::Input { path: path.to_owned(), msg: e.to_string() })?;
    let bad = |msg: String| CliError::Input { path: path.to_owned(), msg };
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| bad(e.to_string()));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn summary_text(summary: &GraphSummary) -> String {
    let mut out = format!("objects: {}\n", summary.total_objects);
    for (kind, n) in &summary.objects {
        out += &format!("  {kind}: {n}\n");
    }
    out += &format!("edges: {}\n", summary.total_edges);
    for (origin, n) in &summary.edges {
        out += &format!("  {}: {n}\n", serde_json::to_value(origin).expect("origin serializes").as_str().unwrap_or("?"));
    }
    out
}

pub fn cmd_ingest(args: &IngestArgs, cfg: &EngineConfig, backends: &Backends) -> Result<String> {
    let turns = load_conversation(&args.conversation)?;
    let mut memory = CanvasMemory::new(
        backends.extractor.as_ref(),
        backends.embedder.as_ref(),
        cfg.linking.clone(),
        cfg.analyzer(),
        cfg.gleaning,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    if args.append && args.out.exists() {
        memory = memory.with_graph(load_graph(&args.out)?);
    }
    memory.ingest_all(&turns)?;
    let stats = memory.stats().clone();
    let graph = memory.into_graph();
    write(&args.out, serialize_graph(&graph))?;
    Ok(format!(
        "ingested {} turns into {}\n{}rejected quotes: {}, duplicates: {}, failed turns: {}\n",
        turns.len(),
        args.out.display(),
        summary_text(&GraphSummary::of(&graph)),
        stats.rejected_quotes,
        stats.duplicate_candidates,
        stats.failed_turns,
    ))
}

#[derive(Debug, Serialize)]
pub struct QueryReport {
    pub outcome: RetrievalOutcome,
    pub answer: Option<String>,
}

pub fn query(graph: &CanvasGraph, question: &str, answer: bool, cfg: &EngineConfig, backends: &Backends) -> Result<QueryReport> {
    let analyzer = cfg.analyzer();
    let retriever = Retriever {
        embedder: backends.embedder.as_ref(),
        reranker: backends.reranker.as_ref(),
        counter: backends.counter.as_ref(),
        analyzer: &analyzer,
        config: &cfg.retrieval,
    };
    let outcome = retriever.retrieve(graph, question)?;
    let answer = if answer { Some(backends.answerer.answer(&outcome.block, question)?) } else { None };
    Ok(QueryReport { outcome, answer })
}

pub fn render_query(graph: &CanvasGraph, report: &QueryReport) -> String {
    let o = &report.outcome;
    let class = serde_json::to_value(o.plan.class).expect("class serializes");
    let mut out = format!(
        "plan: class={} k={} hops={} budget={}\n",
        class.as_str().unwrap_or("?"),
        o.plan.k,
        o.plan.hops,
        o.plan.budget_tokens
    );
    out += &format!("selected {} of {} candidates, {} tokens\n", o.selected.len(), o.candidates.len(), o.injected_tokens);
    for s in &o.selected {
        let obj = graph.get(&s.id).expect("selected ids come from the graph");
        let rerank = s.rerank.map_or_else(|| "-".to_owned(), |r| format!("{r:.4}"));
        out += &format!("  {:.4} {rerank} [{}] {}\n", s.hybrid, obj.kind, obj.content);
    }
    if o.rerank_fell_back {
        out += "reranker failed; hybrid order kept\n";
    }
    out += "\n";
    out += &o.block;
    if !out.ends_with('\n') {
        out.push('\n');
    }
    if let Some(a) = &report.answer {
        out += &format!("\nanswer:\n{a}\n");
    }
    out
}

pub fn cmd_query(args: &QueryArgs, cfg: &EngineConfig, backends: &Backends) -> Result<String> {
    let graph = load_graph(&args.graph)?;
    let report = query(&graph, &args.question, args.answer && !args.retrieval_only, cfg, backends)?;
    Ok(render_query(&graph, &report))
}

fn load_cases(args: &CaseArgs, cfg: &EngineConfig) -> Result<(Vec<BenchmarkCase>, u64)> {
    if let Some(p) = &args.cases_file {
        let cases = read_cases(Cursor::new(read(p)?))?;
        let seed = cases.first().map_or(0, |c| c.seed);
        return Ok((cases, seed));
    }
    let seed = args.seed.unwrap_or(cfg.bench.seed);
    let n = args.cases.unwrap_or(cfg.bench.cases);
    Ok((generate_cases(seed, n, args.variant.into()), seed))
}

/// Condition and optional RAG preset for one label: a condition name or a
/// RAG preset name.
fn parse_condition(label: &str) -> Result<(Condition, Option<RagPreset>)> {
    if let Ok(c) = label.parse::<Condition>() {
        return Ok((c, None));
    }
    RagPreset::named(label)
        .map(|p| (Condition::Rag, Some(p)))
        .ok_or_else(|| CliError::Usage(format!("unknown condition {label:?}")))
}

pub fn execute_run(
    header: &RunHeader,
    cases: &[BenchmarkCase],
    backends: &Backends,
) -> Result<(String, Vec<ConditionResult>)> {
    let mut results = Vec::new();
    for label in &header.conditions {
        let (condition, rag) = parse_condition(label)?;
        let ctx = RunContext { config: &header.config, backends, rendering: header.rendering, rag };
        results.push(run_condition(cases, condition, &ctx)?);
    }
    Ok((write_run(header, &results), results))
}

pub fn cmd_bench_run(args: &RunArgs, backends_for: impl Fn(&EngineConfig) -> Result<Backends>) -> Result<String> {
    let (header, cases) = if let Some(path) = &args.replay {
        let header = read_run_header(Cursor::new(read(path)?))?;
        let cases = match &args.cases.cases_file {
            Some(p) => read_cases(Cursor::new(read(p)?))?,
            None => generate_cases(header.seed, header.cases, header.variant),
        };
        (header, cases)
    } else {
        let mut cfg = args.engine.resolve()?;
        if let Some(r) = &args.rag {
            RagPreset::named(r).ok_or_else(|| CliError::Usage(format!("unknown RAG preset {r:?}")))?;
            cfg.bench.rag_preset.clone_from(r);
        }
        let (cases, seed) = load_cases(&args.cases, &cfg)?;
        let names: Vec<String> = if args.condition.is_empty() {
            Condition::ALL.iter().map(|c| c.name().to_owned()).collect()
        } else {
            args.condition.iter().map(|c| c.trim().to_owned()).collect()
        };
        let mut conditions = Vec::new();
        for n in names {
            let (c, _) = parse_condition(&n)?;
            // Store the RAG condition under its preset name so replays pick the same one.
            conditions.push(if c == Condition::Rag && RagPreset::named(&n).is_none() {
                cfg.bench.rag_preset.clone()
            } else {
                n
            });
        }
        let header = RunHeader {
            format_version: RESULT_FORMAT_VERSION,
            seed,
            cases: cases.len(),
            variant: cases.first().map_or(args.cases.variant.into(), |c| c.variant),
            rendering: args.cases.rendering.into(),
            conditions,
            config: cfg,
        };
        (header, cases)
    };
    let backends = backends_for(&header.config)?;
    let (text, results) = execute_run(&header, &cases, &backends)?;
    if args.check {
        let path = args.replay.as_ref().expect("clap enforces --replay");
        if read(path)? != text.as_bytes() {
            return Err(CliError::ReplayMismatch(path.clone()));
        }
    }
    if let Some(out) = &args.out {
        write(out, &text)?;
    }
    Ok(summary_table(&results))
}

fn sweep_axis(args: &SweepArgs) -> Result<SweepAxis> {
    if !args.theta_ref.is_empty() {
        return Ok(SweepAxis::ThetaRef(args.theta_ref.clone()));
    }
    if args.thresholds {
        return Ok(SweepAxis::ThresholdPresets);
    }
    if !args.alpha.is_empty() {
        return Ok(SweepAxis::Alpha(args.alpha.clone()));
    }
    if args.arms {
        return Ok(SweepAxis::Arms(Arm::ALL.to_vec()));
    }
    if args.rag.iter().any(|r| r == "all") {
        return Ok(SweepAxis::Rag(RagPreset::all()));
    }
    if !args.rag.is_empty() {
        let presets = args
            .rag
            .iter()
            .map(|r| RagPreset::named(r).ok_or_else(|| CliError::Usage(format!("unknown RAG preset {r:?}"))))
            .collect::<Result<_>>()?;
        return Ok(SweepAxis::Rag(presets));
    }
    Err(CliError::Usage("choose a sweep axis".into()))
}

pub fn cmd_sweep(args: &SweepArgs, cfg: &EngineConfig, backends: &Backends) -> Result<String> {
    let axis = sweep_axis(args)?;
    let (cases, _) = load_cases(&args.cases, cfg)?;
    let table = run_sweep(&cases, &axis, cfg, backends, args.cases.rendering.into())?;
    if let Some(out) = &args.out {
        write(out, serde_json::to_string_pretty(&table).expect("table serializes") + "\n")?;
    }
    Ok(sweep_markdown(&table))
}

pub fn cmd_recall(args: &RecallArgs, cfg: &EngineConfig, backends: &Backends) -> Result<String> {
    let (cases, _) = load_cases(&args.cases, cfg)?;
    let table = retrieval_recall_eval(&cases, cfg, backends, args.cases.rendering.into(), &args.hop_grid)?;
    if let Some(out) = &args.out {
        write(out, serde_json::to_string_pretty(&table).expect("table serializes") + "\n")?;
    }
    Ok(recall_markdown(&table))
}

pub fn cmd_generate(args: &GenerateArgs, cfg: &EngineConfig) -> Result<String> {
    let (cases, _) = load_cases(&args.cases, cfg)?;
    write(&args.out, write_cases(&cases))?;
    Ok(format!("wrote {} cases to {}\n", cases.len(), args.out.display()))
}

/// Tab-separated nodes then edges, or the same listing as JSON.
pub fn export(graph: &CanvasGraph, format: ExportFormat) -> String {
    #[derive(Serialize)]
    struct Node<'a> {
        id: &'a str,
        kind: String,
        turn: u32,
        source: serde_json::Value,
        confidence: f64,
        content: &'a str,
    }
    #[derive(Serialize)]
    struct Edge<'a> {
        src: &'a str,
        dst: &'a str,
        kind: serde_json::Value,
        origin: serde_json::Value,
        weight: f64,
    }
    fn json<T: Serialize>(v: &T) -> serde_json::Value {
        serde_json::to_value(v).expect("enum serializes")
    }
    let nodes: Vec<Node> = graph
        .objects()
        .map(|o| Node {
            id: o.id.as_str(),
            kind: o.kind.to_string(),
            turn: o.turn,
            source: json(&o.source),
            confidence: o.confidence,
            content: &o.content,
        })
        .collect();
    let edges: Vec<Edge> = graph
        .edges()
        .iter()
        .map(|e| Edge { src: e.src.as_str(), dst: e.dst.as_str(), kind: json(&e.kind), origin: json(&e.origin), weight: e.weight })
        .collect();
    match format {
        ExportFormat::Json => {
            serde_json::to_string_pretty(&serde_json::json!({"nodes": nodes, "edges": edges})).expect("listing serializes") + "\n"
        }
        ExportFormat::Tsv => {
            let s = |v: &serde_json::Value| v.as_str().unwrap_or_default().to_owned();
            let mut out = String::from("# nodes\nid\tkind\tturn\tsource\tconfidence\tcontent\n");
            for n in &nodes {
                let content = n.content.replace(['\t', '\n'], " ");
                out += &format!("{}\t{}\t{}\t{}\t{}\t{}\n", n.id, n.kind, n.turn, s(&n.source), n.confidence, content);
            }
            out += "# edges\nsrc\tdst\tkind\torigin\tweight\n";
            for e in &edges {
                out += &format!("{}\t{}\t{}\t{}\t{}\n", e.src, e.dst, s(&e.kind), s(&e.origin), e.weight);
            }
            out
        }
    }
}

fn backends(cfg: &EngineConfig) -> Result<Backends> {
    Ok(Backends::from_config(cfg)?)
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Ingest(a) => {
            let cfg = a.engine.resolve()?;
            cmd_ingest(a, &cfg, &backends(&cfg)?)
        }
        Command::Query(a) => {
            let cfg = a.engine.resolve()?;
            cmd_query(a, &cfg, &backends(&cfg)?)
        }
        Command::Export(a) => Ok(export(&load_graph(&a.graph)?, a.format)),
        Command::Sweep(a) | Command::Bench(BenchCommand::Sweep(a)) => {
            let cfg = a.engine.resolve()?;
            cmd_sweep(a, &cfg, &backends(&cfg)?)
        }
        Command::Bench(BenchCommand::Run(a)) => cmd_bench_run(a, backends),
        Command::Bench(BenchCommand::RetrievalRecall(a)) => {
            let cfg = a.engine.resolve()?;
            cmd_recall(a, &cfg, &backends(&cfg)?)
        }
        Command::Bench(BenchCommand::Generate(a)) => cmd_generate(a, &a.engine.resolve()?),
    }
}
