use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use clap::CommandFactory;

use canvas_cli::{load_graph, query, render_query, Cli};
use canvas_core::backends::{Answerer, BackendError, CountingAnswerer, EchoAnswerer};
use canvas_core::config::{Backends, EngineConfig};
use canvas_core::scoring::HashingEmbedder;

fn canvas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canvas")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const CONVERSATION: &str = r#"[
  {"index": 1, "user": "KEY_FACT: the finance team requires strict ACID transactions", "assistant": "Understood."},
  {"index": 2, "user": "DECISION: use Postgres for the ledger service because of the ACID requirement", "assistant": "TODO: migrate the ledger schema"},
  {"index": 3, "user": "Thanks.", "assistant": "REMINDER: rotate the database credentials monthly"}
]"#;

fn ingest_fixture(dir: &Path) -> std::path::PathBuf {
    let conv = dir.join("conv.json");
    fs::write(&conv, CONVERSATION).unwrap();
    let graph = dir.join("graph.json");
    let out = stdout(&canvas(&["ingest", p(&conv), "--out", p(&graph)]));
    assert!(out.contains("objects: 4"), "{out}");
    graph
}

#[test]
fn command_definitions_are_consistent() {
    Cli::command().debug_assert();
}

#[test]
fn ingest_is_deterministic_and_summarized() {
    let dir = tempfile::tempdir().unwrap();
    let graph = ingest_fixture(dir.path());
    let first = fs::read(&graph).unwrap();
    fs::remove_file(&graph).unwrap();
    ingest_fixture(dir.path());
    assert_eq!(fs::read(&graph).unwrap(), first);

    let out = stdout(&canvas(&["ingest", p(&dir.path().join("conv.json")), "--out", p(&graph)]));
    for line in ["DECISION: 1", "TODO: 1", "KEY_FACT: 1", "REMINDER: 1", "edges:"] {
        assert!(out.contains(line), "missing {line:?} in {out}");
    }
}

#[test]
fn jsonl_conversations_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let conv = dir.path().join("conv.jsonl");
    fs::write(&conv, "{\"index\": 1, \"user\": \"DECISION: ship on Friday\", \"assistant\": \"ok\"}\n\n").unwrap();
    let graph = dir.path().join("g.json");
    assert!(stdout(&canvas(&["ingest", p(&conv), "-o", p(&graph)])).contains("objects: 1"));
}

#[test]
fn missing_input_fails_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let o = canvas(&["ingest", "/nonexistent/conv.json", "--out", p(&dir.path().join("g.json"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/conv.json"));
}

#[test]
fn query_prints_plan_and_block() {
    let dir = tempfile::tempdir().unwrap();
    let graph = ingest_fixture(dir.path());
    let out = stdout(&canvas(&["query", p(&graph), "Why did we choose Postgres?", "--retrieval-only"]));
    assert!(out.contains("class=MULTI_HOP k=15"), "{out}");
    assert!(out.contains("Postgres"));
    assert!(!out.contains("answer:"));
    let answered = stdout(&canvas(&["query", p(&graph), "What is the database?", "--answer"]));
    assert!(answered.contains("class=SIMPLE k=10") && answered.contains("answer:"), "{answered}");
}

#[test]
fn unknown_flags_are_usage_errors() {
    let o = canvas(&["query", "g.json", "q", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!canvas(&["query", "g.json", "q", "--answer", "--retrieval-only"]).status.success());
}

struct Shared(Arc<CountingAnswerer<EchoAnswerer>>);

impl Answerer for Shared {
    fn answer(&self, context: &str, question: &str) -> Result<String, BackendError> {
        self.0.answer(context, question)
    }
}

#[test]
fn retrieval_only_never_calls_the_answerer() {
    let dir = tempfile::tempdir().unwrap();
    let graph = load_graph(&ingest_fixture(dir.path())).unwrap();
    let cfg = EngineConfig::default().resolve().unwrap();
    let counter = Arc::new(CountingAnswerer::new(EchoAnswerer));
    let mut backends = Backends::mock(cfg.analyzer(), HashingEmbedder::DEFAULT_DIM);
    backends.answerer = Box::new(Shared(counter.clone()));

    let r = query(&graph, "Why did we choose Postgres?", false, &cfg, &backends).unwrap();
    assert_eq!(counter.calls(), 0);
    assert!(r.answer.is_none() && !r.outcome.selected.is_empty());
    let r = query(&graph, "Why did we choose Postgres?", true, &cfg, &backends).unwrap();
    assert_eq!(counter.calls(), 1);
    assert!(render_query(&graph, &r).contains("answer:"));
}

#[test]
fn export_lists_nodes_and_edges() {
    let dir = tempfile::tempdir().unwrap();
    let graph = ingest_fixture(dir.path());
    let tsv = stdout(&canvas(&["export", p(&graph)]));
    let nodes = tsv.lines().skip(2).take_while(|l| !l.starts_with('#')).count();
    assert_eq!(nodes, 4);
    let json: serde_json::Value = serde_json::from_str(&stdout(&canvas(&["export", p(&graph), "--format", "json"]))).unwrap();
    assert_eq!(json["nodes"].as_array().unwrap().len(), 4);

    let empty = dir.path().join("empty.json");
    fs::write(&empty, canvas_core::model::serialize_graph(&Default::default())).unwrap();
    let out = stdout(&canvas(&["export", p(&empty)]));
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 2, "only column headers: {out}");
}

#[test]
fn bench_run_truncation_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let result = dir.path().join("run.jsonl");
    let table = stdout(&canvas(&[
        "bench", "run", "--condition", "truncation", "--variant", "standard", "--seed", "7", "--cases", "3", "--out", p(&result),
    ]));
    assert!(table.contains("| truncation |"), "{table}");

    let text = fs::read_to_string(&result).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["type"], "run");
    assert_eq!(header["seed"], 7);
    assert!(header["config"]["linking"].is_object());
    let mut early = 0;
    for l in text.lines().skip(1) {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        if v["type"] == "record" && v["plant_turn"].as_u64().unwrap() < 36 {
            early += 1;
            assert_eq!(v["recalled"], false, "{l}");
        }
    }
    assert!(early > 0);

    let again = dir.path().join("again.jsonl");
    stdout(&canvas(&["bench", "run", "--replay", p(&result), "--check", "--out", p(&again)]));
    assert_eq!(fs::read(&again).unwrap(), fs::read(&result).unwrap());

    fs::write(&result, text.replace("\"seed\":7", "\"seed\":8")).unwrap();
    let o = canvas(&["bench", "run", "--replay", p(&result), "--check"]);
    assert!(!o.status.success());
}

#[test]
fn jobs_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let args = ["bench", "run", "--condition", "canvas,rag-small", "--cases", "4", "--seed", "3"];
    stdout(&canvas(&[&args[..], &["--jobs", "1", "--out", p(&a)]].concat()));
    stdout(&canvas(&[&args[..], &["--jobs", "4", "--out", p(&b)]].concat()));
    let strip = |p: &Path| fs::read_to_string(p).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a), strip(&b));
    assert!(fs::read_to_string(&a).unwrap().contains("\"condition\":\"rag-small\""));
}

#[test]
fn config_file_and_flags_layer_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("engine.toml");
    fs::write(&cfg, "[retrieval]\nhops = 3\nbudget_tokens = 500\n").unwrap();
    let result = dir.path().join("run.jsonl");
    stdout(&canvas(&[
        "bench", "run", "--condition", "canvas", "--cases", "1", "--config", p(&cfg), "--hops", "2", "--out", p(&result),
    ]));
    let header: serde_json::Value = serde_json::from_str(fs::read_to_string(&result).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["retrieval"]["hops"], 2);
    assert_eq!(header["config"]["retrieval"]["budget_tokens"], 500);
    assert_eq!(header["config"]["retrieval"]["coarse_k"], 20);

    fs::write(&cfg, "[retrieval\n").unwrap();
    assert!(!canvas(&["bench", "run", "--cases", "1", "--config", p(&cfg)]).status.success());
}

#[test]
fn theta_sweep_has_three_rows() {
    let out = stdout(&canvas(&["sweep", "--theta-ref", "0.3,0.5,0.7", "--cases", "2"]));
    let rows: Vec<&str> = out.lines().filter(|l| l.starts_with("| theta_ref=")).collect();
    assert_eq!(rows.len(), 3, "{out}");
    let presets = stdout(&canvas(&["bench", "sweep", "--rag", "all", "--cases", "1"]));
    assert_eq!(presets.lines().filter(|l| l.starts_with("| rag-")).count(), 4, "{presets}");
    assert!(!canvas(&["sweep", "--cases", "1"]).status.success());
}

#[test]
fn retrieval_recall_and_case_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("cases.jsonl");
    stdout(&canvas(&["bench", "generate", "--variant", "multi-hop", "--cases", "2", "--seed", "5", "--out", p(&cases)]));
    assert_eq!(fs::read_to_string(&cases).unwrap().lines().count(), 2);
    let out = stdout(&canvas(&["bench", "retrieval-recall", "--cases-file", p(&cases), "--hop-grid", "0,1"]));
    assert_eq!(out.lines().filter(|l| l.starts_with("| 0 |") || l.starts_with("| 1 |")).count(), 2, "{out}");
    let run = stdout(&canvas(&["bench", "run", "--cases-file", p(&cases), "--condition", "canvas"]));
    assert!(run.contains("| canvas | 16 |"), "{run}");
}
