use std::io::Cursor;

use canvas_bench::conditions::{run_condition, Aggregates, Condition, RunContext};
use canvas_bench::generate::{generate_case, generate_cases, Rendering, Variant};
use canvas_bench::rag::RagPreset;
use canvas_bench::report::{read_cases, read_run, read_run_header, write_cases, write_run, ResultLine, RunHeader, RESULT_FORMAT_VERSION};
use canvas_core::backends::{Answerer, BackendError, CountingAnswerer, EchoAnswerer, Role};
use canvas_core::config::{Backends, EngineConfig};
use canvas_core::scoring::HashingEmbedder;

fn setup() -> (EngineConfig, Backends) {
    let cfg = EngineConfig::default().resolve().unwrap();
    let b = Backends::mock(cfg.analyzer(), HashingEmbedder::DEFAULT_DIM);
    (cfg, b)
}

fn ctx<'a>(cfg: &'a EngineConfig, b: &'a Backends) -> RunContext<'a> {
    RunContext { config: cfg, backends: b, rendering: Rendering::Tagged, rag: None }
}

#[test]
fn truncation_context_misses_early_facts() {
    let (cfg, b) = setup();
    let case = generate_case(3, Variant::Standard);
    let early = case.planted.iter().position(|f| f.plant_turn <= 10).expect("an early fact");
    let r = run_condition(std::slice::from_ref(&case), Condition::Truncation, &ctx(&cfg, &b)).unwrap();
    let rec = &r.records[early];
    let answer = rec.answer.as_deref().unwrap();
    assert!(!answer.contains(&case.planted[early].text));
    assert!(!rec.exact);
    assert!(answer.contains("Turn 36") && !answer.contains("Turn 35\n"));
}

#[test]
fn canvas_recovers_planted_facts_verbatim() {
    let (cfg, b) = setup();
    let cases = generate_cases(7, 3, Variant::Standard);
    let r = run_condition(&cases, Condition::Canvas, &ctx(&cfg, &b)).unwrap();
    assert!(r.records.iter().all(|rec| rec.exact && rec.fuzzy == 100.0));
    assert!(r.graph_edges.unwrap() > 0);
}

#[test]
fn default_rag_preset_is_used_and_labelled() {
    let (cfg, b) = setup();
    let c = ctx(&cfg, &b);
    let p = c.rag_preset().unwrap();
    assert_eq!((p.chunk_size, p.top_k, p.overlap), (512, 5, 100));
    let r = run_condition(&generate_cases(1, 1, Variant::Standard), Condition::Rag, &c).unwrap();
    assert!(r.condition.contains("rag-default"), "{}", r.condition);

    let mut bad = cfg.clone();
    bad.bench.rag_preset = "nope".into();
    assert!(ctx(&bad, &b).rag_preset().is_err());
    let explicit = RunContext { rag: RagPreset::named("rag-small"), ..ctx(&cfg, &b) };
    assert_eq!(explicit.rag_preset().unwrap().chunk_size, 256);
}

#[test]
fn aggregates_recompute_from_records() {
    let (cfg, b) = setup();
    let cases = generate_cases(2, 4, Variant::MultiHop);
    for cond in Condition::ALL {
        let r = run_condition(&cases, cond, &ctx(&cfg, &b)).unwrap();
        assert_eq!(Aggregates::from_records(&r.records), r.aggregates);
        let n = r.records.len() as f64;
        let pass = r.records.iter().filter(|x| x.keyword_pass).count() as f64 / n;
        assert!((r.aggregates.pass_rate - pass).abs() < 1e-12);
        assert!(r.aggregates.causal_coverage.is_some() && r.aggregates.impact_coverage.is_some());
    }
}

#[test]
fn case_and_run_files_round_trip() {
    let (cfg, b) = setup();
    let cases = generate_cases(5, 3, Variant::MultiHop);
    let text = write_cases(&cases);
    assert_eq!(read_cases(Cursor::new(text.as_bytes())).unwrap(), cases);

    let results = vec![run_condition(&cases, Condition::Canvas, &ctx(&cfg, &b)).unwrap()];
    let header = RunHeader {
        format_version: RESULT_FORMAT_VERSION,
        seed: 5,
        cases: 3,
        variant: Variant::MultiHop,
        rendering: Rendering::Tagged,
        conditions: vec![results[0].condition.clone()],
        config: cfg.clone(),
    };
    let run = write_run(&header, &results);
    assert_eq!(read_run_header(Cursor::new(run.as_bytes())).unwrap(), header);
    let lines = read_run(Cursor::new(run.as_bytes())).unwrap();
    let records = lines.iter().filter(|l| matches!(l, ResultLine::Record { .. })).count();
    assert_eq!(records, results[0].records.len());
    assert!(matches!(lines.last(), Some(ResultLine::Aggregate { .. })));
}

struct FailOn(&'static str);

impl Answerer for FailOn {
    fn answer(&self, context: &str, question: &str) -> Result<String, BackendError> {
        if question.contains(self.0) {
            Err(BackendError::failed(Role::Answerer, "boom"))
        } else {
            Ok(context.to_owned())
        }
    }
}

#[test]
fn failing_answers_are_recorded_and_the_run_continues() {
    let (cfg, mut b) = setup();
    let cases = generate_cases(1, 2, Variant::MultiHop);
    b.answerer = Box::new(FailOn("Why"));
    let r = run_condition(&cases, Condition::Canvas, &ctx(&cfg, &b)).unwrap();
    let failed: Vec<_> = r.records.iter().filter(|x| x.question.contains("Why")).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|x| x.answer.is_none() && x.error.is_some() && !x.recalled));
    assert_eq!(r.aggregates.answered, r.records.len() - failed.len());
    assert_eq!(r.aggregates.questions, r.records.len());
}

#[test]
fn one_answer_call_per_question() {
    let (cfg, mut b) = setup();
    let cases = generate_cases(1, 2, Variant::Standard);
    let counting = std::sync::Arc::new(CountingAnswerer::new(EchoAnswerer));
    struct Shared(std::sync::Arc<CountingAnswerer<EchoAnswerer>>);
    impl Answerer for Shared {
        fn answer(&self, c: &str, q: &str) -> Result<String, BackendError> {
            self.0.answer(c, q)
        }
    }
    b.answerer = Box::new(Shared(counting.clone()));
    let r = run_condition(&cases, Condition::Summarization, &ctx(&cfg, &b)).unwrap();
    assert_eq!(counting.calls(), r.records.len());
}

#[test]
fn parallel_runs_match_serial() {
    let (mut cfg, b) = setup();
    let cases = generate_cases(11, 6, Variant::Standard);
    let serial: Vec<_> = Condition::ALL.iter().map(|&c| run_condition(&cases, c, &ctx(&cfg, &b)).unwrap()).collect();
    cfg.bench.jobs = 4;
    let parallel: Vec<_> = Condition::ALL.iter().map(|&c| run_condition(&cases, c, &ctx(&cfg, &b)).unwrap()).collect();
    assert_eq!(serial, parallel);
}

#[test]
fn natural_rendering_defeats_marker_extraction() {
    let (cfg, b) = setup();
    let cases = generate_cases(1, 3, Variant::Standard);
    let natural = RunContext { rendering: Rendering::Natural, ..ctx(&cfg, &b) };
    let r = run_condition(&cases, Condition::Canvas, &natural).unwrap();
    assert_eq!(r.graph_edges, Some(0));
    assert!(r.aggregates.exact_rate < 1.0);
}
