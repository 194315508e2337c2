use std::sync::Arc;

use parley_analysis::embed::HashingEmbedder;
use parley_analysis::report::{analyze, write_bundle, AnalyzeConfig, ReportBundle};
use parley_analysis::topics::DEFAULT_K;
use parley_core::rephrase::{MockProvider, PromptConfig, RephraseEngine, RetryPolicy};
use parley_core::surveys::Instrument;
use parley_service::export::{export, Tables};
use parley_service::sim::{simulate, SimConfig};

fn mock_tables(seed: u64, dyads: usize) -> Tables {
    let engine = Arc::new(RephraseEngine::new(
        Arc::new(MockProvider::new()),
        PromptConfig::default(),
        RetryPolicy::default(),
    ));
    let out = simulate(seed, SimConfig { dyads, ..SimConfig::default() }, engine).unwrap();
    export(&out.records, &Instrument::default_pre(), &Instrument::default_post()).unwrap()
}

fn run(seed: u64, tables: &Tables) -> ReportBundle {
    let embedder = HashingEmbedder::default();
    analyze(
        &tables.messages,
        &tables.participants,
        &AnalyzeConfig {
            seed,
            k: DEFAULT_K,
            embedder: &embedder,
            fallback: None,
            labeler: None,
        },
    )
    .unwrap()
}

#[test]
fn mock_rephrasings_raise_every_tone_marker_without_moving_topics() {
    let tables = mock_tables(1, 200);
    let bundle = run(1, &tables);
    for e in &bundle.tone.estimates {
        assert!(e.estimate > 0.0, "{:?} {}", e.feature, e.estimate);
        assert!(e.ci95[0] > 0.0, "{:?} {:?}", e.feature, e.ci95);
    }
    let topics = &bundle.topics.report;
    assert_eq!(topics.k, DEFAULT_K);
    assert_eq!(topics.labels.len(), DEFAULT_K);
    assert!(topics.labels.iter().all(|l| l.label.starts_with("cluster-")));
    assert!(topics.rephrase_test.as_ref().unwrap().p > 0.5, "{:?}", topics.rephrase_test);
    assert!(topics.pair_agreement.unwrap() > 0.8);
    let long = |t: &str| t.split_whitespace().count() > 4;
    let expected: usize = tables
        .messages
        .iter()
        .filter(|m| m.delivered)
        .map(|m| {
            if m.rephrased {
                long(&m.original_text) as usize + long(&m.final_text) as usize
            } else {
                long(&m.final_text) as usize
            }
        })
        .sum();
    assert_eq!(topics.points.len(), expected);
}

#[test]
fn bundle_files_carry_the_seed_and_are_reproducible() {
    let tables = mock_tables(2, 120);
    let a = run(2, &tables);
    let b = run(2, &tables);
    assert_eq!(a, b);

    let dir = tempfile::tempdir().unwrap();
    let paths = write_bundle(dir.path(), &a).unwrap();
    assert_eq!(paths.len(), 9);
    for p in &paths {
        let text = std::fs::read_to_string(p).unwrap();
        if p.extension().unwrap() == "csv" {
            assert_eq!(text.lines().next().unwrap(), "# parley-tables/1 seed=2", "{}", p.display());
        } else {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["meta"]["seed"], 2, "{}", p.display());
            assert_eq!(v["meta"]["t_test"], "welch");
        }
    }
}
