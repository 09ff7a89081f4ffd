mod common;

use std::path::Path;

use vlp_core::dsl::{DslConfig, Profile};
use vlp_core::grammar::GroundedSymbols;
use vlp_core::perception::{CacheStats, ResponseCache};
use vlp_core::pipeline::{run_pipeline, BackendChoice, PipelineReport, RunConfig};
use vlp_core::tasks::{make_fixture, FixtureSpec, GuardSpec};

use common::parse;

const RULE: &str = "(and (exists_object (get_objects IMG) cake) (exists_object (get_objects IMG) candles))";

fn fixture(dir: &Path, configs: &[DslConfig]) {
    let vocab = GroundedSymbols::new(&["cake", "candles", "dog", "table"], &["red", "small"], &["eating", "holding"]);
    let profile = Profile::BongardHoi;
    let spec = FixtureSpec { guard: Some(GuardSpec::for_profile(profile)), ..FixtureSpec::new("cake", profile, parse(RULE), vocab, 4) };
    make_fixture(&spec).unwrap().write(dir, configs).unwrap();
}

fn config(dir: &Path, out: &str) -> RunConfig {
    RunConfig {
        budget_secs: Some(5.0),
        early_stop: true,
        cache_dir: Some(dir.join("cache")),
        backend: BackendChoice::Mock(dir.to_path_buf()),
        ..RunConfig::new(dir.join("task.json"), dir.join(out))
    }
}

fn programs(r: &PipelineReport) -> Vec<String> {
    r.seeds.iter().map(|s| s.summary.as_ref().expect("seed completed").program.clone()).collect()
}

#[test]
fn mock_run_writes_artifacts_and_offline_rerun_matches() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), &[DslConfig::for_profile(Profile::BongardHoi)]);

    let report = run_pipeline(&config(dir.path(), "out")).unwrap();
    assert_eq!(report.exit_code(), 0);
    assert_eq!(report.completed, 3);
    assert_eq!(report.mean_balanced_accuracy, Some(1.0));
    for s in &report.seeds {
        let sum = s.summary.as_ref().unwrap();
        assert_eq!(sum.accuracy, 1.0);
        assert_eq!(parse(&sum.program), parse(RULE));
    }
    // Every seed has its own decode seed, so each seed fills its own cache entries.
    assert!(report.seeds.iter().all(|s| s.summary.as_ref().unwrap().network_calls > 0));
    for s in 0..3 {
        for f in ["grounding.json", "manifest.json", "scenes.json", "grammar.txt", "result.json", "eval.json"] {
            assert!(dir.path().join(format!("out/seed-{s}/{f}")).is_file(), "seed-{s}/{f}");
        }
    }
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["completed"], 3);
    let grammar = std::fs::read_to_string(dir.path().join("out/seed-0/grammar.txt")).unwrap();
    assert!(grammar.contains("\"candles\""));

    let offline = RunConfig { backend: BackendChoice::Offline, ..config(dir.path(), "again") };
    let again = run_pipeline(&offline).unwrap();
    assert_eq!(again.exit_code(), 0);
    assert_eq!(programs(&again), programs(&report));
    for s in &again.seeds {
        assert_eq!(s.summary.as_ref().unwrap().network_calls, 0);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("again/seed-1/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["totals"]["misses"], 0);
    assert!(CacheStats::of(&ResponseCache::open(&dir.path().join("cache")).unwrap()).entries > 0);
}

#[test]
fn parallel_seeds_agree_with_sequential() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), &[DslConfig::for_profile(Profile::BongardHoi)]);
    let seq = run_pipeline(&config(dir.path(), "seq")).unwrap();
    let par = run_pipeline(&RunConfig { parallel_seeds: true, ..config(dir.path(), "par") }).unwrap();
    assert_eq!(programs(&seq), programs(&par));
    assert!(dir.path().join("cache/seed-2").is_dir());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), &[DslConfig::for_profile(Profile::BongardHoi)]);

    // Offline with a cold cache: every seed fails on transport.
    let cold = RunConfig { backend: BackendChoice::Offline, cache_dir: None, ..config(dir.path(), "cold") };
    let r = run_pipeline(&cold).unwrap();
    assert_eq!(r.completed, 0);
    assert_eq!(r.exit_code(), 3);
    assert!(r.seeds[0].error.is_some());

    // Depth 1 admits no boolean program.
    let shallow = RunConfig { max_depth: Some(1), ..config(dir.path(), "shallow") };
    assert_eq!(run_pipeline(&shallow).unwrap().exit_code(), 4);

    let no_seeds = RunConfig { seeds: vec![], ..config(dir.path(), "x") };
    assert_eq!(run_pipeline(&no_seeds).unwrap_err().exit_code(), 2);
    let bad_budget = RunConfig { budget_secs: Some(0.0), ..config(dir.path(), "x") };
    assert_eq!(run_pipeline(&bad_budget).unwrap_err().exit_code(), 2);
    let missing = RunConfig::new(dir.path().join("nope.json"), dir.path().join("x"));
    assert_eq!(run_pipeline(&missing).unwrap_err().exit_code(), 2);
}

#[test]
fn removed_symbols_never_reach_the_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let mut edited = DslConfig::for_profile(Profile::BongardHoi);
    edited.removed_symbols.insert("candles".into());
    fixture(dir.path(), &[edited.clone()]);
    let cfg = RunConfig { dsl: Some(edited), seeds: vec![0], ..config(dir.path(), "out") };
    let r = run_pipeline(&cfg).unwrap();
    assert_eq!(r.exit_code(), 0);
    let grammar = std::fs::read_to_string(dir.path().join("out/seed-0/grammar.txt")).unwrap();
    assert!(!grammar.contains("candles"));
    assert!(!r.seeds[0].summary.as_ref().unwrap().program.contains("candles"));
}
