mod common;

use std::collections::BTreeSet;
use std::time::Duration;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vlp_core::dsl::sexpr::serialize_expr;
use vlp_core::dsl::{DslConfig, Expr, Profile, Program};
use vlp_core::grammar::{build_pcfg, program_probability, GroundedSymbols, SymbolStats, Weighting};
use vlp_core::scene::{ImageScenes, Scene, SceneCache};
use vlp_core::search::{
    compare_candidates, enumerate, rank, synthesize, Candidate, HeapSearch, SearchBudget, SearchError, StopReason,
    SynthesisOptions,
};
use vlp_core::tasks::{Example, Task};

use common::{brute_force, parse, random_grammar};

#[test]
fn heap_search_matches_brute_force_on_random_grammars() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 8 {
        let Some((_, _, pcfg)) = random_grammar(&mut rng) else { continue };
        let depth = 2 + checked % 2;
        let expected = brute_force(&pcfg, pcfg.start, depth);
        if expected.is_empty() || expected.len() > 5_000 {
            continue;
        }
        let got: Vec<(Program, f64)> = HeapSearch::new(&pcfg, depth).collect();
        let got_set: BTreeSet<String> = got.iter().map(|(p, _)| p.to_string()).collect();
        assert_eq!(got_set.len(), got.len(), "duplicates in the stream");
        let want: BTreeSet<String> = expected.iter().map(|(e, _)| serialize_expr(e)).collect();
        assert_eq!(got_set, want);
        for w in got.windows(2) {
            assert!(w[0].1 >= w[1].1, "{} then {}", w[0].1, w[1].1);
        }
        for (p, prob) in &got {
            let oracle = program_probability(&pcfg, p).unwrap();
            assert!((prob - oracle).abs() <= 1e-12 * oracle, "{p}: {prob} vs {oracle}");
        }
        checked += 1;
    }
}

#[test]
fn highest_probability_program_comes_first() {
    let cfg = DslConfig::for_profile(Profile::ClevrHans3);
    let symbols = GroundedSymbols::new(&["ball", "cube"], &["round", "shiny"], &[] as &[&str]);
    let mut stats = SymbolStats::default();
    stats.n_pos_total = 6;
    stats.counts.entry(vlp_core::SymbolKind::Property).or_default().insert("round".into(), (6, 0));
    stats.counts.entry(vlp_core::SymbolKind::Property).or_default().insert("shiny".into(), (0, 6));
    stats.counts.entry(vlp_core::SymbolKind::Object).or_default().insert("ball".into(), (3, 3));
    stats.counts.entry(vlp_core::SymbolKind::Object).or_default().insert("cube".into(), (3, 3));
    let pcfg = build_pcfg(&cfg, &symbols, Weighting::Occurrence(&stats)).unwrap();
    let mut all = brute_force(&pcfg, pcfg.start, 2);
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| serialize_expr(&a.0).cmp(&serialize_expr(&b.0))));
    let first = HeapSearch::new(&pcfg, 2).next().unwrap();
    assert_eq!(first.0.root(), &all[0].0);
    assert_eq!(first.0.to_string(), "(exists_property (get_objects IMG) round)");
}

#[test]
fn enumerate_honours_program_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (_, _, pcfg) = std::iter::repeat_with(|| random_grammar(&mut rng)).flatten().next().unwrap();
    let budget = SearchBudget { time_limit: Duration::from_secs(1), max_depth: 3, max_programs: Some(7) };
    assert!(enumerate(&pcfg, &budget).count() <= 7);
}

fn cand(accuracy: f64, probability: f64, idx: u64) -> Candidate {
    Candidate { program: Program::new(Expr::Img), probability, accuracy, enumeration_index: idx }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn rank_is_never_dominated(
        raw in prop::collection::vec((0u8..=12, 1u32..50), 1..20)
    ) {
        // Coarse values make ties common.
        let cands: Vec<Candidate> = raw
            .iter()
            .enumerate()
            .map(|(i, &(a, p))| cand(a as f64 / 12.0, p as f64 / 64.0, i as u64))
            .collect();
        let best = rank(&cands).unwrap();
        for c in &cands {
            let dominates = c.accuracy > best.accuracy
                || (c.accuracy == best.accuracy && c.probability > best.probability);
            prop_assert!(!dominates);
            if c.accuracy == best.accuracy && c.probability == best.probability {
                prop_assert!(best.enumeration_index <= c.enumeration_index);
            }
            prop_assert!(compare_candidates(best, c) != std::cmp::Ordering::Less);
        }
    }
}

fn labeled_task(scenes: &[(ImageScenes, bool)]) -> (Task, SceneCache) {
    let mut cache = SceneCache::new();
    let few_shot = scenes
        .iter()
        .enumerate()
        .map(|(i, (s, label))| {
            let digest = format!("d{i}");
            cache.insert(digest.clone(), s.clone());
            Example { image: format!("i{i}.png"), path: format!("i{i}.png").into(), digest, label: *label }
        })
        .collect();
    (Task { task_id: "t".into(), profile: Profile::BongardHoi, few_shot, query: vec![] }, cache)
}

fn objs(rows: &[&[&str]]) -> ImageScenes {
    ImageScenes::new(Scene::new(rows.iter().map(|r| r.iter())), Scene::empty())
}

/// The two-conjunct scenario: candles alone does not separate the sets.
fn cake_and_candles() -> (Task, SceneCache, vlp_core::grammar::Pcfg) {
    let pos = [objs(&[&["cake"], &["candles"]]), objs(&[&["cake"], &["candles"], &["dog"]])];
    let neg = [objs(&[&["candles"]]), objs(&[&["cake"]]), objs(&[&["dog"]]), objs(&[&["candles"], &["dog"]])];
    let mut all: Vec<(ImageScenes, bool)> = Vec::new();
    for i in 0..6 {
        all.push((pos[i % 2].clone(), true));
        all.push((neg[i % 4].clone(), false));
    }
    let (task, cache) = labeled_task(&all);
    let symbols = GroundedSymbols::new(&["cake", "candles", "dog"], &[] as &[&str], &[] as &[&str]);
    let mut cfg = DslConfig::for_profile(Profile::BongardHoi);
    cfg.enabled_primitives =
        ["get_objects", "exists_object", "and", "or", "not"].iter().map(|s| s.to_string()).collect();
    let stats = SymbolStats::from_scenes(&symbols, task.few_shot.iter().map(|e| (cache.get(&e.digest).unwrap(), e.label)));
    let pcfg = build_pcfg(&cfg, &symbols, Weighting::Occurrence(&stats)).unwrap();
    (task, cache, pcfg)
}

#[test]
fn conjunction_is_recovered_and_beats_every_depth_four_alternative() {
    let (task, cache, pcfg) = cake_and_candles();
    let budget = SearchBudget { time_limit: Duration::from_secs(5), max_depth: 4, max_programs: None };
    let r = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()).unwrap();
    assert_eq!(r.best.accuracy, 1.0);
    assert_eq!(r.stop_reason, StopReason::Exhausted);

    // Brute force over every depth-4 program: the winner has the best (accuracy, probability).
    let scenes: Vec<(&ImageScenes, bool)> =
        task.few_shot.iter().map(|e| (cache.get(&e.digest).unwrap(), e.label)).collect();
    let acc = |p: &Program| {
        scenes.iter().filter(|(s, l)| vlp_core::executor::evaluate(p, s).unwrap() == *l).count() as f64
            / scenes.len() as f64
    };
    for (e, prob) in brute_force(&pcfg, pcfg.start, 4) {
        let p = Program::new(e);
        let a = acc(&p);
        assert!(a < 1.0 || prob <= r.best.probability, "{p} is perfect with higher probability");
    }
    let shortcut = parse("(exists_object (get_objects IMG) candles)");
    assert!(acc(&shortcut) < 1.0);
    let rule = parse("(and (exists_object (get_objects IMG) cake) (exists_object (get_objects IMG) candles))");
    assert_eq!(acc(&rule), 1.0);
}

#[test]
fn accuracy_counts_pooled_examples() {
    let (task, cache, pcfg) = cake_and_candles();
    let budget = SearchBudget { time_limit: Duration::from_secs(5), max_depth: 4, max_programs: Some(1) };
    let r = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()).unwrap();
    let correct = r.per_image_predictions.iter().filter(|p| p.label == p.predicted).count();
    assert_eq!(r.best.accuracy, correct as f64 / 12.0);
    assert_eq!(r.stop_reason, StopReason::Budget);
    assert_eq!(r.candidates_evaluated, 1);
}

#[test]
fn tiny_time_budget_returns_best_so_far() {
    let (task, cache, pcfg) = cake_and_candles();
    let budget = SearchBudget { time_limit: Duration::from_millis(1), max_depth: 4, max_programs: None };
    let r = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()).unwrap();
    assert!(r.candidates_evaluated >= 1);
    assert!(matches!(r.stop_reason, StopReason::Budget | StopReason::Exhausted));
}

#[test]
fn early_stop_agrees_with_full_search() {
    let (task, cache, pcfg) = cake_and_candles();
    let budget = SearchBudget { time_limit: Duration::from_secs(5), max_depth: 4, max_programs: None };
    let full = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()).unwrap();
    let early = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions { early_stop: true }).unwrap();
    assert_eq!(early.best, full.best);
    assert_eq!(early.stop_reason, StopReason::EarlyStop);
    assert!(early.candidates_evaluated <= full.candidates_evaluated);
}

#[test]
fn synthesis_is_deterministic() {
    let (task, cache, pcfg) = cake_and_candles();
    let budget = SearchBudget { time_limit: Duration::from_secs(5), max_depth: 4, max_programs: None };
    let a = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()).unwrap();
    let b = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()).unwrap();
    assert_eq!((a.best, a.per_image_predictions, a.candidates_evaluated), (b.best, b.per_image_predictions, b.candidates_evaluated));
}

#[test]
fn missing_scene_is_refused_before_search() {
    let (task, mut cache, pcfg) = cake_and_candles();
    cache = {
        let mut c = SceneCache::new();
        for (k, v) in cache.iter().skip(1) {
            c.insert(k.clone(), v.clone());
        }
        c
    };
    let budget = SearchBudget { time_limit: Duration::from_secs(1), max_depth: 4, max_programs: None };
    let err = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()).unwrap_err();
    assert!(matches!(err, SearchError::MissingScene(_)));
}

#[test]
fn shallow_depth_has_no_candidate() {
    let (task, cache, pcfg) = cake_and_candles();
    let budget = SearchBudget { time_limit: Duration::from_secs(1), max_depth: 1, max_programs: None };
    let err = synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()).unwrap_err();
    assert_eq!(err, SearchError::NoCandidate);
}

#[test]
fn invalid_budget_is_rejected() {
    let (task, cache, pcfg) = cake_and_candles();
    let budget = SearchBudget { time_limit: Duration::ZERO, max_depth: 4, max_programs: None };
    assert!(matches!(
        synthesize(&task, &pcfg, &cache, &budget, SynthesisOptions::default()),
        Err(SearchError::InvalidBudget(_))
    ));
}
