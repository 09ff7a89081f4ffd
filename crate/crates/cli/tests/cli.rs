use std::path::Path;
use std::process::{Command, Output};

use vlp_core::grammar::Pcfg;
use vlp_core::search::SynthesisResult;
use vlp_core::tasks::EvalReport;

fn vlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn ok(o: Output) -> String {
    assert_eq!(code(&o), 0, "stdout:\n{}\nstderr:\n{}", text(&o.stdout), text(&o.stderr));
    text(&o.stdout)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a cake-and-candles fixture and returns its directory.
fn fixture(root: &Path, extra: &[&str]) -> std::path::PathBuf {
    let dir = root.join("cake");
    let mut args = vec![
        "fixture",
        "--rule",
        "(and (exists_object (get_objects IMG) cake) (exists_object (get_objects IMG) candles))",
        "--profile",
        "bongard-hoi",
        "--objects",
        "cake,candles,dog",
        "--properties",
        "red,small",
        "--actions",
        "eating",
        "--seed",
        "3",
        "--guard",
        "--out",
        p(&dir),
    ];
    args.extend_from_slice(extra);
    ok(vlp(&args));
    dir
}

const FAST: [&str; 4] = ["--budget-secs", "5", "--early-stop", "--log=error"];

#[test]
fn run_with_mock_backend_then_offline() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), &[]);
    let (task, cache, out) = (fx.join("task.json"), tmp.path().join("cache"), tmp.path().join("out"));
    let mut args = vec!["run", "--task", p(&task), "--out", p(&out), "--mock-backend", p(&fx), "--cache-dir", p(&cache)];
    args.extend_from_slice(&FAST);
    let stdout = ok(vlp(&args));
    assert_eq!(stdout.matches("query bacc 1.000").count(), 3, "{stdout}");
    assert!(stdout.contains("mean balanced accuracy over 3 seeds: 1.0000"), "{stdout}");

    // Every artifact reloads through the library.
    let result: SynthesisResult = serde_json::from_str(&std::fs::read_to_string(out.join("seed-0/result.json")).unwrap()).unwrap();
    assert_eq!(result.best.accuracy, 1.0);
    let eval: EvalReport = serde_json::from_str(&std::fs::read_to_string(out.join("seed-0/eval.json")).unwrap()).unwrap();
    assert_eq!(eval.balanced_accuracy, Some(1.0));
    let grammar = std::fs::read_to_string(out.join("seed-0/grammar.txt")).unwrap();
    assert_eq!(Pcfg::load(&grammar).unwrap().dump(), grammar);
    vlp_core::scene::SceneCache::load(&out.join("seed-0/scenes.json")).unwrap();

    let again = tmp.path().join("again");
    let mut args = vec!["run", "--task", p(&task), "--out", p(&again), "--offline", "--cache-dir", p(&cache)];
    args.extend_from_slice(&FAST);
    let stdout = ok(vlp(&args));
    assert_eq!(stdout.matches(", 0 calls)").count(), 3, "{stdout}");
}

#[test]
fn staged_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), &[]);
    let task = fx.join("task.json");
    let out = tmp.path().join("stages");
    let cache = tmp.path().join("cache");
    let model = ["--mock-backend", p(&fx), "--cache-dir", p(&cache)];

    let mut args = vec!["ground", "--task", p(&task), "--out", p(&out)];
    args.extend_from_slice(&model);
    let stdout = ok(vlp(&args));
    assert!(stdout.contains("objects:    cake, candles, dog"), "{stdout}");

    let mut args = vec!["perceive", "--task", p(&task), "--out", p(&out)];
    args.extend_from_slice(&model);
    let stdout = ok(vlp(&args));
    assert!(stdout.contains("parse rate 1.000"), "{stdout}");

    let stdout = ok(vlp(&["synthesize", "--task", p(&task), "--out", p(&out), "--budget-secs", "5", "--early-stop"]));
    assert!(stdout.contains("accuracy 1.000"), "{stdout}");

    let report = out.join("eval.json");
    ok(vlp(&["eval", "--task", p(&task), "--scenes", p(&out.join("scenes.json")), "--result", p(&out.join("result.json")), "--out", p(&report)]));
    let eval: EvalReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(eval.balanced_accuracy, Some(1.0));

    let shortcut = vlp(&["eval", "--task", p(&task), "--scenes", p(&out.join("scenes.json")), "--program", "(exists_object (get_objects IMG) dog)"]);
    let eval: EvalReport = serde_json::from_str(&ok(shortcut)).unwrap();
    assert!(eval.balanced_accuracy.unwrap() < 1.0);

    // The staged ground used seed 0, so `run` seed 0 finds everything cached.
    let stdout = ok(vlp(&["run", "--task", p(&task), "--out", p(&tmp.path().join("r")), "--offline", "--cache-dir", p(&cache), "--seeds", "0", "--early-stop"]));
    assert!(stdout.contains("seed 0:") && !stdout.contains("failed"), "{stdout}");

    let stats = ok(vlp(&["cache", "stats", "--cache-dir", p(&cache)]));
    let stats: serde_json::Value = serde_json::from_str(&stats).unwrap();
    assert!(stats["entries"].as_u64().unwrap() > 0);
    let lines = ok(vlp(&["cache", "show", "--cache-dir", p(&cache), "--kind", "scene_objects"]));
    assert!(lines.lines().count() > 0);
    for line in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["kind"], "scene_objects");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), &[]);
    let task = fx.join("task.json");
    let out = tmp.path().join("out");

    let missing = vlp(&["run", "--task", p(&tmp.path().join("nope.json")), "--out", p(&out)]);
    assert_eq!(code(&missing), 2);
    assert_eq!(code(&vlp(&["run", "--task", p(&task), "--out", p(&out), "--profile", "imagenet"])), 2);
    assert_eq!(code(&vlp(&["run", "--task", p(&task), "--out", p(&out), "--budget-secs", "0", "--offline"])), 2);

    let offline = vlp(&["run", "--task", p(&task), "--out", p(&out), "--offline", "--log=off"]);
    assert_eq!(code(&offline), 3, "{}", text(&offline.stdout));

    let shallow = vlp(&["run", "--task", p(&task), "--out", p(&out), "--mock-backend", p(&fx), "--max-depth", "1", "--seeds", "0"]);
    assert_eq!(code(&shallow), 4, "{}", text(&shallow.stdout));
}

#[test]
fn dsl_edits_print_grammar_diffs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("clevr.toml");
    ok(vlp(&["dsl", "init", "--profile", "clevr-hans3", "--out", p(&cfg)]));
    let grounding = tmp.path().join("grounding.json");
    std::fs::write(
        &grounding,
        r#"{"symbols": {"objects": ["cube", "sphere"], "properties": ["red", "gold", "blue", "metal"], "actions": []},
            "objects": null, "properties": null, "actions": null}"#,
    )
    .unwrap();

    let dump = ok(vlp(&["dsl", "show", "--config", p(&cfg), "--grounding", p(&grounding)]));
    assert!(!dump.contains("action"), "{dump}");
    assert!(dump.contains("PROPERTY -> \"red\""));

    let diff = ok(vlp(&["dsl", "edit", "--config", p(&cfg), "--remove-symbols", "red,gold", "--grounding", p(&grounding)]));
    let removed: Vec<&str> = diff.lines().filter(|l| l.starts_with("- ")).collect();
    assert_eq!(removed.len(), 2, "{diff}");
    assert!(removed.iter().all(|l| l.starts_with("- PROPERTY -> ")));
    assert!(diff.lines().all(|l| l.starts_with("- PROPERTY") || l.starts_with("~ PROPERTY")), "{diff}");
    let dump = ok(vlp(&["dsl", "show", "--config", p(&cfg), "--grounding", p(&grounding)]));
    assert!(!dump.contains("\"red\"") && !dump.contains("\"gold\""), "{dump}");

    let diff = ok(vlp(&["dsl", "edit", "--config", p(&cfg), "--add-size-predicates"]));
    let added: Vec<&str> = diff.lines().filter(|l| l.starts_with("+ BOOL -> ")).collect();
    assert_eq!(added.len(), 4, "{diff}");

    let bad = vlp(&["dsl", "edit", "--config", p(&cfg), "--remove-symbols", "silver", "--grounding", p(&grounding)]);
    assert_eq!(code(&bad), 2);
    assert!(text(&bad.stderr).contains("valid symbols: blue, cube"), "{}", text(&bad.stderr));
    let bad = vlp(&["dsl", "edit", "--config", p(&cfg), "--add-primitives", "exists_thing"]);
    assert_eq!(code(&bad), 2);
    assert!(text(&bad.stderr).contains("exists_object"), "{}", text(&bad.stderr));
}

#[test]
fn removing_get_actions_cascades() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("hoi.toml");
    ok(vlp(&["dsl", "init", "--profile", "bongard-hoi", "--out", p(&cfg)]));
    let o = vlp(&["dsl", "edit", "--config", p(&cfg), "--remove-primitives", "get_actions", "--dry-run"]);
    let (stdout, stderr) = (text(&o.stdout), text(&o.stderr));
    assert_eq!(code(&o), 0, "{stderr}");
    assert!(stderr.contains("warning: dropped exists_action"), "{stderr}");
    assert!(stdout.contains("- SCENE -> get_actions(IMG)"), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("- BOOL -> exists_action_with_object")), "{stdout}");
    // Dry run leaves the file alone.
    assert!(ok(vlp(&["dsl", "show", "--config", p(&cfg)])).contains("get_actions"));
}

#[test]
fn fixture_rejects_unsatisfiable_rules() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vlp(&[
        "fixture", "--rule", "(exists_object (get_objects IMG) unicorn)", "--profile", "bongard-hoi",
        "--objects", "cake", "--out", p(&tmp.path().join("x")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("cannot generate fixture"), "{}", text(&o.stderr));
}
