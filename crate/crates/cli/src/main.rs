mod args;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use vlp_core::dsl::sexpr::parse_program;
use vlp_core::dsl::{Builtin, Catalog, DslEdit};
use vlp_core::grammar::{build_pcfg, grammar_diff, GroundedSymbols, Weighting};
use vlp_core::perception::{CacheStats, EndpointConfig, Grounding, Perceiver, ResponseCache};
use vlp_core::pipeline::{
    grammar_stage, ground_stage, run_pipeline, write_json, BackendChoice, PipelineError, RunConfig,
};
use vlp_core::scene::SceneCache;
use vlp_core::search::{synthesize, SynthesisOptions, SynthesisResult};
use vlp_core::tasks::{evaluate_on_queries, load_task, make_fixture, FixtureSpec, GuardSpec, Task};
use vlp_core::{DslConfig, Program};

use args::{CacheCommand, Cli, Command, DslArgs, DslCommand, DslEditArgs, EndpointArgs, SearchArgs};

type Result<T> = std::result::Result<T, PipelineError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run(a) => run(a),
        Command::Ground(a) => ground(a).map(|_| 0),
        Command::Perceive(a) => perceive(a).map(|_| 0),
        Command::Synthesize(a) => synthesize_cmd(a).map(|_| 0),
        Command::Eval(a) => eval(a).map(|_| 0),
        Command::Dsl(c) => dsl(c).map(|_| 0),
        Command::Cache(c) => cache(c).map(|_| 0),
        Command::Fixture(a) => fixture(a).map(|_| 0),
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn endpoint(a: &EndpointArgs) -> EndpointConfig {
    let d = EndpointConfig::default();
    EndpointConfig {
        base_url: a.endpoint.clone().unwrap_or(d.base_url),
        model: a.model.clone().unwrap_or(d.model),
        api_key_env: a.api_key_env.clone().unwrap_or(d.api_key_env),
        temperature: if a.greedy { 0.0 } else { a.temperature.unwrap_or(d.temperature) },
        greedy: a.greedy,
        max_retries: a.max_retries.unwrap_or(d.max_retries),
        timeout_secs: a.timeout_secs.unwrap_or(d.timeout_secs),
        seed: None,
    }
}

fn backend_choice(a: &EndpointArgs) -> BackendChoice {
    match (&a.mock_backend, a.offline) {
        (Some(dir), _) => BackendChoice::Mock(dir.clone()),
        (None, true) => BackendChoice::Offline,
        (None, false) => BackendChoice::Http,
    }
}

fn load_dsl(a: &DslArgs) -> Result<Option<DslConfig>> {
    let Some(path) = &a.dsl else { return Ok(None) };
    let mut cfg = DslConfig::load(path)?;
    if cfg.profile.is_none() {
        cfg.profile = a.profile;
    }
    Ok(Some(cfg))
}

fn run_config(task: &Path, out: &Path, dsl: &DslArgs, search: &SearchArgs, ep: &EndpointArgs) -> Result<RunConfig> {
    Ok(RunConfig {
        profile: dsl.profile,
        dsl: load_dsl(dsl)?,
        endpoint: endpoint(ep),
        budget_secs: search.budget_secs,
        max_depth: search.max_depth,
        max_programs: search.max_programs,
        uniform_weights: search.uniform_weights,
        early_stop: search.early_stop,
        cache_dir: ep.cache_dir.clone(),
        backend: backend_choice(ep),
        prompts_dir: ep.prompts_dir.clone(),
        ..RunConfig::new(task, out)
    })
}

fn run(a: args::RunArgs) -> Result<i32> {
    let cfg = RunConfig {
        seeds: a.seeds.clone(),
        parallel_seeds: a.parallel_seeds,
        ..run_config(&a.task, &a.out, &a.dsl, &a.search, &a.endpoint)?
    };
    let report = run_pipeline(&cfg)?;
    for s in &report.seeds {
        match (&s.summary, &s.error) {
            (Some(sum), _) => println!(
                "seed {}: {}  few-shot acc {:.3}  query bacc {}  ({} candidates, {:?}, {} calls)",
                s.seed,
                sum.program,
                sum.accuracy,
                sum.balanced_accuracy.map_or("n/a".into(), |b| format!("{b:.3}")),
                sum.candidates_evaluated,
                sum.stop_reason,
                sum.network_calls
            ),
            (None, Some(e)) => println!("seed {}: failed: {e}", s.seed),
            (None, None) => {}
        }
    }
    match report.mean_balanced_accuracy {
        Some(m) => println!("mean balanced accuracy over {} seeds: {m:.4}", report.completed),
        None => println!("no seed produced a query evaluation"),
    }
    Ok(report.exit_code())
}

/// Everything a single-stage command needs to talk to the model.
struct Stage {
    task: Task,
    cfg: RunConfig,
    endpoint: EndpointConfig,
    cache: ResponseCache,
}

impl Stage {
    fn new(a: &args::StageArgs) -> Result<Self> {
        let search = SearchArgs { budget_secs: None, max_depth: None, max_programs: None, uniform_weights: false, early_stop: false };
        let cfg = run_config(&a.task, &a.out, &a.dsl, &search, &a.endpoint)?;
        cfg.validate()?;
        let task = load_task(&a.task)?;
        std::fs::create_dir_all(&a.out).map_err(|e| PipelineError::Io(format!("{}: {e}", a.out.display())))?;
        let cache = match &cfg.cache_dir {
            Some(dir) => ResponseCache::open(dir).map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))?,
            None => ResponseCache::in_memory(),
        };
        let endpoint = EndpointConfig { seed: Some(a.seed), ..cfg.endpoint.clone() };
        Ok(Stage { task, cfg, endpoint, cache })
    }
}

fn ground(a: args::StageArgs) -> Result<Grounding> {
    let st = Stage::new(&a)?;
    let backend = st.cfg.backend.build(&st.endpoint)?;
    let prompts = st.cfg.prompts()?;
    let perceiver = Perceiver::new(backend.as_ref(), &st.cache, &st.endpoint, &prompts);
    let grounding = ground_stage(&perceiver, &st.task, st.cfg.profile_for(&st.task), &st.cfg.dsl_for(&st.task))?;
    write_json(&a.out.join("grounding.json"), &grounding)?;
    println!("objects:    {}", grounding.symbols.objects.join(", "));
    println!("properties: {}", grounding.symbols.properties.join(", "));
    println!("actions:    {}", grounding.symbols.actions.join(", "));
    Ok(grounding)
}

fn perceive(a: args::PerceiveArgs) -> Result<()> {
    let st = Stage::new(&a.stage)?;
    let path = a.grounding.unwrap_or_else(|| a.stage.out.join("grounding.json"));
    let grounding: Grounding = read_json(&path)?;
    let backend = st.cfg.backend.build(&st.endpoint)?;
    let prompts = st.cfg.prompts()?;
    let perceiver = Perceiver::new(backend.as_ref(), &st.cache, &st.endpoint, &prompts);
    let (scenes, manifest) = perceiver.precompute_task(&st.task, &grounding.symbols, &st.cfg.dsl_for(&st.task).catalog());
    // The manifest is written even when images are missing, so the failures can be inspected.
    write_json(&a.stage.out.join("manifest.json"), &manifest)?;
    let misses = manifest.few_shot_misses();
    if !misses.is_empty() {
        return Err(PipelineError::Misses(misses.join(", ")));
    }
    let scenes_path = a.stage.out.join("scenes.json");
    scenes.save(&scenes_path).map_err(|e| PipelineError::Io(format!("{}: {e}", scenes_path.display())))?;
    let t = &manifest.totals;
    println!(
        "{} images: {} object scenes, {} action scenes, {} size answers; parse rate {}; {} network calls, {} cache hits",
        t.images,
        t.object_entries,
        t.action_entries,
        t.size_entries,
        t.parse_rate.map_or("n/a".into(), |r| format!("{r:.3}")),
        t.network_calls,
        t.cache_hits
    );
    Ok(())
}

fn load_scenes(path: &Path) -> Result<SceneCache> {
    SceneCache::load(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn synthesize_cmd(a: args::SynthesizeArgs) -> Result<SynthesisResult> {
    let cfg = run_config(&a.task, &a.out, &a.dsl, &a.search, &EndpointArgs::none())?;
    let task = load_task(&a.task)?;
    let grounding: Grounding = read_json(&a.grounding.unwrap_or_else(|| a.out.join("grounding.json")))?;
    let scenes = load_scenes(&a.scenes.unwrap_or_else(|| a.out.join("scenes.json")))?;
    let dsl = cfg.dsl_for(&task);
    dsl.validate()?;
    std::fs::create_dir_all(&a.out).map_err(|e| PipelineError::Io(format!("{}: {e}", a.out.display())))?;
    let pcfg = grammar_stage(&task, &grounding.symbols, &scenes, &dsl, cfg.uniform_weights)?;
    let grammar_path = a.out.join("grammar.txt");
    std::fs::write(&grammar_path, pcfg.dump()).map_err(|e| PipelineError::Io(format!("{}: {e}", grammar_path.display())))?;
    let budget = cfg.budget_for(&task);
    let result = synthesize(&task, &pcfg, &scenes, &budget, SynthesisOptions { early_stop: cfg.early_stop })?;
    write_json(&a.out.join("result.json"), &result)?;
    println!(
        "{}  accuracy {:.3}  probability {:.3e}  ({} candidates, {:?})",
        result.best.program, result.best.accuracy, result.best.probability, result.candidates_evaluated, result.stop_reason
    );
    Ok(result)
}

fn all_builtins() -> Catalog {
    Catalog::new(Builtin::ALL.iter().copied().collect(), i64::from(u8::MAX))
}

fn eval(a: args::EvalArgs) -> Result<()> {
    let task = load_task(&a.task)?;
    let scenes = load_scenes(&a.scenes)?;
    let program: Program = match (&a.program, &a.result) {
        (Some(text), _) => parse_program(text, &all_builtins()).map_err(|e| config_err(format!("--program: {e}")))?,
        (None, Some(path)) => read_json::<SynthesisResult>(path)?.best.program,
        (None, None) => return Err(config_err("one of --program or --result is required")),
    };
    let report = evaluate_on_queries(&program, &task, &scenes);
    match &a.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    let fmt = |x: Option<f64>| x.map_or("n/a".into(), |v| format!("{v:.3}"));
    eprintln!(
        "{program}: balanced accuracy {} (TPR {}, TNR {}), {} failures",
        fmt(report.balanced_accuracy),
        fmt(report.true_positive_rate),
        fmt(report.true_negative_rate),
        report.failures
    );
    Ok(())
}

/// Stand-in vocabulary so a grammar can be built without a grounding.
fn placeholder_symbols(extra: &BTreeSet<String>) -> GroundedSymbols {
    let mut s = GroundedSymbols::new(&["object"], &["property"], &["action"]);
    // Removed or restored names show up as PROPERTY terminals in the diff.
    s.properties.extend(extra.iter().cloned());
    s
}

fn dsl(c: DslCommand) -> Result<()> {
    match c {
        DslCommand::Init { profile, out } => {
            DslConfig::for_profile(profile).save(&out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        DslCommand::Edit(a) => dsl_edit(a),
        DslCommand::Show { config, grounding } => {
            let cfg = DslConfig::load(&config)?;
            let symbols = match grounding {
                Some(p) => read_json::<Grounding>(&p)?.symbols,
                None => placeholder_symbols(&BTreeSet::new()),
            };
            let pcfg = build_pcfg(&cfg, &symbols, Weighting::Uniform)?;
            for w in &pcfg.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", pcfg.dump());
            Ok(())
        }
    }
}

fn dsl_edit(a: DslEditArgs) -> Result<()> {
    let before_cfg = DslConfig::load(&a.config)?;
    let mut edits = Vec::new();
    edits.extend(a.add_primitives.iter().cloned().map(DslEdit::AddPrimitive));
    edits.extend(a.remove_primitives.iter().cloned().map(DslEdit::RemovePrimitive));
    edits.extend(a.remove_symbols.iter().cloned().map(DslEdit::RemoveSymbol));
    edits.extend(a.restore_symbols.iter().cloned().map(DslEdit::RestoreSymbol));
    if a.add_size_predicates {
        edits.push(DslEdit::AddSizePredicates);
    }
    if a.remove_size_predicates {
        edits.push(DslEdit::RemoveSizePredicates);
    }
    if edits.is_empty() {
        return Err(config_err("no edit directives given"));
    }
    let symbols = match &a.grounding {
        Some(p) => read_json::<Grounding>(p)?.symbols,
        None => {
            let named: BTreeSet<String> =
                a.remove_symbols.iter().chain(&a.restore_symbols).map(|s| s.trim().to_lowercase()).collect();
            placeholder_symbols(&named.union(&before_cfg.removed_symbols).cloned().collect())
        }
    };
    let mut after_cfg = before_cfg.clone();
    let known = a.grounding.is_some().then(|| symbols.all());
    after_cfg.apply_edits(&edits, known.as_ref())?;

    let before = build_pcfg(&before_cfg, &symbols, Weighting::Uniform)?;
    let after = build_pcfg(&after_cfg, &symbols, Weighting::Uniform)?;
    for w in after.warnings.iter().filter(|w| !before.warnings.contains(w)) {
        eprintln!("warning: {w}");
    }
    let diff = grammar_diff(&before, &after);
    if diff.is_empty() {
        println!("grammar unchanged");
    }
    for change in &diff {
        println!("{change}");
    }
    if !a.dry_run {
        after_cfg.save(&a.config)?;
        eprintln!("updated {}", a.config.display());
    }
    Ok(())
}

fn cache(c: CacheCommand) -> Result<()> {
    let open = |dir: &PathBuf| {
        if !dir.is_dir() {
            return Err(config_err(format!("cache directory {} not found", dir.display())));
        }
        ResponseCache::open(dir).map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))
    };
    match c {
        CacheCommand::Stats { cache_dir } => {
            let stats = CacheStats::of(&open(&cache_dir)?);
            println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
        }
        CacheCommand::Show { cache_dir, kind, key } => {
            for entry in open(&cache_dir)?.entries() {
                if kind.as_ref().is_some_and(|k| &entry.kind != k) || key.as_ref().is_some_and(|k| !entry.key.starts_with(k)) {
                    continue;
                }
                println!("{}", serde_json::to_string(&entry).expect("entry serializes"));
            }
        }
    }
    Ok(())
}

fn fixture(a: args::FixtureArgs) -> Result<()> {
    let rule = parse_program(&a.rule, &all_builtins()).map_err(|e| config_err(format!("--rule: {e}")))?;
    let vocabulary = GroundedSymbols::new(&a.objects, &a.properties, &a.actions);
    let task_id = match &a.task_id {
        Some(id) => id.clone(),
        None => a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "fixture".into()),
    };
    let spec = FixtureSpec {
        n_pos: a.n_pos,
        n_neg: a.n_neg,
        n_query: a.n_query,
        guard: a.guard.then(|| GuardSpec::for_profile(a.profile)),
        ..FixtureSpec::new(&task_id, a.profile, rule, vocabulary, a.seed)
    };
    let mut configs = vec![DslConfig::for_profile(a.profile)];
    for path in &a.dsl {
        configs.push(DslConfig::load(path)?);
    }
    let bundle = make_fixture(&spec).map_err(|e| config_err(e.to_string()))?;
    let task = bundle.write(&a.out, &configs).map_err(|e| PipelineError::Io(e.to_string()))?;
    println!(
        "wrote {} ({} few-shot, {} query images, {} guard swaps)",
        a.out.display(),
        task.few_shot.len(),
        task.query.len(),
        bundle.guard_swaps
    );
    Ok(())
}

impl EndpointArgs {
    /// No model access; for commands that only read artifacts.
    fn none() -> Self {
        EndpointArgs {
            endpoint: None,
            model: None,
            api_key_env: None,
            greedy: false,
            temperature: None,
            max_retries: None,
            timeout_secs: None,
            mock_backend: None,
            offline: true,
            prompts_dir: None,
            cache_dir: None,
        }
    }
}
