//! End-to-end runs: ground, perceive, build the grammar, synthesize and evaluate, per seed.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{DslConfig, DslError, Profile};
use crate::grammar::{build_pcfg, GrammarError, GroundedSymbols, Pcfg, SymbolStats, Weighting};
use crate::perception::{
    EndpointConfig, Grounding, ImageInput, Manifest, MockBackend, OfflineBackend, Perceiver, PromptSet,
    ResponseCache, TransportError, VlmBackend,
};
use crate::scene::SceneCache;
use crate::search::{synthesize, SearchBudget, SearchError, StopReason, SynthesisOptions, SynthesisResult};
use crate::tasks::{evaluate_on_queries, load_task, EvalReport, Task, TaskError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("perception left few-shot images without scenes: {0}")]
    Misses(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("{0}")]
    Io(String),
}

impl PipelineError {
    /// Process exit code: 2 configuration, 3 transport, 4 no candidate.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Transport(_) | PipelineError::Misses(_) => 3,
            PipelineError::Search(SearchError::MissingScene(_)) => 3,
            PipelineError::Search(SearchError::NoCandidate) => 4,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Which model backend serves perception calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Http,
    /// Replay canned responses from a fixture's `mock/` directory.
    Mock(PathBuf),
    /// Refuse every call; all answers must come from the cache.
    Offline,
}

impl BackendChoice {
    pub fn build(&self, endpoint: &EndpointConfig) -> Result<Box<dyn VlmBackend>, PipelineError> {
        Ok(match self {
            BackendChoice::Http => Box::new(endpoint.http_backend()),
            BackendChoice::Mock(dir) => {
                let dir = if dir.join("mock").is_dir() { dir.join("mock") } else { dir.clone() };
                Box::new(MockBackend::load(&dir).map_err(|e| PipelineError::Config(format!("{}: {e}", dir.display())))?)
            }
            BackendChoice::Offline => Box::new(OfflineBackend::default()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task_path: PathBuf,
    /// Overrides the task's profile.
    pub profile: Option<Profile>,
    /// Explicit DSL; defaults to the profile's.
    pub dsl: Option<DslConfig>,
    pub endpoint: EndpointConfig,
    pub budget_secs: Option<f64>,
    pub max_depth: Option<usize>,
    pub max_programs: Option<u64>,
    pub seeds: Vec<u64>,
    pub uniform_weights: bool,
    pub early_stop: bool,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub backend: BackendChoice,
    pub prompts_dir: Option<PathBuf>,
    pub parallel_seeds: bool,
}

impl RunConfig {
    pub fn new(task_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            task_path: task_path.into(),
            profile: None,
            dsl: None,
            endpoint: EndpointConfig::default(),
            budget_secs: None,
            max_depth: None,
            max_programs: None,
            seeds: vec![0, 1, 2],
            uniform_weights: false,
            early_stop: false,
            cache_dir: None,
            out_dir: out_dir.into(),
            backend: BackendChoice::Http,
            prompts_dir: None,
            parallel_seeds: false,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.seeds.is_empty() {
            return Err(PipelineError::Config("at least one seed is required".into()));
        }
        if !self.task_path.is_file() {
            return Err(PipelineError::Config(format!("task file {} not found", self.task_path.display())));
        }
        if let Some(dir) = &self.prompts_dir {
            if !dir.is_dir() {
                return Err(PipelineError::Config(format!("prompt directory {} not found", dir.display())));
            }
        }
        if let BackendChoice::Mock(dir) = &self.backend {
            if !dir.is_dir() {
                return Err(PipelineError::Config(format!("mock fixture {} not found", dir.display())));
            }
        }
        if self.budget_secs.is_some_and(|b| !(b > 0.0)) {
            return Err(PipelineError::Config("budget must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(PipelineError::Config("max depth must be at least 1".into()));
        }
        Ok(())
    }

    pub fn profile_for(&self, task: &Task) -> Profile {
        self.profile.unwrap_or(task.profile)
    }

    pub fn dsl_for(&self, task: &Task) -> DslConfig {
        self.dsl.clone().unwrap_or_else(|| DslConfig::for_profile(self.profile_for(task)))
    }

    pub fn budget_for(&self, task: &Task) -> SearchBudget {
        let d = self.profile_for(task).defaults();
        SearchBudget {
            time_limit: Duration::from_secs_f64(self.budget_secs.unwrap_or(d.budget_secs as f64)),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            max_programs: self.max_programs,
        }
    }

    pub fn prompts(&self) -> Result<PromptSet, PipelineError> {
        match &self.prompts_dir {
            Some(dir) => PromptSet::default().with_overrides(dir).map_err(io_err(dir)),
            None => Ok(PromptSet::default()),
        }
    }
}

pub fn few_shot_inputs(task: &Task) -> Vec<ImageInput> {
    task.few_shot.iter().map(|e| ImageInput { digest: e.digest.clone(), path: e.path.clone() }).collect()
}

/// Grounds symbols on the unlabeled few-shot images.
pub fn ground_stage(perceiver: &Perceiver<'_>, task: &Task, profile: Profile, dsl: &DslConfig) -> Result<Grounding, PipelineError> {
    Ok(perceiver.ground_symbols(&few_shot_inputs(task), profile.defaults().counts, &dsl.removed_symbols)?)
}

/// Caches scenes for every task image; fails when a few-shot image has none.
pub fn perceive_stage(
    perceiver: &Perceiver<'_>,
    task: &Task,
    symbols: &GroundedSymbols,
    dsl: &DslConfig,
) -> Result<(SceneCache, Manifest), PipelineError> {
    let (scenes, manifest) = perceiver.precompute_task(task, symbols, &dsl.catalog());
    let misses = manifest.few_shot_misses();
    if !misses.is_empty() {
        let first_error = manifest.images.iter().find_map(|i| i.error.clone()).unwrap_or_default();
        return Err(PipelineError::Misses(format!("{} ({first_error})", misses.join(", "))));
    }
    Ok((scenes, manifest))
}

/// Grammar weighted by symbol occurrence in the few-shot scenes, or uniform.
pub fn grammar_stage(
    task: &Task,
    symbols: &GroundedSymbols,
    scenes: &SceneCache,
    dsl: &DslConfig,
    uniform: bool,
) -> Result<Pcfg, PipelineError> {
    if uniform {
        return Ok(build_pcfg(dsl, symbols, Weighting::Uniform)?);
    }
    let labeled = task
        .few_shot
        .iter()
        .map(|e| scenes.get(&e.digest).map(|s| (s, e.label)).ok_or_else(|| SearchError::MissingScene(e.image.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = SymbolStats::from_scenes(symbols, labeled);
    Ok(build_pcfg(dsl, symbols, Weighting::Occurrence(&stats))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub program: String,
    pub accuracy: f64,
    pub probability: f64,
    pub candidates_evaluated: u64,
    pub stop_reason: StopReason,
    pub balanced_accuracy: Option<f64>,
    pub network_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SeedSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub task_id: String,
    pub seeds: Vec<SeedOutcome>,
    pub completed: usize,
    pub mean_balanced_accuracy: Option<f64>,
}

impl PipelineReport {
    /// 0 when any seed completed, otherwise the first seed's error code.
    pub fn exit_code(&self) -> i32 {
        if self.completed > 0 {
            0
        } else {
            self.seeds.iter().find_map(|s| s.exit_code).unwrap_or(2)
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes") + "\n";
    std::fs::write(path, text).map_err(io_err(path))
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedArtifacts {
    pub grounding: Grounding,
    pub manifest: Manifest,
    pub scenes: SceneCache,
    pub pcfg: Pcfg,
    pub result: SynthesisResult,
    pub eval: EvalReport,
}

fn run_seed(cfg: &RunConfig, task: &Task, backend: &dyn VlmBackend, seed: u64) -> Result<SeedArtifacts, PipelineError> {
    let out = cfg.out_dir.join(format!("seed-{seed}"));
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let endpoint = EndpointConfig { seed: Some(seed), ..cfg.endpoint.clone() };
    let cache = match &cfg.cache_dir {
        Some(dir) if cfg.parallel_seeds => ResponseCache::open(&dir.join(format!("seed-{seed}"))),
        Some(dir) => ResponseCache::open(dir),
        None => Ok(ResponseCache::in_memory()),
    }
    .map_err(|e| PipelineError::Io(e.to_string()))?;
    let prompts = cfg.prompts()?;
    let perceiver = Perceiver::new(backend, &cache, &endpoint, &prompts);
    let profile = cfg.profile_for(task);
    let dsl = cfg.dsl_for(task);
    dsl.validate()?;

    let grounding = ground_stage(&perceiver, task, profile, &dsl)?;
    write_json(&out.join("grounding.json"), &grounding)?;
    let (scenes, manifest) = perceive_stage(&perceiver, task, &grounding.symbols, &dsl)?;
    write_json(&out.join("manifest.json"), &manifest)?;
    scenes.save(&out.join("scenes.json")).map_err(io_err(&out))?;

    let pcfg = grammar_stage(task, &grounding.symbols, &scenes, &dsl, cfg.uniform_weights)?;
    let grammar_path = out.join("grammar.txt");
    std::fs::write(&grammar_path, pcfg.dump()).map_err(io_err(&grammar_path))?;

    let budget = cfg.budget_for(task);
    let result = synthesize(task, &pcfg, &scenes, &budget, SynthesisOptions { early_stop: cfg.early_stop })?;
    write_json(&out.join("result.json"), &result)?;
    let eval = evaluate_on_queries(&result.best.program, task, &scenes);
    write_json(&out.join("eval.json"), &eval)?;
    log::info!("seed {seed}: {} (few-shot acc {}, query bacc {:?})", result.best.program, result.best.accuracy, eval.balanced_accuracy);
    Ok(SeedArtifacts { grounding, manifest, scenes, pcfg, result, eval })
}

fn outcome(seed: u64, r: Result<SeedArtifacts, PipelineError>, calls: u64) -> SeedOutcome {
    match r {
        Ok(a) => SeedOutcome {
            seed,
            summary: Some(SeedSummary {
                program: a.result.best.program.to_string(),
                accuracy: a.result.best.accuracy,
                probability: a.result.best.probability,
                candidates_evaluated: a.result.candidates_evaluated,
                stop_reason: a.result.stop_reason,
                balanced_accuracy: a.eval.balanced_accuracy,
                network_calls: calls,
            }),
            error: None,
            exit_code: None,
        },
        Err(e) => {
            log::error!("seed {seed} failed: {e}");
            SeedOutcome { seed, summary: None, error: Some(e.to_string()), exit_code: Some(e.exit_code()) }
        }
    }
}

/// Runs every seed and writes `aggregate.json`. A failing seed is reported, not fatal.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let task = load_task(&cfg.task_path)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let backend = cfg.backend.build(&cfg.endpoint)?;
    let backend: &dyn VlmBackend = backend.as_ref();

    let run_one = |seed: u64| {
        let before = backend.calls();
        let r = run_seed(cfg, &task, backend, seed);
        // Calls are only attributable per seed when seeds run one at a time.
        let calls = if cfg.parallel_seeds { 0 } else { backend.calls() - before };
        outcome(seed, r, calls)
    };
    let seeds: Vec<SeedOutcome> = if cfg.parallel_seeds {
        std::thread::scope(|scope| {
            let handles: Vec<_> = cfg.seeds.iter().map(|&s| scope.spawn(move || run_one(s))).collect();
            handles.into_iter().map(|h| h.join().expect("seed thread panicked")).collect()
        })
    } else {
        cfg.seeds.iter().map(|&s| run_one(s)).collect()
    };

    let done: Vec<f64> = seeds.iter().filter_map(|s| s.summary.as_ref()?.balanced_accuracy).collect();
    let report = PipelineReport {
        task_id: task.task_id.clone(),
        completed: seeds.iter().filter(|s| s.summary.is_some()).count(),
        mean_balanced_accuracy: (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64),
        seeds,
    };
    write_json(&cfg.out_dir.join("aggregate.json"), &report)?;
    Ok(report)
}
