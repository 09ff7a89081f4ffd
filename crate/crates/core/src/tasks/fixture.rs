//! Synthetic tasks with a known rule, random scenes and replayable model responses.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{save_task, sha256_hex, Example, Task};
use crate::dsl::{typecheck, DslConfig, Profile, Program};
use crate::executor::evaluate;
use crate::grammar::{build_pcfg, program_probability, GroundedSymbols, SymbolStats, Weighting};
use crate::perception::{
    DecodeParams, EndpointConfig, ImageInput, Perceiver, PromptSet, RecordingBackend, RequestKind, ResponseCache,
    TransportError, VlmBackend, VlmRequest,
};
use crate::scene::{python_str, ImageScenes, Scene, SceneCache};
use crate::search::HeapSearch;

/// Symbols scenes are drawn from.
pub type Vocabulary = GroundedSymbols;

/// Asks the generator to make sure the rule is what synthesis will find.
#[derive(Debug, Clone)]
pub struct GuardSpec {
    /// DSL the synthesizer will use.
    pub config: DslConfig,
    pub max_depth: usize,
    pub uniform_weights: bool,
    /// Largest number of programs to inspect before giving up.
    pub max_programs: usize,
    pub max_rounds: usize,
}

impl GuardSpec {
    pub fn for_profile(profile: Profile) -> Self {
        GuardSpec {
            config: DslConfig::for_profile(profile),
            max_depth: profile.defaults().max_depth,
            uniform_weights: false,
            max_programs: 200_000,
            max_rounds: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub task_id: String,
    pub profile: Profile,
    pub rule: Program,
    pub vocabulary: Vocabulary,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_query: usize,
    pub seed: u64,
    /// Rows added to every scene.
    pub background: Vec<Vec<String>>,
    /// A second separator every few-shot image must agree with, e.g. a planted shortcut.
    pub planted: Option<Program>,
    pub guard: Option<GuardSpec>,
    pub max_rows: usize,
}

impl FixtureSpec {
    pub fn new(task_id: &str, profile: Profile, rule: Program, vocabulary: Vocabulary, seed: u64) -> Self {
        FixtureSpec {
            task_id: task_id.to_string(),
            profile,
            rule,
            vocabulary,
            n_pos: 6,
            n_neg: 6,
            n_query: 4,
            seed,
            background: Vec::new(),
            planted: None,
            guard: None,
            max_rows: 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot generate fixture: {0}")]
    Generation(String),
    #[error("fixture IO: {0}")]
    Io(String),
}

/// A generated task with its ground-truth scenes.
#[derive(Debug, Clone)]
pub struct FixtureBundle {
    pub task: Task,
    pub rule: Program,
    pub vocabulary: Vocabulary,
    pub scenes: SceneCache,
    /// Number of few-shot images the guard replaced.
    pub guard_swaps: usize,
}

const MAX_DRAWS: usize = 50_000;

struct Generator<'a> {
    spec: &'a FixtureSpec,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn scene(&mut self) -> ImageScenes {
        let v = &self.spec.vocabulary;
        let mut objects = Scene::new(self.spec.background.iter().map(|r| r.iter()));
        let n_rows = self.rng.gen_range(0..=self.spec.max_rows);
        for _ in 0..n_rows {
            let Some(obj) = v.objects.choose(&mut self.rng) else { break };
            let mut row = vec![obj.clone()];
            for p in &v.properties {
                if row.len() < 3 && self.rng.gen_bool(0.25) {
                    row.push(p.clone());
                }
            }
            objects.push_row(&row);
        }
        let mut actions = Scene::empty();
        if !v.actions.is_empty() {
            for _ in 0..self.rng.gen_range(0..=2) {
                let act = v.actions.choose(&mut self.rng).expect("nonempty").clone();
                let mut row = vec![act];
                if let Some(obj) = objects.heads().collect::<Vec<_>>().choose(&mut self.rng) {
                    if self.rng.gen_bool(0.7) {
                        row.push(obj.to_string());
                    }
                }
                actions.push_row(&row);
            }
        }
        ImageScenes::new(objects, actions)
    }

    fn label(&self, program: &Program, s: &ImageScenes) -> Result<bool, FixtureError> {
        evaluate(program, s).map_err(|e| FixtureError::Generation(format!("{program}: {e}")))
    }

    /// Whether a few-shot image with this label may use scene `s`.
    fn planted_ok(&self, s: &ImageScenes, label: bool) -> Result<bool, FixtureError> {
        match &self.spec.planted {
            Some(p) => Ok(self.label(p, s)? == label),
            None => Ok(true),
        }
    }

    /// Draws scenes until `want_pos` positives and `want_neg` negatives are collected.
    fn draw(&mut self, want_pos: usize, want_neg: usize, few_shot: bool) -> Result<Vec<(ImageScenes, bool)>, FixtureError> {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for _ in 0..MAX_DRAWS {
            if pos.len() >= want_pos && neg.len() >= want_neg {
                break;
            }
            let s = self.scene();
            let label = self.label(&self.spec.rule, &s)?;
            if few_shot && !self.planted_ok(&s, label)? {
                continue;
            }
            match label {
                true if pos.len() < want_pos => pos.push((s, true)),
                false if neg.len() < want_neg => neg.push((s, false)),
                _ => {}
            }
        }
        if pos.len() < want_pos || neg.len() < want_neg {
            return Err(FixtureError::Generation(format!(
                "could not realize {want_pos} positives and {want_neg} negatives for {} (got {} and {})",
                self.spec.rule,
                pos.len(),
                neg.len()
            )));
        }
        // Alternate labels so the split is interleaved deterministically.
        let mut out = Vec::new();
        let (mut p, mut n) = (pos.into_iter(), neg.into_iter());
        loop {
            match (p.next(), n.next()) {
                (None, None) => break,
                (a, b) => out.extend(a.into_iter().chain(b)),
            }
        }
        Ok(out)
    }

    /// A scene on which `a` and `b` disagree, labeled by the rule and admissible for the
    /// few-shot split.
    fn distinguishing(&mut self, other: &Program) -> Result<Option<(ImageScenes, bool)>, FixtureError> {
        for _ in 0..MAX_DRAWS / 10 {
            let s = self.scene();
            let label = self.label(&self.spec.rule, &s)?;
            let theirs = evaluate(other, &s).unwrap_or(!label);
            if theirs != label && self.planted_ok(&s, label)? {
                return Ok(Some((s, label)));
            }
        }
        Ok(None)
    }
}

/// Generates a task whose labels follow `spec.rule` exactly.
pub fn make_fixture(spec: &FixtureSpec) -> Result<FixtureBundle, FixtureError> {
    if !typecheck(&spec.rule).valid {
        return Err(FixtureError::Generation(format!("rule {} is not well typed", spec.rule)));
    }
    let counts = spec.profile.defaults().counts;
    let v = &spec.vocabulary;
    if v.objects.len() > counts.objects || v.properties.len() > counts.properties || v.actions.len() > counts.actions {
        return Err(FixtureError::Generation(format!(
            "vocabulary exceeds the {} symbol counts {}/{}/{}",
            spec.profile, counts.objects, counts.properties, counts.actions
        )));
    }
    if spec.n_pos == 0 || spec.n_neg == 0 {
        return Err(FixtureError::Generation("need at least one positive and one negative".into()));
    }
    let mut g = Generator { spec, rng: ChaCha8Rng::seed_from_u64(spec.seed) };
    let mut few = g.draw(spec.n_pos, spec.n_neg, true)?;
    let query = g.draw(spec.n_query.div_ceil(2), spec.n_query / 2, false)?;

    let mut swaps = 0;
    if let Some(guard) = &spec.guard {
        swaps = run_guard(&mut g, guard, &mut few, &query)?;
    }

    let example = |split: &str, i: usize, label: bool| {
        let image = format!("images/{split}-{i:03}.bin");
        let digest = sha256_hex(placeholder_bytes(&spec.task_id, &image).as_bytes());
        Example { image: image.clone(), path: image.into(), digest, label }
    };
    let mut scenes = SceneCache::new();
    let mut few_shot = Vec::new();
    for (i, (s, label)) in few.into_iter().enumerate() {
        let ex = example("fs", i, label);
        scenes.insert(ex.digest.clone(), s);
        few_shot.push(ex);
    }
    let mut queries = Vec::new();
    for (i, (s, label)) in query.into_iter().enumerate() {
        let ex = example("q", i, label);
        scenes.insert(ex.digest.clone(), s);
        queries.push(ex);
    }
    let task = Task { task_id: spec.task_id.clone(), profile: spec.profile, few_shot, query: queries };
    task.validate().map_err(|e| FixtureError::Generation(e.to_string()))?;
    Ok(FixtureBundle { task, rule: spec.rule.clone(), vocabulary: spec.vocabulary.clone(), scenes, guard_swaps: swaps })
}

fn placeholder_bytes(task_id: &str, image: &str) -> String {
    format!("fixture image {task_id}/{image}\n")
}

/// Replaces few-shot images until no program enumerated before the rule separates the
/// few-shot set while disagreeing with the rule somewhere.
fn run_guard(
    g: &mut Generator<'_>,
    guard: &GuardSpec,
    few: &mut [(ImageScenes, bool)],
    query: &[(ImageScenes, bool)],
) -> Result<usize, FixtureError> {
    let spec = g.spec;
    let symbols = spec.vocabulary.without(&guard.config.removed_symbols);
    let mut equivalent: BTreeSet<String> = BTreeSet::new();
    let mut swaps = 0;
    for _round in 0..guard.max_rounds {
        let stats = SymbolStats::from_scenes(&symbols, few.iter().map(|(s, l)| (s, *l)));
        let weighting = if guard.uniform_weights { Weighting::Uniform } else { Weighting::Occurrence(&stats) };
        let pcfg = build_pcfg(&guard.config, &symbols, weighting).map_err(|e| FixtureError::Generation(e.to_string()))?;
        let p_rule = program_probability(&pcfg, &spec.rule)
            .map_err(|e| FixtureError::Generation(format!("rule not derivable: {e}")))?;
        let mut search = HeapSearch::new(&pcfg, guard.max_depth);
        let mut competitor = None;
        let mut reached = false;
        for _ in 0..guard.max_programs {
            let Some(node) = search.next_node() else { break };
            if search.probability(node) < p_rule {
                break;
            }
            let program = Program::new(search.expr(node));
            if program == spec.rule {
                reached = true;
                break;
            }
            let perfect = few.iter().all(|(s, l)| evaluate(&program, s).is_ok_and(|p| p == *l));
            if perfect && !equivalent.contains(&program.to_string()) {
                competitor = Some(program);
                break;
            }
        }
        let Some(other) = competitor else {
            if reached {
                return Ok(swaps);
            }
            return Err(FixtureError::Generation(format!(
                "rule {} was not reached within {} programs",
                spec.rule, guard.max_programs
            )));
        };
        match g.distinguishing(&other)? {
            Some((scene, label)) => {
                let slots: Vec<usize> = (0..few.len()).filter(|&i| few[i].1 == label).collect();
                let slot = *slots.choose(&mut g.rng).expect("both labels present");
                log::debug!("guard: {other} separates the few-shot set; replacing image {slot}");
                few[slot] = (scene, label);
                swaps += 1;
            }
            None => {
                // No random scene tells them apart; treat as equivalent if the queries agree.
                let agrees = query.iter().all(|(s, l)| evaluate(&other, s).is_ok_and(|p| p == *l));
                if !agrees {
                    return Err(FixtureError::Generation(format!("cannot separate {other} from the rule")));
                }
                equivalent.insert(other.to_string());
            }
        }
    }
    Err(FixtureError::Generation(format!("shortcut guard did not settle after {} rounds", guard.max_rounds)))
}

/// Answers prompts from ground-truth scenes, as a perfect model restricted to `symbols` would.
pub struct OracleBackend {
    truth: HashMap<String, ImageScenes>,
    symbols: GroundedSymbols,
    calls: AtomicU64,
}

impl OracleBackend {
    pub fn new(scenes: &SceneCache, symbols: GroundedSymbols) -> Self {
        let truth = scenes.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        OracleBackend { truth, symbols, calls: AtomicU64::new(0) }
    }

    fn fenced(var: &str, body: String) -> String {
        format!("```python\n{var} = {body}\n```")
    }

    fn flat(var: &str, items: &[String]) -> String {
        let quoted: Vec<String> = items.iter().map(|s| python_str(s)).collect();
        Self::fenced(var, format!("[{}]", quoted.join(", ")))
    }
}

impl VlmBackend for OracleBackend {
    fn complete(&self, request: &VlmRequest, _model: &str, _decode: &DecodeParams) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let scenes = || {
            let digest = &request.images.first().ok_or_else(|| TransportError::BadResponse("no image".into()))?.digest;
            self.truth.get(digest).ok_or_else(|| TransportError::MockMiss(digest.clone()))
        };
        let known = |s: &String, list: &[String]| list.contains(s);
        Ok(match &request.kind {
            RequestKind::GroundObjects => Self::flat("objects", &self.symbols.objects),
            RequestKind::GroundProperties => Self::flat("properties", &self.symbols.properties),
            RequestKind::GroundActions => Self::flat("actions", &self.symbols.actions),
            RequestKind::SceneObjects => {
                let mut s = Scene::empty();
                for row in scenes()?.objects.rows() {
                    if known(&row[0], &self.symbols.objects) {
                        let mut r = vec![row[0].clone()];
                        r.extend(row[1..].iter().filter(|p| known(p, &self.symbols.properties)).cloned());
                        s.push_row(&r);
                    }
                }
                Self::fenced("objects", s.to_python())
            }
            RequestKind::SceneActions => {
                let mut s = Scene::empty();
                for row in scenes()?.actions.rows() {
                    if known(&row[0], &self.symbols.actions) {
                        let mut r = vec![row[0].clone()];
                        r.extend(row[1..].iter().filter(|o| known(o, &self.symbols.objects)).cloned());
                        s.push_row(&r);
                    }
                }
                Self::fenced("actions", s.to_python())
            }
            RequestKind::Size { .. } => "NO".to_string(),
        })
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[derive(Serialize, Deserialize)]
struct FixtureMeta {
    task_id: String,
    profile: Profile,
    rule: String,
    vocabulary: Vocabulary,
    guard_swaps: usize,
}

impl FixtureBundle {
    /// Writes `task.json`, placeholder images, `scenes.json`, `fixture.json` and a `mock/`
    /// directory answering every request a pipeline run makes under each of `configs`.
    pub fn write(&self, dir: &Path, configs: &[DslConfig]) -> Result<Task, FixtureError> {
        let io = |e: std::io::Error| FixtureError::Io(e.to_string());
        std::fs::create_dir_all(dir.join("images")).map_err(io)?;
        std::fs::create_dir_all(dir.join("mock")).map_err(io)?;
        let mut task = self.task.clone();
        for ex in task.few_shot.iter_mut().chain(task.query.iter_mut()) {
            ex.path = dir.join(&ex.image);
            std::fs::write(&ex.path, placeholder_bytes(&task.task_id, &ex.image)).map_err(io)?;
        }
        save_task(&task, &dir.join("task.json")).map_err(|e| FixtureError::Io(e.to_string()))?;
        self.scenes.save(&dir.join("scenes.json")).map_err(io)?;
        let meta = FixtureMeta {
            task_id: task.task_id.clone(),
            profile: task.profile,
            rule: self.rule.to_string(),
            vocabulary: self.vocabulary.clone(),
            guard_swaps: self.guard_swaps,
        };
        std::fs::write(dir.join("fixture.json"), serde_json::to_string_pretty(&meta).expect("meta serializes")).map_err(io)?;

        let endpoint = EndpointConfig { max_retries: 0, ..EndpointConfig::default() };
        let prompts = PromptSet::default();
        let few_inputs: Vec<ImageInput> =
            task.few_shot.iter().map(|e| ImageInput { digest: e.digest.clone(), path: e.path.clone() }).collect();
        let counts = task.profile.defaults().counts;
        for config in configs {
            let symbols = self.vocabulary.without(&config.removed_symbols);
            let recorder = RecordingBackend::new(OracleBackend::new(&self.scenes, symbols));
            let cache = ResponseCache::in_memory();
            let perceiver = Perceiver::new(&recorder, &cache, &endpoint, &prompts);
            let grounding = perceiver
                .ground_symbols(&few_inputs, counts, &config.removed_symbols)
                .map_err(|e| FixtureError::Generation(e.to_string()))?;
            let (_, manifest) = perceiver.precompute_task(&task, &grounding.symbols, &config.catalog());
            if manifest.totals.misses > 0 {
                return Err(FixtureError::Generation("oracle could not answer every request".into()));
            }
            for doc in recorder.into_recorded() {
                let text = serde_json::to_string_pretty(&doc).expect("mock doc serializes");
                std::fs::write(dir.join("mock").join(format!("{}.json", doc.digest)), text).map_err(io)?;
            }
        }
        Ok(task)
    }
}
