//! Symbol grounding and scene extraction through a vision-language model, with every response
//! cached so later stages run offline.

mod backend;
mod cache;
mod parse;
pub mod prompts;

use std::cell::Cell;
use std::collections::BTreeSet;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dsl::{Builtin, Catalog, SceneKind, SymbolCounts};
use crate::grammar::GroundedSymbols;
use crate::scene::{size_key, ImageScenes, Scene, SceneCache};
use crate::tasks::Task;

pub use backend::{
    HttpBackend, ImageInput, MockBackend, MockResponse, OfflineBackend, RequestKind, TransportError, VlmBackend,
    VlmRequest,
};
pub use cache::{cache_key, CacheStats, CachedResponse, DecodeParams, ResponseCache};
pub use parse::{parse_list_response, parse_yes_no, Item, ParsedListResponse, Repair, Shape};
pub use prompts::PromptSet;

/// Where and how to call the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub greedy: bool,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub seed: Option<u64>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "VLP_API_KEY".into(),
            temperature: 1.0,
            greedy: false,
            max_retries: 3,
            timeout_secs: 120,
            seed: None,
        }
    }
}

impl EndpointConfig {
    pub fn decode(&self) -> DecodeParams {
        DecodeParams { temperature: self.temperature, greedy: self.greedy, seed: self.seed }
    }

    pub fn http_backend(&self) -> HttpBackend {
        HttpBackend::new(&self.base_url, &self.api_key_env, Duration::from_secs(self.timeout_secs), self.max_retries)
    }
}

/// Parse accounting for one list-valued call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFlags {
    pub parse_ok: bool,
    pub repaired: bool,
    /// Served from the cache without a model call.
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub symbols: GroundedSymbols,
    pub objects: Option<ParseFlags>,
    pub properties: Option<ParseFlags>,
    pub actions: Option<ParseFlags>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    pub scene: Scene,
    /// `None` when no call was needed.
    pub flags: Option<ParseFlags>,
}

/// Issues prompts through a backend, reading and filling the response cache.
pub struct Perceiver<'a> {
    backend: &'a dyn VlmBackend,
    cache: &'a ResponseCache,
    endpoint: &'a EndpointConfig,
    prompts: &'a PromptSet,
    cache_hits: Cell<u64>,
}

impl<'a> Perceiver<'a> {
    pub fn new(
        backend: &'a dyn VlmBackend,
        cache: &'a ResponseCache,
        endpoint: &'a EndpointConfig,
        prompts: &'a PromptSet,
    ) -> Self {
        Perceiver { backend, cache, endpoint, prompts, cache_hits: Cell::new(0) }
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.get()
    }

    pub fn network_calls(&self) -> u64 {
        self.backend.calls()
    }

    /// Cached call. Returns the raw text and whether it came from the cache.
    fn call(&self, request: &VlmRequest, shape: Option<Shape>) -> Result<(CachedResponse, bool), TransportError> {
        let decode = self.endpoint.decode();
        let key = cache_key(&request.digest(), &self.endpoint.model, &decode);
        if let Some(hit) = self.cache.get(&key) {
            self.cache_hits.set(self.cache_hits.get() + 1);
            return Ok((hit, true));
        }
        let raw = self.backend.complete(request, &self.endpoint.model, &decode)?;
        let (rows, parse_ok, repaired, repairs) = match shape {
            Some(shape) => {
                let p = parse_list_response(&raw, shape);
                (p.rows, p.parse_ok, p.repaired, p.repairs)
            }
            None => (Vec::new(), parse_yes_no(&raw).is_some(), false, Vec::new()),
        };
        let doc = CachedResponse {
            key,
            kind: request.kind.label().to_string(),
            raw_text: raw,
            rows,
            parse_ok,
            repaired,
            repairs,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            model: self.endpoint.model.clone(),
            decode,
        };
        if let Err(e) = self.cache.put(doc.clone()) {
            log::warn!("could not persist cache entry {}: {e}", doc.key);
        }
        Ok((doc, false))
    }

    /// List-valued call with up to `max_retries` extra attempts on unparsable output.
    fn call_list(
        &self,
        kind: RequestKind,
        prompt: String,
        images: &[ImageInput],
        shape: Shape,
    ) -> Result<(Vec<Vec<String>>, ParseFlags), TransportError> {
        let mut all_cached = true;
        for attempt in 0..=self.endpoint.max_retries {
            let request = VlmRequest { kind: kind.clone(), prompt: prompt.clone(), images: images.to_vec(), attempt };
            let (doc, cached) = self.call(&request, Some(shape))?;
            all_cached &= cached;
            if doc.parse_ok {
                return Ok((doc.rows, ParseFlags { parse_ok: true, repaired: doc.repaired, cached: all_cached }));
            }
            log::warn!("unparsable {} response (attempt {attempt})", kind.label());
        }
        Ok((Vec::new(), ParseFlags { parse_ok: false, repaired: false, cached: all_cached }))
    }

    /// Proposes objects, then properties and actions for those objects. A zero count skips
    /// the corresponding prompt.
    pub fn ground_symbols(
        &self,
        images: &[ImageInput],
        counts: SymbolCounts,
        removed: &BTreeSet<String>,
    ) -> Result<Grounding, TransportError> {
        let flat = |rows: Vec<Vec<String>>, n: usize| -> Vec<String> {
            let items: Vec<String> = rows.into_iter().flatten().collect();
            let mut g = GroundedSymbols::new(&items, &[], &[]).objects;
            g.truncate(n);
            g
        };
        let mut grounding = Grounding { symbols: GroundedSymbols::default(), objects: None, properties: None, actions: None };
        if counts.objects > 0 {
            let prompt = self.prompts.render(prompts::GROUND_OBJECTS, &[("n", &counts.objects.to_string())]);
            let (rows, flags) = self.call_list(RequestKind::GroundObjects, prompt, images, Shape::Flat)?;
            grounding.symbols.objects = flat(rows, counts.objects);
            grounding.objects = Some(flags);
        }
        let objects = prompts::list_literal(&grounding.symbols.objects);
        if counts.properties > 0 {
            let n = counts.properties.to_string();
            let prompt = self.prompts.render(prompts::GROUND_PROPERTIES, &[("n", &n), ("objects", &objects)]);
            let (rows, flags) = self.call_list(RequestKind::GroundProperties, prompt, images, Shape::Flat)?;
            grounding.symbols.properties = flat(rows, counts.properties);
            grounding.properties = Some(flags);
        }
        if counts.actions > 0 {
            let n = counts.actions.to_string();
            let prompt = self.prompts.render(prompts::GROUND_ACTIONS, &[("n", &n), ("objects", &objects)]);
            let (rows, flags) = self.call_list(RequestKind::GroundActions, prompt, images, Shape::Flat)?;
            grounding.symbols.actions = flat(rows, counts.actions);
            grounding.actions = Some(flags);
        }
        grounding.symbols = grounding.symbols.without(removed);
        Ok(grounding)
    }

    /// Extracts one scene. Irreparable output yields the empty scene with `parse_ok = false`.
    pub fn extract_scene(
        &self,
        image: &ImageInput,
        kind: SceneKind,
        symbols: &GroundedSymbols,
    ) -> Result<SceneOutcome, TransportError> {
        let objects = prompts::list_literal(&symbols.objects);
        let (request_kind, prompt) = match kind {
            SceneKind::Objects => {
                if symbols.objects.is_empty() {
                    return Ok(SceneOutcome { scene: Scene::empty(), flags: None });
                }
                let properties = prompts::list_literal(&symbols.properties);
                let p = self.prompts.render(prompts::GET_OBJECTS, &[("objects", &objects), ("properties", &properties)]);
                (RequestKind::SceneObjects, p)
            }
            SceneKind::Actions => {
                if symbols.actions.is_empty() {
                    return Ok(SceneOutcome { scene: Scene::empty(), flags: None });
                }
                let actions = prompts::list_literal(&symbols.actions);
                let p = self.prompts.render(prompts::GET_ACTIONS, &[("actions", &actions), ("objects", &objects)]);
                (RequestKind::SceneActions, p)
            }
        };
        let (rows, flags) = self.call_list(request_kind, prompt, std::slice::from_ref(image), Shape::Nested)?;
        Ok(SceneOutcome { scene: Scene::new(rows), flags: Some(flags) })
    }

    /// Asks a yes/no size question. Unreadable answers fall back to `false` after retries.
    pub fn answer_size_predicate(
        &self,
        image: &ImageInput,
        predicate: Builtin,
        object: &str,
        property: Option<&str>,
    ) -> Result<bool, TransportError> {
        let mut vars = vec![("obj", object)];
        if let Some(p) = property {
            vars.push(("prop", p));
        }
        let prompt = prompts::render(self.prompts.size_template(predicate), &vars);
        for attempt in 0..=self.endpoint.max_retries {
            let request = VlmRequest {
                kind: RequestKind::size(predicate, object, property),
                prompt: prompt.clone(),
                images: vec![image.clone()],
                attempt,
            };
            let (doc, _) = self.call(&request, None)?;
            if let Some(answer) = parse_yes_no(&doc.raw_text) {
                return Ok(answer);
            }
        }
        log::warn!("no YES/NO answer for {}; treating as false", size_key(predicate, object, property));
        Ok(false)
    }

    /// Fills a scene cache for every task image.
    pub fn precompute_task(&self, task: &Task, symbols: &GroundedSymbols, catalog: &Catalog) -> (SceneCache, Manifest) {
        let calls_before = self.network_calls();
        let hits_before = self.cache_hits();
        let want_objects = catalog.contains(Builtin::GetObjects) && !symbols.objects.is_empty();
        let want_actions = catalog.contains(Builtin::GetActions) && !symbols.actions.is_empty();
        let size_preds: Vec<Builtin> = Builtin::SIZE_PREDICATES.into_iter().filter(|b| catalog.contains(*b)).collect();

        let mut scenes = SceneCache::new();
        let mut images = Vec::new();
        for (split, ex) in task.few_shot.iter().map(|e| ("few_shot", e)).chain(task.query.iter().map(|e| ("query", e))) {
            let input = ImageInput { digest: ex.digest.clone(), path: ex.path.clone() };
            let mut entry = ManifestImage {
                image: ex.image.clone(),
                digest: ex.digest.clone(),
                split: split.to_string(),
                objects: None,
                actions: None,
                size_answers: 0,
                error: None,
            };
            let result = (|| -> Result<ImageScenes, TransportError> {
                let mut s = ImageScenes::default();
                if want_objects {
                    let out = self.extract_scene(&input, SceneKind::Objects, symbols)?;
                    s.objects = out.scene;
                    entry.objects = out.flags;
                }
                if want_actions {
                    let out = self.extract_scene(&input, SceneKind::Actions, symbols)?;
                    s.actions = out.scene;
                    entry.actions = out.flags;
                }
                for &pred in &size_preds {
                    for obj in &symbols.objects {
                        if pred.arity() == 2 {
                            s.size_answers.insert(size_key(pred, obj, None), self.answer_size_predicate(&input, pred, obj, None)?);
                        } else {
                            for prop in &symbols.properties {
                                let ans = self.answer_size_predicate(&input, pred, obj, Some(prop))?;
                                s.size_answers.insert(size_key(pred, obj, Some(prop)), ans);
                            }
                        }
                    }
                }
                entry.size_answers = s.size_answers.len();
                Ok(s)
            })();
            match result {
                Ok(s) => scenes.insert(ex.digest.clone(), s),
                Err(e) => {
                    log::warn!("{}: {e}", ex.image);
                    entry.error = Some(e.to_string());
                }
            }
            images.push(entry);
        }
        let manifest = Manifest::new(
            task.task_id.clone(),
            images,
            self.network_calls() - calls_before,
            self.cache_hits() - hits_before,
        );
        (scenes, manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub image: String,
    pub digest: String,
    pub split: String,
    pub objects: Option<ParseFlags>,
    pub actions: Option<ParseFlags>,
    pub size_answers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestTotals {
    pub images: usize,
    pub object_entries: usize,
    pub action_entries: usize,
    pub size_entries: usize,
    pub misses: usize,
    pub parse_ok: usize,
    pub repaired: usize,
    pub parse_failed: usize,
    pub parse_rate: Option<f64>,
    pub network_calls: u64,
    pub cache_hits: u64,
}

/// Per-image record of a precompute pass plus aggregates derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub task_id: String,
    pub images: Vec<ManifestImage>,
    pub totals: ManifestTotals,
}

impl Manifest {
    pub fn new(task_id: String, images: Vec<ManifestImage>, network_calls: u64, cache_hits: u64) -> Self {
        let totals = Self::aggregate(&images, network_calls, cache_hits);
        Manifest { task_id, images, totals }
    }

    /// Totals recomputed from the per-image flags.
    pub fn aggregate(images: &[ManifestImage], network_calls: u64, cache_hits: u64) -> ManifestTotals {
        let mut t = ManifestTotals { images: images.len(), network_calls, cache_hits, ..Default::default() };
        for img in images {
            if img.error.is_some() {
                t.misses += 1;
                continue;
            }
            for flags in [img.objects, img.actions].into_iter().flatten() {
                t.parse_ok += flags.parse_ok as usize;
                t.repaired += flags.repaired as usize;
                t.parse_failed += !flags.parse_ok as usize;
            }
            t.object_entries += img.objects.is_some() as usize;
            t.action_entries += img.actions.is_some() as usize;
            t.size_entries += img.size_answers;
        }
        let parsed = t.parse_ok + t.parse_failed;
        t.parse_rate = (parsed > 0).then(|| t.parse_ok as f64 / parsed as f64);
        t
    }

    /// Few-shot images without a usable scene.
    pub fn few_shot_misses(&self) -> Vec<&str> {
        self.images.iter().filter(|i| i.split == "few_shot" && i.error.is_some()).map(|i| i.image.as_str()).collect()
    }
}

/// Wraps a backend and records every request it answers, for building mock fixtures.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<Vec<MockResponse>>,
}

impl<B: VlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, recorded: Mutex::new(Vec::new()) }
    }

    pub fn into_recorded(self) -> Vec<MockResponse> {
        self.recorded.into_inner().expect("recording lock")
    }
}

impl<B: VlmBackend> VlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &VlmRequest, model: &str, decode: &DecodeParams) -> Result<String, TransportError> {
        let response = self.inner.complete(request, model, decode)?;
        self.recorded.lock().expect("recording lock").push(MockResponse {
            digest: request.digest(),
            kind: request.kind.clone(),
            response: response.clone(),
        });
        Ok(response)
    }

    fn calls(&self) -> u64 {
        self.inner.calls()
    }
}
