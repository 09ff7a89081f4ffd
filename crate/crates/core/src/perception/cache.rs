//! Content-addressed store of model responses, one JSON document per key.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::parse::Repair;

/// Sampling parameters that influence a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub greedy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DecodeParams {
    /// Temperature actually sent; greedy decoding forces zero.
    pub fn effective_temperature(&self) -> f64 {
        if self.greedy {
            0.0
        } else {
            self.temperature
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub key: String,
    pub kind: String,
    pub raw_text: String,
    pub rows: Vec<Vec<String>>,
    pub parse_ok: bool,
    pub repaired: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repairs: Vec<Repair>,
    pub timestamp: u64,
    pub model: String,
    pub decode: DecodeParams,
}

/// Cache key for a request digest under a model and decode setting.
pub fn cache_key(request_digest: &str, model: &str, decode: &DecodeParams) -> String {
    let mut h = Sha256::new();
    h.update(request_digest.as_bytes());
    h.update([0]);
    h.update(model.as_bytes());
    h.update([0]);
    h.update(serde_json::to_string(decode).expect("decode params serialize").as_bytes());
    hex::encode(h.finalize())
}

/// Response cache, on disk when given a directory and in memory otherwise.
#[derive(Debug)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, CachedResponse>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache { dir: None, memory: Mutex::new(HashMap::new()) }
    }

    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ResponseCache { dir: Some(dir.to_path_buf()), memory: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get(&self, key: &str) -> Option<CachedResponse> {
        if let Some(hit) = self.memory.lock().expect("cache lock").get(key) {
            return Some(hit.clone());
        }
        let text = std::fs::read_to_string(self.path(key)?).ok()?;
        match serde_json::from_str::<CachedResponse>(&text) {
            Ok(doc) => {
                self.memory.lock().expect("cache lock").insert(key.to_string(), doc.clone());
                Some(doc)
            }
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {key}: {e}");
                None
            }
        }
    }

    /// Stores a response. The first write for a key wins so replays stay stable.
    pub fn put(&self, doc: CachedResponse) -> std::io::Result<()> {
        let mut memory = self.memory.lock().expect("cache lock");
        if memory.contains_key(&doc.key) {
            return Ok(());
        }
        if let Some(path) = self.path(&doc.key) {
            if !path.exists() {
                let tmp = path.with_extension("json.tmp");
                std::fs::write(&tmp, serde_json::to_string_pretty(&doc).expect("cache doc serializes"))?;
                std::fs::rename(&tmp, &path)?;
            }
        }
        memory.insert(doc.key.clone(), doc);
        Ok(())
    }

    /// All documents on disk (or in memory for an in-memory cache).
    pub fn entries(&self) -> Vec<CachedResponse> {
        let Some(dir) = &self.dir else {
            let mut v: Vec<_> = self.memory.lock().expect("cache lock").values().cloned().collect();
            v.sort_by(|a, b| a.key.cmp(&b.key));
            return v;
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .into_iter()
            .flatten()
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        paths
            .iter()
            .filter_map(|p| std::fs::read_to_string(p).ok())
            .filter_map(|t| serde_json::from_str(&t).ok())
            .collect()
    }
}

/// Summary counts over a cache.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CacheStats {
    pub entries: usize,
    pub parse_ok: usize,
    pub repaired: usize,
    pub by_kind: std::collections::BTreeMap<String, usize>,
}

impl CacheStats {
    pub fn of(cache: &ResponseCache) -> Self {
        let mut stats = CacheStats::default();
        for e in cache.entries() {
            stats.entries += 1;
            stats.parse_ok += e.parse_ok as usize;
            stats.repaired += e.repaired as usize;
            *stats.by_kind.entry(e.kind).or_default() += 1;
        }
        stats
    }
}
