//! Per-image scene representations and the in-memory scene cache.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dsl::{normalize_symbol, Builtin};

/// Nested rows of strings. Object rows are `[name, property...]`, action rows are
/// `[action, participant...]`. An empty scene serializes as `[[]]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Scene {
    rows: Vec<Vec<String>>,
}

impl Scene {
    pub fn empty() -> Self {
        Scene::default()
    }

    /// Lowercases and trims every string, dropping empty strings and then empty rows.
    pub fn new<R, S>(rows: R) -> Self
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let rows = rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|s| normalize_symbol(s.as_ref()))
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
            })
            .filter(|row| !row.is_empty())
            .collect();
        Scene { rows }
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn push_row<S: AsRef<str>>(&mut self, row: &[S]) {
        let row: Vec<String> =
            row.iter().map(|s| normalize_symbol(s.as_ref())).filter(|s| !s.is_empty()).collect();
        if !row.is_empty() {
            self.rows.push(row);
        }
    }

    pub fn heads(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r[0].as_str())
    }

    pub fn tails(&self) -> impl Iterator<Item = &[String]> {
        self.rows.iter().map(|r| &r[1..])
    }

    /// Python-literal rendering, as a model would answer.
    pub fn to_python(&self) -> String {
        if self.rows.is_empty() {
            return "[[]]".to_string();
        }
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| format!("[{}]", r.iter().map(|s| python_str(s)).collect::<Vec<_>>().join(", ")))
            .collect();
        format!("[{}]", rows.join(", "))
    }
}

pub(crate) fn python_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

impl Serialize for Scene {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.rows.is_empty() {
            vec![Vec::<String>::new()].serialize(s)
        } else {
            self.rows.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Scene {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(d)?;
        Ok(Scene::new(rows))
    }
}

/// Key under which a size-predicate answer is cached, e.g. `exists_object_small_in_img(dog)`.
pub fn size_key(pred: Builtin, obj: &str, prop: Option<&str>) -> String {
    match prop {
        Some(p) => format!("{}({},{})", pred.name(), normalize_symbol(obj), normalize_symbol(p)),
        None => format!("{}({})", pred.name(), normalize_symbol(obj)),
    }
}

/// Everything the executor may read for one image.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageScenes {
    pub objects: Scene,
    pub actions: Scene,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub size_answers: BTreeMap<String, bool>,
}

impl ImageScenes {
    pub fn new(objects: Scene, actions: Scene) -> Self {
        ImageScenes { objects, actions, size_answers: BTreeMap::new() }
    }
}

/// Scenes keyed by image digest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneCache {
    images: BTreeMap<String, ImageScenes>,
}

impl SceneCache {
    pub fn new() -> Self {
        SceneCache::default()
    }

    pub fn insert(&mut self, digest: impl Into<String>, scenes: ImageScenes) {
        self.images.insert(digest.into(), scenes);
    }

    pub fn get(&self, digest: &str) -> Option<&ImageScenes> {
        self.images.get(digest)
    }

    pub fn get_mut(&mut self, digest: &str) -> Option<&mut ImageScenes> {
        self.images.get_mut(digest)
    }

    pub fn contains(&self, digest: &str) -> bool {
        self.images.contains_key(digest)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ImageScenes)> {
        self.images.iter()
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("scene cache serializes");
        std::fs::write(path, text + "\n")
    }
}
