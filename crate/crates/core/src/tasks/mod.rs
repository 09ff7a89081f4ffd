//! Task documents, query metrics and synthetic fixtures.

mod fixture;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{Profile, Program};
use crate::executor::evaluate;
use crate::scene::SceneCache;

pub use fixture::{make_fixture, FixtureBundle, FixtureError, FixtureSpec, GuardSpec, OracleBackend, Vocabulary};

/// One labeled image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    /// Path as written in the task document, relative to it.
    pub image: String,
    /// Resolved location on disk.
    pub path: PathBuf,
    /// Hex SHA-256 of the image bytes.
    pub digest: String,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub task_id: String,
    pub profile: Profile,
    pub few_shot: Vec<Example>,
    pub query: Vec<Example>,
}

impl Task {
    pub fn all_images(&self) -> impl Iterator<Item = &Example> {
        self.few_shot.iter().chain(&self.query)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if !self.few_shot.iter().any(|e| e.label) || !self.few_shot.iter().any(|e| !e.label) {
            return Err(TaskError::Invalid("few_shot needs at least one positive and one negative".into()));
        }
        let few: BTreeSet<&str> = self.few_shot.iter().map(|e| e.digest.as_str()).collect();
        if let Some(dup) = self.query.iter().find(|e| few.contains(e.digest.as_str())) {
            return Err(TaskError::Invalid(format!("query image `{}` also appears in few_shot", dup.image)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed task document: {0}")]
    Format(String),
    #[error("field `{field}`: label must be 0 or 1, got {value}")]
    BadLabel { field: String, value: i64 },
    #[error("field `{field}`: image file `{path}` not found")]
    MissingImage { field: String, path: String },
    #[error("invalid task: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct TaskDoc {
    task_id: String,
    profile: Profile,
    few_shot: Vec<ExampleDoc>,
    #[serde(default)]
    query: Vec<ExampleDoc>,
}

#[derive(Serialize, Deserialize)]
struct ExampleDoc {
    image: String,
    label: i64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads and validates a task document, resolving images relative to it.
pub fn load_task(path: &Path) -> Result<Task, TaskError> {
    let io = |e: std::io::Error| TaskError::Io { path: path.display().to_string(), message: e.to_string() };
    let text = std::fs::read_to_string(path).map_err(io)?;
    let doc: TaskDoc = serde_json::from_str(&text).map_err(|e| TaskError::Format(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |split: &str, docs: Vec<ExampleDoc>| -> Result<Vec<Example>, TaskError> {
        docs.into_iter()
            .enumerate()
            .map(|(i, d)| {
                let field = format!("{split}[{i}]");
                let label = match d.label {
                    0 => false,
                    1 => true,
                    value => return Err(TaskError::BadLabel { field: format!("{field}.label"), value }),
                };
                let full = base.join(&d.image);
                let bytes = std::fs::read(&full).map_err(|_| TaskError::MissingImage {
                    field: format!("{field}.image"),
                    path: full.display().to_string(),
                })?;
                Ok(Example { image: d.image, path: full, digest: sha256_hex(&bytes), label })
            })
            .collect()
    };
    let task = Task {
        task_id: doc.task_id,
        profile: doc.profile,
        few_shot: resolve("few_shot", doc.few_shot)?,
        query: resolve("query", doc.query)?,
    };
    task.validate()?;
    Ok(task)
}

/// Writes a task document. Image paths are stored as given in [`Example::image`].
pub fn save_task(task: &Task, path: &Path) -> Result<(), TaskError> {
    let docs = |xs: &[Example]| {
        xs.iter().map(|e| ExampleDoc { image: e.image.clone(), label: e.label as i64 }).collect()
    };
    let doc = TaskDoc {
        task_id: task.task_id.clone(),
        profile: task.profile,
        few_shot: docs(&task.few_shot),
        query: docs(&task.query),
    };
    let text = serde_json::to_string_pretty(&doc).expect("task serializes") + "\n";
    std::fs::write(path, text).map_err(|e| TaskError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Prediction for one query image. `error` is set when the image was counted as misclassified
/// because it could not be evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPrediction {
    pub image: String,
    pub label: bool,
    pub predicted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl QueryPrediction {
    pub fn correct(&self) -> bool {
        self.error.is_none() && self.predicted == self.label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictions: Vec<QueryPrediction>,
    pub true_positive_rate: Option<f64>,
    pub true_negative_rate: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub accuracy: Option<f64>,
    pub failures: usize,
}

impl EvalReport {
    pub fn from_predictions(predictions: Vec<QueryPrediction>) -> Self {
        let recall = |label: bool| {
            let of_class: Vec<&QueryPrediction> = predictions.iter().filter(|p| p.label == label).collect();
            (!of_class.is_empty())
                .then(|| of_class.iter().filter(|p| p.correct()).count() as f64 / of_class.len() as f64)
        };
        let tpr = recall(true);
        let tnr = recall(false);
        let present: Vec<f64> = [tpr, tnr].into_iter().flatten().collect();
        let balanced = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        let accuracy = (!predictions.is_empty())
            .then(|| predictions.iter().filter(|p| p.correct()).count() as f64 / predictions.len() as f64);
        let failures = predictions.iter().filter(|p| p.error.is_some()).count();
        EvalReport {
            predictions,
            true_positive_rate: tpr,
            true_negative_rate: tnr,
            balanced_accuracy: balanced,
            accuracy,
            failures,
        }
    }
}

/// Runs `program` on every query image.
pub fn evaluate_on_queries(program: &Program, task: &Task, scenes: &SceneCache) -> EvalReport {
    let predictions = task
        .query
        .iter()
        .map(|ex| {
            let outcome = match scenes.get(&ex.digest) {
                Some(s) => evaluate(program, s).map_err(|e| e.to_string()),
                None => Err(format!("no cached scene for {}", ex.image)),
            };
            match outcome {
                Ok(predicted) => QueryPrediction { image: ex.image.clone(), label: ex.label, predicted, error: None },
                Err(e) => {
                    log::warn!("query {}: {e}", ex.image);
                    QueryPrediction { image: ex.image.clone(), label: ex.label, predicted: !ex.label, error: Some(e) }
                }
            }
        })
        .collect();
    EvalReport::from_predictions(predictions)
}
