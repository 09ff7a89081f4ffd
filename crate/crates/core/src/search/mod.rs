//! Program enumeration, candidate ranking and synthesis against a task.

mod heap;

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Program;
use crate::executor::evaluate;
use crate::grammar::Pcfg;
use crate::scene::{ImageScenes, SceneCache};
use crate::tasks::Task;

pub use heap::HeapSearch;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchBudget {
    pub time_limit: Duration,
    pub max_depth: usize,
    pub max_programs: Option<u64>,
}

impl SearchBudget {
    pub fn new(time_limit: Duration, max_depth: usize) -> Self {
        SearchBudget { time_limit, max_depth, max_programs: None }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.time_limit.is_zero() {
            return Err(SearchError::InvalidBudget("time limit must be positive".into()));
        }
        if self.max_depth == 0 {
            return Err(SearchError::InvalidBudget("max depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Programs in non-increasing probability order, bounded by depth and an optional count.
pub fn enumerate<'g>(pcfg: &'g Pcfg, budget: &SearchBudget) -> impl Iterator<Item = (Program, f64)> + 'g {
    let cap = budget.max_programs.map_or(usize::MAX, |m| m as usize);
    HeapSearch::new(pcfg, budget.max_depth).take(cap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub program: Program,
    pub probability: f64,
    pub accuracy: f64,
    pub enumeration_index: u64,
}

/// Orders candidates so that the better one compares greater.
pub fn compare_candidates(a: &Candidate, b: &Candidate) -> Ordering {
    a.accuracy
        .total_cmp(&b.accuracy)
        .then(a.probability.total_cmp(&b.probability))
        .then(b.enumeration_index.cmp(&a.enumeration_index))
}

/// Highest accuracy, then highest probability, then earliest enumeration.
pub fn rank(candidates: &[Candidate]) -> Result<&Candidate, SearchError> {
    candidates.iter().max_by(|a, b| compare_candidates(a, b)).ok_or(SearchError::NoCandidate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Exhausted,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePrediction {
    pub image: String,
    pub label: bool,
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub best: Candidate,
    pub per_image_predictions: Vec<ImagePrediction>,
    pub candidates_evaluated: u64,
    pub stop_reason: StopReason,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("no cached scene for few-shot image `{0}`")]
    MissingScene(String),
    #[error("search produced no candidate program")]
    NoCandidate,
    #[error("invalid search budget: {0}")]
    InvalidBudget(String),
}

/// Options beyond the budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SynthesisOptions {
    /// Stop at the first program that classifies every few-shot image correctly. Since
    /// programs arrive in non-increasing probability, that program is also the best one.
    pub early_stop: bool,
}

fn accuracy_on(program: &Program, examples: &[(&ImageScenes, bool)]) -> f64 {
    let correct = examples
        .iter()
        .filter(|(scenes, label)| match evaluate(program, scenes) {
            Ok(pred) => pred == *label,
            Err(e) => {
                log::debug!("{program}: {e}; counted as misclassified");
                false
            }
        })
        .count();
    correct as f64 / examples.len() as f64
}

/// Searches for the best program on the task's few-shot images. Scenes are read only from
/// `scenes`; a missing few-shot scene is an error before any search happens.
pub fn synthesize(
    task: &Task,
    pcfg: &Pcfg,
    scenes: &SceneCache,
    budget: &SearchBudget,
    options: SynthesisOptions,
) -> Result<SynthesisResult, SearchError> {
    budget.validate()?;
    let examples = task
        .few_shot
        .iter()
        .map(|ex| scenes.get(&ex.digest).map(|s| (s, ex.label)).ok_or_else(|| SearchError::MissingScene(ex.image.clone())))
        .collect::<Result<Vec<_>, _>>()?;

    let started = Instant::now();
    let mut search = HeapSearch::new(pcfg, budget.max_depth);
    let mut best: Option<Candidate> = None;
    let mut evaluated = 0u64;
    let stop_reason = loop {
        if budget.max_programs.is_some_and(|m| evaluated >= m) {
            break StopReason::Budget;
        }
        let Some(node) = search.next_node() else {
            break StopReason::Exhausted;
        };
        let program = Program::new(search.expr(node));
        let accuracy = accuracy_on(&program, &examples);
        let candidate =
            Candidate { program, probability: search.probability(node), accuracy, enumeration_index: evaluated };
        evaluated += 1;
        let perfect = accuracy == 1.0;
        if best.as_ref().is_none_or(|b| compare_candidates(&candidate, b) == Ordering::Greater) {
            best = Some(candidate);
        }
        if perfect && options.early_stop {
            break StopReason::EarlyStop;
        }
        if started.elapsed() >= budget.time_limit {
            break StopReason::Budget;
        }
    };
    let best = best.ok_or(SearchError::NoCandidate)?;
    let per_image_predictions = task
        .few_shot
        .iter()
        .zip(&examples)
        .map(|(ex, (s, label))| ImagePrediction {
            image: ex.image.clone(),
            label: *label,
            predicted: evaluate(&best.program, s).unwrap_or(!*label),
        })
        .collect();
    log::info!("evaluated {evaluated} programs, stop: {stop_reason:?}, best {} acc {}", best.program, best.accuracy);
    Ok(SynthesisResult {
        best,
        per_image_predictions,
        candidates_evaluated: evaluated,
        stop_reason,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}
