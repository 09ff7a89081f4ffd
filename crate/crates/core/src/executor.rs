//! Denotational semantics of the DSL over cached scenes.

use std::collections::HashMap;

use thiserror::Error;

use crate::dsl::{Builtin, Expr, Program};
use crate::scene::{size_key, ImageScenes, Scene};

/// Runtime value of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value<'a> {
    Bool(bool),
    Int(i64),
    Scene(&'a Scene),
    Symbol(&'a str),
    Img,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("no cached answer for {0}")]
    MissingSizeAnswer(String),
    #[error("ill-typed program at {0}")]
    IllTyped(String),
    #[error("program root is not BOOL")]
    NotBoolean,
}

/// Evaluates a program on one image.
pub fn evaluate(program: &Program, scenes: &ImageScenes) -> Result<bool, ExecError> {
    match eval_expr(program.root(), scenes)? {
        Value::Bool(b) => Ok(b),
        _ => Err(ExecError::NotBoolean),
    }
}

pub fn eval_expr<'a>(expr: &'a Expr, scenes: &'a ImageScenes) -> Result<Value<'a>, ExecError> {
    let (b, args) = match expr {
        Expr::Img => return Ok(Value::Img),
        Expr::Int(n) => return Ok(Value::Int(*n)),
        Expr::Symbol(_, s) => return Ok(Value::Symbol(s.as_str())),
        Expr::App(b, args) => (*b, args),
    };
    let ill = || ExecError::IllTyped(b.name().to_string());
    let scene = |i: usize| match args.get(i).map(|a| eval_expr(a, scenes)) {
        Some(Ok(Value::Scene(s))) => Ok(s),
        Some(Err(e)) => Err(e),
        _ => Err(ill()),
    };
    let sym = |i: usize| match args.get(i) {
        Some(Expr::Symbol(_, s)) => Ok(s.as_str()),
        _ => Err(ill()),
    };
    let boolean = |i: usize| match args.get(i).map(|a| eval_expr(a, scenes)) {
        Some(Ok(Value::Bool(v))) => Ok(v),
        Some(Err(e)) => Err(e),
        _ => Err(ill()),
    };
    let int = |i: usize| match args.get(i).map(|a| eval_expr(a, scenes)) {
        Some(Ok(Value::Int(v))) => Ok(v),
        Some(Err(e)) => Err(e),
        _ => Err(ill()),
    };
    use Builtin::*;
    let v = match b {
        GetObjects => Value::Scene(&scenes.objects),
        GetActions => Value::Scene(&scenes.actions),
        ExistsObject | ExistsAction => Value::Bool(count_head(scene(0)?, sym(1)?) > 0),
        ExistsProperty => Value::Bool(count_with_tail(scene(0)?, &[sym(1)?]) > 0),
        ExistsProperties => Value::Bool(count_with_tail(scene(0)?, &[sym(1)?, sym(2)?]) > 0),
        ExistsObjectWithProperty | ExistsActionWithObject => {
            let (s, head, t) = (scene(0)?, sym(1)?, sym(2)?);
            Value::Bool(s.rows().iter().any(|r| r[0] == head && tail_has(r, t)))
        }
        ExistsObjectWithProperties => {
            let (s, head, p1, p2) = (scene(0)?, sym(1)?, sym(2)?, sym(3)?);
            Value::Bool(s.rows().iter().any(|r| r[0] == head && tail_has(r, p1) && tail_has(r, p2)))
        }
        CountObjectInImg => Value::Int(count_head(scene(0)?, sym(1)?) as i64),
        CountObjectsWithProperty => Value::Int(count_with_tail(scene(0)?, &[sym(1)?]) as i64),
        CountAllObjects => Value::Int(scene(0)?.len() as i64),
        MaxObjectsOfSameType => {
            let mut counts: HashMap<&str, i64> = HashMap::new();
            for h in scene(0)?.heads() {
                *counts.entry(h).or_default() += 1;
            }
            Value::Int(counts.into_values().max().unwrap_or(0))
        }
        And => Value::Bool(boolean(0)? & boolean(1)?),
        Or => Value::Bool(boolean(0)? | boolean(1)?),
        Xor => Value::Bool(boolean(0)? ^ boolean(1)?),
        Not => Value::Bool(!boolean(0)?),
        Gt => Value::Bool(int(0)? > int(1)?),
        Eq => Value::Bool(int(0)? == int(1)?),
        ExistsObjectSmallInImg | ExistsObjectLargeInImg => {
            Value::Bool(size_answer(scenes, size_key(b, sym(1)?, None))?)
        }
        ExistsObjectWithPropertySmallInImg | ExistsObjectWithPropertyLargeInImg => {
            Value::Bool(size_answer(scenes, size_key(b, sym(1)?, Some(sym(2)?)))?)
        }
    };
    Ok(v)
}

fn tail_has(row: &[String], s: &str) -> bool {
    row[1..].iter().any(|t| t == s)
}

fn count_head(scene: &Scene, head: &str) -> usize {
    scene.heads().filter(|h| *h == head).count()
}

fn count_with_tail(scene: &Scene, needed: &[&str]) -> usize {
    scene.rows().iter().filter(|r| needed.iter().all(|n| tail_has(r, n))).count()
}

fn size_answer(scenes: &ImageScenes, key: String) -> Result<bool, ExecError> {
    scenes.size_answers.get(&key).copied().ok_or(ExecError::MissingSizeAnswer(key))
}
