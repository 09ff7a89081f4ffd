use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::types::{Builtin, SemanticType, SymbolKind};

/// A grounded symbol string, lowercased and trimmed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(String);

impl Symbol {
    pub fn new(raw: &str) -> Self {
        Symbol(normalize_symbol(raw))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn normalize_symbol(raw: &str) -> String {
    raw.trim().to_lowercase()
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Symbol::new(&s))
    }
}

/// A node of a DSL program.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    App(Builtin, Vec<Expr>),
    Symbol(SymbolKind, Symbol),
    Int(i64),
    Img,
}

impl Expr {
    pub fn app(b: Builtin, args: Vec<Expr>) -> Expr {
        Expr::App(b, args)
    }

    pub fn object(s: &str) -> Expr {
        Expr::Symbol(SymbolKind::Object, Symbol::new(s))
    }

    pub fn property(s: &str) -> Expr {
        Expr::Symbol(SymbolKind::Property, Symbol::new(s))
    }

    pub fn action(s: &str) -> Expr {
        Expr::Symbol(SymbolKind::Action, Symbol::new(s))
    }

    pub fn ty(&self) -> SemanticType {
        match self {
            Expr::App(b, _) => b.signature().ret,
            Expr::Symbol(k, _) => k.semantic_type(),
            Expr::Int(_) => SemanticType::Int,
            Expr::Img => SemanticType::Img,
        }
    }

    /// Application-nesting depth; leaves have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::App(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Expr::App(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
            _ => 1,
        }
    }

    pub fn child(&self, path: &[usize]) -> Option<&Expr> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => match self {
                Expr::App(_, args) => args.get(*i)?.child(rest),
                _ => None,
            },
        }
    }

    /// Visits every node in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        if let Expr::App(_, args) = self {
            for a in args {
                a.walk(f);
            }
        }
    }

    /// All builtins used anywhere in this expression.
    pub fn builtins(&self) -> Vec<Builtin> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::App(b, _) = e {
                out.push(*b);
            }
        });
        out
    }

    /// All symbol terminals used anywhere in this expression.
    pub fn symbols(&self) -> Vec<(SymbolKind, &Symbol)> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Symbol(k, s) = e {
                out.push((*k, s));
            }
        });
        out
    }
}

/// A complete DSL program; well-formed programs have a BOOL root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Program {
    root: Expr,
}

impl Program {
    pub fn new(root: Expr) -> Self {
        Program { root }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn into_root(self) -> Expr {
        self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }
}

impl From<Expr> for Program {
    fn from(root: Expr) -> Self {
        Program::new(root)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::sexpr::serialize_expr(&self.root))
    }
}

impl Serialize for Program {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let all = super::types::Catalog::new(Builtin::ALL.iter().copied().collect(), 0);
        super::sexpr::parse_program(&text, &all).map_err(serde::de::Error::custom)
    }
}

/// Outcome of [`typecheck`]. `path` addresses the first offending node by child indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeReport {
    pub valid: bool,
    pub path: Option<Vec<usize>>,
    pub message: Option<String>,
}

impl TypeReport {
    fn ok() -> Self {
        TypeReport { valid: true, path: None, message: None }
    }

    fn fail(path: Vec<usize>, message: String) -> Self {
        TypeReport { valid: false, path: Some(path), message: Some(message) }
    }
}

pub fn typecheck(program: &Program) -> TypeReport {
    typecheck_with(program, false)
}

/// Type checks a program. With `strict_scenes`, scene consumers must be fed by the
/// perception function matching their scene kind.
pub fn typecheck_with(program: &Program, strict_scenes: bool) -> TypeReport {
    let mut path = Vec::new();
    if let Some(report) = check_node(program.root(), &mut path, strict_scenes) {
        return report;
    }
    let ty = program.root().ty();
    if ty != SemanticType::Bool {
        return TypeReport::fail(Vec::new(), format!("root has type {ty}, expected BOOL"));
    }
    TypeReport::ok()
}

fn check_node(expr: &Expr, path: &mut Vec<usize>, strict: bool) -> Option<TypeReport> {
    let Expr::App(b, args) = expr else {
        if let Expr::Symbol(_, s) = expr {
            if s.is_empty() {
                return Some(TypeReport::fail(path.clone(), "empty symbol".into()));
            }
        }
        return None;
    };
    let sig = b.signature();
    if args.len() != sig.args.len() {
        return Some(TypeReport::fail(
            path.clone(),
            format!("{b} expects {} arguments, got {}", sig.args.len(), args.len()),
        ));
    }
    for (i, (arg, expected)) in args.iter().zip(sig.args).enumerate() {
        path.push(i);
        if arg.ty() != *expected {
            let report = TypeReport::fail(
                path.clone(),
                format!("argument {i} of {b} has type {}, expected {expected}", arg.ty()),
            );
            return Some(report);
        }
        if strict && *expected == SemanticType::Scene {
            if let (Some(want), Expr::App(producer, _)) = (b.consumes_scene(), arg) {
                if producer.produces_scene() != Some(want) {
                    return Some(TypeReport::fail(
                        path.clone(),
                        format!("{b} needs a {want} scene, got {producer}"),
                    ));
                }
            }
        }
        if let Some(r) = check_node(arg, path, strict) {
            return Some(r);
        }
        path.pop();
    }
    None
}
