//! Probabilistic grammar construction with occurrence-based symbol weighting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{normalize_symbol, Builtin, DslConfig, Expr, Program, SceneKind, SemanticType, Symbol, SymbolKind};
use crate::scene::ImageScenes;

/// Weight given to a symbol never seen in a positive example.
pub const EPSILON: f64 = 0.01;

/// Grammar nonterminal. The two scene variants only appear under strict scene typing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Nonterminal {
    Bool,
    Int,
    Scene,
    ObjectScene,
    ActionScene,
    Object,
    Property,
    Action,
    Img,
}

impl Nonterminal {
    pub const ALL: [Nonterminal; 9] = [
        Nonterminal::Bool,
        Nonterminal::Int,
        Nonterminal::Scene,
        Nonterminal::ObjectScene,
        Nonterminal::ActionScene,
        Nonterminal::Object,
        Nonterminal::Property,
        Nonterminal::Action,
        Nonterminal::Img,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Nonterminal::Bool => "BOOL",
            Nonterminal::Int => "INT",
            Nonterminal::Scene => "SCENE",
            Nonterminal::ObjectScene => "SCENE_OBJECTS",
            Nonterminal::ActionScene => "SCENE_ACTIONS",
            Nonterminal::Object => "OBJECT",
            Nonterminal::Property => "PROPERTY",
            Nonterminal::Action => "ACTION",
            Nonterminal::Img => "IMG",
        }
    }

    pub fn from_type(ty: SemanticType) -> Nonterminal {
        match ty {
            SemanticType::Img => Nonterminal::Img,
            SemanticType::Bool => Nonterminal::Bool,
            SemanticType::Int => Nonterminal::Int,
            SemanticType::Object => Nonterminal::Object,
            SemanticType::Property => Nonterminal::Property,
            SemanticType::Action => Nonterminal::Action,
            SemanticType::Scene => Nonterminal::Scene,
        }
    }

    fn scene(kind: SceneKind) -> Nonterminal {
        match kind {
            SceneKind::Objects => Nonterminal::ObjectScene,
            SceneKind::Actions => Nonterminal::ActionScene,
        }
    }

    pub fn symbol_kind(self) -> Option<SymbolKind> {
        match self {
            Nonterminal::Object => Some(SymbolKind::Object),
            Nonterminal::Property => Some(SymbolKind::Property),
            Nonterminal::Action => Some(SymbolKind::Action),
            _ => None,
        }
    }
}

impl fmt::Display for Nonterminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Nonterminal {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Nonterminal::ALL.into_iter().find(|n| n.name() == s).ok_or_else(|| format!("unknown nonterminal `{s}`"))
    }
}

/// Right-hand-side head of a rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Production {
    Builtin(Builtin),
    Symbol(SymbolKind, Symbol),
    Int(i64),
    Img,
}

impl Production {
    fn of(expr: &Expr) -> Production {
        match expr {
            Expr::App(b, _) => Production::Builtin(*b),
            Expr::Symbol(k, s) => Production::Symbol(*k, s.clone()),
            Expr::Int(n) => Production::Int(*n),
            Expr::Img => Production::Img,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductionRule {
    pub lhs: Nonterminal,
    pub production: Production,
    pub args: Vec<Nonterminal>,
    pub probability: f64,
}

impl ProductionRule {
    /// Builds the expression node for this rule given its children.
    pub fn apply(&self, children: Vec<Expr>) -> Expr {
        match &self.production {
            Production::Builtin(b) => Expr::App(*b, children),
            Production::Symbol(k, s) => Expr::Symbol(*k, s.clone()),
            Production::Int(n) => Expr::Int(*n),
            Production::Img => Expr::Img,
        }
    }

    /// Right-hand side as written in the dump, e.g. `exists_object(SCENE, OBJECT)`.
    pub fn rhs_text(&self) -> String {
        match &self.production {
            Production::Builtin(b) => {
                let args: Vec<&str> = self.args.iter().map(|a| a.name()).collect();
                format!("{}({})", b.name(), args.join(", "))
            }
            Production::Symbol(_, s) => serde_json::to_string(s.as_str()).expect("string serializes"),
            Production::Int(n) => n.to_string(),
            Production::Img => "IMG".to_string(),
        }
    }
}

/// Task-specific vocabulary proposed during grounding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedSymbols {
    pub objects: Vec<String>,
    pub properties: Vec<String>,
    pub actions: Vec<String>,
}

impl GroundedSymbols {
    /// Normalizes and deduplicates each list, keeping first occurrences.
    pub fn new<S: AsRef<str>>(objects: &[S], properties: &[S], actions: &[S]) -> Self {
        GroundedSymbols { objects: dedup(objects), properties: dedup(properties), actions: dedup(actions) }
    }

    pub fn list(&self, kind: SymbolKind) -> &[String] {
        match kind {
            SymbolKind::Object => &self.objects,
            SymbolKind::Property => &self.properties,
            SymbolKind::Action => &self.actions,
        }
    }

    pub fn list_mut(&mut self, kind: SymbolKind) -> &mut Vec<String> {
        match kind {
            SymbolKind::Object => &mut self.objects,
            SymbolKind::Property => &mut self.properties,
            SymbolKind::Action => &mut self.actions,
        }
    }

    /// Drops every symbol listed in `removed`.
    pub fn without(&self, removed: &BTreeSet<String>) -> Self {
        let keep = |v: &Vec<String>| v.iter().filter(|s| !removed.contains(*s)).cloned().collect();
        GroundedSymbols { objects: keep(&self.objects), properties: keep(&self.properties), actions: keep(&self.actions) }
    }

    pub fn all(&self) -> BTreeSet<String> {
        self.objects.iter().chain(&self.properties).chain(&self.actions).cloned().collect()
    }
}

fn dedup<S: AsRef<str>>(items: &[S]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items
        .iter()
        .map(|s| normalize_symbol(s.as_ref()))
        .filter(|s| !s.is_empty() && seen.insert(s.clone()))
        .collect()
}

/// Per-symbol presence counts over labeled few-shot scenes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolStats {
    pub n_pos_total: usize,
    pub n_neg_total: usize,
    /// `kind -> symbol -> (n_pos, n_neg)`.
    pub counts: BTreeMap<SymbolKind, BTreeMap<String, (usize, usize)>>,
}

impl SymbolStats {
    /// Counts, per image, whether each grounded symbol is present. Objects and properties are
    /// read from object scenes, actions from action scenes.
    pub fn from_scenes<'a>(
        symbols: &GroundedSymbols,
        examples: impl IntoIterator<Item = (&'a ImageScenes, bool)>,
    ) -> Self {
        let mut stats = SymbolStats::default();
        for kind in SymbolKind::ALL {
            for s in symbols.list(kind) {
                stats.counts.entry(kind).or_default().insert(s.clone(), (0, 0));
            }
        }
        for (scenes, label) in examples {
            if label {
                stats.n_pos_total += 1;
            } else {
                stats.n_neg_total += 1;
            }
            let mut present: BTreeSet<(SymbolKind, &str)> = BTreeSet::new();
            for row in scenes.objects.rows() {
                present.insert((SymbolKind::Object, &row[0]));
                for p in &row[1..] {
                    present.insert((SymbolKind::Property, p));
                }
            }
            for row in scenes.actions.rows() {
                present.insert((SymbolKind::Action, &row[0]));
            }
            for (kind, per_symbol) in stats.counts.iter_mut() {
                for (sym, (pos, neg)) in per_symbol.iter_mut() {
                    if present.contains(&(*kind, sym.as_str())) {
                        if label {
                            *pos += 1;
                        } else {
                            *neg += 1;
                        }
                    }
                }
            }
        }
        stats
    }

    pub fn get(&self, kind: SymbolKind, symbol: &str) -> (usize, usize) {
        self.counts.get(&kind).and_then(|m| m.get(symbol)).copied().unwrap_or((0, 0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("symbol weighting needs at least one positive example")]
    NoPositives,
    #[error("BOOL is not derivable from the enabled primitives and symbols")]
    BoolUnderivable,
    #[error("underivable node `{node}` for {nonterminal}")]
    Underivable { node: String, nonterminal: Nonterminal },
    #[error("grammar dump line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Unnormalized occurrence weight of a symbol.
pub fn symbol_weight(n_pos: usize, n_neg: usize, n_pos_total: usize) -> Result<f64, GrammarError> {
    if n_pos_total == 0 {
        return Err(GrammarError::NoPositives);
    }
    if n_pos == 0 {
        return Ok(EPSILON);
    }
    let (p, n, total) = (n_pos as f64, n_neg as f64, n_pos_total as f64);
    Ok((p / total) * (p / (p + n)))
}

/// How symbol rules are weighted.
#[derive(Debug, Clone)]
pub enum Weighting<'a> {
    Uniform,
    Occurrence(&'a SymbolStats),
}

/// An immutable probabilistic grammar with start symbol BOOL.
#[derive(Debug, Clone)]
pub struct Pcfg {
    pub start: Nonterminal,
    rules: BTreeMap<Nonterminal, Vec<ProductionRule>>,
    index: HashMap<(Nonterminal, Production), usize>,
    pub warnings: Vec<String>,
}

impl Pcfg {
    fn from_rules(rules: BTreeMap<Nonterminal, Vec<ProductionRule>>, warnings: Vec<String>) -> Self {
        let mut index = HashMap::new();
        for (nt, rs) in &rules {
            for (i, r) in rs.iter().enumerate() {
                index.insert((*nt, r.production.clone()), i);
            }
        }
        Pcfg { start: Nonterminal::Bool, rules, index, warnings }
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = Nonterminal> + '_ {
        self.rules.keys().copied()
    }

    pub fn rules(&self, nt: Nonterminal) -> &[ProductionRule] {
        self.rules.get(&nt).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_rules(&self) -> impl Iterator<Item = &ProductionRule> {
        self.rules.values().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.rules(self.start).is_empty()
    }

    pub fn rule_for(&self, nt: Nonterminal, production: &Production) -> Option<&ProductionRule> {
        self.index.get(&(nt, production.clone())).map(|&i| &self.rules[&nt][i])
    }

    pub fn symbols(&self, kind: SymbolKind) -> Vec<&str> {
        let nt = Nonterminal::from_type(kind.semantic_type());
        self.rules(nt)
            .iter()
            .filter_map(|r| match &r.production {
                Production::Symbol(_, s) => Some(s.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Structured text form. Probabilities carry 12 significant digits.
    pub fn dump(&self) -> String {
        let mut out = format!("start {}\n", self.start);
        let names: Vec<&str> = self.rules.keys().map(|n| n.name()).collect();
        out.push_str(&format!("nonterminals {}\n", names.join(" ")));
        for (nt, rs) in &self.rules {
            for r in rs {
                out.push_str(&format!("{nt} -> {} {}\n", r.rhs_text(), format_sig12(r.probability)));
            }
        }
        out
    }

    /// Reads back a grammar written by [`Pcfg::dump`].
    pub fn load(text: &str) -> Result<Pcfg, GrammarError> {
        let mut rules: BTreeMap<Nonterminal, Vec<ProductionRule>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| GrammarError::Format { line: i + 1, message };
            let line = line.trim();
            if line.is_empty() || line.starts_with("start ") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("nonterminals") {
                for name in rest.split_whitespace() {
                    rules.entry(name.parse().map_err(err)?).or_default();
                }
                continue;
            }
            let (lhs, rest) = line.split_once(" -> ").ok_or_else(|| err("missing `->`".into()))?;
            let lhs: Nonterminal = lhs.parse().map_err(err)?;
            let (rhs, prob) = rest.rsplit_once(' ').ok_or_else(|| err("missing probability".into()))?;
            let probability: f64 = prob.parse().map_err(|_| err(format!("bad probability `{prob}`")))?;
            let (production, args) = parse_rhs(lhs, rhs).map_err(err)?;
            rules.entry(lhs).or_default().push(ProductionRule { lhs, production, args, probability });
        }
        Ok(Pcfg::from_rules(rules, Vec::new()))
    }
}

fn parse_rhs(lhs: Nonterminal, rhs: &str) -> Result<(Production, Vec<Nonterminal>), String> {
    if rhs == "IMG" {
        return Ok((Production::Img, Vec::new()));
    }
    if rhs.starts_with('"') {
        let s: String = serde_json::from_str(rhs).map_err(|e| format!("bad symbol {rhs}: {e}"))?;
        let kind = lhs.symbol_kind().ok_or_else(|| format!("symbol under non-symbol nonterminal {lhs}"))?;
        return Ok((Production::Symbol(kind, Symbol::new(&s)), Vec::new()));
    }
    if let Ok(n) = rhs.parse::<i64>() {
        return Ok((Production::Int(n), Vec::new()));
    }
    let (name, args) = rhs
        .strip_suffix(')')
        .and_then(|r| r.split_once('('))
        .ok_or_else(|| format!("bad production `{rhs}`"))?;
    let b = Builtin::from_name(name).ok_or_else(|| format!("unknown primitive `{name}`"))?;
    let args = args
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>, _>>()?;
    Ok((Production::Builtin(b), args))
}

/// Formats with 12 significant digits.
pub fn format_sig12(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let exp = p.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{p:.decimals$}")
}

/// Compiles a DSL configuration and grounded symbols into a grammar.
pub fn build_pcfg(config: &DslConfig, symbols: &GroundedSymbols, weighting: Weighting<'_>) -> Result<Pcfg, GrammarError> {
    let catalog = config.catalog();
    let strict = config.strict_scene_typing;
    let symbols = symbols.without(&config.removed_symbols);
    let mut warnings = Vec::new();

    // Candidate rules before pruning, with uniform placeholder probabilities.
    let mut rules: BTreeMap<Nonterminal, Vec<ProductionRule>> = BTreeMap::new();
    let mut push = |lhs: Nonterminal, production: Production, args: Vec<Nonterminal>| {
        rules.entry(lhs).or_default().push(ProductionRule { lhs, production, args, probability: 0.0 });
    };
    for &b in &catalog.builtins {
        if let Some(kind) = b.consumes_scene() {
            let producer = match kind {
                SceneKind::Objects => Builtin::GetObjects,
                SceneKind::Actions => Builtin::GetActions,
            };
            if !catalog.contains(producer) {
                warnings.push(format!("dropped {b}: its scene source {producer} is disabled"));
                continue;
            }
        }
        let sig = b.signature();
        let lhs = match (strict, b.produces_scene()) {
            (true, Some(kind)) => Nonterminal::scene(kind),
            _ => Nonterminal::from_type(sig.ret),
        };
        let args = sig
            .args
            .iter()
            .map(|&t| match (strict, t, b.consumes_scene()) {
                (true, SemanticType::Scene, Some(kind)) => Nonterminal::scene(kind),
                _ => Nonterminal::from_type(t),
            })
            .collect();
        push(lhs, Production::Builtin(b), args);
    }
    if catalog.builtins.iter().any(|b| b.signature().args.contains(&SemanticType::Int)) {
        for &n in &catalog.int_constants {
            push(Nonterminal::Int, Production::Int(n), Vec::new());
        }
    }
    push(Nonterminal::Img, Production::Img, Vec::new());
    let mut sorted_symbols: BTreeMap<SymbolKind, Vec<String>> = BTreeMap::new();
    for kind in SymbolKind::ALL {
        let mut list = symbols.list(kind).to_vec();
        list.sort();
        for s in &list {
            push(Nonterminal::from_type(kind.semantic_type()), Production::Symbol(kind, Symbol::new(s)), Vec::new());
        }
        sorted_symbols.insert(kind, list);
    }

    // Keep only productive rules.
    let mut productive: BTreeSet<Nonterminal> = BTreeSet::new();
    loop {
        let before = productive.len();
        for (nt, rs) in &rules {
            if rs.iter().any(|r| r.args.iter().all(|a| productive.contains(a))) {
                productive.insert(*nt);
            }
        }
        if productive.len() == before {
            break;
        }
    }
    for rs in rules.values_mut() {
        rs.retain(|r| {
            let missing: Vec<&Nonterminal> = r.args.iter().filter(|a| !productive.contains(a)).collect();
            if let (Production::Builtin(b), Some(m)) = (&r.production, missing.first()) {
                warnings.push(format!("dropped {b}: no derivation for {m}"));
            }
            missing.is_empty()
        });
    }
    rules.retain(|_, rs| !rs.is_empty());
    if !rules.contains_key(&Nonterminal::Bool) {
        return Err(GrammarError::BoolUnderivable);
    }

    // Keep only nonterminals reachable from BOOL.
    let mut reachable = BTreeSet::from([Nonterminal::Bool]);
    let mut stack = vec![Nonterminal::Bool];
    while let Some(nt) = stack.pop() {
        for r in rules.get(&nt).into_iter().flatten() {
            for a in &r.args {
                if reachable.insert(*a) {
                    stack.push(*a);
                }
            }
        }
    }
    rules.retain(|nt, _| reachable.contains(nt));

    for (nt, rs) in rules.iter_mut() {
        match (nt.symbol_kind(), &weighting) {
            (Some(kind), Weighting::Occurrence(stats)) => {
                let weights = rs
                    .iter()
                    .map(|r| match &r.production {
                        Production::Symbol(_, s) => {
                            let (p, n) = stats.get(kind, s.as_str());
                            symbol_weight(p, n, stats.n_pos_total)
                        }
                        _ => Ok(1.0),
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                let total: f64 = weights.iter().sum();
                for (r, w) in rs.iter_mut().zip(weights) {
                    r.probability = w / total;
                }
            }
            _ => {
                let p = 1.0 / rs.len() as f64;
                rs.iter_mut().for_each(|r| r.probability = p);
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Pcfg::from_rules(rules, warnings))
}

/// Product of the rule probabilities in the derivation of `program`.
pub fn program_probability(pcfg: &Pcfg, program: &Program) -> Result<f64, GrammarError> {
    expr_probability(pcfg, pcfg.start, program.root())
}

pub fn expr_probability(pcfg: &Pcfg, nt: Nonterminal, expr: &Expr) -> Result<f64, GrammarError> {
    let underivable = || GrammarError::Underivable { node: crate::dsl::sexpr::serialize_expr(expr), nonterminal: nt };
    let rule = pcfg.rule_for(nt, &Production::of(expr)).ok_or_else(underivable)?;
    let mut p = rule.probability;
    if let Expr::App(_, args) = expr {
        if args.len() != rule.args.len() {
            return Err(underivable());
        }
        for (a, child_nt) in args.iter().zip(&rule.args) {
            p *= expr_probability(pcfg, *child_nt, a)?;
        }
    }
    Ok(p)
}

/// One changed line between two grammar dumps.
#[derive(Debug, Clone, PartialEq)]
pub enum GrammarChange {
    Added { rule: String, probability: f64 },
    Removed { rule: String, probability: f64 },
    Reweighted { rule: String, before: f64, after: f64 },
}

impl fmt::Display for GrammarChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrammarChange::Added { rule, probability } => write!(f, "+ {rule} {}", format_sig12(*probability)),
            GrammarChange::Removed { rule, probability } => write!(f, "- {rule} {}", format_sig12(*probability)),
            GrammarChange::Reweighted { rule, before, after } => {
                write!(f, "~ {rule} {} -> {}", format_sig12(*before), format_sig12(*after))
            }
        }
    }
}

/// Productions that differ between two grammars, in dump order.
pub fn grammar_diff(before: &Pcfg, after: &Pcfg) -> Vec<GrammarChange> {
    let key = |r: &ProductionRule| format!("{} -> {}", r.lhs, r.rhs_text());
    let old: BTreeMap<String, f64> = before.all_rules().map(|r| (key(r), r.probability)).collect();
    let new: BTreeMap<String, f64> = after.all_rules().map(|r| (key(r), r.probability)).collect();
    let mut out = Vec::new();
    for (rule, &p) in &old {
        match new.get(rule) {
            None => out.push(GrammarChange::Removed { rule: rule.clone(), probability: p }),
            Some(&q) if format_sig12(p) != format_sig12(q) => {
                out.push(GrammarChange::Reweighted { rule: rule.clone(), before: p, after: q })
            }
            _ => {}
        }
    }
    for (rule, &p) in &new {
        if !old.contains_key(rule) {
            out.push(GrammarChange::Added { rule: rule.clone(), probability: p });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, Profile};

    fn syms() -> GroundedSymbols {
        GroundedSymbols::new(&["cake", "candles"], &["round", "shiny"], &["holding"])
    }

    #[test]
    fn weights() {
        assert_eq!(symbol_weight(6, 0, 6).unwrap(), 1.0);
        assert_eq!(symbol_weight(0, 4, 6).unwrap(), EPSILON);
        assert_eq!(symbol_weight(3, 3, 6).unwrap(), 0.25);
        assert_eq!(symbol_weight(0, 0, 0), Err(GrammarError::NoPositives));
    }

    #[test]
    fn clevr_has_no_action_rules() {
        let cfg = DslConfig::for_profile(Profile::ClevrHans3);
        let g = build_pcfg(&cfg, &syms(), Weighting::Uniform).unwrap();
        assert!(g.rules(Nonterminal::Action).is_empty());
        assert!(!g.dump().contains("ACTION"));
    }

    #[test]
    fn empty_symbol_list_drops_primitive_with_warning() {
        let cfg = DslConfig::for_profile(Profile::BongardHoi);
        let s = GroundedSymbols::new(&["cake"], &["round"], &[]);
        let g = build_pcfg(&cfg, &s, Weighting::Uniform).unwrap();
        assert!(g.warnings.iter().any(|w| w.contains("exists_action")));
        assert!(g.rule_for(Nonterminal::Bool, &Production::Builtin(Builtin::ExistsAction)).is_none());
    }

    #[test]
    fn bool_underivable() {
        let mut cfg = DslConfig::for_profile(Profile::Custom);
        cfg.enabled_primitives.insert("and".into());
        assert_eq!(build_pcfg(&cfg, &syms(), Weighting::Uniform).unwrap_err(), GrammarError::BoolUnderivable);
    }

    #[test]
    fn probability_of_a_program() {
        let cfg = DslConfig::for_profile(Profile::ClevrHans3);
        let g = build_pcfg(&cfg, &syms(), Weighting::Uniform).unwrap();
        let p = parse_program("(exists_property (get_objects IMG) round)", &cfg.catalog()).unwrap();
        let n_bool = g.rules(Nonterminal::Bool).len() as f64;
        let expected = (1.0 / n_bool) * 1.0 * 1.0 * 0.5;
        assert!((program_probability(&g, &p).unwrap() - expected).abs() < 1e-15);
        let bad = parse_program("(exists_property (get_objects IMG) velvet)", &cfg.catalog()).unwrap();
        let err = program_probability(&g, &bad).unwrap_err();
        assert!(err.to_string().contains("velvet"), "{err}");
    }

    #[test]
    fn dump_round_trips() {
        let cfg = DslConfig::for_profile(Profile::CocoLogic);
        let g = build_pcfg(&cfg, &syms(), Weighting::Uniform).unwrap();
        let text = g.dump();
        assert!(text.contains("INT -> 3 "));
        assert!(text.contains("OBJECT -> \"cake\" 0.500000000000"));
        assert_eq!(Pcfg::load(&text).unwrap().dump(), text);
    }

    #[test]
    fn sig12() {
        assert_eq!(format_sig12(0.125), "0.125000000000");
        assert_eq!(format_sig12(1.0), "1.00000000000");
        assert_eq!(format_sig12(100.0 / 101.0), "0.990099009901");
    }
}
