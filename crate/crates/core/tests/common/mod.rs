#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use vlp_core::dsl::{Builtin, Catalog, DslConfig, Expr, Profile, Program, SymbolKind};
use vlp_core::grammar::{build_pcfg, GroundedSymbols, Nonterminal, Pcfg, SymbolStats, Weighting};
use vlp_core::scene::{ImageScenes, Scene};

pub mod corpus;

pub fn full_catalog() -> Catalog {
    Catalog::new(Builtin::ALL.iter().copied().collect(), 6)
}

pub fn parse(text: &str) -> Program {
    vlp_core::dsl::sexpr::parse_program(text, &full_catalog()).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// Every derivation of `nt` with depth at most `depth`, by plain recursion over the rules.
/// Probabilities are products of rule probabilities, accumulated independently of the search.
pub fn brute_force(pcfg: &Pcfg, nt: Nonterminal, depth: usize) -> Vec<(Expr, f64)> {
    let mut memo = HashMap::new();
    brute(pcfg, nt, depth, &mut memo)
}

fn brute(
    pcfg: &Pcfg,
    nt: Nonterminal,
    depth: usize,
    memo: &mut HashMap<(Nonterminal, usize), Vec<(Expr, f64)>>,
) -> Vec<(Expr, f64)> {
    if let Some(done) = memo.get(&(nt, depth)) {
        return done.clone();
    }
    let mut out = Vec::new();
    for rule in pcfg.rules(nt) {
        if rule.args.is_empty() {
            out.push((rule.apply(Vec::new()), rule.probability));
            continue;
        }
        if depth == 0 {
            continue;
        }
        let mut partial: Vec<(Vec<Expr>, f64)> = vec![(Vec::new(), rule.probability)];
        for &arg in &rule.args {
            let options = brute(pcfg, arg, depth - 1, memo);
            let mut next = Vec::new();
            for (kids, p) in &partial {
                for (e, q) in &options {
                    let mut k = kids.clone();
                    k.push(e.clone());
                    next.push((k, p * q));
                }
            }
            partial = next;
        }
        out.extend(partial.into_iter().map(|(kids, p)| (rule.apply(kids), p)));
    }
    memo.insert((nt, depth), out.clone());
    out
}

const OBJECTS: [&str; 5] = ["dog", "cake", "birthday cake", "ball", "horse"];
const PROPERTIES: [&str; 4] = ["red", "round", "shiny", "small"];
const ACTIONS: [&str; 3] = ["riding", "holding", "eating"];

/// A random small grammar: a profile's primitives thinned out, a few symbols and random
/// occurrence counts.
pub fn random_grammar(rng: &mut impl Rng) -> Option<(DslConfig, GroundedSymbols, Pcfg)> {
    let profile = *[Profile::BongardHoi, Profile::BongardOw, Profile::CocoLogic, Profile::ClevrHans3]
        .choose(rng)
        .unwrap();
    let mut cfg = DslConfig::for_profile(profile);
    cfg.enabled_primitives.retain(|name| name == "get_objects" || rng.gen_bool(0.4));
    cfg.int_constant_max = rng.gen_range(0..=2);
    cfg.strict_scene_typing = rng.gen_bool(0.5);
    let pick = |rng: &mut dyn rand::RngCore, pool: &[&str], lo: usize, hi: usize| -> Vec<String> {
        let n = rng.gen_range(lo..=hi);
        pool.choose_multiple(rng, n).map(|s| s.to_string()).collect()
    };
    let symbols = GroundedSymbols::new(
        &pick(rng, &OBJECTS, 1, 3),
        &pick(rng, &PROPERTIES, 1, 3),
        &pick(rng, &ACTIONS, 0, 2),
    );
    let n_pos_total = rng.gen_range(1..=6);
    let mut counts = BTreeMap::new();
    for kind in [SymbolKind::Object, SymbolKind::Property, SymbolKind::Action] {
        let per: BTreeMap<String, (usize, usize)> = symbols
            .list(kind)
            .iter()
            .map(|s| (s.clone(), (rng.gen_range(0..=n_pos_total), rng.gen_range(0..=6))))
            .collect();
        counts.insert(kind, per);
    }
    let stats = SymbolStats { n_pos_total, n_neg_total: 6, counts };
    let pcfg = build_pcfg(&cfg, &symbols, Weighting::Occurrence(&stats)).ok()?;
    Some((cfg, symbols, pcfg))
}

pub fn vocab() -> GroundedSymbols {
    GroundedSymbols::new(&["dog", "cake", "ball"], &["red", "round", "small"], &["riding", "holding"])
}

fn arb_row(heads: &'static [&'static str], tails: &'static [&'static str]) -> impl Strategy<Value = Vec<String>> {
    (prop::sample::select(heads), prop::collection::vec(prop::sample::select(tails), 0..3)).prop_map(|(h, t)| {
        std::iter::once(h.to_string()).chain(t.into_iter().map(str::to_string)).collect()
    })
}

pub fn arb_scene() -> impl Strategy<Value = Scene> {
    prop::collection::vec(arb_row(&["dog", "cake", "ball"], &["red", "round", "small"]), 0..5)
        .prop_map(|rows| Scene::new(rows.iter().map(|r| r.iter())))
}

pub fn arb_action_scene() -> impl Strategy<Value = Scene> {
    prop::collection::vec(arb_row(&["riding", "holding"], &["dog", "cake", "ball"]), 0..3)
        .prop_map(|rows| Scene::new(rows.iter().map(|r| r.iter())))
}

pub fn arb_image() -> impl Strategy<Value = ImageScenes> {
    (arb_scene(), arb_action_scene()).prop_map(|(o, a)| ImageScenes::new(o, a))
}

fn obj() -> impl Strategy<Value = Expr> {
    prop::sample::select(&["dog", "cake", "ball", "horse"][..]).prop_map(Expr::object)
}

fn prop_sym() -> impl Strategy<Value = Expr> {
    prop::sample::select(&["red", "round", "small", "blue"][..]).prop_map(Expr::property)
}

fn act() -> impl Strategy<Value = Expr> {
    prop::sample::select(&["riding", "holding", "eating"][..]).prop_map(Expr::action)
}

pub fn objects_scene() -> Expr {
    Expr::app(Builtin::GetObjects, vec![Expr::Img])
}

pub fn actions_scene() -> Expr {
    Expr::app(Builtin::GetActions, vec![Expr::Img])
}

pub fn arb_int() -> impl Strategy<Value = Expr> {
    let o = objects_scene;
    prop_oneof![
        (0i64..4).prop_map(Expr::Int),
        obj().prop_map(move |x| Expr::app(Builtin::CountObjectInImg, vec![o(), x])),
        prop_sym().prop_map(move |p| Expr::app(Builtin::CountObjectsWithProperty, vec![o(), p])),
        Just(Expr::app(Builtin::MaxObjectsOfSameType, vec![o()])),
        Just(Expr::app(Builtin::CountAllObjects, vec![o()])),
    ]
}

/// Perception predicates over the two scene producers.
pub fn arb_predicate() -> impl Strategy<Value = Expr> {
    let o = objects_scene;
    prop_oneof![
        obj().prop_map(move |x| Expr::app(Builtin::ExistsObject, vec![o(), x])),
        (obj(), prop_sym()).prop_map(move |(x, p)| Expr::app(Builtin::ExistsObjectWithProperty, vec![o(), x, p])),
        prop_sym().prop_map(move |p| Expr::app(Builtin::ExistsProperty, vec![o(), p])),
        (prop_sym(), prop_sym()).prop_map(move |(p, q)| Expr::app(Builtin::ExistsProperties, vec![o(), p, q])),
        (obj(), prop_sym(), prop_sym())
            .prop_map(move |(x, p, q)| Expr::app(Builtin::ExistsObjectWithProperties, vec![o(), x, p, q])),
        act().prop_map(|a| Expr::app(Builtin::ExistsAction, vec![actions_scene(), a])),
        (act(), obj()).prop_map(|(a, x)| Expr::app(Builtin::ExistsActionWithObject, vec![actions_scene(), a, x])),
        (arb_int(), arb_int()).prop_map(|(a, b)| Expr::app(Builtin::Gt, vec![a, b])),
        (arb_int(), arb_int()).prop_map(|(a, b)| Expr::app(Builtin::Eq, vec![a, b])),
    ]
}

/// Well-typed BOOL expressions up to roughly depth 6.
pub fn arb_bool() -> impl Strategy<Value = Expr> {
    arb_predicate().prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::app(Builtin::Not, vec![a])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::app(Builtin::And, vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::app(Builtin::Or, vec![a, b])),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::app(Builtin::Xor, vec![a, b])),
        ]
    })
}
