//! Best-first enumeration over a depth-unrolled grammar.
//!
//! Every state `(nonterminal, remaining depth)` keeps a max-heap of frontier programs, the
//! ordered list of programs already popped and their positions in it. Asking a state for its
//! k-th program pops until the list is long enough; popping a program pushes its successors,
//! each obtained by swapping one child for the next program of that child's state. Programs
//! are hash-consed so a subtree shared by many states is stored once.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::rc::Rc;

use crate::dsl::sexpr::write_symbol;
use crate::dsl::{Expr, Program};
use crate::grammar::{Nonterminal, Pcfg, Production, ProductionRule};

type NodeId = u32;

struct Node {
    rule: u32,
    children: Box<[NodeId]>,
    prob: f64,
    text: Rc<str>,
}

struct Entry {
    prob: f64,
    text: Rc<str>,
    node: NodeId,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Higher probability first, then lexicographically smaller text.
    fn cmp(&self, other: &Self) -> Ordering {
        self.prob.total_cmp(&other.prob).then_with(|| other.text.cmp(&self.text))
    }
}

#[derive(Default)]
struct State {
    initialized: bool,
    heap: BinaryHeap<Entry>,
    seen: HashSet<NodeId>,
    list: Vec<NodeId>,
    position: HashMap<NodeId, usize>,
}

/// Yields the BOOL programs of a grammar up to a depth bound in non-increasing probability.
pub struct HeapSearch<'g> {
    rules: Vec<&'g ProductionRule>,
    by_lhs: HashMap<Nonterminal, Vec<u32>>,
    max_depth: usize,
    nodes: Vec<Node>,
    interned: HashMap<(u32, Box<[NodeId]>), NodeId>,
    states: Vec<State>,
    start: Nonterminal,
    next_rank: usize,
    exhausted: bool,
}

impl<'g> HeapSearch<'g> {
    pub fn new(pcfg: &'g Pcfg, max_depth: usize) -> Self {
        let mut rules = Vec::new();
        let mut by_lhs: HashMap<Nonterminal, Vec<u32>> = HashMap::new();
        for nt in pcfg.nonterminals() {
            for r in pcfg.rules(nt) {
                by_lhs.entry(nt).or_default().push(rules.len() as u32);
                rules.push(r);
            }
        }
        let n_states = Nonterminal::ALL.len() * (max_depth + 1);
        HeapSearch {
            rules,
            by_lhs,
            max_depth,
            nodes: Vec::new(),
            interned: HashMap::new(),
            states: (0..n_states).map(|_| State::default()).collect(),
            start: pcfg.start,
            next_rank: 0,
            exhausted: false,
        }
    }

    fn state_index(&self, nt: Nonterminal, depth: usize) -> usize {
        let pos = Nonterminal::ALL.iter().position(|n| *n == nt).expect("known nonterminal");
        pos * (self.max_depth + 1) + depth
    }

    fn intern(&mut self, rule: u32, children: Box<[NodeId]>) -> NodeId {
        if let Some(&id) = self.interned.get(&(rule, children.clone())) {
            return id;
        }
        let r = self.rules[rule as usize];
        let mut prob = r.probability;
        for &c in children.iter() {
            prob *= self.nodes[c as usize].prob;
        }
        let text: Rc<str> = match &r.production {
            Production::Builtin(b) => {
                let mut s = format!("({}", b.name());
                for &c in children.iter() {
                    s.push(' ');
                    s.push_str(&self.nodes[c as usize].text);
                }
                s.push(')');
                s.into()
            }
            Production::Symbol(_, sym) => {
                let mut s = String::new();
                write_symbol(sym.as_str(), &mut s);
                s.into()
            }
            Production::Int(n) => n.to_string().into(),
            Production::Img => "IMG".into(),
        };
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node { rule, children: children.clone(), prob, text });
        self.interned.insert((rule, children), id);
        id
    }

    fn push(&mut self, state: usize, node: NodeId) {
        if self.states[state].seen.insert(node) {
            let n = &self.nodes[node as usize];
            let entry = Entry { prob: n.prob, text: n.text.clone(), node };
            self.states[state].heap.push(entry);
        }
    }

    fn initialize(&mut self, nt: Nonterminal, depth: usize) {
        let s = self.state_index(nt, depth);
        if self.states[s].initialized {
            return;
        }
        self.states[s].initialized = true;
        let rule_ids = self.by_lhs.get(&nt).cloned().unwrap_or_default();
        'rules: for rid in rule_ids {
            let args = &self.rules[rid as usize].args;
            if args.is_empty() {
                let id = self.intern(rid, Box::new([]));
                self.push(s, id);
                continue;
            }
            if depth == 0 {
                continue;
            }
            let mut children = Vec::with_capacity(args.len());
            for a in args.clone() {
                match self.query(a, depth - 1, 0) {
                    Some(c) => children.push(c),
                    None => continue 'rules,
                }
            }
            let id = self.intern(rid, children.into_boxed_slice());
            self.push(s, id);
        }
    }

    /// The k-th most probable program of `nt` with depth at most `depth`.
    fn query(&mut self, nt: Nonterminal, depth: usize, k: usize) -> Option<NodeId> {
        self.initialize(nt, depth);
        let s = self.state_index(nt, depth);
        while self.states[s].list.len() <= k {
            let entry = self.states[s].heap.pop()?;
            let state = &mut self.states[s];
            state.position.insert(entry.node, state.list.len());
            state.list.push(entry.node);

            let node = &self.nodes[entry.node as usize];
            let rule = node.rule;
            let children = node.children.clone();
            let args = self.rules[rule as usize].args.clone();
            for (i, arg) in args.into_iter().enumerate() {
                let cs = self.state_index(arg, depth - 1);
                let j = self.states[cs].position[&children[i]];
                if let Some(next) = self.query(arg, depth - 1, j + 1) {
                    let mut succ = children.clone();
                    succ[i] = next;
                    let id = self.intern(rule, succ);
                    self.push(s, id);
                }
            }
        }
        Some(self.states[s].list[k])
    }

    /// Next program id in enumeration order.
    pub fn next_node(&mut self) -> Option<NodeId> {
        if self.exhausted {
            return None;
        }
        let id = self.query(self.start, self.max_depth, self.next_rank);
        match id {
            Some(_) => self.next_rank += 1,
            None => self.exhausted = true,
        }
        id
    }

    pub fn probability(&self, node: NodeId) -> f64 {
        self.nodes[node as usize].prob
    }

    pub fn text(&self, node: NodeId) -> &str {
        &self.nodes[node as usize].text
    }

    pub fn expr(&self, node: NodeId) -> Expr {
        let n = &self.nodes[node as usize];
        let children = n.children.iter().map(|&c| self.expr(c)).collect();
        self.rules[n.rule as usize].apply(children)
    }

    /// Number of distinct subprograms materialized so far.
    pub fn nodes_allocated(&self) -> usize {
        self.nodes.len()
    }
}

impl Iterator for HeapSearch<'_> {
    type Item = (Program, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let id = self.next_node()?;
        Some((Program::new(self.expr(id)), self.probability(id)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{DslConfig, Profile};
    use crate::grammar::{build_pcfg, program_probability, GroundedSymbols, Weighting};

    fn grammar() -> Pcfg {
        let cfg = DslConfig::for_profile(Profile::ClevrHans3);
        let syms = GroundedSymbols::new(&["cube", "ball"], &["red", "round"], &[]);
        build_pcfg(&cfg, &syms, Weighting::Uniform).unwrap()
    }

    #[test]
    fn order_is_non_increasing_and_probabilities_agree() {
        let g = grammar();
        let mut prev = f64::INFINITY;
        let mut seen = HashSet::new();
        for (p, prob) in HeapSearch::new(&g, 3).take(2000) {
            assert!(prob <= prev);
            prev = prob;
            assert_eq!(program_probability(&g, &p).unwrap(), prob);
            assert!(seen.insert(p.to_string()));
            assert!(p.depth() <= 3);
        }
    }

    #[test]
    fn depth_one_bool_is_empty() {
        let g = grammar();
        assert_eq!(HeapSearch::new(&g, 1).count(), 0);
        assert_eq!(HeapSearch::new(&g, 0).count(), 0);
    }

    #[test]
    fn depth_two_is_exhaustive() {
        // exists_object x2, exists_property x2, exists_object_with_property x4,
        // exists_properties x4, exists_object_with_properties x8.
        let g = grammar();
        assert_eq!(HeapSearch::new(&g, 2).count(), 20);
    }
}
