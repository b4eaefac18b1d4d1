//! Shared automaton vocabulary: positive Boolean formulas, directions, parity
//! conditions, labeled forests and run trees.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// A positive Boolean formula over atoms of type `A`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlusFormula<A> {
    True,
    False,
    Atom(A),
    And(Box<PlusFormula<A>>, Box<PlusFormula<A>>),
    Or(Box<PlusFormula<A>>, Box<PlusFormula<A>>),
}

impl<A: Clone + Ord> PlusFormula<A> {
    pub fn atom(a: A) -> Self {
        PlusFormula::Atom(a)
    }

    /// Conjunction with `True`/`False` simplification.
    pub fn and(l: Self, r: Self) -> Self {
        match (l, r) {
            (PlusFormula::False, _) | (_, PlusFormula::False) => PlusFormula::False,
            (PlusFormula::True, x) | (x, PlusFormula::True) => x,
            (l, r) => PlusFormula::And(Box::new(l), Box::new(r)),
        }
    }

    /// Disjunction with `True`/`False` simplification.
    pub fn or(l: Self, r: Self) -> Self {
        match (l, r) {
            (PlusFormula::True, _) | (_, PlusFormula::True) => PlusFormula::True,
            (PlusFormula::False, x) | (x, PlusFormula::False) => x,
            (l, r) => PlusFormula::Or(Box::new(l), Box::new(r)),
        }
    }

    pub fn conj(items: impl IntoIterator<Item = Self>) -> Self {
        items.into_iter().fold(PlusFormula::True, PlusFormula::and)
    }

    pub fn disj(items: impl IntoIterator<Item = Self>) -> Self {
        items.into_iter().fold(PlusFormula::False, PlusFormula::or)
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            PlusFormula::True
        } else {
            PlusFormula::False
        }
    }

    /// All atoms occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<A> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<A>) {
        match self {
            PlusFormula::Atom(a) => {
                out.insert(a.clone());
            }
            PlusFormula::And(l, r) | PlusFormula::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            _ => {}
        }
    }

    /// True when assigning true to exactly the atoms of `s` makes the formula
    /// true.
    pub fn satisfies(&self, s: &BTreeSet<A>) -> bool {
        match self {
            PlusFormula::True => true,
            PlusFormula::False => false,
            PlusFormula::Atom(a) => s.contains(a),
            PlusFormula::And(l, r) => l.satisfies(s) && r.satisfies(s),
            PlusFormula::Or(l, r) => l.satisfies(s) || r.satisfies(s),
        }
    }

    /// All ⊆-minimal satisfying sets, sorted.
    pub fn minimal_satisfying_sets(&self) -> Vec<BTreeSet<A>> {
        let mut sets = match self {
            PlusFormula::True => vec![BTreeSet::new()],
            PlusFormula::False => Vec::new(),
            PlusFormula::Atom(a) => vec![[a.clone()].into_iter().collect()],
            PlusFormula::Or(l, r) => {
                let mut v = l.minimal_satisfying_sets();
                v.extend(r.minimal_satisfying_sets());
                v
            }
            PlusFormula::And(l, r) => {
                let ls = l.minimal_satisfying_sets();
                let rs = r.minimal_satisfying_sets();
                let mut v = Vec::with_capacity(ls.len() * rs.len());
                for a in &ls {
                    for b in &rs {
                        v.push(a.union(b).cloned().collect());
                    }
                }
                v
            }
        };
        minimize(&mut sets);
        sets
    }

    /// Replaces every atom by a formula.
    pub fn substitute<B: Clone + Ord>(&self, f: &mut impl FnMut(&A) -> PlusFormula<B>) -> PlusFormula<B> {
        match self {
            PlusFormula::True => PlusFormula::True,
            PlusFormula::False => PlusFormula::False,
            PlusFormula::Atom(a) => f(a),
            PlusFormula::And(l, r) => PlusFormula::and(l.substitute(f), r.substitute(f)),
            PlusFormula::Or(l, r) => PlusFormula::or(l.substitute(f), r.substitute(f)),
        }
    }

    /// Renames every atom.
    pub fn map<B: Clone + Ord>(&self, f: &mut impl FnMut(&A) -> B) -> PlusFormula<B> {
        self.substitute(&mut |a| PlusFormula::Atom(f(a)))
    }
}

/// Sorts, deduplicates and removes non-minimal sets.
pub fn minimize<A: Ord + Clone>(sets: &mut Vec<BTreeSet<A>>) {
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets.dedup();
    let mut kept: Vec<BTreeSet<A>> = Vec::new();
    for s in sets.drain(..) {
        if !kept.iter().any(|k| k.is_subset(&s)) {
            kept.push(s);
        }
    }
    kept.sort();
    *sets = kept;
}

impl<A: fmt::Display> fmt::Display for PlusFormula<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go<A: fmt::Display>(p: &PlusFormula<A>, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match p {
                PlusFormula::True => write!(f, "true"),
                PlusFormula::False => write!(f, "false"),
                PlusFormula::Atom(a) => write!(f, "{}", a),
                PlusFormula::And(l, r) => {
                    if prec > 1 {
                        write!(f, "(")?;
                    }
                    go(l, 1, f)?;
                    write!(f, " & ")?;
                    go(r, 1, f)?;
                    if prec > 1 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                PlusFormula::Or(l, r) => {
                    if prec > 0 {
                        write!(f, "(")?;
                    }
                    go(l, 0, f)?;
                    write!(f, " | ")?;
                    go(r, 0, f)?;
                    if prec > 0 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, 0, f)
    }
}

/// A direction of an automaton move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// `⟨n⟩`: at least `n+1` children.
    AtLeast(u32),
    /// `[n]`: all but at most `n` children.
    AllBut(u32),
    /// `-1`: the parent.
    Up,
    /// `ε`: the current node.
    Here,
    /// `⟨root⟩`: some root of the forest.
    SomeRoot,
    /// `[root]`: every root of the forest.
    AllRoots,
}

impl Direction {
    pub fn is_root(&self) -> bool {
        matches!(self, Direction::SomeRoot | Direction::AllRoots)
    }

    pub fn grade(&self) -> Option<u32> {
        match self {
            Direction::AtLeast(n) | Direction::AllBut(n) => Some(*n),
            _ => None,
        }
    }

    pub fn is_graded(&self) -> bool {
        self.grade().is_some()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::AtLeast(n) => write!(f, "<{}>", n),
            Direction::AllBut(n) => write!(f, "[{}]", n),
            Direction::Up => write!(f, "-1"),
            Direction::Here => write!(f, "eps"),
            Direction::SomeRoot => write!(f, "<root>"),
            Direction::AllRoots => write!(f, "[root]"),
        }
    }
}

/// A transition atom `(d, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Move {
    pub dir: Direction,
    pub state: usize,
}

impl Move {
    pub fn new(dir: Direction, state: usize) -> Self {
        Move { dir, state }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},q{})", self.dir, self.state)
    }
}

/// Transition formula over moves.
pub type Transition = PlusFormula<Move>;

/// A parity condition `F₀ ⊆ F₁ ⊆ … ⊆ F_k = Q`, stored as the index of each
/// state (the least `i` with `q ∈ F_i`).
///
/// A chain given as `F₁ ⊆ … ⊆ F_k` leaves `F₀` empty. A path is accepting when
/// the least index of a state visited infinitely often is even.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParityCondition {
    index: Vec<usize>,
    k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParityError {
    #[error("chain is not monotone at F_{0}")]
    NotMonotone(usize),
    #[error("last set of the chain is not the whole state set")]
    LastNotAll,
    #[error("empty cycle")]
    EmptyCycle,
}

impl ParityCondition {
    /// Builds the condition from per-state indexes; `k` is the largest index
    /// (at least 1).
    pub fn from_indices(index: Vec<usize>) -> Self {
        let k = index.iter().copied().max().unwrap_or(1).max(1);
        ParityCondition { index, k }
    }

    /// Same as [`from_indices`](Self::from_indices) with an explicit `k`.
    pub fn with_k(index: Vec<usize>, k: usize) -> Self {
        assert!(index.iter().all(|&i| i <= k), "index exceeds k");
        ParityCondition { index, k }
    }

    /// Builds the condition from a 1-based chain `F₁ ⊆ … ⊆ F_k` over
    /// `0..n`.
    pub fn from_chain(n: usize, chain: &[BTreeSet<usize>]) -> Result<Self, ParityError> {
        Self::from_chain0(n, &std::iter::once(BTreeSet::new()).chain(chain.iter().cloned()).collect::<Vec<_>>())
    }

    /// Builds the condition from a 0-based chain `F₀ ⊆ F₁ ⊆ … ⊆ F_k`.
    pub fn from_chain0(n: usize, chain: &[BTreeSet<usize>]) -> Result<Self, ParityError> {
        for i in 1..chain.len() {
            if !chain[i - 1].is_subset(&chain[i]) {
                return Err(ParityError::NotMonotone(i));
            }
        }
        let last = chain.last().cloned().unwrap_or_default();
        if last != (0..n).collect() {
            return Err(ParityError::LastNotAll);
        }
        let index = (0..n).map(|q| chain.iter().position(|f| f.contains(&q)).expect("in last set")).collect();
        Ok(ParityCondition { index, k: (chain.len() - 1).max(1) })
    }

    pub fn index(&self, q: usize) -> usize {
        self.index[q]
    }

    pub fn indices(&self) -> &[usize] {
        &self.index
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_states(&self) -> usize {
        self.index.len()
    }

    /// `F_i` as a set.
    pub fn set(&self, i: usize) -> BTreeSet<usize> {
        (0..self.index.len()).filter(|&q| self.index[q] <= i).collect()
    }

    /// The chain `F₀, …, F_k`.
    pub fn chain(&self) -> Vec<BTreeSet<usize>> {
        (0..=self.k).map(|i| self.set(i)).collect()
    }

    /// Index of a lasso path `prefix · cycle^ω`: the least index of a cycle
    /// state.
    pub fn path_index(&self, _prefix: &[usize], cycle: &[usize]) -> Result<usize, ParityError> {
        cycle.iter().map(|&q| self.index[q]).min().ok_or(ParityError::EmptyCycle)
    }

    pub fn path_accepts(&self, prefix: &[usize], cycle: &[usize]) -> Result<bool, ParityError> {
        Ok(self.path_index(prefix, cycle)? % 2 == 0)
    }
}

/// A node of a labeled forest: a nonempty word over naturals.
pub type NodeId = Vec<u32>;

/// Renders a node id as a dot-separated path such as `1.2.1`.
pub fn node_name(x: &[u32]) -> String {
    x.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
}

/// Parses a dot-separated path.
pub fn parse_node(s: &str) -> Option<NodeId> {
    s.split('.').map(|p| p.parse().ok()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("node {0} has no parent in the forest")]
    NotPrefixClosed(String),
    #[error("empty node id")]
    EmptyNode,
}

/// A finite forest with labeled nodes. Roots are the words of length 1; a
/// tree is a forest with a single root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledForest<L> {
    pub labels: BTreeMap<NodeId, L>,
}

impl<L: Clone> LabeledForest<L> {
    pub fn new(labels: BTreeMap<NodeId, L>) -> Result<Self, ForestError> {
        for x in labels.keys() {
            if x.is_empty() {
                return Err(ForestError::EmptyNode);
            }
            if x.len() > 1 && !labels.contains_key(&x[..x.len() - 1]) {
                return Err(ForestError::NotPrefixClosed(node_name(x)));
            }
        }
        Ok(LabeledForest { labels })
    }

    /// A single-node tree.
    pub fn leaf(label: L) -> Self {
        LabeledForest { labels: [(vec![0], label)].into_iter().collect() }
    }

    pub fn contains(&self, x: &[u32]) -> bool {
        self.labels.contains_key(x)
    }

    pub fn label(&self, x: &[u32]) -> Option<&L> {
        self.labels.get(x)
    }

    pub fn roots(&self) -> Vec<NodeId> {
        self.labels.keys().filter(|x| x.len() == 1).cloned().collect()
    }

    /// Children of `x` in ascending order.
    pub fn children(&self, x: &[u32]) -> Vec<NodeId> {
        let mut lo = x.to_vec();
        lo.push(0);
        self.labels
            .range(lo..)
            .take_while(|(y, _)| y.starts_with(x))
            .filter(|(y, _)| y.len() == x.len() + 1)
            .map(|(y, _)| y.clone())
            .collect()
    }

    pub fn parent(x: &[u32]) -> Option<NodeId> {
        (x.len() > 1).then(|| x[..x.len() - 1].to_vec())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.labels.keys()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn map<M>(&self, mut f: impl FnMut(&NodeId, &L) -> M) -> LabeledForest<M> {
        LabeledForest { labels: self.labels.iter().map(|(k, v)| (k.clone(), f(k, v))).collect() }
    }
}

/// A finite run tree: every node is labeled with an input node and a state.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunTree {
    pub nodes: Vec<RunNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunNode {
    pub input: NodeId,
    pub state: usize,
    pub children: Vec<usize>,
}

impl RunTree {
    /// A run consisting of its root only.
    pub fn root(input: NodeId, state: usize) -> Self {
        RunTree { nodes: vec![RunNode { input, state, children: Vec::new() }] }
    }

    /// Adds a child below `parent` and returns its id.
    pub fn add_child(&mut self, parent: usize, input: NodeId, state: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(RunNode { input, state, children: Vec::new() });
        self.nodes[parent].children.push(id);
        id
    }
}
