//! Fully enriched automata (FEAs) and their reduction to 2GAPTs.
//!
//! An FEA is an alternating parity automaton on forests whose transitions
//! may use graded moves to children, the parent, the current node and jumps
//! to some or all roots. A run starts in the initial state at some root.

use crate::automata::{Direction, LabeledForest, Move, NodeId, ParityCondition, PlusFormula, RunTree, Transition};
use crate::gapt::{automaton_json, gapt_emptiness_with, EmptinessBudget, EmptinessStats, Gapt2, GaptError};
use crate::games::{solve_zielonka, ParityGame, Player};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeaError {
    #[error("run refers to node {0} which is not in the forest")]
    UnknownNode(String),
    #[error("run refers to state {0} which does not exist")]
    UnknownState(usize),
    #[error("transition table has the wrong shape")]
    Shape,
    #[error("transition of state {state} on letter {letter} uses grade {grade} above the counting bound {b}")]
    GradeAboveBound { state: usize, letter: usize, grade: u32, b: u32 },
}

/// A fully enriched automaton over the alphabet `0..alphabet.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fea {
    pub alphabet: Vec<String>,
    pub b: u32,
    pub states: Vec<String>,
    /// `delta[q][σ]`.
    pub delta: Vec<Vec<Transition>>,
    pub init: usize,
    pub acc: ParityCondition,
}

impl Fea {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn validate(&self) -> Result<(), FeaError> {
        if self.delta.len() != self.states.len()
            || self.delta.iter().any(|row| row.len() != self.alphabet.len())
            || self.init >= self.states.len()
            || self.acc.num_states() != self.states.len()
        {
            return Err(FeaError::Shape);
        }
        for (q, row) in self.delta.iter().enumerate() {
            for (letter, t) in row.iter().enumerate() {
                for m in t.atoms() {
                    if m.state >= self.states.len() {
                        return Err(FeaError::Shape);
                    }
                    if let Some(grade) = m.dir.grade() {
                        if grade > self.b {
                            return Err(FeaError::GradeAboveBound { state: q, letter, grade, b: self.b });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// JSON dump: alphabet, states, transition text forms and parity indexes.
    pub fn to_json(&self) -> serde_json::Value {
        automaton_json(&self.alphabet, self.b, &self.states, &self.delta, self.init, &self.acc)
    }

    /// Does the automaton accept the forest? Decided exactly, see
    /// [`alternating_accepts`].
    pub fn accepts(&self, forest: &LabeledForest<usize>) -> bool {
        alternating_accepts(&self.delta, self.init, &self.acc, forest)
    }
}

impl Gapt2 {
    /// Does the automaton accept the tree? Decided exactly, see
    /// [`alternating_accepts`].
    pub fn accepts(&self, tree: &LabeledForest<usize>) -> bool {
        tree.roots().len() == 1 && alternating_accepts(&self.delta, self.init, &self.acc, tree)
    }
}

/// Checks a finite run: the root of the run reads some root of the forest
/// in the initial state, and every run node has children that fulfil a set
/// of atoms satisfying its transition. Since the run is finite, these
/// conditions are also sufficient for acceptance.
pub fn check_run(a: &Fea, forest: &LabeledForest<usize>, run: &RunTree) -> Result<bool, FeaError> {
    for node in &run.nodes {
        if !forest.contains(&node.input) {
            return Err(FeaError::UnknownNode(crate::automata::node_name(&node.input)));
        }
        if node.state >= a.num_states() {
            return Err(FeaError::UnknownState(node.state));
        }
    }
    let Some(root) = run.nodes.first() else { return Ok(false) };
    if root.input.len() != 1 || root.state != a.init {
        return Ok(false);
    }
    let roots = forest.roots();
    for node in &run.nodes {
        let x = &node.input;
        let kids: BTreeSet<(NodeId, usize)> =
            node.children.iter().map(|&c| (run.nodes[c].input.clone(), run.nodes[c].state)).collect();
        let has = |y: &NodeId, s: usize| kids.contains(&(y.clone(), s));
        let succ = forest.children(x);
        let theta = &a.delta[node.state][forest.labels[x]];
        let met: BTreeSet<Move> = theta
            .atoms()
            .into_iter()
            .filter(|m| {
                let s = m.state;
                match m.dir {
                    Direction::Here => has(x, s),
                    Direction::Up => LabeledForest::<usize>::parent(x).is_some_and(|p| has(&p, s)),
                    Direction::AtLeast(n) => succ.iter().filter(|z| has(z, s)).count() > n as usize,
                    Direction::AllBut(n) => succ.iter().filter(|z| !has(z, s)).count() <= n as usize,
                    Direction::SomeRoot => roots.iter().any(|c| has(c, s)),
                    Direction::AllRoots => roots.iter().all(|c| has(c, s)),
                }
            })
            .collect();
        if !theta.satisfies(&met) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Acceptance of a finite forest by an alternating parity automaton with
/// any of the six directions.
///
/// The run is built as a game on configurations `(node, state)`: the
/// Protagonist picks a root for the initial state, and at every
/// configuration a minimal satisfying set of the transition together with
/// target nodes for each atom; the Antagonist picks one of the resulting
/// configurations. A configuration has priority equal to the index of its
/// state, so the Protagonist wins iff an accepting run exists. A `[n]` atom
/// skips as many children as it may, which never hurts.
pub fn alternating_accepts(
    delta: &[Vec<Transition>],
    init: usize,
    acc: &ParityCondition,
    forest: &LabeledForest<usize>,
) -> bool {
    let roots = forest.roots();
    if roots.is_empty() {
        return false;
    }
    let neutral = acc.k() + 1;
    let mut game = ParityGame::default();
    let start = game.add_vertex(Player::Protagonist, neutral);
    let mut ids: HashMap<(NodeId, usize), usize> = HashMap::new();
    let mut todo: Vec<(NodeId, usize, usize)> = Vec::new();
    let mut config = |x: NodeId, q: usize, game: &mut ParityGame, todo: &mut Vec<(NodeId, usize, usize)>| -> usize {
        *ids.entry((x.clone(), q)).or_insert_with(|| {
            let v = game.add_vertex(Player::Protagonist, acc.index(q));
            todo.push((x, q, v));
            v
        })
    };
    for r in &roots {
        let v = config(r.clone(), init, &mut game, &mut todo);
        game.edges[start].push(v);
    }
    while let Some((x, q, v)) = todo.pop() {
        let mut commitments: BTreeSet<BTreeSet<(NodeId, usize)>> = BTreeSet::new();
        for set in delta[q][forest.labels[&x]].minimal_satisfying_sets() {
            let mut partial: Vec<BTreeSet<(NodeId, usize)>> = vec![BTreeSet::new()];
            for m in &set {
                let options = targets(forest, &roots, &x, *m);
                let mut next = Vec::new();
                for p in &partial {
                    for o in &options {
                        let mut c = p.clone();
                        c.extend(o.iter().map(|y| (y.clone(), m.state)));
                        next.push(c);
                    }
                }
                partial = next;
            }
            commitments.extend(partial);
        }
        if commitments.is_empty() {
            game.terminal[v] = Some(Player::Antagonist);
            continue;
        }
        if commitments.iter().any(|c| c.is_empty()) {
            game.terminal[v] = Some(Player::Protagonist);
            continue;
        }
        for c in commitments {
            let w = game.add_vertex(Player::Antagonist, neutral);
            game.edges[v].push(w);
            for (y, s) in c {
                let u = config(y, s, &mut game, &mut todo);
                game.edges[w].push(u);
            }
        }
    }
    let sol = solve_zielonka(&game).expect("every vertex has a move or is terminal");
    sol.winner[start] == Player::Protagonist
}

/// The alternative target node sets of one atom at node `x`. Empty if the
/// atom cannot be fulfilled.
fn targets(forest: &LabeledForest<usize>, roots: &[NodeId], x: &NodeId, m: Move) -> Vec<Vec<NodeId>> {
    let succ = forest.children(x);
    match m.dir {
        Direction::Here => vec![vec![x.clone()]],
        Direction::Up => LabeledForest::<usize>::parent(x).into_iter().map(|p| vec![p]).collect(),
        Direction::AtLeast(n) => subsets(&succ, n as usize + 1),
        Direction::AllBut(n) => {
            let skip = (n as usize).min(succ.len());
            subsets(&succ, succ.len() - skip)
        }
        Direction::SomeRoot => roots.iter().map(|r| vec![r.clone()]).collect(),
        Direction::AllRoots => vec![roots.to_vec()],
    }
}

fn subsets(items: &[NodeId], k: usize) -> Vec<Vec<NodeId>> {
    if k > items.len() {
        return Vec::new();
    }
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, first) in items.iter().enumerate() {
        for mut rest in subsets(&items[i + 1..], k - 1) {
            rest.insert(0, first.clone());
            out.push(rest);
        }
    }
    out
}

/// The tree encoding of a forest: a fresh root `[0]` labeled `root_letter`
/// whose children are the former roots. Node `[i, …]` becomes `[0, i, …]`.
pub fn tree_encoding_of_forest(forest: &LabeledForest<usize>, root_letter: usize) -> LabeledForest<usize> {
    let mut labels = std::collections::BTreeMap::new();
    labels.insert(vec![0], root_letter);
    for (x, &l) in &forest.labels {
        let mut y = vec![0];
        y.extend_from_slice(x);
        labels.insert(y, l);
    }
    LabeledForest { labels }
}

/// Name of the letter added for the fresh root.
pub const ROOT_LETTER: &str = "root";

/// Reduces an FEA to a 2GAPT accepting exactly the tree encodings of the
/// forests the FEA accepts.
///
/// The new states are `q₀′` (index `k`), `q_r` (index 0) and `some_q`,
/// `all_q` (index `k`) for every state `q`, in this order after the old
/// states. `q₀′` reads the fresh root, starts `q₀` at some child and `q_r`
/// at all children; `q_r` walks down the tree and fails on another fresh
/// root letter. Root jumps become `ε` moves to `some_q` or `all_q`, which
/// climb to the fresh root and go down one level.
pub fn fea_to_gapt(a: &Fea) -> Gapt2 {
    let n = a.num_states();
    let sigma = a.alphabet.len();
    let root = sigma;
    let (q0p, qr) = (n, n + 1);
    let some = |q: usize| n + 2 + 2 * q;
    let all = |q: usize| n + 3 + 2 * q;
    let m = |d: Direction, q: usize| PlusFormula::atom(Move::new(d, q));
    let mut states = a.states.clone();
    states.push("q0'".into());
    states.push("q_r".into());
    for q in 0..n {
        states.push(format!("some_{}", a.states[q]));
        states.push(format!("all_{}", a.states[q]));
    }
    let mut alphabet = a.alphabet.clone();
    alphabet.push(ROOT_LETTER.into());
    let mut delta: Vec<Vec<Transition>> = vec![vec![PlusFormula::False; sigma + 1]; 3 * n + 2];
    for q in 0..n {
        for l in 0..sigma {
            delta[q][l] = a.delta[q][l].substitute(&mut |mv: &Move| match mv.dir {
                Direction::SomeRoot => m(Direction::Here, some(mv.state)),
                Direction::AllRoots => m(Direction::Here, all(mv.state)),
                _ => PlusFormula::Atom(*mv),
            });
        }
        for l in 0..sigma {
            delta[some(q)][l] = m(Direction::Up, some(q));
            delta[all(q)][l] = m(Direction::Up, all(q));
        }
        delta[some(q)][root] = m(Direction::AtLeast(0), q);
        delta[all(q)][root] = m(Direction::AllBut(0), q);
    }
    delta[q0p][root] = PlusFormula::and(m(Direction::AtLeast(0), a.init), m(Direction::AllBut(0), qr));
    for l in 0..sigma {
        delta[qr][l] = m(Direction::AllBut(0), qr);
    }
    let k = a.acc.k();
    let mut index: Vec<usize> = (0..n).map(|q| a.acc.index(q)).collect();
    index.push(k);
    index.push(0);
    index.extend(std::iter::repeat_n(k, 2 * n));
    Gapt2 { alphabet, b: a.b, states, delta, init: q0p, acc: ParityCondition::with_k(index, k) }
}

/// Decides nonemptiness of an FEA through [`fea_to_gapt`]. Returns true iff
/// the language is nonempty.
pub fn fea_emptiness(a: &Fea) -> Result<bool, GaptError> {
    fea_emptiness_with(a, &EmptinessBudget::default()).0
}

/// [`fea_emptiness`] under a budget, with counters.
pub fn fea_emptiness_with(a: &Fea, budget: &EmptinessBudget) -> (Result<bool, GaptError>, EmptinessStats) {
    gapt_emptiness_with(&fea_to_gapt(a), budget)
}

/// All forests with at most `max_nodes` nodes, depth at most `max_depth`
/// (roots have depth 1), at most `max_branching` roots and children per
/// node, and letters below `letters`. Siblings are generated in
/// nondecreasing order of their subtrees, so each forest appears once up
/// to reordering siblings.
pub fn small_forests(max_nodes: usize, max_depth: usize, max_branching: usize, letters: usize) -> Vec<LabeledForest<usize>> {
    // Trees as nested (label, children) values, by depth and size.
    #[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
    struct T(usize, Vec<T>);
    fn size(t: &T) -> usize {
        1 + t.1.iter().map(size).sum::<usize>()
    }
    fn trees(depth: usize, max_nodes: usize, branching: usize, letters: usize) -> Vec<T> {
        if depth == 0 || max_nodes == 0 {
            return Vec::new();
        }
        let subs = trees(depth - 1, max_nodes - 1, branching, letters);
        let mut out = Vec::new();
        for l in 0..letters {
            for kids in multisets(&subs, branching, max_nodes - 1) {
                out.push(T(l, kids));
            }
        }
        out
    }
    fn multisets(items: &[T], max_len: usize, budget: usize) -> Vec<Vec<T>> {
        let mut out = vec![Vec::new()];
        fn go(items: &[T], start: usize, max_len: usize, budget: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
            if cur.len() == max_len {
                return;
            }
            for i in start..items.len() {
                let s = size(&items[i]);
                if s <= budget {
                    cur.push(items[i].clone());
                    out.push(cur.clone());
                    go(items, i, max_len, budget - s, cur, out);
                    cur.pop();
                }
            }
        }
        go(items, 0, max_len, budget, &mut Vec::new(), &mut out);
        out
    }
    fn place(t: &T, id: NodeId, labels: &mut std::collections::BTreeMap<NodeId, usize>) {
        labels.insert(id.clone(), t.0);
        for (i, c) in t.1.iter().enumerate() {
            let mut y = id.clone();
            y.push(i as u32 + 1);
            place(c, y, labels);
        }
    }
    let all = trees(max_depth, max_nodes, max_branching, letters);
    multisets(&all, max_branching, max_nodes)
        .into_iter()
        .filter(|f| !f.is_empty())
        .map(|f| {
            let mut labels = std::collections::BTreeMap::new();
            for (i, t) in f.iter().enumerate() {
                place(t, vec![i as u32 + 1], &mut labels);
            }
            LabeledForest { labels }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(d: Direction, q: usize) -> Transition {
        PlusFormula::atom(Move::new(d, q))
    }

    fn fea(delta: Vec<Vec<Transition>>, index: Vec<usize>) -> Fea {
        let letters = delta[0].len();
        Fea {
            alphabet: (0..letters).map(|l| format!("l{l}")).collect(),
            b: 1,
            states: (0..delta.len()).map(|q| format!("q{q}")).collect(),
            delta,
            init: 0,
            acc: ParityCondition::from_indices(index),
        }
    }

    fn two_roots() -> LabeledForest<usize> {
        LabeledForest { labels: [(vec![1], 0), (vec![2], 0)].into_iter().collect() }
    }

    #[test]
    fn three_states_give_eleven() {
        let a = fea(vec![vec![PlusFormula::True]; 3], vec![2, 2, 2]);
        let g = fea_to_gapt(&a);
        assert_eq!(g.num_states(), 11);
        assert!(g.validate().is_ok());
        assert_eq!(g.delta[4][0], m(Direction::AllBut(0), 4));
        assert_eq!(g.delta[4][1], PlusFormula::False);
        assert_eq!(g.acc.index(4), 0);
    }

    #[test]
    fn root_jumps_are_replaced() {
        let a = fea(vec![vec![m(Direction::SomeRoot, 0)]], vec![2]);
        let g = fea_to_gapt(&a);
        assert_eq!(g.delta[0][0], m(Direction::Here, 3));
        assert!(g.delta.iter().flatten().all(|t| t.atoms().iter().all(|mv| !mv.dir.is_root())));
    }

    #[test]
    fn run_checking() {
        let a = fea(vec![vec![PlusFormula::True]], vec![2]);
        let mut run = RunTree::root(vec![1], 0);
        assert!(check_run(&a, &two_roots(), &run).unwrap());
        let b = fea(vec![vec![PlusFormula::False]], vec![2]);
        assert!(!check_run(&b, &two_roots(), &run).unwrap());
        let c = fea(vec![vec![m(Direction::AllRoots, 1)], vec![PlusFormula::True]], vec![2, 2]);
        run.add_child(0, vec![1], 1);
        assert!(!check_run(&c, &two_roots(), &run).unwrap());
        run.add_child(0, vec![2], 1);
        assert!(check_run(&c, &two_roots(), &run).unwrap());
        run.add_child(0, vec![3], 1);
        assert_eq!(check_run(&c, &two_roots(), &run), Err(FeaError::UnknownNode("3".into())));
    }

    #[test]
    fn encoding_adds_a_root() {
        let t = tree_encoding_of_forest(&two_roots(), 1);
        assert_eq!(t.roots(), vec![vec![0]]);
        assert_eq!(t.children(&[0]), vec![vec![0, 1], vec![0, 2]]);
        assert_eq!(t.labels[&vec![0, 2]], 0);
        assert_eq!(tree_encoding_of_forest(&LabeledForest::leaf(0), 1).len(), 2);
    }

    #[test]
    fn membership_with_loops() {
        let stay = |i| fea(vec![vec![m(Direction::Here, 0)]], vec![i]);
        assert!(stay(2).accepts(&two_roots()));
        assert!(!stay(1).accepts(&two_roots()));
        let jump = fea(vec![vec![m(Direction::AllRoots, 0)]], vec![1]);
        assert!(!jump.accepts(&two_roots()));
        assert!(!fea_to_gapt(&jump).accepts(&tree_encoding_of_forest(&two_roots(), 1)));
    }

    #[test]
    fn emptiness_examples() {
        assert!(fea_emptiness(&fea(vec![vec![PlusFormula::True]], vec![2])).unwrap());
        assert!(!fea_emptiness(&fea(vec![vec![PlusFormula::False]], vec![2])).unwrap());
        assert!(!fea_emptiness(&fea(vec![vec![m(Direction::AllRoots, 0)]], vec![1])).unwrap());
        assert!(fea_emptiness(&fea(vec![vec![m(Direction::AllRoots, 0)]], vec![2])).unwrap());
    }

    #[test]
    fn forest_enumeration() {
        let f = small_forests(2, 3, 3, 2);
        // One node: 2; two roots: 3 multisets; root with a child: 4.
        assert_eq!(f.len(), 9);
        let g = small_forests(3, 3, 3, 1);
        // a; a,a; a,a,a; a(a); a(a),a; a(a,a); a(a(a)).
        assert_eq!(g.len(), 7);
    }

    #[test]
    fn reduction_preserves_small_forests() {
        let a = fea(
            vec![
                vec![PlusFormula::and(m(Direction::AllRoots, 1), m(Direction::AtLeast(0), 2)), PlusFormula::False],
                vec![m(Direction::AllBut(0), 1), PlusFormula::True],
                vec![PlusFormula::True, m(Direction::Up, 0)],
            ],
            vec![2, 1, 2],
        );
        let g = fea_to_gapt(&a);
        for f in small_forests(4, 3, 3, 2) {
            assert_eq!(a.accepts(&f), g.accepts(&tree_encoding_of_forest(&f, 2)), "forest {:?}", f.labels);
        }
    }
}
