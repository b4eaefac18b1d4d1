//! Strategy, promise and annotation trees on finite input trees.
//!
//! A strategy label at a node lists the moves `(q, c, q′)` chosen for every
//! state `q` the automaton visits there. A promise label lists the pairs
//! `(q, q′)` telling which children inherit `q′` from a graded move of `q` at
//! the parent. An annotation label lists detours `(q, i, q′)`: from state `q`
//! the automaton leaves the node and comes back in `q′`, and `i` is the least
//! index seen on the way.

use super::Gapt2;
use crate::automata::{Direction, LabeledForest, Move, NodeId};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

pub type StrategyLabel = BTreeSet<(usize, Direction, usize)>;
pub type PromiseLabel = BTreeSet<(usize, usize)>;
pub type AnnotationLabel = BTreeSet<(usize, usize, usize)>;

/// Labels per node; a missing node has the empty label.
pub type NodeMap<L> = BTreeMap<NodeId, L>;

fn label<'a, L>(m: &'a NodeMap<L>, x: &[u32], empty: &'a L) -> &'a L {
    m.get(x).unwrap_or(empty)
}

/// States with a chosen move at a node.
pub fn head(s: &StrategyLabel) -> BTreeSet<usize> {
    s.iter().map(|&(q, _, _)| q).collect()
}

fn is_true(a: &Gapt2, q: usize, letter: usize) -> bool {
    a.delta[q][letter] == crate::automata::PlusFormula::True
}

/// The node reached by an `ε` or `-1` move, if it exists in the tree.
fn step(tree: &LabeledForest<usize>, x: &NodeId, d: Direction) -> Option<NodeId> {
    match d {
        Direction::Here => Some(x.clone()),
        Direction::Up => LabeledForest::<usize>::parent(x).filter(|p| tree.contains(p)),
        _ => None,
    }
}

/// Checks the three strategy conditions: the initial state is covered at the
/// root, every chosen move set satisfies its transition and every `ε`/`-1`
/// move lands on a node whose head covers the target (or whose transition
/// for the target is `true`).
pub fn check_strategy(a: &Gapt2, tree: &LabeledForest<usize>, str: &NodeMap<StrategyLabel>) -> bool {
    let empty = StrategyLabel::new();
    let Some(root) = tree.roots().into_iter().next() else { return false };
    let root_letter = tree.labels[&root];
    let s_root = label(str, &root, &empty);
    if !is_true(a, a.init, root_letter) && !head(s_root).contains(&a.init) {
        return false;
    }
    for (x, &letter) in &tree.labels {
        let s = label(str, x, &empty);
        for q in head(s) {
            let chosen: BTreeSet<Move> =
                s.iter().filter(|t| t.0 == q).map(|&(_, d, q2)| Move::new(d, q2)).collect();
            if !a.delta[q][letter].satisfies(&chosen) {
                return false;
            }
        }
        for &(_, d, q2) in s {
            if matches!(d, Direction::Here | Direction::Up) {
                let Some(y) = step(tree, x, d) else { return false };
                let ly = tree.labels[&y];
                if !is_true(a, q2, ly) && !head(label(str, &y, &empty)).contains(&q2) {
                    return false;
                }
            }
        }
    }
    true
}

/// Checks the three promise conditions: every `⟨n⟩` move is promised to
/// `n+1` children, every `[n]` move to all but at most `n` children, and
/// every promised state is covered at the child.
pub fn check_promise(
    a: &Gapt2,
    tree: &LabeledForest<usize>,
    str: &NodeMap<StrategyLabel>,
    pro: &NodeMap<PromiseLabel>,
) -> bool {
    let (es, ep) = (StrategyLabel::new(), PromiseLabel::new());
    for (x, &letter) in &tree.labels {
        let s = label(str, x, &es);
        let children = tree.children(x);
        for &(q, d, q2) in s {
            let carrying = children.iter().filter(|y| label(pro, y, &ep).contains(&(q, q2))).count();
            match d {
                Direction::AtLeast(n) if carrying < n as usize + 1 => return false,
                Direction::AllBut(n) if children.len() - carrying > n as usize => return false,
                _ => {}
            }
        }
        for &(_, q2) in label(pro, x, &ep) {
            if !is_true(a, q2, letter) && !head(s).contains(&q2) {
                return false;
            }
        }
    }
    true
}

/// The annotation entries forced at `x` by conditions (1), (3) and (4) given
/// the current annotation `ann`, before closing under composition.
fn forced_entries(
    a: &Gapt2,
    tree: &LabeledForest<usize>,
    str: &NodeMap<StrategyLabel>,
    pro: &NodeMap<PromiseLabel>,
    ann: &NodeMap<AnnotationLabel>,
    x: &NodeId,
) -> AnnotationLabel {
    let (es, ep, ea) = (StrategyLabel::new(), PromiseLabel::new(), AnnotationLabel::new());
    let idx = |q: usize| a.acc.index(q);
    let s = label(str, x, &es);
    let mut out = AnnotationLabel::new();
    for &(q, d, q2) in s {
        if d == Direction::Here {
            out.insert((q, idx(q2), q2));
        }
    }
    // Detours through the parent.
    if let Some(y) = LabeledForest::<usize>::parent(x).filter(|p| tree.contains(p)) {
        let (sy, ay, px) = (label(str, &y, &es), label(ann, &y, &ea), label(pro, x, &ep));
        for &(q, d, q1) in s {
            if d != Direction::Up {
                continue;
            }
            for (j, q2) in detour_ends(ay, q1, idx(q1)) {
                for &(q3, c, q4) in sy {
                    if q3 == q2 && c.is_graded() && px.contains(&(q2, q4)) {
                        out.insert((q, idx(q1).min(j).min(idx(q4)), q4));
                    }
                }
            }
        }
    }
    // Detours through a child.
    for y in tree.children(x) {
        let (sy, ay, py) = (label(str, &y, &es), label(ann, &y, &ea), label(pro, &y, &ep));
        for &(q, c, q1) in s {
            if !c.is_graded() || !py.contains(&(q, q1)) {
                continue;
            }
            for (j, q2) in detour_ends(ay, q1, idx(q1)) {
                for &(q3, d, q4) in sy {
                    if q3 == q2 && d == Direction::Up {
                        out.insert((q, idx(q1).min(j).min(idx(q4)), q4));
                    }
                }
            }
        }
    }
    out
}

/// The pairs `(j, q″)` with `(q′, j, q″)` in `ann`, plus `(index(q′), q′)`.
pub(crate) fn detour_ends(ann: &AnnotationLabel, q1: usize, idx1: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = ann.iter().filter(|t| t.0 == q1).map(|&(_, j, q2)| (j, q2)).collect();
    v.push((idx1, q1));
    v
}

/// Closes an annotation label under composition with the least index.
///
/// Every triple is composed once on each side when it is first seen, so
/// every pair of triples is composed exactly once.
pub fn compose_closure(ann: &mut AnnotationLabel) {
    let mut by_target: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for &(q, i, q1) in ann.iter() {
        by_target.entry(q1).or_default().push((q, i));
    }
    let mut work: Vec<(usize, usize, usize)> = ann.iter().copied().collect();
    let mut fresh = Vec::new();
    while let Some((q, i, q1)) = work.pop() {
        for &(_, j, q2) in ann.range((q1, 0, 0)..=(q1, usize::MAX, usize::MAX)) {
            fresh.push((q, i.min(j), q2));
        }
        if let Some(left) = by_target.get(&q) {
            for &(p, j) in left {
                fresh.push((p, i.min(j), q1));
            }
        }
        for t in fresh.drain(..) {
            if ann.insert(t) {
                by_target.entry(t.2).or_default().push((t.0, t.1));
                work.push(t);
            }
        }
    }
}

/// Checks the four annotation conditions at every node.
pub fn check_annotation(
    a: &Gapt2,
    tree: &LabeledForest<usize>,
    str: &NodeMap<StrategyLabel>,
    pro: &NodeMap<PromiseLabel>,
    ann: &NodeMap<AnnotationLabel>,
) -> bool {
    let ea = AnnotationLabel::new();
    tree.labels.keys().all(|x| {
        let ax = label(ann, x, &ea);
        let mut closed = ax.clone();
        compose_closure(&mut closed);
        closed == *ax && forced_entries(a, tree, str, pro, ann, x).is_subset(ax)
    })
}

/// The least annotation on `str` and `pro`, computed by saturation.
pub fn smallest_annotation(
    a: &Gapt2,
    tree: &LabeledForest<usize>,
    str: &NodeMap<StrategyLabel>,
    pro: &NodeMap<PromiseLabel>,
) -> NodeMap<AnnotationLabel> {
    let mut ann: NodeMap<AnnotationLabel> = tree.labels.keys().map(|x| (x.clone(), AnnotationLabel::new())).collect();
    loop {
        let mut changed = false;
        for x in tree.labels.keys() {
            let forced = forced_entries(a, tree, str, pro, &ann, x);
            let ax = ann.get_mut(x).expect("every node present");
            let before = ax.len();
            ax.extend(forced);
            compose_closure(ax);
            changed |= ax.len() != before;
        }
        if !changed {
            return ann;
        }
    }
}

/// Which traces to consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// Two-way traces induced by the strategy and the promise.
    Plain,
    /// Downward traces that replace detours by annotation steps.
    Downward,
}

/// A configuration of a trace: a node and a state.
pub type Config = (NodeId, usize);

/// A lasso-shaped trace `prefix · cycle^ω`. `index` is the least index of
/// the steps of the cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoTrace {
    pub prefix: Vec<Config>,
    pub cycle: Vec<Config>,
    pub index: usize,
}

impl LassoTrace {
    pub fn accepting(&self) -> bool {
        self.index % 2 == 0
    }
}

/// Steps from a configuration, each with its index.
fn trace_steps(
    a: &Gapt2,
    tree: &LabeledForest<usize>,
    str: &NodeMap<StrategyLabel>,
    pro: &NodeMap<PromiseLabel>,
    ann: &NodeMap<AnnotationLabel>,
    kind: TraceKind,
    (x, q): &Config,
) -> Vec<(Config, usize)> {
    let (es, ep, ea) = (StrategyLabel::new(), PromiseLabel::new(), AnnotationLabel::new());
    let mut out = Vec::new();
    for &(p, d, q2) in label(str, x, &es) {
        if p != *q {
            continue;
        }
        if d.is_graded() {
            for y in tree.children(x) {
                if label(pro, &y, &ep).contains(&(p, q2)) {
                    out.push(((y, q2), a.acc.index(q2)));
                }
            }
        } else if kind == TraceKind::Plain {
            if let Some(y) = step(tree, x, d) {
                out.push(((y, q2), a.acc.index(q2)));
            }
        }
    }
    if kind == TraceKind::Downward {
        for &(p, i, q2) in label(ann, x, &ea) {
            if p == *q {
                out.push(((x.clone(), q2), i));
            }
        }
    }
    out
}

/// Enumerates lasso traces from `(root, q₀)` whose prefix and cycle have at
/// most `bound` steps in total. Every lasso closes at the first repeated
/// configuration.
pub fn lasso_traces(
    a: &Gapt2,
    tree: &LabeledForest<usize>,
    str: &NodeMap<StrategyLabel>,
    pro: &NodeMap<PromiseLabel>,
    ann: &NodeMap<AnnotationLabel>,
    kind: TraceKind,
    bound: usize,
) -> Vec<LassoTrace> {
    let Some(root) = tree.roots().into_iter().next() else { return Vec::new() };
    let mut out = Vec::new();
    let mut path: Vec<Config> = vec![(root, a.init)];
    let mut indices: Vec<usize> = Vec::new();
    fn go(
        ctx: (&Gapt2, &LabeledForest<usize>, &NodeMap<StrategyLabel>, &NodeMap<PromiseLabel>, &NodeMap<AnnotationLabel>),
        kind: TraceKind,
        bound: usize,
        path: &mut Vec<Config>,
        indices: &mut Vec<usize>,
        out: &mut Vec<LassoTrace>,
    ) {
        if indices.len() >= bound {
            return;
        }
        let last = path.last().expect("nonempty path").clone();
        for (next, i) in trace_steps(ctx.0, ctx.1, ctx.2, ctx.3, ctx.4, kind, &last) {
            if let Some(pos) = path.iter().position(|c| *c == next) {
                let index = indices[pos..].iter().copied().chain(std::iter::once(i)).min().expect("nonempty");
                out.push(LassoTrace { prefix: path[..pos].to_vec(), cycle: path[pos..].to_vec(), index });
            } else {
                path.push(next);
                indices.push(i);
                go(ctx, kind, bound, path, indices, out);
                path.pop();
                indices.pop();
            }
        }
    }
    go((a, tree, str, pro, ann), kind, bound, &mut path, &mut indices, &mut out);
    out
}

/// True iff every infinite trace of the given kind from `(root, q₀)` is
/// accepting. Decided on the finite configuration graph: a rejecting trace
/// exists iff some reachable step of odd index `i` lies on a cycle whose
/// steps all have index at least `i`.
pub fn traces_accepting(
    a: &Gapt2,
    tree: &LabeledForest<usize>,
    str: &NodeMap<StrategyLabel>,
    pro: &NodeMap<PromiseLabel>,
    ann: &NodeMap<AnnotationLabel>,
    kind: TraceKind,
) -> bool {
    let Some(root) = tree.roots().into_iter().next() else { return true };
    let start: Config = (root, a.init);
    let mut ids: HashMap<Config, usize> = HashMap::new();
    let mut configs = vec![start.clone()];
    ids.insert(start, 0);
    let mut edges: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut i = 0;
    while i < configs.len() {
        let mut out = Vec::new();
        for (next, idx) in trace_steps(a, tree, str, pro, ann, kind, &configs[i]) {
            let id = *ids.entry(next.clone()).or_insert_with(|| {
                configs.push(next);
                configs.len() - 1
            });
            out.push((id, idx));
        }
        edges.push(out);
        i += 1;
    }
    for (u, es) in edges.iter().enumerate() {
        for &(v, idx) in es {
            if idx % 2 == 1 && reaches(&edges, v, u, idx) {
                return false;
            }
        }
    }
    true
}

/// Is `to` reachable from `from` using steps of index at least `min`?
fn reaches(edges: &[Vec<(usize, usize)>], from: usize, to: usize, min: usize) -> bool {
    let mut seen = HashSet::new();
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        if seen.insert(u) {
            stack.extend(edges[u].iter().filter(|e| e.1 >= min).map(|e| e.0));
        }
    }
    false
}

/// Per-pair entry of the compact strategy representation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompactEntry {
    pub eps: bool,
    pub up: bool,
    /// Least `n` with `(q, [n], q′)` chosen.
    pub min_all_but: Option<u32>,
    /// Greatest `n` with `(q, ⟨n⟩, q′)` chosen.
    pub max_at_least: Option<u32>,
}

/// A strategy label stored with at most four tuples per pair of states: a
/// `[n]` move subsumes `[m]` for `m ≥ n` and `⟨n⟩` subsumes `⟨m⟩` for
/// `m ≤ n`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompactStrategy(pub BTreeMap<(usize, usize), CompactEntry>);

impl CompactStrategy {
    pub fn from_label(s: &StrategyLabel) -> Self {
        let mut m: BTreeMap<(usize, usize), CompactEntry> = BTreeMap::new();
        for &(q, d, q2) in s {
            let e = m.entry((q, q2)).or_default();
            match d {
                Direction::Here => e.eps = true,
                Direction::Up => e.up = true,
                Direction::AllBut(n) => e.min_all_but = Some(e.min_all_but.map_or(n, |m| m.min(n))),
                Direction::AtLeast(n) => e.max_at_least = Some(e.max_at_least.map_or(n, |m| m.max(n))),
                Direction::SomeRoot | Direction::AllRoots => {}
            }
        }
        CompactStrategy(m)
    }

    /// The tuples kept by the representation.
    pub fn to_label(&self) -> StrategyLabel {
        let mut s = StrategyLabel::new();
        for (&(q, q2), e) in &self.0 {
            if e.eps {
                s.insert((q, Direction::Here, q2));
            }
            if e.up {
                s.insert((q, Direction::Up, q2));
            }
            if let Some(n) = e.min_all_but {
                s.insert((q, Direction::AllBut(n), q2));
            }
            if let Some(n) = e.max_at_least {
                s.insert((q, Direction::AtLeast(n), q2));
            }
        }
        s
    }

    /// Largest grade stored.
    pub fn max_grade(&self) -> u32 {
        self.0.values().flat_map(|e| e.min_all_but.into_iter().chain(e.max_at_least)).max().unwrap_or(0)
    }
}

/// The worked strategy example: a four-state automaton over `{a, b, c}`, a
/// five-node input fragment and its strategy, promise and annotation labels.
#[derive(Debug, Clone)]
pub struct WorkedExample {
    pub automaton: Gapt2,
    pub tree: LabeledForest<usize>,
    pub str: NodeMap<StrategyLabel>,
    pub pro: NodeMap<PromiseLabel>,
    pub ann: NodeMap<AnnotationLabel>,
}

/// Builds the worked example. Transitions that the example leaves open are
/// `true`. Indexes are `q₁ ↦ 1` and `2` for the other states, so the detour
/// `(q₀, j, q₂)` at node 1 has `j = 1`.
pub fn worked_example() -> WorkedExample {
    use crate::automata::{ParityCondition, PlusFormula};
    let (a, b) = (0usize, 1usize);
    let (q0, q1, q2, q3) = (0usize, 1usize, 2usize, 3usize);
    let m = |d, q| PlusFormula::atom(Move::new(d, q));
    let mut delta = vec![vec![PlusFormula::True; 3]; 4];
    for q in [q0, q2] {
        delta[q][a] = PlusFormula::or(m(Direction::AtLeast(0), q1), m(Direction::AtLeast(0), q3));
    }
    delta[q1][b] = PlusFormula::or(
        PlusFormula::and(m(Direction::Up, q2), m(Direction::AtLeast(1), q3)),
        m(Direction::AllBut(1), q1),
    );
    let automaton = Gapt2 {
        alphabet: vec!["a".into(), "b".into(), "c".into()],
        b: 1,
        states: vec!["q0".into(), "q1".into(), "q2".into(), "q3".into()],
        delta,
        init: q0,
        acc: ParityCondition::with_k(vec![2, 1, 2, 2], 2),
    };
    let tree = LabeledForest {
        labels: [(vec![1], a), (vec![1, 1], b), (vec![1, 2], a), (vec![1, 1, 1], b), (vec![1, 1, 2], a)]
            .into_iter()
            .collect(),
    };
    let str: NodeMap<StrategyLabel> = [
        (vec![1], [(q0, Direction::AtLeast(0), q1), (q2, Direction::AtLeast(0), q3)].into_iter().collect()),
        (vec![1, 1], [(q1, Direction::Up, q2), (q1, Direction::AtLeast(1), q3)].into_iter().collect()),
    ]
    .into_iter()
    .collect();
    let pro: NodeMap<PromiseLabel> = [
        (vec![1, 1], [(q0, q1)].into_iter().collect()),
        (vec![1, 2], [(q2, q3)].into_iter().collect()),
        (vec![1, 1, 1], [(q1, q3)].into_iter().collect()),
        (vec![1, 1, 2], [(q1, q3)].into_iter().collect()),
    ]
    .into_iter()
    .collect();
    let ann: NodeMap<AnnotationLabel> = [(vec![1], [(q0, 1, q2)].into_iter().collect())].into_iter().collect();
    WorkedExample { automaton, tree, str, pro, ann }
}

impl WorkedExample {
    /// Results of the three validators.
    pub fn verdicts(&self) -> (bool, bool, bool) {
        let a = &self.automaton;
        (
            check_strategy(a, &self.tree, &self.str),
            check_promise(a, &self.tree, &self.str, &self.pro),
            check_annotation(a, &self.tree, &self.str, &self.pro, &self.ann),
        )
    }

    /// Five single-tuple deletions, each breaking one witness condition.
    pub fn perturbations(&self) -> Vec<(&'static str, WorkedExample)> {
        let (q0, q1, q2, q3) = (0usize, 1usize, 2usize, 3usize);
        let mut out = Vec::new();
        let mut f = self.clone();
        f.str.get_mut(&vec![1, 1]).unwrap().remove(&(q1, Direction::AtLeast(1), q3));
        out.push(("drop (q1,<1>,q3) from str(11)", f));
        let mut f = self.clone();
        f.str.get_mut(&vec![1]).unwrap().remove(&(q2, Direction::AtLeast(0), q3));
        out.push(("drop (q2,<0>,q3) from str(1)", f));
        let mut f = self.clone();
        f.pro.get_mut(&vec![1, 1]).unwrap().remove(&(q0, q1));
        out.push(("drop (q0,q1) from pro(11)", f));
        let mut f = self.clone();
        f.pro.get_mut(&vec![1, 1, 2]).unwrap().remove(&(q1, q3));
        out.push(("drop (q1,q3) from pro(112)", f));
        let mut f = self.clone();
        f.ann.get_mut(&vec![1]).unwrap().remove(&(q0, 1, q2));
        out.push(("drop (q0,1,q2) from ann(1)", f));
        out
    }
}
