//! Parity and Büchi automata on infinite words.
//!
//! Letters are `0..num_letters`. Words are given as lassos `u · v^ω`.
//! Co-determinization goes NPW → NBW → DPW (Safra trees in Piterman's
//! compact form) → complement by shifting every priority by one.

use crate::automata::ParityCondition;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::hash::Hash;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("the periodic part of a lasso must be nonempty")]
    EmptyCycle,
    #[error("letter {0} outside the alphabet")]
    BadLetter(usize),
    #[error("state budget of {0} exceeded")]
    Budget(usize),
}

/// Nondeterministic parity word automaton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Npw {
    pub num_letters: usize,
    /// `delta[s][a]` is the set of successors of `s` on letter `a`.
    pub delta: Vec<Vec<BTreeSet<usize>>>,
    pub init: usize,
    pub acc: ParityCondition,
}

/// Nondeterministic Büchi word automaton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nbw {
    pub num_letters: usize,
    pub delta: Vec<Vec<BTreeSet<usize>>>,
    pub init: usize,
    pub accepting: BTreeSet<usize>,
}

/// Deterministic parity word automaton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dpw {
    pub num_letters: usize,
    pub delta: Vec<Vec<usize>>,
    pub init: usize,
    pub acc: ParityCondition,
}

/// Deterministic Büchi word automaton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dbw {
    pub num_letters: usize,
    pub delta: Vec<Vec<usize>>,
    pub init: usize,
    pub accepting: BTreeSet<usize>,
}

impl Npw {
    pub fn num_states(&self) -> usize {
        self.delta.len()
    }
}

impl Dpw {
    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    /// True when every state has exactly one successor per letter.
    pub fn is_total(&self) -> bool {
        self.delta.iter().all(|row| row.len() == self.num_letters && row.iter().all(|&t| t < self.delta.len()))
    }
}

fn check_lasso(num_letters: usize, u: &[usize], v: &[usize]) -> Result<(), WordError> {
    if v.is_empty() {
        return Err(WordError::EmptyCycle);
    }
    match u.iter().chain(v).find(|&&a| a >= num_letters) {
        Some(&a) => Err(WordError::BadLetter(a)),
        None => Ok(()),
    }
}

/// Position successor in the lasso `u · v^ω`, with positions `0..|u|+|v|`.
fn next_pos(u: &[usize], v: &[usize], i: usize) -> usize {
    if i + 1 == u.len() + v.len() {
        u.len()
    } else {
        i + 1
    }
}

fn letter_at(u: &[usize], v: &[usize], i: usize) -> usize {
    if i < u.len() {
        u[i]
    } else {
        v[i - u.len()]
    }
}

/// Decides whether some run of the NPW on `u · v^ω` is accepting.
pub fn npw_membership(a: &Npw, u: &[usize], v: &[usize]) -> Result<bool, WordError> {
    check_lasso(a.num_letters, u, v)?;
    Ok(has_even_cycle(
        (a.init, 0usize),
        |&(s, i)| {
            let l = letter_at(u, v, i);
            let j = next_pos(u, v, i);
            a.delta[s][l].iter().map(|&t| (t, j)).collect()
        },
        |&(s, _)| a.acc.index(s),
    ))
}

/// Decides whether the unique run of the DPW on `u · v^ω` is accepting.
pub fn dpw_membership(a: &Dpw, u: &[usize], v: &[usize]) -> Result<bool, WordError> {
    check_lasso(a.num_letters, u, v)?;
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut trace = Vec::new();
    let (mut s, mut i) = (a.init, 0);
    loop {
        if let Some(&start) = seen.get(&(s, i)) {
            let min = trace[start..].iter().map(|&q| a.acc.index(q)).min().expect("nonempty cycle");
            return Ok(min % 2 == 0);
        }
        seen.insert((s, i), trace.len());
        trace.push(s);
        s = a.delta[s][letter_at(u, v, i)];
        i = next_pos(u, v, i);
    }
}

/// Parity to Büchi: a state `(s, None)` waits, a state `(s, Some(i))` has
/// guessed that `i` (even) is the least index seen infinitely often and
/// never again visits a smaller index. Accepting states are those whose
/// index equals the guess.
pub fn npw_to_nbw(a: &Npw) -> Nbw {
    let evens: Vec<usize> = (0..=a.acc.k()).filter(|i| i % 2 == 0).collect();
    let width = evens.len() + 1;
    let enc = |s: usize, g: usize| s * width + g;
    let n = a.num_states() * width;
    let mut delta = vec![vec![BTreeSet::new(); a.num_letters]; n];
    let mut accepting = BTreeSet::new();
    for s in 0..a.num_states() {
        for (gi, &i) in evens.iter().enumerate() {
            if a.acc.index(s) == i {
                accepting.insert(enc(s, gi + 1));
            }
        }
        for l in 0..a.num_letters {
            for &t in &a.delta[s][l] {
                delta[enc(s, 0)][l].insert(enc(t, 0));
                for (gi, &i) in evens.iter().enumerate() {
                    if a.acc.index(t) >= i {
                        delta[enc(s, 0)][l].insert(enc(t, gi + 1));
                        if a.acc.index(s) >= i {
                            delta[enc(s, gi + 1)][l].insert(enc(t, gi + 1));
                        }
                    }
                }
            }
        }
    }
    Nbw { num_letters: a.num_letters, delta, init: enc(a.init, 0), accepting }
}

/// A node of a compact Safra tree. Older siblings come first and every
/// node's name is smaller than the names of its descendants and younger
/// siblings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SafraNode {
    pub name: usize,
    pub label: BTreeSet<usize>,
    pub children: Vec<SafraNode>,
}

/// A compact Safra tree; `None` is the empty tree (a rejecting sink).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SafraTree(pub Option<SafraNode>);

impl SafraTree {
    pub fn initial(states: BTreeSet<usize>) -> Self {
        if states.is_empty() {
            SafraTree(None)
        } else {
            SafraTree(Some(SafraNode { name: 1, label: states, children: Vec::new() }))
        }
    }

    /// Every state in some label of the tree.
    pub fn states(&self) -> BTreeSet<usize> {
        self.0.as_ref().map(|r| r.label.clone()).unwrap_or_default()
    }

    /// One determinization step. `post` maps a set of NBW states to its
    /// successors on the current letter and `accepting` tells the accepting
    /// states. `bound` must be at least the number of NBW states; it fixes
    /// the neutral priority `2·bound + 1`. Returns the next tree and the
    /// priority of the step (least even priority seen infinitely often is
    /// accepting).
    pub fn step(
        &self,
        post: &mut impl FnMut(&BTreeSet<usize>) -> BTreeSet<usize>,
        accepting: &impl Fn(usize) -> bool,
        bound: usize,
    ) -> (SafraTree, usize) {
        let Some(root) = &self.0 else {
            return (SafraTree(None), 1);
        };
        let mut root = root.clone();
        let mut next_name = max_name(&root) + 1;
        spawn(&mut root, accepting, &mut next_name);
        advance(&mut root, post);
        let mut removed = usize::MAX;
        horizontal_merge(&mut root, &mut BTreeSet::new());
        if root.label.is_empty() {
            return (SafraTree(None), 1);
        }
        prune_empty(&mut root, &mut removed);
        let mut marked = usize::MAX;
        vertical_merge(&mut root, &mut marked);
        let priority = if marked < removed {
            2 * marked
        } else if removed != usize::MAX {
            2 * removed - 1
        } else {
            2 * bound + 1
        };
        let mut names = Vec::new();
        collect_names(&root, &mut names);
        names.sort_unstable();
        let rename: HashMap<usize, usize> = names.iter().enumerate().map(|(i, &n)| (n, i + 1)).collect();
        apply_rename(&mut root, &rename);
        (SafraTree(Some(root)), priority)
    }
}

fn max_name(n: &SafraNode) -> usize {
    n.children.iter().map(max_name).max().unwrap_or(0).max(n.name)
}

fn spawn(n: &mut SafraNode, accepting: &impl Fn(usize) -> bool, next: &mut usize) {
    for c in &mut n.children {
        spawn(c, accepting, next);
    }
    let acc: BTreeSet<usize> = n.label.iter().copied().filter(|&q| accepting(q)).collect();
    if !acc.is_empty() {
        n.children.push(SafraNode { name: *next, label: acc, children: Vec::new() });
        *next += 1;
    }
}

fn advance(n: &mut SafraNode, post: &mut impl FnMut(&BTreeSet<usize>) -> BTreeSet<usize>) {
    n.label = post(&n.label);
    for c in &mut n.children {
        advance(c, post);
    }
}

/// Removes from every node the states already claimed by an older sibling
/// (or by an older sibling of an ancestor).
fn horizontal_merge(n: &mut SafraNode, claimed: &mut BTreeSet<usize>) {
    n.label.retain(|q| !claimed.contains(q));
    let mut local = BTreeSet::new();
    for c in &mut n.children {
        c.label.retain(|q| n.label.contains(q));
        let mut inner = claimed.clone();
        inner.extend(local.iter().copied());
        horizontal_merge(c, &mut inner);
        local.extend(c.label.iter().copied());
    }
}

fn prune_empty(n: &mut SafraNode, removed: &mut usize) {
    let mut kept = Vec::new();
    for mut c in std::mem::take(&mut n.children) {
        if c.label.is_empty() {
            let mut names = Vec::new();
            collect_names(&c, &mut names);
            *removed = (*removed).min(names.into_iter().min().expect("node has a name"));
        } else {
            prune_empty(&mut c, removed);
            kept.push(c);
        }
    }
    n.children = kept;
}

fn vertical_merge(n: &mut SafraNode, marked: &mut usize) {
    let union: BTreeSet<usize> = n.children.iter().flat_map(|c| c.label.iter().copied()).collect();
    if !n.children.is_empty() && union == n.label {
        n.children.clear();
        *marked = (*marked).min(n.name);
    } else {
        for c in &mut n.children {
            vertical_merge(c, marked);
        }
    }
}

fn collect_names(n: &SafraNode, out: &mut Vec<usize>) {
    out.push(n.name);
    for c in &n.children {
        collect_names(c, out);
    }
}

fn apply_rename(n: &mut SafraNode, rename: &HashMap<usize, usize>) {
    n.name = rename[&n.name];
    for c in &mut n.children {
        apply_rename(c, rename);
    }
}

/// Determinizes an NBW into a DPW recognizing the same language.
///
/// Transitions carry the Safra priority; the DPW state is the pair of the
/// tree and the priority of the step that produced it.
pub fn determinize(a: &Nbw, max_states: usize) -> Result<Dpw, WordError> {
    let bound = a.delta.len().max(1);
    let init = (SafraTree::initial([a.init].into_iter().collect()), 2 * bound + 1);
    let mut ids: HashMap<(SafraTree, usize), usize> = HashMap::new();
    let mut states = vec![init.clone()];
    ids.insert(init, 0);
    let mut delta: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (tree, _) = states[i].clone();
        let mut row = Vec::with_capacity(a.num_letters);
        for l in 0..a.num_letters {
            let mut post = |s: &BTreeSet<usize>| s.iter().flat_map(|&q| a.delta[q][l].iter().copied()).collect();
            let key = tree.step(&mut post, &|q| a.accepting.contains(&q), bound);
            let id = match ids.get(&key) {
                Some(&id) => id,
                None => {
                    if states.len() >= max_states {
                        return Err(WordError::Budget(max_states));
                    }
                    let id = states.len();
                    ids.insert(key.clone(), id);
                    states.push(key);
                    id
                }
            };
            row.push(id);
        }
        delta.push(row);
        i += 1;
    }
    let index = states.iter().map(|(_, p)| *p).collect();
    Ok(Dpw { num_letters: a.num_letters, delta, init: 0, acc: ParityCondition::with_k(index, 2 * bound + 1) })
}

/// Complements a DPW by shifting every priority up by one.
pub fn complement_dpw(a: &Dpw) -> Dpw {
    let index: Vec<usize> = a.acc.indices().iter().map(|p| p + 1).collect();
    let k = a.acc.k() + 1;
    Dpw { acc: ParityCondition::with_k(index, k), ..a.clone() }
}

/// A deterministic parity automaton for the complement of `L(a)`.
pub fn codeterminize(a: &Npw, max_states: usize) -> Result<Dpw, WordError> {
    Ok(complement_dpw(&determinize(&npw_to_nbw(a), max_states)?))
}

/// True iff the DBW accepts no word: no reachable cycle visits an accepting
/// state.
pub fn dbw_emptiness(a: &Dbw) -> bool {
    !has_even_cycle(
        a.init,
        |&s| (0..a.num_letters).map(|l| a.delta[s][l]).collect(),
        |s| if a.accepting.contains(s) { 0 } else { 1 },
    )
}

/// One-player min-even parity check: is there a cycle, reachable from
/// `start`, whose least priority is even?
pub fn has_even_cycle<V: Clone + Eq + Hash>(
    start: V,
    mut succ: impl FnMut(&V) -> Vec<V>,
    mut priority: impl FnMut(&V) -> usize,
) -> bool {
    let mut ids: HashMap<V, usize> = HashMap::new();
    let mut verts = vec![start.clone()];
    ids.insert(start, 0);
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let mut row = Vec::new();
        for t in succ(&verts[i].clone()) {
            let id = *ids.entry(t.clone()).or_insert_with(|| {
                verts.push(t);
                queue.push_back(verts.len() - 1);
                verts.len() - 1
            });
            row.push(id);
        }
        while adj.len() <= i {
            adj.push(Vec::new());
        }
        adj[i] = row;
    }
    adj.resize(verts.len(), Vec::new());
    let pri: Vec<usize> = verts.iter().map(&mut priority).collect();
    even_cycle_in_graph(&adj, &pri)
}

/// [`has_even_cycle`] on an explicit graph where every vertex counts as
/// reachable.
pub fn even_cycle_in_graph(adj: &[Vec<usize>], pri: &[usize]) -> bool {
    let evens: BTreeSet<usize> = pri.iter().copied().filter(|p| p % 2 == 0).collect();
    for p in evens {
        let allowed: Vec<bool> = pri.iter().map(|&q| q >= p).collect();
        for comp in sccs(adj, &allowed) {
            let nontrivial = comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
            if nontrivial && comp.iter().any(|&v| pri[v] == p) {
                return true;
            }
        }
    }
    false
}

/// Strongly connected components of the subgraph induced by `allowed`
/// (iterative Tarjan).
pub fn sccs(adj: &[Vec<usize>], allowed: &[bool]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for s in 0..n {
        if !allowed[s] || index[s] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(s, 0)];
        index[s] = counter;
        low[s] = counter;
        counter += 1;
        stack.push(s);
        on_stack[s] = true;
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            if *ei < adj[v].len() {
                let w = adj[v][*ei];
                *ei += 1;
                if !allowed[w] {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("stack holds the component");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn npw(delta: Vec<Vec<Vec<usize>>>, index: Vec<usize>) -> Npw {
        Npw {
            num_letters: delta[0].len(),
            delta: delta.into_iter().map(|r| r.into_iter().map(|s| s.into_iter().collect()).collect()).collect(),
            init: 0,
            acc: ParityCondition::from_indices(index),
        }
    }

    #[test]
    fn membership_examples() {
        let all = npw(vec![vec![vec![0], vec![0]]], vec![2]);
        assert!(npw_membership(&all, &[], &[0, 1]).unwrap());
        let none = npw(vec![vec![vec![0], vec![0]]], vec![1]);
        assert!(!npw_membership(&none, &[1], &[0]).unwrap());
        assert_eq!(npw_membership(&none, &[1], &[]), Err(WordError::EmptyCycle));
        // infinitely many b's: state 1 (index 2) is entered on b, state 0 (index 3) on a.
        let inf_b = npw(vec![vec![vec![0], vec![1]], vec![vec![0], vec![1]]], vec![3, 2]);
        assert!(npw_membership(&inf_b, &[0, 0], &[0, 1]).unwrap());
        assert!(!npw_membership(&inf_b, &[1, 1], &[0]).unwrap());
    }

    #[test]
    fn complement_of_empty_and_universal() {
        let empty = npw(vec![vec![vec![], vec![]]], vec![2]);
        let universal = npw(vec![vec![vec![0], vec![0]]], vec![2]);
        let ce = codeterminize(&empty, 1000).unwrap();
        let cu = codeterminize(&universal, 1000).unwrap();
        assert!(ce.is_total() && cu.is_total());
        for (u, v) in [(vec![], vec![0]), (vec![1], vec![0, 1]), (vec![0, 0], vec![1])] {
            assert!(dpw_membership(&ce, &u, &v).unwrap());
            assert!(!dpw_membership(&cu, &u, &v).unwrap());
        }
    }

    #[test]
    fn finitely_many_b_complement() {
        // NPW for "finitely many b": guess the point after which only a occurs.
        let fin_b = npw(vec![vec![vec![0, 1], vec![0]], vec![vec![1], vec![]]], vec![1, 2]);
        let c = codeterminize(&fin_b, 1000).unwrap();
        assert!(!dpw_membership(&c, &[1, 1], &[0]).unwrap());
        assert!(dpw_membership(&c, &[], &[0, 1]).unwrap());
    }

    #[test]
    fn dbw_examples() {
        let loop_acc = Dbw { num_letters: 1, delta: vec![vec![0]], init: 0, accepting: [0].into() };
        assert!(!dbw_emptiness(&loop_acc));
        let unreachable = Dbw { num_letters: 1, delta: vec![vec![0], vec![1]], init: 0, accepting: [1].into() };
        assert!(dbw_emptiness(&unreachable));
    }

    #[test]
    fn scc_basic() {
        let adj = vec![vec![1], vec![0, 2], vec![2], vec![]];
        let mut comps: Vec<Vec<usize>> = sccs(&adj, &[true; 4]).into_iter().map(|mut c| {
            c.sort();
            c
        }).collect();
        comps.sort();
        assert_eq!(comps, vec![vec![0, 1], vec![2], vec![3]]);
    }

    /// All lassos `(u, v)` over two letters with `|u| ≤ 3` and `1 ≤ |v| ≤ 3`.
    pub(crate) fn small_lassos() -> Vec<(Vec<usize>, Vec<usize>)> {
        let words = |min: usize| -> Vec<Vec<usize>> {
            let mut out = Vec::new();
            for len in min..=3 {
                for m in 0..(1usize << len) {
                    out.push((0..len).map(|i| (m >> i) & 1).collect());
                }
            }
            out
        };
        let mut out = Vec::new();
        for u in words(0) {
            for v in words(1) {
                out.push((u.clone(), v));
            }
        }
        out
    }

    #[test]
    fn codeterminize_random_exhaustive() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let lassos = small_lassos();
        for _ in 0..200 {
            let n = rng.gen_range(1..=3);
            let delta = (0..n)
                .map(|_| (0..2).map(|_| (0..n).filter(|_| rng.gen_bool(0.45)).collect()).collect())
                .collect();
            let acc = ParityCondition::from_indices((0..n).map(|_| rng.gen_range(0..=4)).collect());
            let a = Npw { num_letters: 2, delta, init: 0, acc };
            let c = codeterminize(&a, 100_000).unwrap();
            assert!(c.is_total());
            for (u, v) in &lassos {
                assert_ne!(npw_membership(&a, u, v).unwrap(), dpw_membership(&c, u, v).unwrap(), "{:?} {:?} {:?}", a, u, v);
            }
        }
    }
}
