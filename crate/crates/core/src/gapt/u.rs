//! The word automaton `U` that looks for rejecting downward traces.
//!
//! `U` reads a branch of a tree whose letters are extended by strategy,
//! promise and annotation labels. A state `⟨q, q_prev, j⟩` at a node says
//! that the trace entered the node in state `q` from `q_prev` at the parent
//! and that the last step had index `j`. `U` accepts exactly the branches
//! that carry a rejecting downward trace, so the witness is good iff `U`
//! accepts no branch.

use super::witness::{AnnotationLabel, PromiseLabel, StrategyLabel};
use super::Gapt2;
use crate::automata::ParityCondition;
use crate::words::Npw;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// A state of `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UState {
    Trace { q: usize, prev: usize, j: usize },
    /// Accepting sink: a rejecting trace stays at one node forever.
    Acc,
}

/// A letter of the extended alphabet read by `U`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExtLetter {
    pub letter: usize,
    pub str: StrategyLabel,
    pub pro: PromiseLabel,
    pub ann: AnnotationLabel,
}

/// The range of indexes of `U` states: the indexes of `a`, starting at 0 if
/// some state has index 0 and at 1 otherwise.
pub fn index_range(a: &Gapt2) -> std::ops::RangeInclusive<usize> {
    let lo = if a.acc.indices().contains(&0) { 0 } else { 1 };
    lo..=a.acc.k()
}

/// `|Q|²·|I| + 1` where `I` is [`index_range`].
pub fn u_state_count(a: &Gapt2) -> usize {
    let n = a.num_states();
    n * n * index_range(a).count() + 1
}

/// The initial state `⟨q₀, q₀, index(q₀)⟩`.
pub fn u_init(a: &Gapt2) -> UState {
    UState::Trace { q: a.init, prev: a.init, j: a.acc.index(a.init) }
}

/// Successors of `s` on a node labeled with `str`, `pro` and `ann`.
///
/// A trace whose last step is not promised dies. A trace that can reach,
/// through annotation entries, a state with an odd self-loop moves to the
/// sink. Otherwise it continues to the children through a graded move,
/// possibly after one annotation detour.
pub fn u_step(
    a: &Gapt2,
    str: &StrategyLabel,
    pro: &PromiseLabel,
    ann: &AnnotationLabel,
    s: UState,
) -> BTreeSet<UState> {
    let mut out = BTreeSet::new();
    let UState::Trace { q, prev, .. } = s else {
        out.insert(UState::Acc);
        return out;
    };
    if !pro.contains(&(prev, q)) {
        return out;
    }
    let odd_loop = |p: usize| ann.range((p, 0, 0)..=(p, usize::MAX, usize::MAX)).any(|&(_, c, r)| r == p && c % 2 == 1);
    if odd_loop(q) || ann.range((q, 0, 0)..=(q, usize::MAX, usize::MAX)).any(|&(_, _, r)| odd_loop(r)) {
        out.insert(UState::Acc);
        return out;
    }
    let idx = |p: usize| a.acc.index(p);
    for &(p, c, q1) in str {
        if p == q && c.is_graded() {
            out.insert(UState::Trace { q: q1, prev: q, j: idx(q1) });
        }
    }
    for &(p, d, r) in ann.range((q, 0, 0)..=(q, usize::MAX, usize::MAX)) {
        debug_assert_eq!(p, q);
        for &(p2, c, q1) in str {
            if p2 == r && c.is_graded() {
                out.insert(UState::Trace { q: q1, prev: r, j: d.min(idx(q1)) });
            }
        }
    }
    out
}

/// Builds `U` over the given extended letters. State `i·n·|I| + p·|I| +
/// (j - lo)` is `⟨q_i, q_p, j⟩` and the last state is the sink. The index of
/// a trace state is `j + 1` and the sink has index 0, so `U` accepts iff the
/// least `j` seen infinitely often is odd or the sink is reached.
pub fn build_u(a: &Gapt2, letters: &[ExtLetter]) -> Npw {
    let n = a.num_states();
    let range = index_range(a);
    let lo = *range.start();
    let width = range.count();
    let total = n * n * width + 1;
    let acc_id = total - 1;
    let id = |s: UState| match s {
        UState::Trace { q, prev, j } => (q * n + prev) * width + (j - lo),
        UState::Acc => acc_id,
    };
    let mut index = vec![0usize; total];
    let mut delta = vec![vec![BTreeSet::new(); letters.len()]; total];
    for q in 0..n {
        for prev in 0..n {
            for j in lo..lo + width {
                let s = UState::Trace { q, prev, j };
                index[id(s)] = j + 1;
                for (l, x) in letters.iter().enumerate() {
                    delta[id(s)][l] = u_step(a, &x.str, &x.pro, &x.ann, s).into_iter().map(id).collect();
                }
            }
        }
    }
    for l in 0..letters.len() {
        delta[acc_id][l].insert(acc_id);
    }
    Npw {
        num_letters: letters.len(),
        delta,
        init: id(u_init(a)),
        acc: ParityCondition::from_indices(index),
    }
}

/// Interns `U` states together with a Büchi guess, giving the NBW used for
/// determinization. The NBW state `(s, 0)` waits; `(s, i)` for odd `i` has
/// guessed that `i` is the least index seen infinitely often. It accepts at
/// `j = i` and dies when `j < i`.
#[derive(Debug, Default)]
pub struct UBuchi {
    ids: HashMap<(UState, usize), usize>,
    states: Vec<(UState, usize)>,
    odd: Vec<usize>,
}

impl UBuchi {
    pub fn new(a: &Gapt2) -> Self {
        UBuchi { odd: index_range(a).filter(|j| j % 2 == 1).collect(), ..Default::default() }
    }

    /// Upper bound on the number of NBW states.
    pub fn bound(a: &Gapt2) -> usize {
        let odd = index_range(a).filter(|j| j % 2 == 1).count();
        (u_state_count(a) - 1) * (1 + odd)
    }

    pub fn intern(&mut self, s: UState, g: usize) -> usize {
        *self.ids.entry((s, g)).or_insert_with(|| {
            self.states.push((s, g));
            self.states.len() - 1
        })
    }

    pub fn state(&self, id: usize) -> (UState, usize) {
        self.states[id]
    }

    pub fn accepting(&self, id: usize) -> bool {
        matches!(self.states[id], (UState::Trace { j, .. }, g) if g != 0 && j == g)
    }

    /// The NBW states for a `U` state entered without a guess.
    pub fn entries(&mut self, s: UState) -> Vec<usize> {
        let UState::Trace { j, .. } = s else { return Vec::new() };
        let mut out = vec![self.intern(s, 0)];
        for i in self.odd.clone() {
            if j >= i {
                out.push(self.intern(s, i));
            }
        }
        out
    }

    /// Successors of a set of NBW states on one node. Returns `None` if some
    /// run reaches the sink.
    pub fn post(
        &mut self,
        a: &Gapt2,
        str: &StrategyLabel,
        pro: &PromiseLabel,
        ann: &AnnotationLabel,
        set: &BTreeSet<usize>,
        cache: &mut BTreeMap<UState, BTreeSet<UState>>,
    ) -> Option<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for &id in set {
            let (s, g) = self.states[id];
            let succ = cache.entry(s).or_insert_with(|| u_step(a, str, pro, ann, s)).clone();
            for t in succ {
                let UState::Trace { j, .. } = t else { return None };
                if g == 0 {
                    out.extend(self.entries(t));
                } else if j >= g {
                    out.insert(self.intern(t, g));
                }
            }
        }
        Some(out)
    }
}
