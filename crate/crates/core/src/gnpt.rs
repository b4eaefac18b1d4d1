//! Counting constraints and graded nondeterministic parity tree automata.
//!
//! A GNPT state is a set of variables from `Y = 0..num_vars`. A transition
//! is a counting constraint: a list of pairs `(θ, ξ)` where `θ` is a Boolean
//! formula over `Y` and `ξ` a b-bound. The word formed by the states of the
//! children must contain more than `n` (for `>n`) or at most `n` (for `≤n`)
//! states satisfying `θ`.

use crate::automata::{LabeledForest, NodeId, ParityCondition};
use crate::games::{apw_emptiness, ApwOracle, GameError};
use crate::words::{dbw_emptiness, Dbw};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GnptError {
    #[error("automaton has {0} states, more than the explicit pipeline handles")]
    TooLarge(usize),
    #[error("expected flavor {expected:?}, found {found:?}")]
    Flavor { expected: Flavor, found: Flavor },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Comparison of a b-bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cmp {
    /// `>n`: more than `n`.
    Gt,
    /// `≤n`: at most `n`.
    Le,
}

/// A b-bound `(>, n)` or `(≤, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BBound {
    pub cmp: Cmp,
    pub n: u32,
}

impl BBound {
    pub fn gt(n: u32) -> Self {
        BBound { cmp: Cmp::Gt, n }
    }

    pub fn le(n: u32) -> Self {
        BBound { cmp: Cmp::Le, n }
    }

    /// Does a count satisfy the bound?
    pub fn holds(&self, count: usize) -> bool {
        match self.cmp {
            Cmp::Gt => count > self.n as usize,
            Cmp::Le => count <= self.n as usize,
        }
    }
}

impl fmt::Display for BBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cmp {
            Cmp::Gt => write!(f, ">{}", self.n),
            Cmp::Le => write!(f, "<={}", self.n),
        }
    }
}

/// A Boolean formula over variables `0..`, negation allowed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoolFormula {
    True,
    False,
    Var(usize),
    Not(Box<BoolFormula>),
    And(Box<BoolFormula>, Box<BoolFormula>),
    Or(Box<BoolFormula>, Box<BoolFormula>),
}

impl BoolFormula {
    pub fn var(v: usize) -> Self {
        BoolFormula::Var(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: BoolFormula) -> Self {
        match f {
            BoolFormula::True => BoolFormula::False,
            BoolFormula::False => BoolFormula::True,
            BoolFormula::Not(g) => *g,
            g => BoolFormula::Not(Box::new(g)),
        }
    }

    pub fn and(l: BoolFormula, r: BoolFormula) -> Self {
        match (l, r) {
            (BoolFormula::False, _) | (_, BoolFormula::False) => BoolFormula::False,
            (BoolFormula::True, x) | (x, BoolFormula::True) => x,
            (l, r) => BoolFormula::And(Box::new(l), Box::new(r)),
        }
    }

    pub fn or(l: BoolFormula, r: BoolFormula) -> Self {
        match (l, r) {
            (BoolFormula::True, _) | (_, BoolFormula::True) => BoolFormula::True,
            (BoolFormula::False, x) | (x, BoolFormula::False) => x,
            (l, r) => BoolFormula::Or(Box::new(l), Box::new(r)),
        }
    }

    pub fn conj(items: impl IntoIterator<Item = BoolFormula>) -> Self {
        items.into_iter().fold(BoolFormula::True, BoolFormula::and)
    }

    /// The formula satisfied exactly by the set `q` among subsets of `vars`.
    pub fn exact(q: &BTreeSet<usize>, vars: impl IntoIterator<Item = usize>) -> Self {
        BoolFormula::conj(vars.into_iter().map(|v| {
            if q.contains(&v) {
                BoolFormula::var(v)
            } else {
                BoolFormula::not(BoolFormula::var(v))
            }
        }))
    }

    pub fn eval(&self, s: &BTreeSet<usize>) -> bool {
        match self {
            BoolFormula::True => true,
            BoolFormula::False => false,
            BoolFormula::Var(v) => s.contains(v),
            BoolFormula::Not(f) => !f.eval(s),
            BoolFormula::And(l, r) => l.eval(s) && r.eval(s),
            BoolFormula::Or(l, r) => l.eval(s) || r.eval(s),
        }
    }

    pub fn vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        fn go(f: &BoolFormula, out: &mut BTreeSet<usize>) {
            match f {
                BoolFormula::Var(v) => {
                    out.insert(*v);
                }
                BoolFormula::Not(g) => go(g, out),
                BoolFormula::And(l, r) | BoolFormula::Or(l, r) => {
                    go(l, out);
                    go(r, out);
                }
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }

    /// `sat(θ)` relative to the universe `vars`: every subset of `vars`
    /// satisfying the formula.
    pub fn sat(&self, vars: &[usize]) -> Vec<BTreeSet<usize>> {
        (0u64..(1u64 << vars.len()))
            .map(|m| (0..vars.len()).filter(|i| m & (1 << i) != 0).map(|i| vars[i]).collect::<BTreeSet<_>>())
            .filter(|s| self.eval(s))
            .collect()
    }

    /// Renames every variable.
    pub fn rename(&self, f: &impl Fn(usize) -> usize) -> BoolFormula {
        match self {
            BoolFormula::True => BoolFormula::True,
            BoolFormula::False => BoolFormula::False,
            BoolFormula::Var(v) => BoolFormula::Var(f(*v)),
            BoolFormula::Not(g) => BoolFormula::Not(Box::new(g.rename(f))),
            BoolFormula::And(l, r) => BoolFormula::And(Box::new(l.rename(f)), Box::new(r.rename(f))),
            BoolFormula::Or(l, r) => BoolFormula::Or(Box::new(l.rename(f)), Box::new(r.rename(f))),
        }
    }
}

impl fmt::Display for BoolFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolFormula::True => write!(f, "true"),
            BoolFormula::False => write!(f, "false"),
            BoolFormula::Var(v) => write!(f, "y{}", v),
            BoolFormula::Not(g) => match **g {
                BoolFormula::Var(_) | BoolFormula::True | BoolFormula::False => write!(f, "!{}", g),
                _ => write!(f, "!({})", g),
            },
            BoolFormula::And(l, r) => {
                let wrap = |x: &BoolFormula| matches!(x, BoolFormula::Or(..));
                let (a, b) = (l.to_string(), r.to_string());
                let a = if wrap(l) { format!("({})", a) } else { a };
                let b = if wrap(r) { format!("({})", b) } else { b };
                write!(f, "{} & {}", a, b)
            }
            BoolFormula::Or(l, r) => write!(f, "{} | {}", l, r),
        }
    }
}

/// A counting constraint: a set of pairs `(θ, ξ)`.
pub type Constraint = Vec<(BoolFormula, BBound)>;

/// Text form `(y1 | !y2, <=3); (y3, <=2)`.
pub fn constraint_text(c: &Constraint) -> String {
    c.iter().map(|(t, b)| format!("({}, {})", t, b)).collect::<Vec<_>>().join("; ")
}

/// Number of positions of `t` whose symbol belongs to `p`.
pub fn weight<T: Ord>(p: &BTreeSet<T>, t: &[T]) -> usize {
    t.iter().filter(|x| p.contains(x)).count()
}

/// Does the finite word `t` of variable sets satisfy every pair of `c`?
pub fn word_satisfies(c: &Constraint, t: &[BTreeSet<usize>]) -> bool {
    c.iter().all(|(theta, bound)| bound.holds(t.iter().filter(|s| theta.eval(s)).count()))
}

/// Subclass of a GNPT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    General,
    /// Every transition sends all children to one state.
    Forall,
    /// Every run is accepting.
    Safety,
    ForallSafety,
}

/// A graded nondeterministic parity tree automaton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gnpt {
    /// `|Y|`; variables are `0..num_vars`.
    pub num_vars: usize,
    /// Letters, each a set of letter variables (disjoint from `Y` only after
    /// [`to_single_alphabet`] renames them).
    pub alphabet: Vec<BTreeSet<usize>>,
    pub b: u32,
    /// States as subsets of `Y`.
    pub states: Vec<BTreeSet<usize>>,
    /// `delta[q][σ]`.
    pub delta: Vec<Vec<Constraint>>,
    pub init: usize,
    pub acc: ParityCondition,
    pub flavor: Flavor,
}

impl Gnpt {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// The universal Safety automaton: one state, every constraint empty.
    pub fn universal(num_letters: usize) -> Self {
        Gnpt {
            num_vars: 1,
            alphabet: (0..num_letters).map(|l| [l].into_iter().collect()).collect(),
            b: 1,
            states: vec![[0].into_iter().collect()],
            delta: vec![vec![Vec::new(); num_letters]],
            init: 0,
            acc: ParityCondition::from_indices(vec![0]),
            flavor: Flavor::Safety,
        }
    }

    /// A Forall automaton from a successor table `next[q][σ]`.
    pub fn forall(
        num_vars: usize,
        states: Vec<BTreeSet<usize>>,
        alphabet: Vec<BTreeSet<usize>>,
        next: &[Vec<usize>],
        init: usize,
        acc: ParityCondition,
    ) -> Self {
        let delta = next
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&t| vec![(BoolFormula::not(BoolFormula::exact(&states[t], 0..num_vars)), BBound::le(0))])
                    .collect()
            })
            .collect();
        Gnpt { num_vars, alphabet, b: 1, states, delta, init, acc, flavor: Flavor::Forall }
    }

    /// The state whose variable set is exactly `s`.
    pub fn state_of(&self, s: &BTreeSet<usize>) -> Option<usize> {
        self.states.iter().position(|q| q == s)
    }

    /// The side condition `|C| ≤ ⌈log₂ max(|Q|,2)⌉` on every
    /// constraint.
    pub fn side_condition_holds(&self) -> bool {
        let limit = log2_ceil(self.states.len().max(2));
        self.delta.iter().flatten().all(|c| c.len() <= limit)
    }

    /// Adds unreachable states until the side condition holds. Padding states
    /// are fresh singletons `{y}` with empty constraints and the largest
    /// index.
    pub fn pad_to_side_condition(&mut self) {
        let need = self.delta.iter().flatten().map(|c| c.len()).max().unwrap_or(0);
        while log2_ceil(self.states.len().max(2)) < need {
            let y = self.num_vars;
            self.num_vars += 1;
            self.states.push([y].into_iter().collect());
            self.delta.push(vec![Vec::new(); self.alphabet.len()]);
            let mut idx = self.acc.indices().to_vec();
            idx.push(self.acc.k());
            self.acc = ParityCondition::with_k(idx, self.acc.k());
        }
    }
}

fn log2_ceil(n: usize) -> usize {
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Checks a run on a finite tree: the root carries the initial state and the
/// states of every node's children, in ascending order, satisfy the node's
/// constraint. Finite trees have no infinite paths, so parity plays no role.
pub fn check_run(a: &Gnpt, tree: &LabeledForest<usize>, run: &LabeledForest<usize>) -> bool {
    let roots = tree.roots();
    if roots.len() != 1 || run.label(&roots[0]) != Some(&a.init) {
        return false;
    }
    if tree.labels.keys().ne(run.labels.keys()) {
        return false;
    }
    tree.labels.iter().all(|(x, &sigma)| {
        let q = run.labels[x];
        let word: Vec<BTreeSet<usize>> = tree.children(x).iter().map(|c| a.states[run.labels[c]].clone()).collect();
        word_satisfies(&a.delta[q][sigma], &word)
    })
}

/// Product of two GNPTs over the same alphabet. States are unions over
/// `Y₁ ⊎ Y₂` (the second automaton's variables are shifted) and constraints
/// are unions.
fn product(a1: &Gnpt, a2: &Gnpt, acc_from_first: bool, b: u32, flavor: Flavor) -> Gnpt {
    assert_eq!(a1.alphabet, a2.alphabet, "products need a shared alphabet");
    let off = a1.num_vars;
    let n2 = a2.num_states();
    let mut states = Vec::new();
    let mut delta = Vec::new();
    let mut index = Vec::new();
    for q1 in 0..a1.num_states() {
        for q2 in 0..n2 {
            states.push(a1.states[q1].iter().copied().chain(a2.states[q2].iter().map(|v| v + off)).collect());
            delta.push(
                (0..a1.alphabet.len())
                    .map(|s| {
                        let mut c = a1.delta[q1][s].clone();
                        c.extend(a2.delta[q2][s].iter().map(|(t, xi)| (t.rename(&|v| v + off), *xi)));
                        c
                    })
                    .collect(),
            );
            index.push(if acc_from_first { a1.acc.index(q1) } else { 0 });
        }
    }
    let acc = if acc_from_first { ParityCondition::with_k(index, a1.acc.k()) } else { ParityCondition::from_indices(index) };
    Gnpt {
        num_vars: a1.num_vars + a2.num_vars,
        alphabet: a1.alphabet.clone(),
        b,
        states,
        delta,
        init: a1.init * n2 + a2.init,
        acc,
        flavor,
    }
}

/// Intersection of a Forall GNPT with a Safety GNPT: `n₁·n₂` states, the
/// parity condition of the first factor and the counting bound of the
/// second.
pub fn intersect_forall_safety(a1: &Gnpt, a2: &Gnpt) -> Result<Gnpt, GnptError> {
    if !matches!(a1.flavor, Flavor::Forall | Flavor::ForallSafety) {
        return Err(GnptError::Flavor { expected: Flavor::Forall, found: a1.flavor });
    }
    if !matches!(a2.flavor, Flavor::Safety | Flavor::ForallSafety) {
        return Err(GnptError::Flavor { expected: Flavor::Safety, found: a2.flavor });
    }
    Ok(product(a1, a2, true, a2.b, Flavor::General))
}

/// Intersection of two Safety GNPTs with counting bound `max(b₁, b₂)`.
pub fn intersect_safety(a1: &Gnpt, a2: &Gnpt) -> Result<Gnpt, GnptError> {
    for a in [a1, a2] {
        if !matches!(a.flavor, Flavor::Safety | Flavor::ForallSafety) {
            return Err(GnptError::Flavor { expected: Flavor::Safety, found: a.flavor });
        }
    }
    Ok(product(a1, a2, false, a1.b.max(a2.b), Flavor::Safety))
}

/// A single-alphabet GNPT that guesses the input label.
///
/// Variables: `Y`, then the letter variables shifted past `Y`, then a fresh
/// `s`. States: `{s}` (the fresh root, state 0) and `q ∪ σ` for every state
/// and letter. The fresh root must have exactly one child, which carries the
/// initial state.
pub fn to_single_alphabet(a: &Gnpt) -> Gnpt {
    let zoff = a.num_vars;
    let zmax = a.alphabet.iter().flatten().map(|v| v + 1).max().unwrap_or(0);
    let s = zoff + zmax;
    let y: Vec<usize> = (0..a.num_vars).collect();
    let mut states = vec![[s].into_iter().collect::<BTreeSet<usize>>()];
    let mut delta = vec![vec![vec![
        (BoolFormula::True, BBound::le(1)),
        (BoolFormula::exact(&a.states[a.init], y.iter().copied()), BBound::gt(0)),
        (BoolFormula::var(s), BBound::le(0)),
    ]]];
    let mut index = vec![a.acc.k()];
    for q in 0..a.num_states() {
        for (si, sigma) in a.alphabet.iter().enumerate() {
            states.push(a.states[q].iter().copied().chain(sigma.iter().map(|v| v + zoff)).collect());
            delta.push(vec![a.delta[q][si].clone()]);
            index.push(a.acc.index(q));
        }
    }
    Gnpt {
        num_vars: s + 1,
        alphabet: vec![BTreeSet::new()],
        b: a.b.max(1),
        states,
        delta,
        init: 0,
        acc: ParityCondition::with_k(index, a.acc.k()),
        flavor: a.flavor,
    }
}

/// Pads a single-alphabet GNPT so that it only needs to accept full ω-trees.
/// A fresh variable `⊥` and state `{⊥}` are added; every `θ` becomes
/// `θ ∧ ¬⊥`; `{⊥}` requires all its children to be `{⊥}`; `{⊥}` joins every
/// `F_i` with `i ≥ 2`.
pub fn to_omega(a: &Gnpt) -> Gnpt {
    let bot = a.num_vars;
    let not_bot = BoolFormula::not(BoolFormula::var(bot));
    let mut delta: Vec<Vec<Constraint>> = a
        .delta
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| c.iter().map(|(t, xi)| (BoolFormula::and(t.clone(), not_bot.clone()), *xi)).collect())
                .collect()
        })
        .collect();
    delta.push(vec![vec![(not_bot, BBound::le(0))]; a.alphabet.len()]);
    let mut states = a.states.clone();
    states.push([bot].into_iter().collect());
    let k = a.acc.k().max(2);
    let mut index = a.acc.indices().to_vec();
    index.push(2);
    Gnpt {
        num_vars: bot + 1,
        alphabet: a.alphabet.clone(),
        b: a.b,
        states,
        delta,
        init: a.init,
        acc: ParityCondition::with_k(index, k),
        flavor: a.flavor,
    }
}

/// The counter automaton of `is_mother`: one counter per pair of the
/// constraint, counting letters that satisfy `θ` and saturating at `b+1`.
/// A `≤n` pair whose counter exceeds `n` sends the automaton to a rejecting
/// sink; a state is accepting when every `>n` counter exceeds `n`.
pub fn mother_dbw(c: &Constraint, letters: &[BTreeSet<usize>], b: u32) -> Dbw {
    let cap = b as usize + 1;
    let mut ids: HashMap<Option<Vec<usize>>, usize> = HashMap::new();
    let mut states: Vec<Option<Vec<usize>>> = vec![Some(vec![0; c.len()])];
    ids.insert(states[0].clone(), 0);
    let mut delta = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let cur = states[i].clone();
        let mut row = Vec::new();
        for l in letters {
            let next = cur.as_ref().and_then(|cnt| {
                let nc: Vec<usize> = c
                    .iter()
                    .zip(cnt)
                    .map(|((t, _), &v)| if t.eval(l) { (v + 1).min(cap) } else { v })
                    .collect();
                let ok = c.iter().zip(&nc).all(|((_, xi), &v)| xi.cmp == Cmp::Gt || v <= xi.n as usize);
                ok.then_some(nc)
            });
            let id = *ids.entry(next.clone()).or_insert_with(|| {
                states.push(next);
                states.len() - 1
            });
            row.push(id);
        }
        delta.push(row);
        i += 1;
    }
    let accepting = states
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            s.as_ref().is_some_and(|cnt| c.iter().zip(cnt).all(|((_, xi), &v)| xi.cmp == Cmp::Le || v > xi.n as usize))
        })
        .map(|(i, _)| i)
        .collect();
    Dbw { num_letters: letters.len(), delta, init: 0, accepting }
}

/// Is there an infinite word over `p` satisfying constraint `c`?
pub fn is_mother_constraint(c: &Constraint, p: &[BTreeSet<usize>], b: u32) -> bool {
    !p.is_empty() && !dbw_emptiness(&mother_dbw(c, p, b))
}

/// `is_mother(q, P)` for an ω-1GNPT: some infinite word over the states `p`
/// satisfies `δ(q, a)`.
pub fn is_mother(a: &Gnpt, q: usize, p: &BTreeSet<usize>) -> bool {
    let letters: Vec<BTreeSet<usize>> = p.iter().map(|&s| a.states[s].clone()).collect();
    is_mother_constraint(&a.delta[q][0], &letters, a.b)
}

/// Oracle for [`is_mother_constraint`]: every letter gets a multiplicity in
/// `{0, …, b+1, ω}` with at least one `ω`, and the saturated sums are checked
/// against the bounds.
pub fn is_mother_oracle(c: &Constraint, p: &[BTreeSet<usize>], b: u32) -> bool {
    let cap = b as usize + 1;
    let omega = cap + 1;
    let base = omega + 1;
    let n = p.len();
    if n == 0 {
        return false;
    }
    let total = base.pow(n as u32);
    (0..total).any(|mut code| {
        let counts: Vec<usize> = (0..n)
            .map(|_| {
                let d = code % base;
                code /= base;
                d
            })
            .collect();
        if !counts.contains(&omega) {
            return false;
        }
        c.iter().all(|(t, xi)| {
            let sum = (0..n).filter(|&i| t.eval(&p[i])).map(|i| counts[i]).sum::<usize>().min(cap);
            xi.holds(sum)
        })
    })
}

/// The 1APW view of an ω-1GNPT: same states, initial state and parity
/// condition; the transition of `q` is the disjunction over all `P` with
/// `is_mother(q, P)` of `⋀ P`, offered through its minimal sets.
pub struct GnptApw<'a> {
    pub gnpt: &'a Gnpt,
    memo: HashMap<usize, Vec<BTreeSet<usize>>>,
    pub mother_calls: usize,
}

/// Largest state count for which the 1APW view enumerates subsets.
pub const MAX_EXPLICIT_STATES: usize = 16;

pub fn gnpt_to_1apw(a: &Gnpt) -> GnptApw<'_> {
    GnptApw { gnpt: a, memo: HashMap::new(), mother_calls: 0 }
}

impl ApwOracle for GnptApw<'_> {
    fn init(&self) -> usize {
        self.gnpt.init
    }

    fn index(&self, q: usize) -> usize {
        self.gnpt.acc.index(q)
    }

    fn k(&self) -> usize {
        self.gnpt.acc.k()
    }

    fn moves(&mut self, q: usize) -> Result<Vec<BTreeSet<usize>>, GameError> {
        if let Some(m) = self.memo.get(&q) {
            return Ok(m.clone());
        }
        let n = self.gnpt.num_states();
        if n > MAX_EXPLICIT_STATES {
            return Err(GameError::Budget(n));
        }
        let mut subsets: Vec<BTreeSet<usize>> =
            (1u64..(1u64 << n)).map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect()).collect();
        subsets.sort_by_key(|s| s.len());
        let mut minimal: Vec<BTreeSet<usize>> = Vec::new();
        for s in subsets {
            if minimal.iter().any(|m| m.is_subset(&s)) {
                continue;
            }
            self.mother_calls += 1;
            if is_mother(self.gnpt, q, &s) {
                minimal.push(s);
            }
        }
        self.memo.insert(q, minimal.clone());
        Ok(minimal)
    }
}

/// True iff the GNPT accepts some tree.
pub fn gnpt_emptiness(a: &Gnpt) -> Result<bool, GnptError> {
    let omega = to_omega(&to_single_alphabet(a));
    if omega.num_states() > MAX_EXPLICIT_STATES {
        return Err(GnptError::TooLarge(omega.num_states()));
    }
    let mut apw = gnpt_to_1apw(&omega);
    Ok(apw_emptiness(&mut apw, 1 << 20)?)
}

/// Searches finite trees of bounded depth and branching for an accepted one.
/// Returns the first accepted `(tree, run)` found, if any.
pub fn bounded_run_search(
    a: &Gnpt,
    max_depth: usize,
    max_branching: usize,
) -> Option<(LabeledForest<usize>, LabeledForest<usize>)> {
    fn build(
        a: &Gnpt,
        x: NodeId,
        q: usize,
        depth: usize,
        maxb: usize,
    ) -> Option<Vec<(NodeId, usize, usize)>> {
        for sigma in 0..a.alphabet.len() {
            let c = &a.delta[q][sigma];
            let max_children = if depth == 0 { 0 } else { maxb };
            for nc in 0..=max_children {
                let mut combo = vec![0usize; nc];
                loop {
                    let word: Vec<BTreeSet<usize>> = combo.iter().map(|&s| a.states[s].clone()).collect();
                    if combo.windows(2).all(|w| w[0] <= w[1]) && word_satisfies(c, &word) {
                        let mut out = vec![(x.clone(), sigma, q)];
                        let mut ok = true;
                        for (i, &s) in combo.iter().enumerate() {
                            let mut y = x.clone();
                            y.push(i as u32 + 1);
                            match build(a, y, s, depth.saturating_sub(1), maxb) {
                                Some(sub) => out.extend(sub),
                                None => {
                                    ok = false;
                                    break;
                                }
                            }
                        }
                        if ok {
                            return Some(out);
                        }
                    }
                    let mut i = 0;
                    loop {
                        if i == nc {
                            break;
                        }
                        combo[i] += 1;
                        if combo[i] < a.num_states() {
                            break;
                        }
                        combo[i] = 0;
                        i += 1;
                    }
                    if i == nc {
                        break;
                    }
                }
            }
        }
        None
    }
    let nodes = build(a, vec![1], a.init, max_depth, max_branching)?;
    let tree = LabeledForest { labels: nodes.iter().map(|(x, s, _)| (x.clone(), *s)).collect() };
    let run = LabeledForest { labels: nodes.iter().map(|(x, _, q)| (x.clone(), *q)).collect() };
    Some((tree, run))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    /// The constraint of the worked example, over `y1, y2, y3`.
    pub(crate) fn example_constraint() -> Constraint {
        let y = BoolFormula::var;
        vec![
            (BoolFormula::or(y(1), BoolFormula::not(y(2))), BBound::le(3)),
            (y(3), BBound::le(2)),
            (BoolFormula::and(y(1), y(3)), BBound::gt(1)),
        ]
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight(&s(&[1, 2]), &[1, 2, 4, 1]), 3);
        assert_eq!(weight(&BTreeSet::new(), &[1, 2]), 0);
        assert_eq!(weight(&s(&[1]), &[]), 0);
    }

    #[test]
    fn word_examples() {
        let c = example_constraint();
        let t1 = vec![s(&[]), s(&[1]), s(&[2]), s(&[1, 3])];
        let t2 = vec![s(&[2]), s(&[1]), s(&[1, 2, 3]), s(&[1, 3])];
        assert!(!word_satisfies(&c, &t1));
        assert!(word_satisfies(&c, &t2));
        assert!(word_satisfies(&Vec::new(), &t1));
        assert_eq!(constraint_text(&c), "(y1 | !y2, <=3); (y3, <=2); (y1 & y3, >1)");
    }

    #[test]
    fn is_mother_examples() {
        let p = vec![s(&[0])];
        assert!(is_mother_constraint(&vec![(BoolFormula::var(0), BBound::gt(0))], &p, 1));
        assert!(!is_mother_constraint(&vec![(BoolFormula::True, BBound::le(0))], &p, 1));
        assert!(is_mother_constraint(&vec![(BoolFormula::var(0), BBound::gt(1))], &p, 1));
    }

    #[test]
    fn run_checks() {
        let u = Gnpt::universal(1);
        let leaf = LabeledForest::leaf(0);
        assert!(check_run(&u, &leaf, &LabeledForest::leaf(0)));
        let mut a = u.clone();
        a.delta[0][0] = vec![(BoolFormula::True, BBound::gt(2))];
        let mut labels = leaf.labels.clone();
        labels.insert(vec![0, 1], 0);
        labels.insert(vec![0, 2], 0);
        let t = LabeledForest { labels };
        assert!(!check_run(&a, &t, &t));
    }

    #[test]
    fn emptiness_examples() {
        assert!(gnpt_emptiness(&Gnpt::universal(1)).unwrap());
        let mut a = Gnpt::universal(1);
        a.delta[0][0] = vec![(BoolFormula::True, BBound::gt(1)), (BoolFormula::True, BBound::le(0))];
        a.b = 1;
        assert!(!gnpt_emptiness(&a).unwrap());
    }
}
