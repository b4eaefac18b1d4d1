//! Model checking by fixpoint iteration.
//!
//! Formulas are compiled into an arena where every variable occurrence points
//! at its binder. Least fixpoints iterate upwards from the empty set and
//! greatest fixpoints downwards from the full set until the approximation is
//! stable. Structures with at most 64 states use one machine word per state
//! set.

use super::{nominal_key, KripkeError, KripkeStructure};
use crate::formula::{Formula, Program};
use std::collections::{BTreeMap, BTreeSet};

/// An assignment of state sets to free variables.
pub type Valuation = BTreeMap<String, BTreeSet<usize>>;

#[derive(Debug, Clone)]
pub(crate) enum Node {
    True,
    False,
    Label { key: usize, negated: bool },
    Var(usize),
    And(usize, usize),
    Or(usize, usize),
    AtLeast { n: u32, prog: usize, body: usize },
    AllBut { n: u32, prog: usize, body: usize },
    Fix { greatest: bool, slot: usize, body: usize },
}

/// A formula compiled for repeated evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub nodes: Vec<Node>,
    pub root: usize,
    /// Label keys (`p` or `#o`) in slot order.
    pub keys: Vec<String>,
    pub progs: Vec<Program>,
    /// Free variables, occupying the first environment slots.
    pub free: Vec<String>,
    pub slots: usize,
}

impl Compiled {
    pub fn new(phi: &Formula) -> Self {
        let mut c = Compiled { nodes: Vec::new(), root: 0, keys: Vec::new(), progs: Vec::new(), free: Vec::new(), slots: 0 };
        c.free = phi.free_vars().into_iter().collect();
        c.slots = c.free.len();
        let mut scope: Vec<(String, usize)> = c.free.iter().cloned().enumerate().map(|(i, y)| (y, i)).collect();
        c.root = c.compile(phi, &mut scope);
        c
    }

    fn key(&mut self, k: String) -> usize {
        match self.keys.iter().position(|x| *x == k) {
            Some(i) => i,
            None => {
                self.keys.push(k);
                self.keys.len() - 1
            }
        }
    }

    fn prog(&mut self, p: &Program) -> usize {
        match self.progs.iter().position(|x| x == p) {
            Some(i) => i,
            None => {
                self.progs.push(p.clone());
                self.progs.len() - 1
            }
        }
    }

    fn push(&mut self, n: Node) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn compile(&mut self, phi: &Formula, scope: &mut Vec<(String, usize)>) -> usize {
        let node = match phi {
            Formula::True => Node::True,
            Formula::False => Node::False,
            Formula::Prop { name, negated } => Node::Label { key: self.key(name.clone()), negated: *negated },
            Formula::Nominal { name, negated } => Node::Label { key: self.key(nominal_key(name)), negated: *negated },
            Formula::Var(y) => {
                let slot = scope.iter().rev().find(|(x, _)| x == y).map(|(_, s)| *s).expect("free variables are pre-bound");
                Node::Var(slot)
            }
            Formula::And(l, r) => {
                let (l, r) = (self.compile(l, scope), self.compile(r, scope));
                Node::And(l, r)
            }
            Formula::Or(l, r) => {
                let (l, r) = (self.compile(l, scope), self.compile(r, scope));
                Node::Or(l, r)
            }
            Formula::AtLeast { n, prog, body } => {
                let prog = self.prog(prog);
                Node::AtLeast { n: *n, prog, body: self.compile(body, scope) }
            }
            Formula::AllBut { n, prog, body } => {
                let prog = self.prog(prog);
                Node::AllBut { n: *n, prog, body: self.compile(body, scope) }
            }
            Formula::Mu { var, body } | Formula::Nu { var, body } => {
                let slot = self.slots;
                self.slots += 1;
                scope.push((var.clone(), slot));
                let body = self.compile(body, scope);
                scope.pop();
                Node::Fix { greatest: matches!(phi, Formula::Nu { .. }), slot, body }
            }
        };
        self.push(node)
    }
}

/// State sets used by the evaluator.
pub(crate) trait StateSet: Clone + PartialEq {
    fn empty(n: usize) -> Self;
    fn full(n: usize) -> Self;
    fn contains(&self, i: usize) -> bool;
    fn insert(&mut self, i: usize);
    fn union(&self, o: &Self) -> Self;
    fn inter(&self, o: &Self) -> Self;
    fn complement(&self, n: usize) -> Self;
}

impl StateSet for u64 {
    fn empty(_: usize) -> Self {
        0
    }
    fn full(n: usize) -> Self {
        if n >= 64 {
            u64::MAX
        } else {
            (1u64 << n) - 1
        }
    }
    fn contains(&self, i: usize) -> bool {
        self >> i & 1 == 1
    }
    fn insert(&mut self, i: usize) {
        *self |= 1 << i;
    }
    fn union(&self, o: &Self) -> Self {
        self | o
    }
    fn inter(&self, o: &Self) -> Self {
        self & o
    }
    fn complement(&self, n: usize) -> Self {
        !self & Self::full(n)
    }
}

impl StateSet for Vec<bool> {
    fn empty(n: usize) -> Self {
        vec![false; n]
    }
    fn full(n: usize) -> Self {
        vec![true; n]
    }
    fn contains(&self, i: usize) -> bool {
        self[i]
    }
    fn insert(&mut self, i: usize) {
        self[i] = true;
    }
    fn union(&self, o: &Self) -> Self {
        self.iter().zip(o).map(|(a, b)| *a || *b).collect()
    }
    fn inter(&self, o: &Self) -> Self {
        self.iter().zip(o).map(|(a, b)| *a && *b).collect()
    }
    fn complement(&self, _: usize) -> Self {
        self.iter().map(|a| !a).collect()
    }
}

/// A structure in the shape the evaluator consumes: one state set per label
/// key and successor lists per program of the compiled formula.
pub(crate) struct Frame<S> {
    pub n: usize,
    pub labels: Vec<S>,
    pub succ: Vec<Vec<Vec<usize>>>,
}

impl<S: StateSet> Frame<S> {
    pub fn of(k: &KripkeStructure, c: &Compiled) -> Self {
        let n = k.len();
        let labels = c
            .keys
            .iter()
            .map(|key| {
                let mut s = S::empty(n);
                for &w in k.l.get(key).into_iter().flatten() {
                    s.insert(w);
                }
                s
            })
            .collect();
        let succ = c.progs.iter().map(|p| (0..n).map(|w| k.successors(w, p)).collect()).collect();
        Frame { n, labels, succ }
    }
}

/// Evaluation options.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Mode {
    /// Evaluate least fixpoints as greatest fixpoints.
    pub mu_as_nu: bool,
}

pub(crate) fn run<S: StateSet>(c: &Compiled, f: &Frame<S>, env: &mut Vec<S>, i: usize, mode: Mode) -> S {
    let n = f.n;
    match &c.nodes[i] {
        Node::True => S::full(n),
        Node::False => S::empty(n),
        Node::Label { key, negated } => {
            if *negated {
                f.labels[*key].complement(n)
            } else {
                f.labels[*key].clone()
            }
        }
        Node::Var(slot) => env[*slot].clone(),
        Node::And(l, r) => run(c, f, env, *l, mode).inter(&run(c, f, env, *r, mode)),
        Node::Or(l, r) => run(c, f, env, *l, mode).union(&run(c, f, env, *r, mode)),
        Node::AtLeast { n: g, prog, body } => {
            let b = run(c, f, env, *body, mode);
            let mut out = S::empty(n);
            for w in 0..n {
                if f.succ[*prog][w].iter().filter(|&&v| b.contains(v)).count() > *g as usize {
                    out.insert(w);
                }
            }
            out
        }
        Node::AllBut { n: g, prog, body } => {
            let b = run(c, f, env, *body, mode);
            let mut out = S::empty(n);
            for w in 0..n {
                if f.succ[*prog][w].iter().filter(|&&v| !b.contains(v)).count() <= *g as usize {
                    out.insert(w);
                }
            }
            out
        }
        Node::Fix { greatest, slot, body } => {
            let top = *greatest || mode.mu_as_nu;
            env[*slot] = if top { S::full(n) } else { S::empty(n) };
            loop {
                let next = run(c, f, env, *body, mode);
                if next == env[*slot] {
                    return next;
                }
                env[*slot] = next;
            }
        }
    }
}

pub(crate) fn eval_with(k: &KripkeStructure, phi: &Formula, val: &Valuation, mode: Mode) -> Result<BTreeSet<usize>, KripkeError> {
    let c = Compiled::new(phi);
    if let Some(y) = c.free.iter().find(|y| !val.contains_key(*y)) {
        return Err(KripkeError::UnboundVariable(y.clone()));
    }
    let n = k.len();
    if let Some(&w) = val.values().flatten().find(|&&w| w >= n) {
        return Err(KripkeError::BadStateIndex(w));
    }
    let frame = Frame::<Vec<bool>>::of(k, &c);
    let mut env = vec![Vec::<bool>::empty(n); c.slots];
    for (i, y) in c.free.iter().enumerate() {
        for &w in &val[y] {
            StateSet::insert(&mut env[i], w);
        }
    }
    let out = run(&c, &frame, &mut env, c.root, mode);
    Ok((0..n).filter(|&w| out[w]).collect())
}

/// The denotation of `φ` in `K` under the valuation `V`.
pub fn eval(k: &KripkeStructure, phi: &Formula, val: &Valuation) -> Result<BTreeSet<usize>, KripkeError> {
    eval_with(k, phi, val, Mode::default())
}

/// Whether the sentence `φ` holds at state `w`.
pub fn holds(k: &KripkeStructure, w: usize, phi: &Formula) -> Result<bool, KripkeError> {
    if w >= k.len() {
        return Err(KripkeError::BadStateIndex(w));
    }
    Ok(eval(k, phi, &Valuation::new())?.contains(&w))
}

/// The states satisfying a sentence.
pub fn eval_all(k: &KripkeStructure, phi: &Formula) -> Result<BTreeSet<usize>, KripkeError> {
    eval(k, phi, &Valuation::new())
}
