//! Guesses for nominals: a type for every nominal and an equality pattern.

use super::{closure, Formula};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// A pre-commitment about the nominals of a formula.
///
/// `t[o]` is the set of extended-closure formulas that hold at the state
/// named `o`; `classes` partitions the nominals into groups that name the
/// same state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Guess {
    pub t: BTreeMap<String, BTreeSet<Formula>>,
    pub classes: Vec<BTreeSet<String>>,
}

impl Guess {
    /// True when `o1 ∼ o2`.
    pub fn equivalent(&self, o1: &str, o2: &str) -> bool {
        self.classes.iter().any(|c| c.contains(o1) && c.contains(o2))
    }

    /// Index of the ∼-class of `o`.
    pub fn class_of(&self, o: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(o))
    }

    /// Number of ∼-classes touched by a set of nominals.
    pub fn class_count<'a>(&self, noms: impl IntoIterator<Item = &'a String>) -> usize {
        noms.into_iter().filter_map(|o| self.class_of(o)).collect::<BTreeSet<_>>().len()
    }

    /// True when every `t(o)` is locally consistent: it contains no
    /// complementary literals, no `false`, contains a conjunction iff it
    /// contains both conjuncts, a disjunction iff it contains a disjunct, and
    /// a fixpoint formula iff it contains its unfolding.
    pub fn is_locally_consistent(&self) -> bool {
        self.t.values().all(|set| {
            set.iter().all(|f| match f {
                Formula::False => false,
                Formula::And(l, r) => set.contains(&**l) && set.contains(&**r),
                Formula::Or(l, r) => set.contains(&**l) || set.contains(&**r),
                Formula::Mu { .. } | Formula::Nu { .. } => set.contains(&f.unfold().expect("fixpoint")),
                _ => true,
            }) && set.iter().all(|f| !set.contains(&f.negate_dual()))
        })
    }
}

/// Checks conditions (i)–(iv) of a guess for `phi` directly.
pub fn is_valid_guess(phi: &Formula, g: &Guess) -> bool {
    let Ok(ext) = closure(phi, true) else { return false };
    let noms = phi.nominals();
    let class_noms: BTreeSet<String> = g.classes.iter().flatten().cloned().collect();
    if class_noms != noms || g.classes.iter().map(|c| c.len()).sum::<usize>() != noms.len() {
        return false;
    }
    if g.t.keys().cloned().collect::<BTreeSet<_>>() != noms {
        return false;
    }
    for (o, set) in &g.t {
        if !set.is_subset(&ext) {
            return false;
        }
        for psi in &ext {
            let neg = psi.negate_dual();
            if set.contains(psi) == set.contains(&neg) {
                return false;
            }
        }
        if !set.contains(&Formula::nominal(o.clone())) {
            return false;
        }
    }
    for o1 in &noms {
        for o2 in &noms {
            if g.equivalent(o1, o2) {
                if g.t[o1] != g.t[o2] {
                    return false;
                }
            } else if !g.t[o2].contains(&Formula::not_nominal(o1.clone())) {
                return false;
            }
        }
    }
    true
}

/// All set partitions of `items` as restricted growth strings, in
/// lexicographic order.
fn partitions(items: &[String]) -> Vec<Vec<BTreeSet<String>>> {
    fn rec(i: usize, items: &[String], blocks: &mut Vec<BTreeSet<String>>, out: &mut Vec<Vec<BTreeSet<String>>>) {
        if i == items.len() {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].insert(items[i].clone());
            rec(i + 1, items, blocks, out);
            blocks[b].remove(&items[i]);
        }
        blocks.push([items[i].clone()].into_iter().collect());
        rec(i + 1, items, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, items, &mut Vec::new(), &mut out);
    out
}

/// Lazily enumerates every guess for `phi`, each exactly once.
///
/// Partitions of the nominals come first (in restricted-growth order), then
/// truth assignments to the remaining `{ψ, ¬ψ}` pairs of every class, read as
/// a binary counter. A formula without nominals yields the single empty
/// guess.
pub fn enumerate_guesses(phi: &Formula) -> impl Iterator<Item = Guess> {
    let ext = closure(phi, true).unwrap_or_default();
    let noms: Vec<String> = phi.nominals().into_iter().collect();
    let mut pairs: Vec<(Formula, Formula)> = Vec::new();
    let mut seen = BTreeSet::new();
    for f in &ext {
        if seen.contains(f) {
            continue;
        }
        let n = f.negate_dual();
        seen.insert(f.clone());
        seen.insert(n.clone());
        if matches!(f, Formula::Nominal { .. }) {
            continue;
        }
        let (pos, neg) = if f <= &n { (f.clone(), n) } else { (n, f.clone()) };
        pairs.push((pos, neg));
    }
    let parts = partitions(&noms);
    GuessIter { noms, pairs, parts, part_idx: 0, counter: None }
}

struct GuessIter {
    noms: Vec<String>,
    pairs: Vec<(Formula, Formula)>,
    parts: Vec<Vec<BTreeSet<String>>>,
    part_idx: usize,
    /// One bit per (class, pair); `None` before the first guess of a partition.
    counter: Option<Vec<bool>>,
}

impl Iterator for GuessIter {
    type Item = Guess;

    fn next(&mut self) -> Option<Guess> {
        loop {
            let classes = self.parts.get(self.part_idx)?.clone();
            let width = classes.len() * self.pairs.len();
            match &mut self.counter {
                None => self.counter = Some(vec![false; width]),
                Some(bits) => {
                    let mut carry = true;
                    for b in bits.iter_mut().rev() {
                        if !carry {
                            break;
                        }
                        carry = *b;
                        *b = !*b;
                    }
                    if carry {
                        self.counter = None;
                        self.part_idx += 1;
                        continue;
                    }
                }
            }
            let bits = self.counter.as_ref().expect("counter set");
            let mut t = BTreeMap::new();
            for (ci, class) in classes.iter().enumerate() {
                let mut set = BTreeSet::new();
                for o in &self.noms {
                    if class.contains(o) {
                        set.insert(Formula::nominal(o.clone()));
                    } else {
                        set.insert(Formula::not_nominal(o.clone()));
                    }
                }
                for (pi, (pos, neg)) in self.pairs.iter().enumerate() {
                    set.insert(if bits[ci * self.pairs.len() + pi] { neg.clone() } else { pos.clone() });
                }
                for o in class {
                    t.insert(o.clone(), set.clone());
                }
            }
            return Some(Guess { t, classes });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    #[test]
    fn no_nominals_single_guess() {
        let g: Vec<_> = enumerate_guesses(&parse("p").unwrap()).collect();
        assert_eq!(g.len(), 1);
        assert!(g[0].t.is_empty());
    }

    #[test]
    fn single_nominal() {
        let phi = parse("#o").unwrap();
        let g: Vec<_> = enumerate_guesses(&phi).collect();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].t["o"], [Formula::nominal("o")].into_iter().collect());
        assert!(g[0].equivalent("o", "o"));
        assert!(is_valid_guess(&phi, &g[0]));
    }

    #[test]
    fn two_nominals_all_valid_and_distinct() {
        let phi = parse("#o1 & #o2").unwrap();
        let g: Vec<_> = enumerate_guesses(&phi).collect();
        assert!(g.iter().all(|x| is_valid_guess(&phi, x)));
        let distinct: BTreeSet<_> = g.iter().map(|x| format!("{:?}", x)).collect();
        assert_eq!(distinct.len(), g.len());
        assert_eq!(g.len(), 6);
    }
}
