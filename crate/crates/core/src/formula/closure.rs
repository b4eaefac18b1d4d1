//! Fischer–Ladner closure and alternation levels.

use super::Formula;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClosureError {
    #[error("formula has free variables: {0:?}")]
    NotSentence(BTreeSet<String>),
    #[error("`{0}` is not a fixpoint formula")]
    NotFixpoint(String),
    #[error("`{0}` does not occur in the formula")]
    NotFound(String),
}

/// The Fischer–Ladner closure of a sentence.
///
/// The closure contains `φ`, both operands of every conjunction and
/// disjunction, the body of every graded modality and the one-step unfolding
/// of every fixpoint formula. With `extended` set the result is additionally
/// closed under [`Formula::negate_dual`].
pub fn closure(phi: &Formula, extended: bool) -> Result<BTreeSet<Formula>, ClosureError> {
    let free = phi.free_vars();
    if !free.is_empty() {
        return Err(ClosureError::NotSentence(free));
    }
    let mut out = BTreeSet::new();
    let mut work = vec![phi.clone()];
    while let Some(f) = work.pop() {
        if out.contains(&f) {
            continue;
        }
        match &f {
            Formula::And(l, r) | Formula::Or(l, r) => {
                work.push((**l).clone());
                work.push((**r).clone());
            }
            Formula::AtLeast { body, .. } | Formula::AllBut { body, .. } => work.push((**body).clone()),
            Formula::Mu { .. } | Formula::Nu { .. } => work.push(f.unfold().expect("fixpoint")),
            _ => {}
        }
        if extended {
            work.push(f.negate_dual());
        }
        out.insert(f);
    }
    Ok(out)
}

/// Alternation levels of the fixpoint sentences in the closure of a formula.
#[derive(Debug, Clone, Default)]
pub struct FixpointLevels {
    /// Level of every fixpoint sentence of the closure.
    pub levels: BTreeMap<Formula, usize>,
}

impl FixpointLevels {
    /// Largest level, 0 when the formula has no fixpoints.
    pub fn max_level(&self) -> usize {
        self.levels.values().copied().max().unwrap_or(0)
    }

    pub fn level(&self, f: &Formula) -> Option<usize> {
        self.levels.get(f).copied()
    }
}

/// Walks every subformula occurrence of `phi` and records, for each fixpoint
/// occurrence, its alternation level together with its expansion (the
/// occurrence with free variables replaced by the expansions of their
/// binders). Expansions are exactly the closure members.
fn walk_levels(phi: &Formula, mut visit: impl FnMut(&Formula, &Formula, usize)) {
    struct Frame {
        var: String,
        is_mu: bool,
        level: usize,
        expanded: Formula,
    }
    fn expand(f: &Formula, stack: &[Frame]) -> Formula {
        let mut g = f.clone();
        for fr in stack.iter().rev() {
            if g.has_free_var(&fr.var) {
                g = g.substitute(&fr.var, &fr.expanded);
            }
        }
        g
    }
    fn go(f: &Formula, stack: &mut Vec<Frame>, visit: &mut dyn FnMut(&Formula, &Formula, usize)) {
        if let Formula::Mu { var, body } | Formula::Nu { var, body } = f {
            let is_mu = matches!(f, Formula::Mu { .. });
            let level = if f.is_sentence() {
                1
            } else {
                let xi = stack.last().expect("non-sentence fixpoint has an enclosing binder");
                if f.has_free_var(&xi.var) && xi.is_mu != is_mu {
                    xi.level + 1
                } else {
                    xi.level
                }
            };
            let expanded = expand(f, stack);
            visit(f, &expanded, level);
            stack.push(Frame { var: var.clone(), is_mu, level, expanded });
            go(body, stack, visit);
            stack.pop();
        } else {
            for c in f.children() {
                go(c, stack, visit);
            }
        }
    }
    go(phi, &mut Vec::new(), &mut visit);
}

/// Alternation level of the fixpoint formula `psi` inside `phi`.
///
/// `psi` is either a subformula occurrence of `phi` (possibly with free
/// variables; the first occurrence in pre-order is used) or a fixpoint
/// sentence of the closure of `phi`. A sentence occurring as a subformula has
/// level 1. Otherwise the level is inherited from the innermost enclosing
/// fixpoint and increases by one when `psi` mentions that binder's variable
/// and the binder has the other polarity.
pub fn alternation_level(psi: &Formula, phi: &Formula) -> Result<usize, ClosureError> {
    if !psi.is_fixpoint() {
        return Err(ClosureError::NotFixpoint(psi.to_string()));
    }
    let mut found = None;
    let mut by_expansion = None;
    walk_levels(phi, |occ, expanded, level| {
        if found.is_none() && occ == psi {
            found = Some(level);
        }
        if by_expansion.is_none() && expanded == psi {
            by_expansion = Some(level);
        }
    });
    found.or(by_expansion).ok_or_else(|| ClosureError::NotFound(psi.to_string()))
}

/// Levels of all fixpoint sentences in `closure(phi)`.
///
/// When two occurrences expand to the same sentence the larger level is kept.
pub fn acceptance_levels(phi: &Formula) -> FixpointLevels {
    let mut levels: BTreeMap<Formula, usize> = BTreeMap::new();
    walk_levels(phi, |_, expanded, level| {
        let e = levels.entry(expanded.clone()).or_insert(level);
        *e = (*e).max(level);
    });
    FixpointLevels { levels }
}
