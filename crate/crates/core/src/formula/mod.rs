//! Formulas of the fully enriched μ-calculus in positive normal form.
//!
//! Negation only occurs in front of propositions and nominals. Graded
//! modalities `<n,α>φ` ("more than `n` α-successors satisfy φ") and
//! `[n,α]φ` ("all but at most `n` α-successors satisfy φ") carry a program
//! that may be inverted. Fragments are selected by which of the three features
//! (inverse programs, grades, nominals) a formula uses.

mod closure;
mod guess;
mod parser;
mod random;

pub use closure::{acceptance_levels, alternation_level, closure, ClosureError, FixpointLevels};
pub use guess::{enumerate_guesses, is_valid_guess, Guess};
pub use parser::{parse, ParseError};
pub use random::{random_sentence, RandomFormulaConfig};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// An atomic program, possibly inverted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Program {
    pub name: String,
    pub inverted: bool,
}

impl Program {
    pub fn new(name: impl Into<String>) -> Self {
        Program { name: name.into(), inverted: false }
    }

    pub fn inverse_of(name: impl Into<String>) -> Self {
        Program { name: name.into(), inverted: true }
    }

    /// The converse program. Applying it twice gives back `self`.
    pub fn inverse(&self) -> Self {
        Program { name: self.name.clone(), inverted: !self.inverted }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverted {
            write!(f, "{}-", self.name)
        } else {
            write!(f, "{}", self.name)
        }
    }
}

/// Which enriched μ-calculus a formula belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FragmentId {
    /// Grades only (no inverse programs, no nominals).
    Graded,
    /// Inverse programs and grades.
    FullGraded,
    /// Nominals and grades.
    HybridGraded,
    /// Inverse programs and nominals, no grades above zero.
    FullHybrid,
    /// All three features; satisfiability is undecidable here.
    FullyEnriched,
}

impl fmt::Display for FragmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FragmentId::Graded => "graded",
            FragmentId::FullGraded => "full-graded",
            FragmentId::HybridGraded => "hybrid-graded",
            FragmentId::FullHybrid => "full-hybrid",
            FragmentId::FullyEnriched => "fully-enriched",
        };
        f.write_str(s)
    }
}

/// A formula in positive normal form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    Prop { name: String, negated: bool },
    Nominal { name: String, negated: bool },
    Var(String),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    AtLeast { n: u32, prog: Program, body: Box<Formula> },
    AllBut { n: u32, prog: Program, body: Box<Formula> },
    Mu { var: String, body: Box<Formula> },
    Nu { var: String, body: Box<Formula> },
}

/// `⌈log₂ n⌉` clamped below by 1, so `bits(0) = bits(1) = 1` and
/// `bits(4) = 2`.
pub fn bits(n: u32) -> usize {
    if n <= 2 {
        1
    } else {
        (32 - (n - 1).leading_zeros()) as usize
    }
}

impl Formula {
    pub fn prop(name: impl Into<String>) -> Self {
        Formula::Prop { name: name.into(), negated: false }
    }

    pub fn not_prop(name: impl Into<String>) -> Self {
        Formula::Prop { name: name.into(), negated: true }
    }

    pub fn nominal(name: impl Into<String>) -> Self {
        Formula::Nominal { name: name.into(), negated: false }
    }

    pub fn not_nominal(name: impl Into<String>) -> Self {
        Formula::Nominal { name: name.into(), negated: true }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Formula::Var(name.into())
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn at_least(n: u32, prog: Program, body: Formula) -> Self {
        Formula::AtLeast { n, prog, body: Box::new(body) }
    }

    pub fn all_but(n: u32, prog: Program, body: Formula) -> Self {
        Formula::AllBut { n, prog, body: Box::new(body) }
    }

    pub fn mu(var: impl Into<String>, body: Formula) -> Self {
        Formula::Mu { var: var.into(), body: Box::new(body) }
    }

    pub fn nu(var: impl Into<String>, body: Formula) -> Self {
        Formula::Nu { var: var.into(), body: Box::new(body) }
    }

    /// Conjunction of a list, `true` when empty.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => Formula::True,
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// Disjunction of a list, `false` when empty.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => Formula::False,
            Some(first) => it.fold(first, Formula::or),
        }
    }

    pub fn is_fixpoint(&self) -> bool {
        matches!(self, Formula::Mu { .. } | Formula::Nu { .. })
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Formula::Prop { .. } | Formula::Nominal { .. })
    }

    /// Immediate subformulas, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::And(l, r) | Formula::Or(l, r) => vec![l, r],
            Formula::AtLeast { body, .. }
            | Formula::AllBut { body, .. }
            | Formula::Mu { body, .. }
            | Formula::Nu { body, .. } => vec![body],
            _ => vec![],
        }
    }

    /// Free fixpoint variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Var(y) => {
                if !bound.contains(y) {
                    out.insert(y.clone());
                }
            }
            Formula::Mu { var, body } | Formula::Nu { var, body } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    pub fn has_free_var(&self, y: &str) -> bool {
        match self {
            Formula::Var(v) => v == y,
            Formula::Mu { var, body } | Formula::Nu { var, body } => var != y && body.has_free_var(y),
            _ => self.children().into_iter().any(|c| c.has_free_var(y)),
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Replaces free occurrences of `y` by `replacement`.
    ///
    /// The replacement is expected to be a sentence, so no variable capture
    /// can happen.
    pub fn substitute(&self, y: &str, replacement: &Formula) -> Formula {
        match self {
            Formula::Var(v) if v == y => replacement.clone(),
            Formula::Var(_)
            | Formula::True
            | Formula::False
            | Formula::Prop { .. }
            | Formula::Nominal { .. } => self.clone(),
            Formula::And(l, r) => Formula::and(l.substitute(y, replacement), r.substitute(y, replacement)),
            Formula::Or(l, r) => Formula::or(l.substitute(y, replacement), r.substitute(y, replacement)),
            Formula::AtLeast { n, prog, body } => {
                Formula::at_least(*n, prog.clone(), body.substitute(y, replacement))
            }
            Formula::AllBut { n, prog, body } => Formula::all_but(*n, prog.clone(), body.substitute(y, replacement)),
            Formula::Mu { var, body } => {
                if var == y {
                    self.clone()
                } else {
                    Formula::mu(var.clone(), body.substitute(y, replacement))
                }
            }
            Formula::Nu { var, body } => {
                if var == y {
                    self.clone()
                } else {
                    Formula::nu(var.clone(), body.substitute(y, replacement))
                }
            }
        }
    }

    /// One-step unfolding `ψ[λy.ψ/y]` of a fixpoint formula `λy.ψ`.
    ///
    /// Returns `None` for formulas that are not fixpoints.
    pub fn unfold(&self) -> Option<Formula> {
        match self {
            Formula::Mu { var, body } | Formula::Nu { var, body } => Some(body.substitute(var, self)),
            _ => None,
        }
    }

    /// The negation of `self`, pushed down to the literals.
    ///
    /// Operators are dualized, literals flip polarity and bound variables stay
    /// positive, so `¬μy.ψ(y)` becomes `νy.¬ψ(y)`. Applying the function twice
    /// returns the original formula.
    pub fn negate_dual(&self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Prop { name, negated } => Formula::Prop { name: name.clone(), negated: !negated },
            Formula::Nominal { name, negated } => Formula::Nominal { name: name.clone(), negated: !negated },
            Formula::Var(y) => Formula::Var(y.clone()),
            Formula::And(l, r) => Formula::or(l.negate_dual(), r.negate_dual()),
            Formula::Or(l, r) => Formula::and(l.negate_dual(), r.negate_dual()),
            Formula::AtLeast { n, prog, body } => Formula::all_but(*n, prog.clone(), body.negate_dual()),
            Formula::AllBut { n, prog, body } => Formula::at_least(*n, prog.clone(), body.negate_dual()),
            Formula::Mu { var, body } => Formula::nu(var.clone(), body.negate_dual()),
            Formula::Nu { var, body } => Formula::mu(var.clone(), body.negate_dual()),
        }
    }

    /// Structural length with grades coded in binary.
    ///
    /// Atoms and variables count 1, a binary connective counts 1 plus its
    /// operands, a fixpoint binder counts 1 plus its body and a graded
    /// modality counts `bits(n) + 1 + |body|`.
    pub fn length(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Prop { .. } | Formula::Nominal { .. } | Formula::Var(_) => 1,
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.length() + r.length(),
            Formula::AtLeast { n, body, .. } | Formula::AllBut { n, body, .. } => bits(*n) + 1 + body.length(),
            Formula::Mu { body, .. } | Formula::Nu { body, .. } => 1 + body.length(),
        }
    }

    /// Largest grade occurring in the formula.
    pub fn max_grade(&self) -> Option<u32> {
        let own = match self {
            Formula::AtLeast { n, .. } | Formula::AllBut { n, .. } => Some(*n),
            _ => None,
        };
        self.children().into_iter().filter_map(|c| c.max_grade()).chain(own).max()
    }

    /// The counting bound `b`: one more than the largest grade, and 1 for
    /// grade-free formulas.
    pub fn counting_bound(&self) -> u32 {
        self.max_grade().map_or(1, |g| g + 1)
    }

    /// Visits every subformula occurrence in pre-order.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Atomic propositions occurring in the formula.
    pub fn propositions(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |g| {
            if let Formula::Prop { name, .. } = g {
                out.insert(name.clone());
            }
        });
        out
    }

    /// Nominals occurring in the formula.
    pub fn nominals(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |g| {
            if let Formula::Nominal { name, .. } = g {
                out.insert(name.clone());
            }
        });
        out
    }

    /// Programs (atomic or inverse) occurring in modalities.
    pub fn programs(&self) -> BTreeSet<Program> {
        let mut out = BTreeSet::new();
        self.visit(&mut |g| {
            if let Formula::AtLeast { prog, .. } | Formula::AllBut { prog, .. } = g {
                out.insert(prog.clone());
            }
        });
        out
    }

    /// Names of atomic programs, ignoring inversion.
    pub fn atomic_programs(&self) -> BTreeSet<String> {
        self.programs().into_iter().map(|p| p.name).collect()
    }

    pub fn uses_inverse(&self) -> bool {
        self.programs().iter().any(|p| p.inverted)
    }

    /// True when some grade is positive.
    pub fn uses_grades(&self) -> bool {
        self.max_grade().is_some_and(|g| g > 0)
    }

    pub fn uses_nominals(&self) -> bool {
        !self.nominals().is_empty()
    }

    /// The most specific fragment containing the formula.
    ///
    /// Grade-free formulas are classified as if grades were present, since
    /// `<0,α>` and `[0,α]` are the plain modalities of every fragment.
    pub fn fragment_of(&self) -> FragmentId {
        match (self.uses_inverse(), self.uses_nominals()) {
            (true, true) if self.uses_grades() => FragmentId::FullyEnriched,
            (true, true) => FragmentId::FullHybrid,
            (true, false) => FragmentId::FullGraded,
            (false, true) => FragmentId::HybridGraded,
            (false, false) => FragmentId::Graded,
        }
    }
}

/// Precedence levels used by the printer: 0 = disjunction, 1 = conjunction,
/// 2 = prefix operators and atoms.
fn write_prec(f: &mut fmt::Formatter<'_>, phi: &Formula, ctx: u8) -> fmt::Result {
    match phi {
        Formula::True => f.write_str("true"),
        Formula::False => f.write_str("false"),
        Formula::Prop { name, negated } => write!(f, "{}{}", if *negated { "!" } else { "" }, name),
        Formula::Nominal { name, negated } => write!(f, "{}#{}", if *negated { "!" } else { "" }, name),
        Formula::Var(y) => f.write_str(y),
        Formula::Or(l, r) => {
            if ctx > 0 {
                f.write_str("(")?;
            }
            write_prec(f, l, 0)?;
            f.write_str(" | ")?;
            write_prec(f, r, 1)?;
            if ctx > 0 {
                f.write_str(")")?;
            }
            Ok(())
        }
        Formula::And(l, r) => {
            if ctx > 1 {
                f.write_str("(")?;
            }
            write_prec(f, l, 1)?;
            f.write_str(" & ")?;
            write_prec(f, r, 2)?;
            if ctx > 1 {
                f.write_str(")")?;
            }
            Ok(())
        }
        Formula::AtLeast { n, prog, body } => {
            write!(f, "<{},{}> ", n, prog)?;
            write_prec(f, body, 2)
        }
        Formula::AllBut { n, prog, body } => {
            write!(f, "[{},{}] ", n, prog)?;
            write_prec(f, body, 2)
        }
        Formula::Mu { var, body } | Formula::Nu { var, body } => {
            let kw = if matches!(phi, Formula::Mu { .. }) { "mu" } else { "nu" };
            f.write_str("(")?;
            write!(f, "{} {}. ", kw, var)?;
            write_prec(f, body, 0)?;
            f.write_str(")")
        }
    }
}

impl fmt::Display for Formula {
    /// Prints the formula in the input grammar; the output parses back to an
    /// equal formula.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(f, self, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_examples() {
        let a = Program::new("a");
        let psi = Formula::prop("p");
        assert_eq!(
            Formula::at_least(3, a.clone(), psi.clone()).negate_dual(),
            Formula::all_but(3, a, Formula::not_prop("p"))
        );
        let m = Formula::mu("y", Formula::or(Formula::prop("p"), Formula::var("y")));
        assert_eq!(m.negate_dual(), Formula::nu("y", Formula::and(Formula::not_prop("p"), Formula::var("y"))));
        assert_eq!(
            Formula::and(Formula::prop("p"), Formula::prop("q")).negate_dual(),
            Formula::or(Formula::not_prop("p"), Formula::not_prop("q"))
        );
    }

    #[test]
    fn length_examples() {
        let a = Program::new("a");
        assert_eq!(Formula::at_least(4, a.clone(), Formula::prop("p")).length(), 4);
        assert_eq!(Formula::prop("p").length(), 1);
        assert_eq!(Formula::at_least(0, a, Formula::prop("p")).length(), 3);
        assert_eq!(bits(0), 1);
        assert_eq!(bits(1), 1);
        assert_eq!(bits(2), 1);
        assert_eq!(bits(3), 2);
        assert_eq!(bits(4), 2);
        assert_eq!(bits(5), 3);
    }

    #[test]
    fn counting_bound_examples() {
        let a = Program::new("a");
        assert_eq!(Formula::at_least(2, a.clone(), Formula::prop("p")).counting_bound(), 3);
        assert_eq!(Formula::and(Formula::prop("p"), Formula::prop("q")).counting_bound(), 1);
        let f = Formula::and(
            Formula::all_but(5, a.clone(), Formula::prop("p")),
            Formula::at_least(1, a, Formula::prop("q")),
        );
        assert_eq!(f.counting_bound(), 6);
    }

    #[test]
    fn fragment_examples() {
        let a = Program::new("a");
        assert_eq!(Formula::at_least(2, a.clone(), Formula::prop("p")).fragment_of(), FragmentId::Graded);
        let hg = Formula::and(Formula::nominal("o"), Formula::at_least(1, a.clone(), Formula::prop("p")));
        assert_eq!(hg.fragment_of(), FragmentId::HybridGraded);
        let fe = Formula::and(
            Formula::at_least(0, Program::inverse_of("a"), Formula::nominal("o")),
            Formula::at_least(1, a, Formula::prop("p")),
        );
        assert_eq!(fe.fragment_of(), FragmentId::FullyEnriched);
    }

    #[test]
    fn program_double_inverse() {
        let a = Program::new("a");
        assert_eq!(a.inverse().inverse(), a);
        assert_ne!(a.inverse(), a);
    }

    #[test]
    fn unfold_substitutes_binder() {
        let m = Formula::mu("y", Formula::at_least(0, Program::new("a"), Formula::var("y")));
        assert_eq!(m.unfold().unwrap(), Formula::at_least(0, Program::new("a"), m.clone()));
        assert!(Formula::True.unfold().is_none());
    }
}
