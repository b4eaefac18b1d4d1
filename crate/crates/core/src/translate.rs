//! Formula-to-automaton front ends and the decision procedures built on
//! them.
//!
//! A full graded sentence `φ` becomes a 2GAPT over `2^Γ(φ)` that accepts
//! exactly the tree encodings of its tree models. A hybrid graded sentence
//! together with a guess `G` becomes a fully enriched automaton over
//! `2^Θ(φ)` that accepts the forest encodings of quasi-forest models
//! compatible with `G`. Satisfiability is decided by emptiness of these
//! automata.

use crate::automata::{Direction, Move, ParityCondition, PlusFormula, Transition};
use crate::fea::{fea_to_gapt, Fea};
use crate::formula::{acceptance_levels, closure, enumerate_guesses, is_valid_guess, ClosureError, FixpointLevels, Formula, FragmentId, Guess, Program};
use crate::kripke::Symbol;
use crate::gapt::{gapt_emptiness_stage, gapt_emptiness_with, EmptinessBudget, EmptinessStats, Gapt2, GaptError, STAGE_WIDTHS};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("formula belongs to the {found:?} fragment, which this procedure does not handle")]
    WrongFragment { found: FragmentId },
    #[error("formula is not a sentence")]
    NotSentence,
    #[error("invalid guess for the formula")]
    InvalidGuess,
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error("alphabet of {0} symbols is too large")]
    AlphabetTooLarge(usize),
}

/// Letters are bit sets over the symbols; more symbols than this are
/// rejected.
const MAX_SYMBOLS: usize = 16;

/// The symbol set `Γ(φ)`: the propositions of `φ` and `p_α` for every
/// program `α` occurring in `φ`.
pub fn gamma(phi: &Formula) -> Vec<Symbol> {
    let mut out: Vec<Symbol> = phi.propositions().into_iter().map(Symbol::Prop).collect();
    out.extend(phi.programs().into_iter().map(Symbol::Edge));
    out
}

/// The symbol set `Θ(φ)`: propositions, nominals, `p_a` for every atomic
/// program and `↑^a_o` for every atomic program `a` and nominal `o`.
pub fn theta(phi: &Formula) -> Vec<Symbol> {
    let mut out: Vec<Symbol> = phi.propositions().into_iter().map(Symbol::Prop).collect();
    out.extend(phi.nominals().into_iter().map(Symbol::Nominal));
    out.extend(phi.atomic_programs().into_iter().map(|a| Symbol::Edge(Program::new(a))));
    for a in phi.atomic_programs() {
        for o in phi.nominals() {
            out.push(Symbol::Up { prog: a.clone(), nominal: o });
        }
    }
    out
}

/// Name of the letter with bit set `bits` over `symbols`, e.g. `{p,@a}`.
pub fn letter_name(symbols: &[Symbol], bits: usize) -> String {
    let items: Vec<String> =
        symbols.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, s)| s.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

/// A state of a translated automaton.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateName {
    Formula(Formula),
    /// `ψ ∧ p_α`.
    WithEdge(Formula, Program),
    /// `ψ ∨ ¬p_α`.
    UnlessEdge(Formula, Program),
    /// `p_α`.
    Edge(Program),
    /// `¬p_α`.
    NotEdge(Program),
    /// The initial state `q₀` of the hybrid construction.
    Init,
    /// `ini_o`: the root named `o` carries the formulas `t(o)`.
    Ini(String),
    /// `¬o ∨ ψ`.
    NotNominalOr(String, Formula),
}

impl fmt::Display for StateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateName::Formula(psi) => write!(f, "{psi}"),
            StateName::WithEdge(psi, a) => write!(f, "({psi}) & p_{a}"),
            StateName::UnlessEdge(psi, a) => write!(f, "({psi}) | !p_{a}"),
            StateName::Edge(a) => write!(f, "p_{a}"),
            StateName::NotEdge(a) => write!(f, "!p_{a}"),
            StateName::Init => f.write_str("q0"),
            StateName::Ini(o) => write!(f, "ini_{o}"),
            StateName::NotNominalOr(o, psi) => write!(f, "!#{o} | ({psi})"),
        }
    }
}

/// Shared state of both constructions: the alphabet, the interned states
/// and the computed rows.
struct Builder<'g> {
    symbols: Vec<Symbol>,
    sym_pos: HashMap<Symbol, usize>,
    states: Vec<StateName>,
    ids: HashMap<StateName, usize>,
    levels: FixpointLevels,
    guess: Option<&'g Guess>,
    nominals: Vec<String>,
}

impl<'g> Builder<'g> {
    fn new(phi: &Formula, symbols: Vec<Symbol>, guess: Option<&'g Guess>) -> Result<Self, TranslateError> {
        if symbols.len() > MAX_SYMBOLS {
            return Err(TranslateError::AlphabetTooLarge(symbols.len()));
        }
        let sym_pos = symbols.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Builder {
            symbols,
            sym_pos,
            states: Vec::new(),
            ids: HashMap::new(),
            levels: acceptance_levels(phi),
            guess,
            nominals: phi.nominals().into_iter().collect(),
        })
    }

    fn num_letters(&self) -> usize {
        1 << self.symbols.len()
    }

    fn state(&mut self, s: StateName) -> usize {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        self.states.push(s.clone());
        self.ids.insert(s, self.states.len() - 1);
        self.states.len() - 1
    }

    fn formula(&mut self, f: &Formula) -> usize {
        self.state(StateName::Formula(f.clone()))
    }

    fn mv(&mut self, dir: Direction, s: StateName) -> Transition {
        PlusFormula::atom(Move::new(dir, self.state(s)))
    }

    fn mv_f(&mut self, dir: Direction, f: &Formula) -> Transition {
        self.mv(dir, StateName::Formula(f.clone()))
    }

    fn in_alphabet(&self, s: &Symbol) -> bool {
        self.sym_pos.contains_key(s)
    }

    /// Is the symbol in the letter? Symbols outside the alphabet never are.
    fn has(&self, sigma: usize, s: &Symbol) -> bool {
        self.sym_pos.get(s).is_some_and(|&i| sigma >> i & 1 == 1)
    }

    /// Does a node labeled `σ` count as an `α`-successor of its parent? It
    /// must carry `p_α` and, in the hybrid construction, no nominal: named
    /// states are roots and are reached through `↑^a_o` only.
    fn is_successor(&self, sigma: usize, a: &Program) -> bool {
        self.has(sigma, &Symbol::Edge(a.clone()))
            && (self.guess.is_none() || self.nominals.iter().all(|o| !self.has(sigma, &Symbol::Nominal(o.clone()))))
    }

    /// `nom^a_ψ(σ)`: nominals `o` with `ψ ∈ t(o)` and `↑^a_o ∈ σ`.
    fn nom(&self, sigma: usize, prog: &str, psi: &Formula) -> Vec<String> {
        let g = self.guess.expect("hybrid construction has a guess");
        self.nominals
            .iter()
            .filter(|o| {
                g.t.get(*o).is_some_and(|t| t.contains(psi))
                    && self.has(sigma, &Symbol::Up { prog: prog.to_string(), nominal: (*o).clone() })
            })
            .cloned()
            .collect()
    }

    /// Parity index of a state: `2i−1` for a least fixpoint of level `i`,
    /// `2i` for a greatest fixpoint of level `i` and `2d+1` otherwise, where
    /// `d` is the largest level. Fixpoints outside the closure of `φ`
    /// (negations in the extended closure) take the level of their dual.
    fn index(&self, s: &StateName) -> usize {
        let top = 2 * self.levels.max_level() + 1;
        let StateName::Formula(f) = s else { return top };
        let level = match f {
            Formula::Mu { .. } | Formula::Nu { .. } => {
                self.levels.level(f).or_else(|| self.levels.level(&f.negate_dual())).unwrap_or(1).max(1)
            }
            _ => return top,
        };
        match f {
            Formula::Mu { .. } => 2 * level - 1,
            _ => 2 * level,
        }
    }

    /// Rows shared by both tables: Boolean connectives, fixpoints,
    /// literals and the materialized label states.
    fn common_row(&mut self, s: &StateName, sigma: usize) -> Option<Transition> {
        Some(match s {
            StateName::Formula(f) => match f {
                Formula::True => PlusFormula::True,
                Formula::False => PlusFormula::False,
                Formula::Prop { name, negated } => PlusFormula::from_bool(self.has(sigma, &Symbol::Prop(name.clone())) != *negated),
                Formula::Nominal { name, negated } => {
                    PlusFormula::from_bool(self.has(sigma, &Symbol::Nominal(name.clone())) != *negated)
                }
                Formula::And(l, r) => PlusFormula::and(self.mv_f(Direction::Here, l), self.mv_f(Direction::Here, r)),
                Formula::Or(l, r) => PlusFormula::or(self.mv_f(Direction::Here, l), self.mv_f(Direction::Here, r)),
                Formula::Mu { .. } | Formula::Nu { .. } => {
                    let body = f.unfold().expect("fixpoint");
                    self.mv_f(Direction::Here, &body)
                }
                Formula::Var(_) => PlusFormula::False,
                Formula::AtLeast { .. } | Formula::AllBut { .. } => return None,
            },
            StateName::WithEdge(psi, a) => PlusFormula::and(
                self.mv_f(Direction::Here, psi),
                self.mv(Direction::Here, StateName::Edge(a.clone())),
            ),
            StateName::UnlessEdge(psi, a) => PlusFormula::or(
                self.mv_f(Direction::Here, psi),
                self.mv(Direction::Here, StateName::NotEdge(a.clone())),
            ),
            StateName::Edge(a) => PlusFormula::from_bool(self.is_successor(sigma, a)),
            StateName::NotEdge(a) => PlusFormula::from_bool(!self.is_successor(sigma, a)),
            StateName::NotNominalOr(o, psi) => PlusFormula::or(
                self.mv_f(Direction::Here, &Formula::not_nominal(o.clone())),
                self.mv_f(Direction::Here, psi),
            ),
            StateName::Init | StateName::Ini(_) => return None,
        })
    }

    /// Graded rows of the full graded table.
    fn full_graded_row(&mut self, s: &StateName, sigma: usize) -> Transition {
        if let Some(t) = self.common_row(s, sigma) {
            return t;
        }
        let StateName::Formula(f) = s else { unreachable!("only formula states lack a common row") };
        match f {
            Formula::AtLeast { n, prog, body } => {
                let n = *n;
                let with = StateName::WithEdge((**body).clone(), prog.clone());
                let children = self.mv(Direction::AtLeast(n), with.clone());
                let inv = prog.inverse();
                let parent = if self.in_alphabet(&Symbol::Edge(inv.clone())) {
                    let mut t = PlusFormula::and(self.mv_f(Direction::Up, body), self.mv(Direction::Here, StateName::Edge(inv)));
                    if n >= 1 {
                        t = PlusFormula::and(t, self.mv(Direction::AtLeast(n - 1), with));
                    }
                    t
                } else {
                    PlusFormula::False
                };
                PlusFormula::or(parent, children)
            }
            Formula::AllBut { n, prog, body } => {
                let n = *n;
                let unless = StateName::UnlessEdge((**body).clone(), prog.clone());
                let inv = prog.inverse();
                let all = self.mv(Direction::AllBut(n), unless.clone());
                if !self.in_alphabet(&Symbol::Edge(inv.clone())) {
                    return all;
                }
                let parent_ok = PlusFormula::or(self.mv_f(Direction::Up, body), self.mv(Direction::Here, StateName::NotEdge(inv)));
                let mut t = PlusFormula::and(parent_ok, all);
                if n >= 1 {
                    t = PlusFormula::or(t, self.mv(Direction::AllBut(n - 1), unless));
                }
                t
            }
            _ => unreachable!("non-graded formulas have a common row"),
        }
    }

    /// Rows of the hybrid graded table.
    fn hybrid_row(&mut self, phi: &Formula, s: &StateName, sigma: usize) -> Transition {
        if let Some(t) = self.common_row(s, sigma) {
            return t;
        }
        let g = self.guess.expect("hybrid construction has a guess");
        match s {
            StateName::Init => {
                let mut t = self.mv_f(Direction::SomeRoot, phi);
                for o in self.nominals.clone() {
                    let named = self.mv_f(Direction::SomeRoot, &Formula::nominal(o.clone()));
                    let ini = self.mv(Direction::AllRoots, StateName::Ini(o));
                    t = PlusFormula::and(t, PlusFormula::and(named, ini));
                }
                t
            }
            StateName::Ini(o) => {
                let not_o = self.mv_f(Direction::Here, &Formula::not_nominal(o.clone()));
                let types: Vec<Formula> = g.t.get(o).map(|t| t.iter().cloned().collect()).unwrap_or_default();
                let all = PlusFormula::conj(types.iter().map(|f| self.mv_f(Direction::Here, f)).collect::<Vec<_>>());
                PlusFormula::or(not_o, all)
            }
            StateName::Formula(Formula::AtLeast { n, prog, body }) => {
                let noms = self.nom(sigma, &prog.name, body);
                let c = g.class_count(&noms) as u32;
                let mut t = PlusFormula::True;
                if c <= *n {
                    t = self.mv(Direction::AtLeast(n - c), StateName::WithEdge((**body).clone(), prog.clone()));
                }
                for o in noms {
                    let jump = self.mv(Direction::AllRoots, StateName::NotNominalOr(o, (**body).clone()));
                    t = PlusFormula::and(t, jump);
                }
                t
            }
            StateName::Formula(Formula::AllBut { n, prog, body }) => {
                let neg = body.negate_dual();
                let c_neg = g.class_count(&self.nom(sigma, &prog.name, &neg)) as u32;
                if c_neg > *n {
                    return PlusFormula::False;
                }
                let mut t = self.mv(Direction::AllBut(n - c_neg), StateName::UnlessEdge((**body).clone(), prog.clone()));
                for o in self.nom(sigma, &prog.name, body) {
                    let jump = self.mv(Direction::AllRoots, StateName::NotNominalOr(o, (**body).clone()));
                    t = PlusFormula::and(t, jump);
                }
                t
            }
            _ => unreachable!("every state has a row"),
        }
    }

    /// Computes all rows, interning states on demand, and returns the
    /// finished table pieces.
    fn finish(
        mut self,
        mut row: impl FnMut(&mut Self, &StateName, usize) -> Transition,
    ) -> (Vec<String>, Vec<String>, Vec<Vec<Transition>>, ParityCondition) {
        let mut delta: Vec<Vec<Transition>> = Vec::new();
        let mut i = 0;
        while i < self.states.len() {
            let s = self.states[i].clone();
            let r: Vec<Transition> = (0..self.num_letters()).map(|sigma| row(&mut self, &s, sigma)).collect();
            delta.push(r);
            i += 1;
        }
        let index: Vec<usize> = self.states.iter().map(|s| self.index(s)).collect();
        let k = 2 * self.levels.max_level() + 1;
        let alphabet = (0..self.num_letters()).map(|l| letter_name(&self.symbols, l)).collect();
        let states = self.states.iter().map(|s| s.to_string()).collect();
        (alphabet, states, delta, ParityCondition::with_k(index, k))
    }
}

fn check_sentence(phi: &Formula) -> Result<(), TranslateError> {
    if phi.is_sentence() {
        Ok(())
    } else {
        Err(TranslateError::NotSentence)
    }
}

/// The 2GAPT `A_φ` of a full graded sentence over `2^Γ(φ)`.
///
/// Its states are the closure of `φ` followed by the label states
/// `ψ ∧ p_α`, `ψ ∨ ¬p_α`, `p_α` and `¬p_α` required by graded rows. The
/// initial state is `φ` (state 0). A label literal for a program outside
/// `φ` is constant and is not materialized.
pub fn formula_to_gapt(phi: &Formula) -> Result<Gapt2, TranslateError> {
    check_sentence(phi)?;
    match phi.fragment_of() {
        FragmentId::Graded | FragmentId::FullGraded => {}
        found => return Err(TranslateError::WrongFragment { found }),
    }
    let cl = closure(phi, false)?;
    let mut b = Builder::new(phi, gamma(phi), None)?;
    b.formula(phi);
    for f in &cl {
        b.formula(f);
    }
    let (alphabet, states, delta, acc) = b.finish(|b, s, sigma| b.full_graded_row(s, sigma));
    Ok(Gapt2 { alphabet, b: phi.counting_bound(), states, delta, init: 0, acc })
}

/// The FEA `A_{φ,G}` of a hybrid graded sentence and a guess, over
/// `2^Θ(φ)`.
///
/// Its states are `q₀` (state 0 and initial), the extended closure, the
/// states `ini_o` and `¬o ∨ ψ` and the label states required by graded
/// rows.
pub fn formula_to_fea(phi: &Formula, guess: &Guess) -> Result<Fea, TranslateError> {
    check_sentence(phi)?;
    match phi.fragment_of() {
        FragmentId::Graded | FragmentId::HybridGraded => {}
        found => return Err(TranslateError::WrongFragment { found }),
    }
    if !is_valid_guess(phi, guess) {
        return Err(TranslateError::InvalidGuess);
    }
    let cl = closure(phi, true)?;
    let mut b = Builder::new(phi, theta(phi), Some(guess))?;
    b.state(StateName::Init);
    b.formula(phi);
    for f in &cl {
        b.formula(f);
    }
    let noms = b.nominals.clone();
    for o in &noms {
        b.state(StateName::Ini(o.clone()));
    }
    for o in &noms {
        for f in &cl {
            b.state(StateName::NotNominalOr(o.clone(), f.clone()));
        }
    }
    let (alphabet, states, delta, acc) = b.finish(|b, s, sigma| b.hybrid_row(phi, s, sigma));
    Ok(Fea { alphabet, b: phi.counting_bound(), states, delta, init: 0, acc })
}

/// Outcome of a decision procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Sat,
    Unsat,
    /// A resource cap was hit before the question was settled.
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Sat => "SAT",
            Verdict::Unsat => "UNSAT",
            Verdict::Indeterminate => "INDETERMINATE",
        })
    }
}

/// Resource caps of a decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Game vertices explored per emptiness check.
    pub max_states: usize,
    /// Guesses examined by the hybrid procedure.
    pub max_guesses: usize,
    /// Wall-clock limit for the whole decision.
    pub timeout: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_states: 1_000_000, max_guesses: 100_000, timeout: None }
    }
}

/// Counters reported with a verdict.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionStats {
    pub closure_size: usize,
    pub letters: usize,
    /// States of the last automaton built.
    pub automaton_states: usize,
    /// Guesses whose automata were checked (hybrid procedure only).
    pub guesses_tried: usize,
    /// Guesses skipped as locally inconsistent.
    pub guesses_pruned: usize,
    /// Position of the guess whose automaton was nonempty.
    pub witness_guess: Option<usize>,
    /// Guesses whose emptiness check hit a cap.
    pub guesses_undecided: usize,
    /// Summed over all emptiness checks.
    pub contexts: usize,
    pub labels: usize,
    pub game_vertices: usize,
    pub safra_states: usize,
    pub wall_ms: u128,
    /// Why the verdict is indeterminate.
    pub reason: Option<String>,
}

impl DecisionStats {
    fn absorb(&mut self, e: &EmptinessStats) {
        self.contexts += e.contexts;
        self.labels += e.labels;
        self.game_vertices += e.game_vertices;
        self.safra_states += e.safra_states;
    }
}

/// A verdict together with the fragment used and the counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub fragment: FragmentId,
    pub stats: DecisionStats,
}

fn emptiness_budget(budget: &Budget, start: Instant) -> EmptinessBudget {
    EmptinessBudget {
        max_states: budget.max_states,
        deadline: budget.timeout.map(|t| start + t),
        ..EmptinessBudget::default()
    }
}

fn reason(e: &GaptError) -> String {
    e.to_string()
}

/// Decides a full graded sentence: SAT iff `L(A_φ)` is nonempty.
pub fn decide_full_graded(phi: &Formula, budget: &Budget) -> Result<Decision, TranslateError> {
    let start = Instant::now();
    let a = formula_to_gapt(phi)?;
    let mut stats = DecisionStats {
        closure_size: closure(phi, false)?.len(),
        letters: a.alphabet.len(),
        automaton_states: a.num_states(),
        ..DecisionStats::default()
    };
    let (res, e) = gapt_emptiness_with(&a, &emptiness_budget(budget, start));
    stats.absorb(&e);
    let verdict = match res {
        Ok(true) => Verdict::Sat,
        Ok(false) => Verdict::Unsat,
        Err(err) => {
            stats.reason = Some(reason(&err));
            Verdict::Indeterminate
        }
    };
    stats.wall_ms = start.elapsed().as_millis();
    Ok(Decision { verdict, fragment: phi.fragment_of(), stats })
}

/// Decides a hybrid graded sentence: SAT iff `L(A_{φ,G})` is nonempty for
/// some guess `G`.
///
/// Guesses whose types are not locally consistent are skipped: `ini_o`
/// requires the whole of `t(o)` at the root named `o`, so their automata are
/// empty. The remaining automata are checked stage by stage (see
/// [`STAGE_WIDTHS`]): every guess gets the cheap restricted stage before any
/// guess gets a wider one, and the first guess proven nonempty is reported.
pub fn decide_hybrid_graded(phi: &Formula, budget: &Budget) -> Result<Decision, TranslateError> {
    let start = Instant::now();
    check_sentence(phi)?;
    match phi.fragment_of() {
        FragmentId::Graded | FragmentId::HybridGraded => {}
        found => return Err(TranslateError::WrongFragment { found }),
    }
    let mut stats = DecisionStats { closure_size: closure(phi, true)?.len(), ..DecisionStats::default() };
    let eb = emptiness_budget(budget, start);
    let timed_out = || budget.timeout.is_some_and(|t| start.elapsed() >= t);
    let mut indeterminate = false;
    let mut pending: Vec<(usize, Gapt2)> = Vec::new();
    for (i, g) in enumerate_guesses(phi).enumerate() {
        if timed_out() {
            stats.reason = Some("time limit reached".into());
            return Ok(finish(Verdict::Indeterminate, phi, stats, start));
        }
        if !g.is_locally_consistent() {
            stats.guesses_pruned += 1;
            continue;
        }
        if pending.len() >= budget.max_guesses {
            stats.reason = Some(format!("guess cap {} reached", budget.max_guesses));
            indeterminate = true;
            break;
        }
        let a = formula_to_fea(phi, &g)?;
        stats.letters = a.alphabet.len();
        stats.automaton_states = a.num_states();
        pending.push((i, fea_to_gapt(&a)));
    }
    stats.guesses_tried = pending.len();
    for width in STAGE_WIDTHS.iter().copied().map(Some).chain([None]) {
        let mut open = Vec::new();
        for (i, a) in pending {
            let (res, e) = gapt_emptiness_stage(&a, &eb, width);
            stats.absorb(&e);
            match res {
                Ok(Some(true)) => {
                    stats.witness_guess = Some(i);
                    return Ok(finish(Verdict::Sat, phi, stats, start));
                }
                Ok(Some(false)) => {}
                Ok(None) => open.push((i, a)),
                Err(err @ GaptError::Budget { what: "time", .. }) => {
                    stats.reason = Some(reason(&err));
                    return Ok(finish(Verdict::Indeterminate, phi, stats, start));
                }
                Err(err) => {
                    stats.guesses_undecided += 1;
                    stats.reason = Some(reason(&err));
                    indeterminate = true;
                }
            }
        }
        pending = open;
    }
    let verdict = if indeterminate { Verdict::Indeterminate } else { Verdict::Unsat };
    Ok(finish(verdict, phi, stats, start))
}

fn finish(verdict: Verdict, phi: &Formula, mut stats: DecisionStats, start: Instant) -> Decision {
    stats.wall_ms = start.elapsed().as_millis();
    Decision { verdict, fragment: phi.fragment_of(), stats }
}

/// Dispatches on the fragment of `φ`: nominal-free formulas go to the full
/// graded procedure, formulas with nominals and without inverse programs to
/// the hybrid graded one. Other fragments are rejected.
pub fn decide(phi: &Formula, budget: &Budget) -> Result<Decision, TranslateError> {
    match phi.fragment_of() {
        FragmentId::Graded | FragmentId::FullGraded => decide_full_graded(phi, budget),
        FragmentId::HybridGraded => decide_hybrid_graded(phi, budget),
        found => Err(TranslateError::WrongFragment { found }),
    }
}

/// The states of an automaton whose names are in `names`, in order.
pub fn state_ids(states: &[String], names: &[&str]) -> Vec<Option<usize>> {
    names.iter().map(|n| states.iter().position(|s| s == n)).collect()
}

/// Symbols of the alphabet a letter contains.
pub fn letter_symbols(symbols: &[Symbol], bits: usize) -> BTreeSet<Symbol> {
    symbols.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, s)| s.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn verdict(text: &str) -> Verdict {
        decide(&parse(text).unwrap(), &Budget::default()).unwrap().verdict
    }

    #[test]
    fn gamma_of_graded_diamond() {
        let phi = parse("<1,a> p").unwrap();
        assert_eq!(gamma(&phi), vec![Symbol::Prop("p".into()), Symbol::Edge(Program::new("a"))]);
    }

    #[test]
    fn diamond_state_set() {
        let a = formula_to_gapt(&parse("<1,a> p").unwrap()).unwrap();
        let mut names = a.states.clone();
        names.sort();
        assert_eq!(names, vec!["(p) & p_a", "<1,a> p", "p", "p_a"]);
        a.validate().unwrap();
        assert_eq!(a.b, parse("<1,a> p").unwrap().counting_bound());
    }

    #[test]
    fn literal_rows() {
        let a = formula_to_gapt(&parse("p & !p").unwrap()).unwrap();
        let p = a.states.iter().position(|s| s == "p").unwrap();
        let np = a.states.iter().position(|s| s == "!p").unwrap();
        assert_eq!(a.alphabet, vec!["{}", "{p}"]);
        assert_eq!(a.delta[p][0], PlusFormula::False);
        assert_eq!(a.delta[p][1], PlusFormula::True);
        assert_eq!(a.delta[np][0], PlusFormula::True);
        assert_eq!(a.delta[np][1], PlusFormula::False);
    }

    #[test]
    fn diamond_zero_without_inverse_has_one_disjunct() {
        let a = formula_to_gapt(&parse("<0,a> p").unwrap()).unwrap();
        let t = crate::gapt::transition_text(&a.delta[0][0], &a.states);
        assert_eq!(t, "(<0>,(p) & p_a)");
    }

    #[test]
    fn diamond_with_inverse_keeps_parent_disjunct() {
        let a = formula_to_gapt(&parse("<0,a> p & <0,a-> q").unwrap()).unwrap();
        let d = a.states.iter().position(|s| s == "<0,a> p").unwrap();
        let t = crate::gapt::transition_text(&a.delta[d][0], &a.states);
        assert!(t.contains("(-1,p)") && t.contains("(eps,p_a-)") && t.contains("(<0>,(p) & p_a)"), "{t}");
    }

    #[test]
    fn parity_indexes_follow_levels() {
        let a = formula_to_gapt(&parse("mu y. <0,a> y").unwrap()).unwrap();
        assert_eq!(a.acc.k(), 3);
        assert_eq!(a.acc.index(0), 1);
        let b = formula_to_gapt(&parse("nu y. <0,a> y").unwrap()).unwrap();
        assert_eq!(b.acc.index(0), 2);
        for q in 1..b.num_states() {
            assert_eq!(b.acc.index(q), 3);
        }
        let chain = b.acc.chain();
        assert!(chain.windows(2).all(|w| w[0].is_subset(&w[1])));
        assert_eq!(chain.last().unwrap().len(), b.num_states());
    }

    #[test]
    fn wrong_fragment_is_rejected() {
        let phi = parse("#o & <0,a-> p").unwrap();
        assert!(matches!(formula_to_gapt(&phi), Err(TranslateError::WrongFragment { .. })));
        assert!(matches!(decide(&phi, &Budget::default()), Err(TranslateError::WrongFragment { .. })));
    }

    #[test]
    fn hybrid_initial_row() {
        let phi = parse("#o & <0,a> #o").unwrap();
        let g = enumerate_guesses(&phi).next().unwrap();
        let a = formula_to_fea(&phi, &g).unwrap();
        a.validate().unwrap();
        let t = crate::gapt::transition_text(&a.delta[0][0], &a.states);
        assert_eq!(t, "(<root>,#o & <0,a> #o) & (<root>,#o) & ([root],ini_o)");
    }

    #[test]
    fn hybrid_diamond_discounts_named_successor() {
        let phi = parse("#o & <0,a> #o").unwrap();
        let g = enumerate_guesses(&phi).find(|g| g.t["o"].contains(&Formula::nominal("o"))).unwrap();
        let a = formula_to_fea(&phi, &g).unwrap();
        let syms = theta(&phi);
        let up = syms.iter().position(|s| matches!(s, Symbol::Up { .. })).unwrap();
        let d = a.states.iter().position(|s| s == "<0,a> #o").unwrap();
        let t = crate::gapt::transition_text(&a.delta[d][1 << up], &a.states);
        assert_eq!(t, "([root],!#o | (#o))");
        let t0 = crate::gapt::transition_text(&a.delta[d][0], &a.states);
        assert_eq!(t0, "(<0>,(#o) & p_a)");
    }

    #[test]
    fn hybrid_negative_literal_row() {
        let phi = parse("#o & !p").unwrap();
        let g = enumerate_guesses(&phi).next().unwrap();
        let a = formula_to_fea(&phi, &g).unwrap();
        let np = a.states.iter().position(|s| s == "!p").unwrap();
        let syms = theta(&phi);
        let p = syms.iter().position(|s| *s == Symbol::Prop("p".into())).unwrap();
        assert_eq!(a.delta[np][0], PlusFormula::True);
        assert_eq!(a.delta[np][1 << p], PlusFormula::False);
    }

    #[test]
    fn invalid_guess_is_rejected() {
        let phi = parse("#o").unwrap();
        let g = Guess { t: Default::default(), classes: vec![] };
        assert_eq!(formula_to_fea(&phi, &g), Err(TranslateError::InvalidGuess));
    }

    #[test]
    fn simple_full_graded_verdicts() {
        assert_eq!(verdict("true"), Verdict::Sat);
        assert_eq!(verdict("p & !p"), Verdict::Unsat);
        assert_eq!(verdict("mu y. y"), Verdict::Unsat);
        assert_eq!(verdict("nu y. y"), Verdict::Sat);
        assert_eq!(verdict("<0,a> p"), Verdict::Sat);
    }

    #[test]
    fn graded_verdicts() {
        assert_eq!(verdict("<2,a> true"), Verdict::Sat);
        assert_eq!(verdict("[0,a] false & <0,a> true"), Verdict::Unsat);
        assert_eq!(verdict("<1,a> p & [0,a] !p"), Verdict::Unsat);
        assert_eq!(verdict("<1,a> p & [1,a] !p"), Verdict::Unsat);
        assert_eq!(verdict("<1,a> p & [2,a] !p"), Verdict::Sat);
    }

    #[test]
    fn inverse_verdicts() {
        assert_eq!(verdict("p & <0,a> [0,a-] !p"), Verdict::Unsat);
        assert_eq!(verdict("p & <0,a> <0,a-> p"), Verdict::Sat);
    }

    #[test]
    fn hybrid_verdicts() {
        assert_eq!(verdict("#o"), Verdict::Sat);
        assert_eq!(verdict("#o & <0,a> #o"), Verdict::Sat);
        assert_eq!(verdict("#o & !#o"), Verdict::Unsat);
        assert_eq!(verdict("#o & p & <0,a> (#o & !p)"), Verdict::Unsat);
        assert_eq!(verdict("#o & [0,a] false & <0,a> #o"), Verdict::Unsat);
        assert_eq!(verdict("#o & [0,a] !#o & <0,a> <0,a> #o"), Verdict::Sat);
    }

    #[test]
    fn fixpoints_through_nominals() {
        assert_eq!(verdict("#o & (mu y. <0,a> (#o & y))"), Verdict::Unsat);
        assert_eq!(verdict("#o & (nu y. <0,a> (#o & y))"), Verdict::Sat);
        assert_eq!(verdict("#o & <0,a> (mu y. #o | <0,a> y)"), Verdict::Sat);
    }
}
