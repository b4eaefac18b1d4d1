//! Two-way graded alternating parity tree automata (2GAPTs).
//!
//! A 2GAPT reads a tree top-down and may also move to the parent (`-1`), stay
//! (`ε`), send copies to at least `n+1` children (`⟨n⟩`) or to all but at most
//! `n` children (`[n]`). Root jumps are not allowed.
//!
//! The submodules provide the witnesses that replace a two-way run by labels
//! on the input tree ([`witness`]), the word automaton `U` that finds
//! rejecting downward traces ([`u`]) and the emptiness check ([`emptiness`]).

pub mod emptiness;
pub mod u;
pub mod witness;

pub use emptiness::{
    gapt_emptiness, gapt_emptiness_stage, gapt_emptiness_trace, gapt_emptiness_with, EmptinessBudget, EmptinessStats,
    EmptinessTrace, LabelGraph, STAGE_WIDTHS,
};
pub use u::{build_u, u_state_count, ExtLetter, UState};
pub use witness::{
    check_annotation, check_promise, check_strategy, worked_example, lasso_traces, smallest_annotation,
    traces_accepting, AnnotationLabel, CompactStrategy, WorkedExample, LassoTrace, NodeMap, PromiseLabel,
    StrategyLabel, TraceKind,
};

use crate::automata::{Direction, ParityCondition, PlusFormula, Transition};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GaptError {
    #[error("transition of state {state} on letter {letter} uses a root direction")]
    RootDirection { state: usize, letter: usize },
    #[error("transition of state {state} on letter {letter} uses grade {grade} above the counting bound {b}")]
    GradeAboveBound { state: usize, letter: usize, grade: u32, b: u32 },
    #[error("transition table has the wrong shape")]
    Shape,
    #[error("parity condition covers {found} states, expected {expected}")]
    ParityShape { expected: usize, found: usize },
    #[error("resource cap exceeded: {what} (limit {limit})")]
    Budget { what: &'static str, limit: usize },
}

/// A 2GAPT over the alphabet `0..alphabet.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gapt2 {
    /// Letter names, used only for display.
    pub alphabet: Vec<String>,
    /// Counting bound.
    pub b: u32,
    /// State names, used only for display.
    pub states: Vec<String>,
    /// `delta[q][σ]`.
    pub delta: Vec<Vec<Transition>>,
    pub init: usize,
    pub acc: ParityCondition,
}

impl Gapt2 {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// A one-state automaton whose only transition is the constant `value`.
    pub fn constant(value: bool, alphabet: Vec<String>) -> Self {
        let delta = vec![vec![PlusFormula::from_bool(value); alphabet.len()]];
        Gapt2 {
            alphabet,
            b: 1,
            states: vec!["q0".into()],
            delta,
            init: 0,
            acc: ParityCondition::with_k(vec![2], 2),
        }
    }

    /// Checks the table shape, the absence of root directions and the grade
    /// bound.
    pub fn validate(&self) -> Result<(), GaptError> {
        if self.delta.len() != self.states.len()
            || self.delta.iter().any(|row| row.len() != self.alphabet.len())
            || self.init >= self.states.len()
        {
            return Err(GaptError::Shape);
        }
        if self.acc.num_states() != self.states.len() {
            return Err(GaptError::ParityShape { expected: self.states.len(), found: self.acc.num_states() });
        }
        for (q, row) in self.delta.iter().enumerate() {
            for (letter, t) in row.iter().enumerate() {
                for m in t.atoms() {
                    if m.dir.is_root() {
                        return Err(GaptError::RootDirection { state: q, letter });
                    }
                    if let Some(grade) = m.dir.grade() {
                        if grade > self.b {
                            return Err(GaptError::GradeAboveBound { state: q, letter, grade, b: self.b });
                        }
                    }
                    if m.state >= self.states.len() {
                        return Err(GaptError::Shape);
                    }
                }
            }
        }
        Ok(())
    }

    /// Does any transition move to the parent?
    pub fn moves_up(&self) -> bool {
        self.delta.iter().flatten().any(|t| t.atoms().iter().any(|m| m.dir == Direction::Up))
    }

    /// JSON dump: alphabet, states, transition text forms and parity indexes.
    pub fn to_json(&self) -> serde_json::Value {
        automaton_json(&self.alphabet, self.b, &self.states, &self.delta, self.init, &self.acc)
    }
}

/// Shared JSON layout of alternating tree automata.
pub(crate) fn automaton_json(
    alphabet: &[String],
    b: u32,
    states: &[String],
    delta: &[Vec<Transition>],
    init: usize,
    acc: &ParityCondition,
) -> serde_json::Value {
    let transitions: serde_json::Map<String, serde_json::Value> = states
        .iter()
        .enumerate()
        .map(|(q, name)| {
            let row: serde_json::Map<String, serde_json::Value> = alphabet
                .iter()
                .enumerate()
                .map(|(l, letter)| (letter.clone(), json!(transition_text(&delta[q][l], states))))
                .collect();
            (name.clone(), serde_json::Value::Object(row))
        })
        .collect();
    json!({
        "alphabet": alphabet,
        "b": b,
        "states": states,
        "init": states[init],
        "index": states.iter().enumerate().map(|(q, s)| (s.clone(), json!(acc.index(q)))).collect::<serde_json::Map<_, _>>(),
        "k": acc.k(),
        "transitions": transitions,
    })
}

/// Text form of a transition with state names.
pub fn transition_text(t: &Transition, states: &[String]) -> String {
    t.map(&mut |m| NamedMove(m.dir, states[m.state].clone())).to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct NamedMove(Direction, String);

impl std::fmt::Display for NamedMove {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::Move;

    #[test]
    fn validation_rejects_root_moves_and_large_grades() {
        let mut a = Gapt2::constant(true, vec!["a".into()]);
        assert!(a.validate().is_ok());
        a.delta[0][0] = PlusFormula::atom(Move::new(Direction::SomeRoot, 0));
        assert_eq!(a.validate(), Err(GaptError::RootDirection { state: 0, letter: 0 }));
        a.delta[0][0] = PlusFormula::atom(Move::new(Direction::AtLeast(3), 0));
        assert!(matches!(a.validate(), Err(GaptError::GradeAboveBound { grade: 3, .. })));
    }

    #[test]
    fn json_dump_names_states() {
        let mut a = Gapt2::constant(true, vec!["a".into()]);
        a.delta[0][0] = PlusFormula::atom(Move::new(Direction::AllBut(0), 0));
        let j = a.to_json();
        assert_eq!(j["transitions"]["q0"]["a"], "([0],q0)");
        assert_eq!(j["index"]["q0"], 2);
    }
}
