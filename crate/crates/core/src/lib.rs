//! Satisfiability toolkit for the full graded μ-calculus and the hybrid
//! graded μ-calculus.
//!
//! The crate follows an automata-theoretic pipeline:
//!
//! ```text
//! formula ──► 2GAPT / FEA ──► GNPT ──► 1APW ──► parity game
//! ```
//!
//! * [`formula`] parses formulas, computes closures, alternation levels and
//!   guesses for nominals.
//! * [`kripke`] holds finite Kripke structures, the model checker, the
//!   structural encodings into labeled trees, the pre-model validators and the
//!   bounded model search used as an independent oracle.
//! * [`automata`] supplies positive Boolean transition formulas, directions,
//!   parity conditions and labeled trees shared by all automaton kinds.
//! * [`fea`] and [`gapt`] implement fully enriched automata and two-way graded
//!   alternating parity tree automata together with the strategy, promise and
//!   annotation witnesses.
//! * [`gnpt`] implements counting constraints and graded nondeterministic
//!   parity tree automata, including `is_mother`.
//! * [`words`] provides parity and Büchi word automata and co-determinization.
//! * [`games`] contains parity games, Zielonka's algorithm and a brute-force
//!   cross-check solver.
//! * [`translate`] builds automata from formulas and runs the decision
//!   procedures.

pub mod automata;
pub mod fea;
pub mod formula;
pub mod gapt;
pub mod games;
pub mod gnpt;
pub mod kripke;
pub mod translate;
pub mod words;

pub use formula::{parse, Formula, FragmentId, Program};
pub use kripke::KripkeStructure;
pub use translate::{decide, Budget, Decision, Verdict};
