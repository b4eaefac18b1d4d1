//! Command-line front end of the graded μ-calculus toolkit.
//!
//! The binary `gmu` parses its arguments with [`Cli`] and hands them to
//! [`run`], which returns the exit code and the text to print. Exit codes
//! follow the verdict: 0 for SAT (or a positive answer), 1 for UNSAT (or a
//! negative answer), 2 for INDETERMINATE and 3 for errors.

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use gmu_core::fea::fea_to_gapt;
use gmu_core::formula::{enumerate_guesses, random_sentence, Guess, RandomFormulaConfig};
use gmu_core::gapt::witness::worked_example;
use gmu_core::gapt::{gapt_emptiness_trace, EmptinessBudget, Gapt2};
use gmu_core::gnpt::{weight, word_satisfies, BBound, BoolFormula};
use gmu_core::kripke::{bounded_model_search, holds, KripkeError};
use gmu_core::translate::{
    decide_full_graded, decide_hybrid_graded, formula_to_fea, formula_to_gapt, DecisionStats, TranslateError,
};
use gmu_core::{decide, parse, Budget, Decision, Formula, FragmentId, KripkeStructure, Program, Verdict};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const EXIT_SAT: i32 = 0;
pub const EXIT_UNSAT: i32 = 1;
pub const EXIT_INDETERMINATE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

/// Largest model size the oracle command accepts.
pub const MAX_ORACLE_SIZE: usize = 6;

#[derive(Debug, Parser)]
#[command(name = "gmu", version, about = "Satisfiability and model checking for the graded mu-calculus")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed of the random checks run by `selftest`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Game vertices explored per emptiness check.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub max_states: usize,
    /// Guesses examined for formulas with nominals.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub max_guesses: usize,
    /// Wall-clock limit in seconds; no limit when absent.
    #[arg(long, global = true)]
    pub timeout_secs: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide satisfiability of a sentence.
    Sat {
        /// Decision procedure to use; by default it follows the formula.
        #[arg(long, value_enum)]
        fragment: Option<FragmentArg>,
        #[command(flatten)]
        input: Input,
    },
    /// Check whether a sentence holds at a state of a Kripke structure.
    Modelcheck {
        /// Kripke structure in JSON.
        #[arg(long)]
        model: PathBuf,
        /// Name of the state.
        #[arg(long)]
        state: String,
        #[command(flatten)]
        input: Input,
    },
    /// Search all structures up to a size for a model.
    Oracle {
        /// Largest number of states tried.
        #[arg(long, default_value_t = 4)]
        max_size: usize,
        #[command(flatten)]
        input: Input,
    },
    /// Write the intermediate objects of the pipeline to a directory.
    Dump {
        #[arg(long, value_enum)]
        stage: Stage,
        /// Output directory, created if missing.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// For formulas with nominals: position of the guess among the
        /// locally consistent ones.
        #[arg(long, default_value_t = 0)]
        guess: usize,
        #[command(flatten)]
        input: Input,
    },
    /// Run the built-in checks.
    Selftest {
        /// Random sentences compared against the oracle.
        #[arg(long, default_value_t = 20)]
        random: usize,
    },
}

/// A formula given inline or in a file.
#[derive(Debug, Args)]
#[command(group(ArgGroup::new("formula").required(true).args(["expr", "file"])))]
pub struct Input {
    /// The formula text.
    #[arg(short = 'e', long = "expr")]
    pub expr: Option<String>,
    /// A file holding the formula.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FragmentArg {
    FullGraded,
    HybridGraded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    /// The 2GAPT (one per guess for formulas with nominals).
    Gapt,
    /// The label graph of the emptiness check.
    Gnpt,
    /// The product parity game of the emptiness check.
    Game,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("formula is in fragment {found:?}, outside {wanted:?}")]
    FragmentMismatch { found: FragmentId, wanted: FragmentArg },
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Kripke(#[from] KripkeError),
    #[error("{0}")]
    Usage(String),
}

/// Verdict field of a [`RunReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReportVerdict {
    Sat,
    Unsat,
    Indeterminate,
    Error,
}

impl From<Verdict> for ReportVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Sat => ReportVerdict::Sat,
            Verdict::Unsat => ReportVerdict::Unsat,
            Verdict::Indeterminate => ReportVerdict::Indeterminate,
        }
    }
}

impl ReportVerdict {
    pub fn exit_code(self) -> i32 {
        match self {
            ReportVerdict::Sat => EXIT_SAT,
            ReportVerdict::Unsat => EXIT_UNSAT,
            ReportVerdict::Indeterminate => EXIT_INDETERMINATE,
            ReportVerdict::Error => EXIT_ERROR,
        }
    }
}

/// The JSON report of `gmu sat`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub verdict: ReportVerdict,
    pub fragment: Option<FragmentId>,
    pub stats: Option<DecisionStats>,
    pub version: String,
    pub input: String,
    pub error: Option<String>,
}

impl RunReport {
    fn new(input: &str) -> Self {
        RunReport {
            verdict: ReportVerdict::Error,
            fragment: None,
            stats: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input: input.to_string(),
            error: None,
        }
    }
}

/// Exit code and standard output of a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

impl Outcome {
    fn new(code: i32, stdout: String) -> Self {
        Outcome { code, stdout }
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Outcome {
    let result = match &cli.command {
        Command::Sat { fragment, input } => return cmd_sat(cli, *fragment, input),
        Command::Modelcheck { model, state, input } => cmd_modelcheck(cli, model, state, input),
        Command::Oracle { max_size, input } => cmd_oracle(cli, *max_size, input),
        Command::Dump { stage, out, guess, input } => cmd_dump(cli, *stage, out, *guess, input),
        Command::Selftest { random } => Ok(cmd_selftest(cli, *random)),
    };
    result.unwrap_or_else(|e| error_outcome(cli, &e))
}

fn error_outcome(cli: &Cli, e: &CliError) -> Outcome {
    let text = if cli.json { serde_json::json!({ "error": e.to_string() }).to_string() } else { format!("error: {e}") };
    Outcome::new(EXIT_ERROR, text + "\n")
}

fn read_input(input: &Input) -> Result<String, CliError> {
    match (&input.expr, &input.file) {
        (Some(e), _) => Ok(e.clone()),
        (None, Some(p)) => read_file(p),
        (None, None) => Err(CliError::Usage("give a formula with -e or a file".into())),
    }
}

fn read_file(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::Io { path: p.display().to_string(), msg: e.to_string() })
}

fn parse_formula(text: &str) -> Result<Formula, CliError> {
    parse(text.trim()).map_err(|e| CliError::Parse(e.to_string()))
}

fn budget(cli: &Cli) -> Budget {
    Budget {
        max_states: cli.max_states,
        max_guesses: cli.max_guesses,
        timeout: cli.timeout_secs.map(Duration::from_secs),
    }
}

fn check_fragment(phi: &Formula, wanted: FragmentArg) -> Result<(), CliError> {
    let found = phi.fragment_of();
    let ok = match wanted {
        FragmentArg::FullGraded => matches!(found, FragmentId::Graded | FragmentId::FullGraded),
        FragmentArg::HybridGraded => matches!(found, FragmentId::Graded | FragmentId::HybridGraded),
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::FragmentMismatch { found, wanted })
    }
}

/// Decides a formula text under the caps of `cli`.
pub fn decide_text(cli: &Cli, text: &str, fragment: Option<FragmentArg>) -> Result<Decision, CliError> {
    let phi = parse_formula(text)?;
    let b = budget(cli);
    Ok(match fragment {
        None => decide(&phi, &b)?,
        Some(f) => {
            check_fragment(&phi, f)?;
            match f {
                FragmentArg::FullGraded => decide_full_graded(&phi, &b)?,
                FragmentArg::HybridGraded => decide_hybrid_graded(&phi, &b)?,
            }
        }
    })
}

fn cmd_sat(cli: &Cli, fragment: Option<FragmentArg>, input: &Input) -> Outcome {
    let text = match read_input(input) {
        Ok(t) => t,
        Err(e) => return error_outcome(cli, &e),
    };
    let mut report = RunReport::new(text.trim());
    match decide_text(cli, &text, fragment) {
        Ok(d) => {
            report.verdict = d.verdict.into();
            report.fragment = Some(d.fragment);
            report.stats = Some(d.stats);
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    let stdout = if cli.json {
        serde_json::to_string_pretty(&report).expect("reports serialize") + "\n"
    } else {
        let mut s = String::new();
        match (&report.verdict, &report.error) {
            (ReportVerdict::Error, Some(e)) => {
                let _ = writeln!(s, "ERROR: {e}");
            }
            (v, _) => {
                let v = serde_json::to_value(v).expect("verdicts serialize");
                let _ = writeln!(s, "{}", v.as_str().unwrap_or_default());
                if let Some(reason) = report.stats.as_ref().and_then(|st| st.reason.as_ref()) {
                    let _ = writeln!(s, "reason: {reason}");
                }
            }
        }
        s
    };
    Outcome::new(report.verdict.exit_code(), stdout)
}

fn cmd_modelcheck(cli: &Cli, model: &Path, state: &str, input: &Input) -> Result<Outcome, CliError> {
    let text = read_input(input)?;
    let phi = parse_formula(&text)?;
    let k = KripkeStructure::from_json(&read_file(model)?)?;
    k.validate()?;
    let w = k.state(state)?;
    let h = holds(&k, w, &phi)?;
    let stdout = if cli.json {
        serde_json::json!({ "holds": h, "state": state, "formula": phi.to_string() }).to_string() + "\n"
    } else if h {
        format!("holds at {state}\n")
    } else {
        format!("does not hold at {state}\n")
    };
    Ok(Outcome::new(if h { EXIT_SAT } else { EXIT_UNSAT }, stdout))
}

fn cmd_oracle(cli: &Cli, max_size: usize, input: &Input) -> Result<Outcome, CliError> {
    let phi = parse_formula(&read_input(input)?)?;
    if max_size > MAX_ORACLE_SIZE {
        return Err(CliError::Usage(format!("--max-size is at most {MAX_ORACLE_SIZE}")));
    }
    if max_size * max_size * phi.atomic_programs().len() >= 64 {
        return Err(CliError::Usage("too many edge combinations for the exhaustive search".into()));
    }
    let found = bounded_model_search(&phi, max_size);
    let stdout = match (&found, cli.json) {
        (Some((k, w)), true) => {
            let model: serde_json::Value = serde_json::from_str(&k.to_json()).expect("structures serialize");
            serde_json::json!({ "found": true, "state": k.name(*w), "model": model }).to_string() + "\n"
        }
        (None, true) => serde_json::json!({ "found": false, "max_size": max_size }).to_string() + "\n",
        (Some((k, w)), false) => format!("model with {} states, formula holds at {}:\n{}\n", k.len(), k.name(*w), k.to_json()),
        (None, false) => format!("none up to {max_size} states\n"),
    };
    Ok(Outcome::new(if found.is_some() { EXIT_SAT } else { EXIT_UNSAT }, stdout))
}

/// The automaton dumped for a formula: the 2GAPT of a formula without
/// nominals, or the FEA and its 2GAPT for the selected guess.
fn dump_automaton(phi: &Formula, guess: usize, files: &mut Vec<(String, String)>) -> Result<Gapt2, CliError> {
    match phi.fragment_of() {
        FragmentId::Graded | FragmentId::FullGraded => Ok(formula_to_gapt(phi)?),
        FragmentId::HybridGraded => {
            let guesses: Vec<Guess> = enumerate_guesses(phi).filter(|g| g.is_locally_consistent()).collect();
            let g = guesses.get(guess).ok_or_else(|| {
                CliError::Usage(format!("guess {guess} out of range: {} locally consistent guesses", guesses.len()))
            })?;
            let fea = formula_to_fea(phi, g)?;
            files.push(("guess.json".into(), serde_json::to_string_pretty(g).expect("guesses serialize")));
            files.push(("fea.json".into(), serde_json::to_string_pretty(&fea.to_json()).expect("values serialize")));
            Ok(fea_to_gapt(&fea))
        }
        found => Err(TranslateError::WrongFragment { found }.into()),
    }
}

fn cmd_dump(cli: &Cli, stage: Stage, out: &Path, guess: usize, input: &Input) -> Result<Outcome, CliError> {
    let phi = parse_formula(&read_input(input)?)?;
    let mut files: Vec<(String, String)> = Vec::new();
    let a = dump_automaton(&phi, guess, &mut files)?;
    let mut nonempty = None;
    match stage {
        Stage::Gapt => {
            files.push(("gapt.json".into(), serde_json::to_string_pretty(&a.to_json()).expect("values serialize")));
        }
        Stage::Gnpt | Stage::Game => {
            let eb = EmptinessBudget {
                max_states: cli.max_states,
                deadline: cli.timeout_secs.map(|t| Instant::now() + Duration::from_secs(t)),
                ..EmptinessBudget::default()
            };
            let (res, trace) = gapt_emptiness_trace(&a, &eb);
            nonempty = res.ok();
            if stage == Stage::Gnpt {
                files.push((
                    "label_graph.json".into(),
                    serde_json::to_string_pretty(&trace.label_graph).expect("graphs serialize"),
                ));
            } else if let Some(game) = &trace.game {
                files.push(("game.json".into(), serde_json::to_string_pretty(game).expect("games serialize")));
                files.push(("game.gm".into(), game.to_pgsolver()));
                files.push(("game.dot".into(), game.to_dot()));
            } else {
                files.push(("game.json".into(), "null".into()));
            }
        }
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Io { path: out.display().to_string(), msg: e.to_string() })?;
    let mut written = Vec::new();
    for (name, body) in &files {
        let p = out.join(name);
        std::fs::write(&p, format!("{}\n", body.trim_end())).map_err(|e| CliError::Io { path: p.display().to_string(), msg: e.to_string() })?;
        written.push(p.display().to_string());
    }
    let stdout = if cli.json {
        serde_json::json!({ "states": a.num_states(), "files": written, "nonempty": nonempty }).to_string() + "\n"
    } else {
        let mut s = format!("automaton with {} states over {} letters\n", a.num_states(), a.alphabet.len());
        if let Some(v) = nonempty {
            let _ = writeln!(s, "language {}", if v { "nonempty" } else { "empty" });
        }
        for w in &written {
            let _ = writeln!(s, "wrote {w}");
        }
        s
    };
    Ok(Outcome::new(EXIT_SAT, stdout))
}

/// Formulas with known verdicts, checked by `selftest`.
pub const REGRESSION: &[(&str, Verdict)] = &[
    ("true", Verdict::Sat),
    ("p & !p", Verdict::Unsat),
    ("mu y. y", Verdict::Unsat),
    ("nu y. y", Verdict::Sat),
    ("<0,a> p", Verdict::Sat),
    ("<2,a> true", Verdict::Sat),
    ("[0,a] false & <0,a> true", Verdict::Unsat),
    ("#o", Verdict::Sat),
    ("#o & <0,a> #o", Verdict::Sat),
    ("#o & <0,a> (p1 & !p2 & !#o & <0,a> (p2 & !p1 & !#o & <0,a> #o)) & !p1 & !p2", Verdict::Sat),
];

fn cmd_selftest(cli: &Cli, random: usize) -> Outcome {
    let mut checks: Vec<(String, bool)> = Vec::new();
    let set = |xs: &[usize]| -> BTreeSet<usize> { xs.iter().copied().collect() };
    let y = BoolFormula::var;
    let c = vec![
        (BoolFormula::or(y(1), BoolFormula::not(y(2))), BBound::le(3)),
        (y(3), BBound::le(2)),
        (BoolFormula::and(y(1), y(3)), BBound::gt(1)),
    ];
    let t1 = [set(&[]), set(&[1]), set(&[2]), set(&[1, 3])];
    let t2 = [set(&[2]), set(&[1]), set(&[1, 2, 3]), set(&[1, 3])];
    checks.push((
        "weight and counting constraint example".into(),
        weight(&set(&[1, 2]), &[1, 2, 4, 1]) == 3 && !word_satisfies(&c, &t1) && word_satisfies(&c, &t2),
    ));
    let f = worked_example();
    let flips = f.perturbations().iter().all(|(_, p)| p.verdicts() != (true, true, true));
    checks.push(("worked strategy example".into(), f.verdicts() == (true, true, true) && flips));
    let b = budget(cli);
    for (text, want) in REGRESSION {
        let got = parse(text).ok().and_then(|phi| decide(&phi, &b).ok()).map(|d| d.verdict);
        checks.push((format!("{text} is {want}"), got == Some(*want)));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed);
    let limited = Budget { timeout: Some(cli.timeout_secs.map_or(Duration::from_secs(20), Duration::from_secs)), ..b };
    for i in 0..random {
        let hybrid = i % 2 == 1;
        let cfg = RandomFormulaConfig {
            max_length: 10,
            max_grade: 2,
            props: vec!["p".into()],
            nominals: if hybrid { vec!["o".into()] } else { Vec::new() },
            programs: if hybrid { vec![Program::new("a")] } else { vec![Program::new("a"), Program::inverse_of("a")] },
        };
        let phi = random_sentence(&mut rng, &cfg);
        let verdict = decide(&phi, &limited).map(|d| d.verdict);
        let model = bounded_model_search(&phi, 3).is_some();
        let ok = match verdict {
            Ok(v) => !model || v == Verdict::Sat,
            Err(_) => false,
        };
        checks.push((format!("oracle agreement on {phi}"), ok));
    }
    let passed = checks.iter().filter(|c| c.1).count();
    let stdout = if cli.json {
        let list: Vec<_> = checks.iter().map(|(n, ok)| serde_json::json!({ "check": n, "pass": ok })).collect();
        serde_json::json!({ "passed": passed, "total": checks.len(), "checks": list }).to_string() + "\n"
    } else {
        let mut s = String::new();
        for (n, ok) in &checks {
            let _ = writeln!(s, "{} {n}", if *ok { "PASS" } else { "FAIL" });
        }
        let _ = writeln!(s, "{passed}/{} checks passed", checks.len());
        s
    };
    Outcome::new(if passed == checks.len() { EXIT_SAT } else { EXIT_UNSAT }, stdout)
}
