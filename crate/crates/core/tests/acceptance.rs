//! Acceptance suite. Prints one `PASS` or `FAIL` line per criterion and exits
//! with status 1 if any criterion fails.

use gmu_core::automata::{Direction, Move, ParityCondition, PlusFormula, Transition};
use gmu_core::fea::{fea_to_gapt, small_forests, tree_encoding_of_forest, Fea};
use gmu_core::formula::{random_sentence, RandomFormulaConfig};
use gmu_core::gapt::witness::worked_example;
use gmu_core::gapt::{build_u, u_state_count, Gapt2};
use gmu_core::games::{random_game, solve_naive, solve_zielonka, strategy_is_valid, ParityGame, Player};
use gmu_core::gnpt::{
    intersect_forall_safety, intersect_safety, is_mother_constraint, is_mother_oracle, to_omega, to_single_alphabet,
    weight, word_satisfies, BBound, BoolFormula, Constraint, Flavor, Gnpt,
};
use gmu_core::kripke::{bounded_model_search, eval_all, random_structure};
use gmu_core::words::{codeterminize, dpw_membership, npw_membership, Npw};
use gmu_core::{decide, parse, Budget, Formula, Program, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

/// Outcome of one criterion: pass flag and a one-line detail.
type Outcome = (bool, String);

/// A named criterion.
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("weight and counting constraint golden example", c1_weight_golden),
        ("worked strategy example and perturbations", c2_strategy_golden),
        ("regression verdicts", c3_regression),
        ("oracle agreement on random sentences", c4_oracle_agreement),
        ("is_mother counter method vs count oracle", c5_is_mother),
        ("semantic dualities", c6_dualities),
        ("FEA to 2GAPT reduction on small forests", c7_fea_reduction),
        ("Zielonka vs naive parity game solver", c8_games),
        ("co-determinization on lassos", c9_codeterminization),
        ("construction state counts", c10_arithmetic),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = run();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:2}: {} {name} ({}; {:.2?})",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            detail.trim_end(),
            start.elapsed()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn set(xs: &[usize]) -> BTreeSet<usize> {
    xs.iter().copied().collect()
}

fn c1_weight_golden() -> Outcome {
    let y = BoolFormula::var;
    let c: Constraint = vec![
        (BoolFormula::or(y(1), BoolFormula::not(y(2))), BBound::le(3)),
        (y(3), BBound::le(2)),
        (BoolFormula::and(y(1), y(3)), BBound::gt(1)),
    ];
    let t1 = vec![set(&[]), set(&[1]), set(&[2]), set(&[1, 3])];
    let t2 = vec![set(&[2]), set(&[1]), set(&[1, 2, 3]), set(&[1, 3])];
    let w = weight(&set(&[1, 2]), &[1, 2, 4, 1]);
    let (s1, s2) = (word_satisfies(&c, &t1), word_satisfies(&c, &t2));
    (w == 3 && !s1 && s2, format!("weight {w}, t1 {s1}, t2 {s2}"))
}

fn c2_strategy_golden() -> Outcome {
    let f = worked_example();
    let golden = f.verdicts() == (true, true, true);
    let perturbations = f.perturbations();
    let flipped = perturbations
        .iter()
        .filter(|(_, p)| {
            let (s, r, a) = p.verdicts();
            !(s && r && a)
        })
        .count();
    (golden && perturbations.len() == 5 && flipped == 5, format!("golden {golden}, {flipped}/{} perturbations flip", perturbations.len()))
}

fn c3_regression() -> Outcome {
    let cases = [
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
    let mut wrong = Vec::new();
    let mut slowest = Duration::ZERO;
    for (text, expect) in cases {
        let phi = parse(text).expect("regression formulas parse");
        let start = Instant::now();
        let got = decide(&phi, &Budget::default()).map(|d| d.verdict);
        let dt = start.elapsed();
        slowest = slowest.max(dt);
        if got.as_ref().ok() != Some(&expect) || dt > Duration::from_secs(60) {
            wrong.push(format!("{text}: {got:?} in {dt:.1?}"));
        }
    }
    (wrong.is_empty(), format!("{} of {} correct, slowest {slowest:.2?} {}", cases.len() - wrong.len(), cases.len(), wrong.join("; ")))
}

fn c4_oracle_agreement() -> Outcome {
    const SENTENCES: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let budget = Budget { timeout: Some(Duration::from_secs(20)), ..Budget::default() };
    let (mut sat, mut unsat, mut indeterminate, mut violations) = (0, 0, 0, Vec::new());
    let start = Instant::now();
    for i in 0..SENTENCES {
        let hybrid = i % 2 == 1;
        let cfg = RandomFormulaConfig {
            max_length: 12,
            max_grade: 2,
            props: vec!["p".into(), "q".into()],
            nominals: if hybrid { vec!["o".into()] } else { Vec::new() },
            programs: if hybrid { vec![Program::new("a")] } else { vec![Program::new("a"), Program::inverse_of("a")] },
        };
        let phi = random_sentence(&mut rng, &cfg);
        let verdict = match decide(&phi, &budget) {
            Ok(d) => d.verdict,
            Err(e) => {
                violations.push(format!("{phi}: {e}"));
                continue;
            }
        };
        let model = bounded_model_search(&phi, 4).is_some();
        match verdict {
            Verdict::Sat => sat += 1,
            Verdict::Unsat => unsat += 1,
            Verdict::Indeterminate => indeterminate += 1,
        }
        if model && verdict != Verdict::Sat {
            violations.push(format!("{phi}: {verdict} with an oracle model"));
        }
    }
    let in_time = start.elapsed() < Duration::from_secs(30 * 60);
    (
        violations.is_empty() && in_time,
        format!(
            "{SENTENCES} sentences: {sat} SAT, {unsat} UNSAT, {indeterminate} INDETERMINATE, {} violations {}",
            violations.len(),
            violations.join("; ")
        ),
    )
}

/// All multisets of `items` with at most `max` elements, the empty one
/// included, as nondecreasing sequences.
fn multisets<T: Clone>(items: &[T], max: usize) -> Vec<Vec<T>> {
    fn go<T: Clone>(items: &[T], start: usize, max: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        out.push(cur.clone());
        if cur.len() == max {
            return;
        }
        for i in start..items.len() {
            cur.push(items[i].clone());
            go(items, i, max, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, 0, max, &mut Vec::new(), &mut out);
    out
}

fn c5_is_mother() -> Outcome {
    let y = BoolFormula::var;
    let thetas = [y(0), BoolFormula::not(y(0)), y(1), BoolFormula::and(y(0), y(1)), BoolFormula::True];
    let letters: Vec<BTreeSet<usize>> = vec![set(&[]), set(&[0]), set(&[1]), set(&[0, 1])];
    let mut ps: Vec<Vec<BTreeSet<usize>>> = Vec::new();
    for mask in 1u32..16 {
        if mask.count_ones() <= 3 {
            ps.push((0..4).filter(|i| mask >> i & 1 == 1).map(|i| letters[i].clone()).collect());
        }
    }
    let (mut checked, mut disagreements) = (0usize, Vec::new());
    for b in 0..=3u32 {
        let pairs: Vec<(BoolFormula, BBound)> = thetas
            .iter()
            .flat_map(|t| (0..=b).flat_map(move |n| [(t.clone(), BBound::gt(n)), (t.clone(), BBound::le(n))]))
            .collect();
        for c in multisets(&pairs, 3) {
            for p in &ps {
                checked += 1;
                if is_mother_constraint(&c, p, b) != is_mother_oracle(&c, p, b) {
                    disagreements.push(format!("b={b} |P|={} |C|={}", p.len(), c.len()));
                }
            }
        }
    }
    (disagreements.is_empty(), format!("{checked} instances, {} disagreements {}", disagreements.len(), disagreements.join("; ")))
}

fn c6_dualities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = RandomFormulaConfig {
        max_length: 12,
        max_grade: 2,
        props: vec!["p".into(), "q".into()],
        nominals: vec!["o".into()],
        programs: vec![Program::new("a"), Program::inverse_of("a"), Program::new("b")],
    };
    let programs: Vec<String> = vec!["a".into(), "b".into()];
    let mut failures = Vec::new();
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let k = random_structure(&mut rng, n, &programs, &cfg.props, &cfg.nominals, 0.35);
        let phi = random_sentence(&mut rng, &cfg);
        let all: BTreeSet<usize> = (0..n).collect();
        let den = eval_all(&k, &phi).expect("sentences evaluate");
        let neg = eval_all(&k, &phi.negate_dual()).expect("sentences evaluate");
        if neg != all.difference(&den).copied().collect() {
            failures.push(format!("complement of {phi}"));
        }
        let grade = rng.gen_range(0..=2);
        for prog in &cfg.programs {
            let lhs = Formula::at_least(grade, prog.clone(), phi.clone()).negate_dual();
            let rhs = Formula::all_but(grade, prog.clone(), phi.negate_dual());
            if eval_all(&k, &lhs).ok() != eval_all(&k, &rhs).ok() {
                failures.push(format!("graded duality of {phi} at <{grade},{prog}>"));
            }
        }
        let mut fixpoints = Vec::new();
        phi.visit(&mut |f| {
            if f.is_fixpoint() && f.is_sentence() {
                fixpoints.push(f.clone())
            }
        });
        for f in fixpoints {
            if eval_all(&k, &f).ok() != eval_all(&k, &f.unfold().expect("fixpoints unfold")).ok() {
                failures.push(format!("unfolding of {f}"));
            }
        }
    }
    (failures.is_empty(), format!("100 pairs, {} failures {}", failures.len(), failures.join("; ")))
}

fn mv(d: Direction, q: usize) -> Transition {
    PlusFormula::atom(Move::new(d, q))
}

fn fea(b: u32, delta: Vec<Vec<Transition>>, index: Vec<usize>) -> Fea {
    Fea {
        alphabet: vec!["x".into(), "y".into()],
        b,
        states: (0..delta.len()).map(|q| format!("q{q}")).collect(),
        delta,
        init: 0,
        acc: ParityCondition::from_indices(index),
    }
}

/// Ten automata over the letters `x = 0` and `y = 1` that exercise every
/// kind of move.
fn hand_built_feas() -> Vec<(&'static str, Fea)> {
    use Direction::*;
    let t = PlusFormula::True;
    let f = PlusFormula::False;
    vec![
        ("some root reads x", fea(0, vec![vec![t.clone(), f.clone()]], vec![2])),
        ("every root reads y", fea(0, vec![vec![mv(AllRoots, 1), mv(AllRoots, 1)], vec![f.clone(), t.clone()]], vec![2, 2])),
        ("every node reads x", fea(0, vec![vec![mv(AllBut(0), 0), f.clone()]], vec![2])),
        ("two children read y", fea(1, vec![vec![mv(AtLeast(1), 1), mv(AtLeast(1), 1)], vec![f.clone(), t.clone()]], vec![2, 2])),
        (
            "all but one child reads x",
            fea(1, vec![vec![mv(AllBut(1), 1), mv(AllBut(1), 1)], vec![t.clone(), f.clone()]], vec![2, 2]),
        ),
        (
            "some y below the root, least fixpoint",
            fea(
                0,
                vec![vec![mv(AtLeast(0), 1), mv(AtLeast(0), 1)], vec![mv(AtLeast(0), 1), t.clone()]],
                vec![2, 1],
            ),
        ),
        (
            "a child whose parent reads x",
            fea(0, vec![vec![mv(AtLeast(0), 1), mv(AtLeast(0), 1)], vec![mv(Up, 2), mv(Up, 2)], vec![t.clone(), f.clone()]], vec![2, 2, 2]),
        ),
        (
            "stay loop rejected",
            fea(0, vec![vec![PlusFormula::or(mv(Here, 0), mv(AtLeast(0), 1)), t.clone()], vec![t.clone(), f.clone()]], vec![1, 2]),
        ),
        (
            "a y root and another root with an x child",
            fea(
                0,
                vec![
                    vec![f.clone(), PlusFormula::and(mv(SomeRoot, 1), mv(AllRoots, 2))],
                    vec![mv(AtLeast(0), 2), f.clone()],
                    vec![t.clone(), t.clone()],
                ],
                vec![2, 2, 2],
            ),
        ),
        (
            "up and down between roots",
            fea(
                1,
                vec![
                    vec![mv(AtLeast(0), 1), PlusFormula::and(mv(AllRoots, 2), mv(AtLeast(1), 2))],
                    vec![mv(Up, 2), PlusFormula::or(mv(Up, 0), mv(SomeRoot, 2))],
                    vec![PlusFormula::or(mv(AllBut(1), 2), mv(Here, 2)), t.clone()],
                ],
                vec![2, 1, 2],
            ),
        ),
    ]
}

/// Largest forest size used for criterion 7. The full grid of depth 3 and
/// branching 3 has billions of forests.
const FOREST_NODES: usize = 7;

fn c7_fea_reduction() -> Outcome {
    let forests = small_forests(FOREST_NODES, 3, 3, 2);
    let mut failures = Vec::new();
    for (name, a) in hand_built_feas() {
        a.validate().expect("hand-built automata are well formed");
        let g = fea_to_gapt(&a);
        if g.num_states() != 3 * a.num_states() + 2 {
            failures.push(format!("{name}: {} states", g.num_states()));
        }
        let root = a.alphabet.len();
        let mut accepted = 0;
        for f in &forests {
            let lhs = a.accepts(f);
            accepted += lhs as usize;
            if lhs != g.accepts(&tree_encoding_of_forest(f, root)) {
                failures.push(format!("{name} on {:?}", f.labels));
                break;
            }
        }
        if accepted == 0 || accepted == forests.len() {
            failures.push(format!("{name}: trivial on the grid"));
        }
    }
    (
        failures.is_empty(),
        format!("10 automata, {} forests of at most {FOREST_NODES} nodes, {} failures {}", forests.len(), failures.len(), failures.join("; ")),
    )
}

/// The dual game: owners swapped and priorities shifted by one.
fn dual(g: &ParityGame) -> ParityGame {
    ParityGame {
        owner: g.owner.iter().map(|p| p.opponent()).collect(),
        edges: g.edges.clone(),
        priority: g.priority.iter().map(|p| p + 1).collect(),
        terminal: g.terminal.iter().map(|t| t.map(Player::opponent)).collect(),
    }
}

fn c8_games() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    for i in 0..500 {
        let g = random_game(&mut rng, 8, 4);
        let z = solve_zielonka(&g).expect("random games have no dead ends");
        if z.winner != solve_naive(&g).expect("random games have no dead ends") {
            failures.push(format!("game {i}: solvers disagree"));
        }
        let d = solve_zielonka(&dual(&g)).expect("dual games have no dead ends");
        let determined = z.winner.iter().zip(&d.winner).all(|(&w, &v)| v == w.opponent())
            && z.region(Player::Protagonist).len() + z.region(Player::Antagonist).len() == g.len();
        if !determined {
            failures.push(format!("game {i}: dual game is not complementary"));
        }
        if !strategy_is_valid(&g, &z) || !strategy_is_valid(&dual(&g), &d) {
            failures.push(format!("game {i}: invalid strategy"));
        }
    }
    (failures.is_empty(), format!("500 games, {} failures {}", failures.len(), failures.join("; ")))
}

fn lassos() -> Vec<(Vec<usize>, Vec<usize>)> {
    let words = |min: usize| -> Vec<Vec<usize>> {
        (min..=3).flat_map(|len| (0..1usize << len).map(move |m| (0..len).map(|i| m >> i & 1).collect())).collect()
    };
    let mut out = Vec::new();
    for u in words(0) {
        for v in words(1) {
            out.push((u.clone(), v));
        }
    }
    out
}

fn c9_codeterminization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let lassos = lassos();
    let mut violations = 0;
    let mut failures = Vec::new();
    for i in 0..50 {
        let n = rng.gen_range(1..=3);
        let delta = (0..n).map(|_| (0..2).map(|_| (0..n).filter(|_| rng.gen_bool(0.45)).collect()).collect()).collect();
        let acc = ParityCondition::from_indices((0..n).map(|_| rng.gen_range(0..=4)).collect());
        let a = Npw { num_letters: 2, delta, init: 0, acc };
        let c = match codeterminize(&a, 100_000) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("automaton {i}: {e}"));
                continue;
            }
        };
        for (u, v) in &lassos {
            let ok = match (npw_membership(&a, u, v), dpw_membership(&c, u, v)) {
                (Ok(x), Ok(y)) => x != y,
                _ => false,
            };
            if !ok {
                violations += 1;
            }
        }
    }
    (
        violations == 0 && failures.is_empty(),
        format!("50 automata, {} lassos each, {violations} violations {}", lassos.len(), failures.join("; ")),
    )
}

/// A Safety GNPT with `n` states and `letters` letters whose constraints are
/// all empty.
fn safety(n: usize, letters: usize) -> Gnpt {
    Gnpt {
        num_vars: n,
        alphabet: (0..letters).map(|l| set(&[l])).collect(),
        b: 1,
        states: (0..n).map(|q| set(&[q])).collect(),
        delta: vec![vec![Vec::new(); letters]; n],
        init: 0,
        acc: ParityCondition::from_indices(vec![0; n]),
        flavor: Flavor::Safety,
    }
}

fn c10_arithmetic() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |what: &str, got: usize, want: usize| {
        if got != want {
            failures.push(format!("{what}: {got} != {want}"));
        }
    };
    let (s2, s3) = (safety(2, 2), safety(3, 2));
    check("Safety x Safety", intersect_safety(&s2, &s3).expect("both are Safety").num_states(), 6);
    let states: Vec<BTreeSet<usize>> = (0..4).map(|q| set(&[q])).collect();
    let next = vec![vec![1, 2], vec![2, 3], vec![3, 0], vec![0, 1]];
    let forall = Gnpt::forall(4, states, s3.alphabet.clone(), &next, 0, ParityCondition::from_indices(vec![1, 2, 3, 2]));
    check("Forall x Safety", intersect_forall_safety(&forall, &s3).expect("Forall and Safety").num_states(), 12);
    let single = to_single_alphabet(&s3);
    check("single alphabet", single.num_states(), 3 * 2 + 1);
    check("omega padding", to_omega(&single).num_states(), single.num_states() + 1);
    let k = 3;
    let a = Gapt2 {
        alphabet: vec!["x".into()],
        b: 0,
        states: vec!["q0".into(), "q1".into(), "q2".into()],
        delta: vec![vec![mv(Direction::AtLeast(0), 1)], vec![mv(Direction::AllBut(0), 2)], vec![PlusFormula::True]],
        init: 0,
        acc: ParityCondition::with_k(vec![1, 2, 3], k),
    };
    check("U states", u_state_count(&a), 3 * 3 * k + 1);
    check("U built", build_u(&a, &[]).num_states(), 3 * 3 * k + 1);
    (failures.is_empty(), format!("{} mismatches {}", failures.len(), failures.join("; ")))
}
