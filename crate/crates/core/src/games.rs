//! Parity games and 1APW emptiness.
//!
//! Priorities follow the min-even convention: a play is won by the
//! Protagonist when the least priority seen infinitely often is even. An
//! automaton index maps to the same number as a priority, so "least index
//! visited infinitely often is even" and "Protagonist wins" coincide.

use crate::automata::{ParityCondition, PlusFormula};
use crate::words::even_cycle_in_graph;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Player {
    Protagonist,
    Antagonist,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Protagonist => Player::Antagonist,
            Player::Antagonist => Player::Protagonist,
        }
    }

    /// The player who likes a priority.
    pub fn of_priority(p: usize) -> Player {
        if p % 2 == 0 {
            Player::Protagonist
        } else {
            Player::Antagonist
        }
    }

    fn idx(self) -> usize {
        match self {
            Player::Protagonist => 0,
            Player::Antagonist => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("vertex {0} has no successors and is not a terminal")]
    DeadEnd(usize),
    #[error("game has {0} vertices, more than the naive solver accepts")]
    TooLarge(usize),
    #[error("budget of {0} game vertices exceeded")]
    Budget(usize),
}

/// A finite parity game. A vertex with `terminal[v] = Some(p)` is won
/// immediately by `p` and needs no successors.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParityGame {
    pub owner: Vec<Player>,
    pub edges: Vec<Vec<usize>>,
    pub priority: Vec<usize>,
    pub terminal: Vec<Option<Player>>,
}

impl ParityGame {
    pub fn add_vertex(&mut self, owner: Player, priority: usize) -> usize {
        self.owner.push(owner);
        self.edges.push(Vec::new());
        self.priority.push(priority);
        self.terminal.push(None);
        self.owner.len() - 1
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    pub fn validate(&self) -> Result<(), GameError> {
        for v in 0..self.len() {
            if self.terminal[v].is_none() && self.edges[v].is_empty() {
                return Err(GameError::DeadEnd(v));
            }
        }
        Ok(())
    }

    /// Replaces terminals by self-loops of priority 0 (Protagonist) or 1
    /// (Antagonist).
    fn normalized(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        let mut edges = self.edges.clone();
        let mut pri = self.priority.clone();
        for v in 0..self.len() {
            if let Some(w) = self.terminal[v] {
                edges[v] = vec![v];
                pri[v] = w.idx();
            }
        }
        (edges, pri)
    }

    /// Graphviz rendering: Protagonist vertices are ellipses, Antagonist
    /// vertices are boxes, each labeled `vertex:priority`. Terminals are
    /// labeled with their winner instead of a priority.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph game {\n");
        for v in 0..self.len() {
            let shape = match self.owner[v] {
                Player::Protagonist => "ellipse",
                Player::Antagonist => "box",
            };
            let label = match self.terminal[v] {
                Some(Player::Protagonist) => format!("{v}:win P"),
                Some(Player::Antagonist) => format!("{v}:win A"),
                None => format!("{v}:{}", self.priority[v]),
            };
            let _ = writeln!(out, "  v{v} [shape={shape}, label=\"{label}\"];");
            for w in &self.edges[v] {
                let _ = writeln!(out, "  v{v} -> v{w};");
            }
        }
        out.push_str("}\n");
        out
    }

    /// Dump in PGSolver's text format. PGSolver reads max-parity games, so
    /// a priority `p` is written as `M − p` with `M` the least even number
    /// above every priority; owner 0 is the Protagonist.
    pub fn to_pgsolver(&self) -> String {
        let (edges, pri) = self.normalized();
        let max = pri.iter().copied().max().unwrap_or(0);
        let m = if max % 2 == 0 { max } else { max + 1 };
        let mut out = String::new();
        let _ = writeln!(out, "parity {};", self.len().saturating_sub(1));
        for v in 0..self.len() {
            let succ: Vec<String> = edges[v].iter().map(|s| s.to_string()).collect();
            let _ = writeln!(out, "{} {} {} {};", v, m - pri[v], self.owner[v].idx(), succ.join(","));
        }
        out
    }
}

/// Winning regions and positional strategies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub winner: Vec<Player>,
    /// For every vertex owned by its winner, a successor that keeps the play
    /// in the winning region. Terminals have none.
    pub strategy: Vec<Option<usize>>,
}

impl Solution {
    pub fn region(&self, p: Player) -> BTreeSet<usize> {
        (0..self.winner.len()).filter(|&v| self.winner[v] == p).collect()
    }
}

struct Arena {
    edges: Vec<Vec<usize>>,
    preds: Vec<Vec<usize>>,
    owner: Vec<Player>,
    pri: Vec<usize>,
}

impl Arena {
    /// Attractor of `target` for `p` inside `sub`, with the attracting moves
    /// recorded in `strat`.
    fn attractor(&self, sub: &[bool], target: &[usize], p: Player, strat: &mut [Option<usize>]) -> Vec<bool> {
        let n = self.edges.len();
        let mut in_attr = vec![false; n];
        let mut count: Vec<usize> =
            (0..n).map(|v| if sub[v] { self.edges[v].iter().filter(|&&w| sub[w]).count() } else { 0 }).collect();
        let mut queue = Vec::new();
        for &t in target {
            if sub[t] && !in_attr[t] {
                in_attr[t] = true;
                queue.push(t);
            }
        }
        while let Some(w) = queue.pop() {
            for &v in &self.preds[w] {
                if !sub[v] || in_attr[v] {
                    continue;
                }
                if self.owner[v] == p {
                    in_attr[v] = true;
                    strat[v] = Some(w);
                    queue.push(v);
                } else {
                    count[v] -= 1;
                    if count[v] == 0 {
                        in_attr[v] = true;
                        queue.push(v);
                    }
                }
            }
        }
        in_attr
    }

    /// Zielonka's recursion on the subgame `sub`; returns the winner of each
    /// vertex of `sub` and fills in strategies.
    fn zielonka(&self, sub: &[bool], win: &mut [Option<Player>], strat: &mut [Option<usize>]) {
        let n = self.edges.len();
        let Some(p) = (0..n).filter(|&v| sub[v]).map(|v| self.pri[v]).min() else { return };
        let i = Player::of_priority(p);
        let top: Vec<usize> = (0..n).filter(|&v| sub[v] && self.pri[v] == p).collect();
        let is_top: Vec<bool> = (0..n).map(|v| sub[v] && self.pri[v] == p).collect();
        let mut attr_strat = vec![None; n];
        let a = self.attractor(sub, &top, i, &mut attr_strat);
        let rest: Vec<bool> = (0..n).map(|v| sub[v] && !a[v]).collect();
        let mut win1 = vec![None; n];
        let mut strat1 = vec![None; n];
        self.zielonka(&rest, &mut win1, &mut strat1);
        let opp_region: Vec<usize> = (0..n).filter(|&v| rest[v] && win1[v] == Some(i.opponent())).collect();
        if opp_region.is_empty() {
            for v in 0..n {
                if !sub[v] {
                    continue;
                }
                win[v] = Some(i);
                if self.owner[v] == i {
                    strat[v] = if rest[v] {
                        strat1[v]
                    } else if is_top[v] {
                        self.edges[v].iter().copied().find(|&w| sub[w])
                    } else {
                        attr_strat[v]
                    };
                }
            }
            return;
        }
        let mut b_strat = vec![None; n];
        let b = self.attractor(sub, &opp_region, i.opponent(), &mut b_strat);
        let rest2: Vec<bool> = (0..n).map(|v| sub[v] && !b[v]).collect();
        let mut win2 = vec![None; n];
        let mut strat2 = vec![None; n];
        self.zielonka(&rest2, &mut win2, &mut strat2);
        for v in 0..n {
            if !sub[v] {
                continue;
            }
            if b[v] {
                win[v] = Some(i.opponent());
                if self.owner[v] == i.opponent() {
                    strat[v] = if win1[v] == Some(i.opponent()) && rest[v] { strat1[v] } else { b_strat[v] };
                }
            } else {
                win[v] = win2[v];
                if Some(self.owner[v]) == win2[v] {
                    strat[v] = strat2[v];
                }
            }
        }
    }
}

fn arena(g: &ParityGame) -> Arena {
    let (edges, pri) = g.normalized();
    let pri = compress(&pri);
    let mut preds = vec![Vec::new(); g.len()];
    for (v, es) in edges.iter().enumerate() {
        for &w in es {
            preds[w].push(v);
        }
    }
    Arena { edges, preds, owner: g.owner.clone(), pri }
}

/// Renumbers priorities densely while keeping their order and parity.
fn compress(pri: &[usize]) -> Vec<usize> {
    let distinct: BTreeSet<usize> = pri.iter().copied().collect();
    let mut map = HashMap::new();
    let mut next = 0usize;
    for p in distinct {
        if next % 2 != p % 2 {
            next += 1;
        }
        map.insert(p, next);
    }
    pri.iter().map(|p| map[p]).collect()
}

/// Solves the game with Zielonka's recursive algorithm.
pub fn solve_zielonka(g: &ParityGame) -> Result<Solution, GameError> {
    g.validate()?;
    let ar = arena(g);
    let n = g.len();
    let mut win = vec![None; n];
    let mut strat = vec![None; n];
    ar.zielonka(&vec![true; n], &mut win, &mut strat);
    for v in 0..n {
        if g.terminal[v].is_some() {
            strat[v] = None;
        }
    }
    Ok(Solution { winner: win.into_iter().map(|w| w.expect("every vertex solved")).collect(), strategy: strat })
}

/// Brute-force solver for small games: enumerates every positional
/// Protagonist strategy and checks, for each, which vertices the Antagonist
/// can steer into a cycle whose least priority is odd.
pub fn solve_naive(g: &ParityGame) -> Result<Vec<Player>, GameError> {
    const LIMIT: usize = 12;
    g.validate()?;
    if g.len() > LIMIT {
        return Err(GameError::TooLarge(g.len()));
    }
    let (edges, pri) = g.normalized();
    let n = g.len();
    let prot: Vec<usize> = (0..n).filter(|&v| g.owner[v] == Player::Protagonist).collect();
    let mut won = vec![false; n];
    let mut choice = vec![0usize; prot.len()];
    loop {
        let mut adj = edges.clone();
        for (i, &v) in prot.iter().enumerate() {
            adj[v] = vec![edges[v][choice[i]]];
        }
        let odd_pri: Vec<usize> = pri.iter().map(|&p| p + 1).collect();
        for v in 0..n {
            if !won[v] && !antagonist_escapes(&adj, &odd_pri, v) {
                won[v] = true;
            }
        }
        let mut i = 0;
        loop {
            if i == prot.len() {
                return Ok(won.into_iter().map(|w| if w { Player::Protagonist } else { Player::Antagonist }).collect());
            }
            choice[i] += 1;
            if choice[i] < edges[prot[i]].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Is a cycle with even shifted priority (odd original) reachable from `v`?
fn antagonist_escapes(adj: &[Vec<usize>], shifted: &[usize], v: usize) -> bool {
    let n = adj.len();
    let mut reach = vec![false; n];
    let mut stack = vec![v];
    reach[v] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !reach[y] {
                reach[y] = true;
                stack.push(y);
            }
        }
    }
    let sub: Vec<Vec<usize>> = (0..n).map(|x| if reach[x] { adj[x].clone() } else { Vec::new() }).collect();
    let pri: Vec<usize> = (0..n).map(|x| if reach[x] { shifted[x] } else { 1 }).collect();
    even_cycle_in_graph(&sub, &pri)
}

/// Checks that following the winner's strategy from every vertex of its
/// region never leaves the region and that every cycle the opponent can force
/// is won by the strategy owner.
pub fn strategy_is_valid(g: &ParityGame, sol: &Solution) -> bool {
    let (edges, pri) = g.normalized();
    let n = g.len();
    for p in [Player::Protagonist, Player::Antagonist] {
        let region = sol.region(p);
        let mut adj = vec![Vec::new(); n];
        for &v in &region {
            if g.terminal[v].is_some() {
                adj[v] = vec![v];
            } else if g.owner[v] == p {
                match sol.strategy[v] {
                    Some(w) if edges[v].contains(&w) && region.contains(&w) => adj[v] = vec![w],
                    _ => return false,
                }
            } else {
                if edges[v].iter().any(|w| !region.contains(w)) {
                    return false;
                }
                adj[v] = edges[v].clone();
            }
        }
        let allowed: Vec<bool> = (0..n).map(|v| region.contains(&v)).collect();
        let bad_pri: Vec<usize> =
            pri.iter().map(|&q| if p == Player::Protagonist { q + 1 } else { q }).collect();
        let restricted: Vec<Vec<usize>> = (0..n).map(|v| if allowed[v] { adj[v].clone() } else { Vec::new() }).collect();
        let masked: Vec<usize> = (0..n).map(|v| if allowed[v] { bad_pri[v] } else { 1 }).collect();
        if even_cycle_in_graph(&restricted, &masked) {
            return false;
        }
    }
    true
}

/// Interface of an alternating parity automaton on the single infinite word
/// `aaa⋯`: every state offers a list of minimal sets of states to continue
/// with.
pub trait ApwOracle {
    fn init(&self) -> usize;
    fn index(&self, q: usize) -> usize;
    fn k(&self) -> usize;
    /// Minimal satisfying sets of the transition of `q`. An empty list means
    /// `False`; a list containing the empty set means `True`.
    fn moves(&mut self, q: usize) -> Result<Vec<BTreeSet<usize>>, GameError>;
}

/// An explicit 1APW with one transition formula per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Apw1 {
    pub init: usize,
    pub acc: ParityCondition,
    pub delta: Vec<PlusFormula<usize>>,
}

impl ApwOracle for Apw1 {
    fn init(&self) -> usize {
        self.init
    }

    fn index(&self, q: usize) -> usize {
        self.acc.index(q)
    }

    fn k(&self) -> usize {
        self.acc.k()
    }

    fn moves(&mut self, q: usize) -> Result<Vec<BTreeSet<usize>>, GameError> {
        Ok(self.delta[q].minimal_satisfying_sets())
    }
}

/// The acceptance game of a 1APW together with the vertex of each state.
#[derive(Debug, Clone)]
pub struct ApwGame {
    pub game: ParityGame,
    pub state_vertex: HashMap<usize, usize>,
    pub init_vertex: usize,
}

/// Builds the acceptance game of a 1APW from its initial state.
///
/// State vertices belong to the Protagonist and carry the state's index; a
/// `True` transition is a Protagonist terminal and a `False` transition an
/// Antagonist terminal. Set vertices belong to the Antagonist and carry the
/// neutral priority `k + 1`.
pub fn apw_to_game(a: &mut impl ApwOracle, max_vertices: usize) -> Result<ApwGame, GameError> {
    let mut g = ParityGame::default();
    let mut state_vertex: HashMap<usize, usize> = HashMap::new();
    let mut set_vertex: HashMap<BTreeSet<usize>, usize> = HashMap::new();
    let neutral = a.k() + 1;
    let init = a.init();
    let v0 = g.add_vertex(Player::Protagonist, a.index(init));
    state_vertex.insert(init, v0);
    let mut work = vec![init];
    while let Some(q) = work.pop() {
        let v = state_vertex[&q];
        let moves = a.moves(q)?;
        if moves.is_empty() {
            g.terminal[v] = Some(Player::Antagonist);
            continue;
        }
        if moves.iter().any(|m| m.is_empty()) {
            g.terminal[v] = Some(Player::Protagonist);
            continue;
        }
        for m in moves {
            let sv = match set_vertex.get(&m) {
                Some(&sv) => sv,
                None => {
                    let sv = g.add_vertex(Player::Antagonist, neutral);
                    set_vertex.insert(m.clone(), sv);
                    for &t in &m {
                        let tv = match state_vertex.get(&t) {
                            Some(&tv) => tv,
                            None => {
                                let tv = g.add_vertex(Player::Protagonist, a.index(t));
                                state_vertex.insert(t, tv);
                                work.push(t);
                                tv
                            }
                        };
                        g.edges[sv].push(tv);
                    }
                    sv
                }
            };
            g.edges[v].push(sv);
        }
        if g.len() > max_vertices {
            return Err(GameError::Budget(max_vertices));
        }
    }
    Ok(ApwGame { game: g, state_vertex, init_vertex: v0 })
}

/// True iff the 1APW accepts `aaa⋯`, i.e. the Protagonist wins its
/// acceptance game from the initial state.
pub fn apw_emptiness(a: &mut impl ApwOracle, max_vertices: usize) -> Result<bool, GameError> {
    let ag = apw_to_game(a, max_vertices)?;
    let sol = solve_zielonka(&ag.game)?;
    Ok(sol.winner[ag.init_vertex] == Player::Protagonist)
}

/// A random game with every vertex having between one and three successors.
pub fn random_game(rng: &mut impl rand::Rng, max_vertices: usize, max_priority: usize) -> ParityGame {
    let n = rng.gen_range(1..=max_vertices);
    let mut g = ParityGame::default();
    for _ in 0..n {
        let owner = if rng.gen_bool(0.5) { Player::Protagonist } else { Player::Antagonist };
        g.add_vertex(owner, rng.gen_range(0..=max_priority));
    }
    for v in 0..n {
        let d = rng.gen_range(1..=3.min(n));
        let mut succ: BTreeSet<usize> = BTreeSet::new();
        while succ.len() < d {
            succ.insert(rng.gen_range(0..n));
        }
        g.edges[v] = succ.into_iter().collect();
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn self_loop(p: usize) -> ParityGame {
        let mut g = ParityGame::default();
        g.add_vertex(Player::Antagonist, p);
        g.edges[0].push(0);
        g
    }

    #[test]
    fn single_loops() {
        assert_eq!(solve_zielonka(&self_loop(2)).unwrap().winner, vec![Player::Protagonist]);
        assert_eq!(solve_zielonka(&self_loop(1)).unwrap().winner, vec![Player::Antagonist]);
        assert_eq!(solve_naive(&self_loop(2)).unwrap(), vec![Player::Protagonist]);
        assert_eq!(solve_naive(&self_loop(1)).unwrap(), vec![Player::Antagonist]);
    }

    #[test]
    fn apw_examples() {
        let idx = |v: Vec<usize>| ParityCondition::from_indices(v);
        let mut t = Apw1 { init: 0, acc: idx(vec![1]), delta: vec![PlusFormula::True] };
        assert!(apw_emptiness(&mut t, 100).unwrap());
        let mut f = Apw1 { init: 0, acc: idx(vec![2]), delta: vec![PlusFormula::False] };
        assert!(!apw_emptiness(&mut f, 100).unwrap());
        let mut even = Apw1 { init: 0, acc: idx(vec![2]), delta: vec![PlusFormula::Atom(0)] };
        assert!(apw_emptiness(&mut even, 100).unwrap());
        let mut odd = Apw1 { init: 0, acc: idx(vec![1]), delta: vec![PlusFormula::Atom(0)] };
        assert!(!apw_emptiness(&mut odd, 100).unwrap());
        let g = apw_to_game(&mut t, 100).unwrap();
        assert_eq!(g.game.terminal[g.init_vertex], Some(Player::Protagonist));
    }

    #[test]
    fn random_agreement() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let g = random_game(&mut rng, 8, 4);
            let z = solve_zielonka(&g).unwrap();
            assert_eq!(z.winner, solve_naive(&g).unwrap(), "{:?}", g);
            assert!(strategy_is_valid(&g, &z), "{:?} {:?}", g, z);
        }
    }

    #[test]
    fn pgsolver_dump() {
        let s = self_loop(1).to_pgsolver();
        assert!(s.starts_with("parity 0;"));
        assert!(s.contains("0 1 1 0;"));
        let d = self_loop(1).to_dot();
        assert!(d.starts_with("digraph game {") && d.contains("v0 -> v0;"), "{d}");
    }
}
