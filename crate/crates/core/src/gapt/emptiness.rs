//! Emptiness of 2GAPTs through a lazily built parity game.
//!
//! The Protagonist builds an input tree together with a strategy, a promise
//! and an annotation, one node at a time: at a node she picks a letter and
//! the labels, then the promise labels of the children, and the Antagonist
//! moves to one child. Along the chosen branch a determinized copy of `U`
//! watches for rejecting downward traces; the Protagonist wins a play iff
//! `U` rejects the branch or the branch is finite. The automaton is
//! nonempty iff the Protagonist wins from the root.
//!
//! A node label depends on the parent label: `-1` moves must land in the
//! parent's head and annotation entries flow in both directions. Labels are
//! therefore enumerated for a *context* (parent label, promise) and an
//! *option* (extra head states and extra annotation entries). A label whose
//! requirements on the parent are not met is not a move; its requirements
//! become a new option of every context that produced the parent label.
//!
//! The engine runs in two phases. The first saturates the graph of
//! contexts, labels and children choices, which does not involve `U`, and
//! discards contexts without any valid labelling. The second explores the
//! product with Safra trees of `U` and solves the game at growing sizes with
//! unexplored vertices counted against and for the Protagonist.

use super::u::{u_init, UBuchi};
use super::witness::{compose_closure, detour_ends, AnnotationLabel, PromiseLabel, StrategyLabel};
use super::{Gapt2, GaptError};
use crate::automata::{Direction, Move, PlusFormula, Transition};
use crate::games::{solve_zielonka, ParityGame, Player};
use crate::words::SafraTree;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::time::Instant;

/// Resource caps of the emptiness check.
#[derive(Debug, Clone)]
pub struct EmptinessBudget {
    /// Game vertices of the product with `U`.
    pub max_states: usize,
    /// Contexts of the label graph.
    pub max_contexts: usize,
    /// Labels enumerated for one context and option.
    pub max_labels_per_option: usize,
    /// Children assignments examined for one label.
    pub max_choices: usize,
    pub deadline: Option<Instant>,
}

impl Default for EmptinessBudget {
    fn default() -> Self {
        EmptinessBudget {
            max_states: 1_000_000,
            max_contexts: 200_000,
            max_labels_per_option: 100_000,
            max_choices: 100_000,
            deadline: None,
        }
    }
}

/// Counters of one emptiness check.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EmptinessStats {
    pub contexts: usize,
    pub labels: usize,
    pub options: usize,
    pub live_contexts: usize,
    /// Product states (context, Safra tree) explored.
    pub product_states: usize,
    pub game_vertices: usize,
    pub safra_states: usize,
    pub solves: usize,
    /// True iff the verdict was read off the fully explored game.
    pub complete: bool,
    /// Exploration stages run, see [`STAGE_WIDTHS`].
    pub stages: usize,
}

/// Widths of the restricted stages run before the exact one: the number of
/// labels per context and option and of children choices per label the
/// Protagonist may use.
pub const STAGE_WIDTHS: [usize; 3] = [2, 8, 32];

/// Leaves of the label enumeration kept per unit of width in a restricted
/// stage.
const LEAVES_PER_WIDTH: usize = 16;

/// Options kept per context and unit of width in a restricted stage.
const OPTIONS_PER_WIDTH: usize = 2;

/// Simplicity of a label: fewer graded moves, head states and strategy
/// entries first.
fn label_weight(l: &Label) -> (usize, usize, usize) {
    let graded = l.str.iter().filter(|m| m.1.is_graded()).count();
    (graded, l.head.len(), l.str.len())
}

/// Decides nonemptiness with the default budget. Returns true iff the
/// language is nonempty.
pub fn gapt_emptiness(a: &Gapt2) -> Result<bool, GaptError> {
    gapt_emptiness_with(a, &EmptinessBudget::default()).0
}

/// Decides nonemptiness under a budget. Returns true iff the language is
/// nonempty, together with counters.
pub fn gapt_emptiness_with(a: &Gapt2, budget: &EmptinessBudget) -> (Result<bool, GaptError>, EmptinessStats) {
    if let Err(e) = a.validate() {
        return (Err(e), EmptinessStats::default());
    }
    let mut engine = Engine::new(a, budget);
    let result = engine.run();
    (result, engine.stats)
}

/// Runs a single stage of the given width (`None` for the exact stage).
/// Returns `Some(true)` if nonemptiness was proven, `Some(false)` if
/// emptiness was proven and `None` if a restricted stage was inconclusive.
/// Resource caps hit by a restricted stage also give `None`.
pub fn gapt_emptiness_stage(
    a: &Gapt2,
    budget: &EmptinessBudget,
    width: Option<usize>,
) -> (Result<Option<bool>, GaptError>, EmptinessStats) {
    if let Err(e) = a.validate() {
        return (Err(e), EmptinessStats::default());
    }
    let mut engine = Engine::new(a, budget);
    let result = match engine.run_stage(width) {
        Err(e @ GaptError::Budget { what: "time", .. }) => Err(e),
        Err(_) if width.is_some() => Ok(None),
        r => r,
    };
    (result, engine.stats)
}

/// The exact stage laid open: the saturated label graph and the explored
/// product game.
#[derive(Debug, Clone, Serialize)]
pub struct EmptinessTrace {
    pub label_graph: LabelGraph,
    /// The product game as explored. Vertex 0 is the initial vertex and
    /// Label vertices of the Protagonist carry the Safra priorities.
    pub game: Option<ParityGame>,
    pub stats: EmptinessStats,
}

/// The graph of contexts and labels built by the first phase. A label is a
/// letter with strategy and annotation labels; a context is a parent label
/// with a promise label. Each children choice of a label lists the child
/// contexts.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LabelGraph {
    pub root: usize,
    pub contexts: Vec<ContextDump>,
    pub labels: Vec<LabelDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContextDump {
    pub parent_label: Option<usize>,
    pub promise: Vec<String>,
    pub labels: Vec<usize>,
    /// Some valid labelling of a whole tree starts here.
    pub live: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelDump {
    pub letter: String,
    pub head: Vec<String>,
    pub strategy: Vec<String>,
    pub annotation: Vec<String>,
    pub choices: Vec<Vec<usize>>,
}

/// Runs the exact stage alone and returns its label graph and product game
/// along with the verdict (true iff nonempty).
pub fn gapt_emptiness_trace(a: &Gapt2, budget: &EmptinessBudget) -> (Result<bool, GaptError>, EmptinessTrace) {
    let mut trace = EmptinessTrace { label_graph: LabelGraph::default(), game: None, stats: EmptinessStats::default() };
    if let Err(e) = a.validate() {
        return (Err(e), trace);
    }
    let mut engine = Engine::new(a, budget);
    engine.record = true;
    let result = engine.run_stage(None).map(|v| v.expect("the exact stage decides"));
    trace.label_graph = engine.label_graph();
    trace.game = engine.recorded.take();
    trace.stats = engine.stats;
    (result, trace)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Label {
    letter: usize,
    head: BTreeSet<usize>,
    str: StrategyLabel,
    ann: AnnotationLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Opt {
    r: BTreeSet<usize>,
    g: AnnotationLabel,
}

#[derive(Debug)]
struct Ctx {
    parent: Option<usize>,
    pro: usize,
    options: Vec<Opt>,
    option_ids: HashSet<Opt>,
    labels: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum VKey {
    Node { ctx: usize, a3: usize },
    Label { lid: usize, pro: usize, a3: usize },
    Choice { lid: usize, choice: usize, a3: usize },
}

/// Children choices, each a list of promise labels.
type ChoiceList = Vec<Vec<PromiseLabel>>;

struct Leaf {
    letter: usize,
    head: BTreeSet<usize>,
    str: StrategyLabel,
}

struct Engine<'a> {
    a: &'a Gapt2,
    budget: &'a EmptinessBudget,
    stats: EmptinessStats,
    labels: Vec<Label>,
    label_ids: HashMap<Label, usize>,
    origin: Vec<BTreeSet<(usize, usize)>>,
    demands: Vec<BTreeSet<Opt>>,
    /// Per label: the children choices, each a list of child contexts.
    choices: Vec<Vec<Vec<usize>>>,
    pros: Vec<PromiseLabel>,
    pro_ids: HashMap<PromiseLabel, usize>,
    ctxs: Vec<Ctx>,
    ctx_ids: HashMap<(Option<usize>, usize), usize>,
    queue: VecDeque<(usize, usize)>,
    sat_cache: HashMap<(usize, usize), Vec<BTreeSet<Move>>>,
    choice_cache: HashMap<Vec<(usize, Direction, usize)>, ChoiceList>,
    letters: Vec<usize>,
    /// Labels kept per context and option, and children choices kept per
    /// label, in the current stage. `None` keeps everything.
    width: Option<usize>,
    /// Whether the current stage dropped some move of the Protagonist.
    truncated: bool,
    /// Keep the explored game in `recorded`.
    record: bool,
    recorded: Option<ParityGame>,
}

impl<'a> Engine<'a> {
    fn new(a: &'a Gapt2, budget: &'a EmptinessBudget) -> Self {
        Engine {
            a,
            budget,
            stats: EmptinessStats::default(),
            labels: Vec::new(),
            label_ids: HashMap::new(),
            origin: Vec::new(),
            demands: Vec::new(),
            choices: Vec::new(),
            pros: Vec::new(),
            pro_ids: HashMap::new(),
            ctxs: Vec::new(),
            ctx_ids: HashMap::new(),
            queue: VecDeque::new(),
            sat_cache: HashMap::new(),
            choice_cache: HashMap::new(),
            letters: (0..a.alphabet.len()).collect(),
            width: None,
            truncated: false,
            record: false,
            recorded: None,
        }
    }

    /// Forgets the label graph and starts a stage of the given width.
    fn reset(&mut self, width: Option<usize>) {
        self.labels.clear();
        self.label_ids.clear();
        self.origin.clear();
        self.demands.clear();
        self.choices.clear();
        self.pros.clear();
        self.pro_ids.clear();
        self.ctxs.clear();
        self.ctx_ids.clear();
        self.queue.clear();
        self.width = width;
        self.truncated = false;
    }

    fn check_deadline(&self) -> Result<(), GaptError> {
        match self.budget.deadline {
            Some(d) if Instant::now() >= d => Err(GaptError::Budget { what: "time", limit: 0 }),
            _ => Ok(()),
        }
    }

    /// Runs the stages. A stage of finite width lets the Protagonist use only
    /// the simplest labels and children choices; a win there is a win in the
    /// full game, any other outcome moves on to a wider stage. The last stage
    /// keeps every move and is exact.
    fn run(&mut self) -> Result<bool, GaptError> {
        for width in STAGE_WIDTHS.iter().copied().map(Some).chain([None]) {
            match self.run_stage(width) {
                Ok(Some(v)) => return Ok(v),
                Ok(None) => {}
                Err(e @ GaptError::Budget { what: "time", .. }) => return Err(e),
                Err(e) if width.is_none() => return Err(e),
                Err(_) => {}
            }
        }
        unreachable!("the last stage is exact")
    }

    fn run_stage(&mut self, width: Option<usize>) -> Result<Option<bool>, GaptError> {
        self.reset(width);
        self.stats.stages += 1;
        let full = self.budget.max_states;
        let cap = if width.is_some() { (full / 8).max(1) } else { full };
        self.stage(cap)
    }

    /// One stage. Returns `None` if the stage was truncated and did not
    /// prove nonemptiness.
    fn stage(&mut self, cap: usize) -> Result<Option<bool>, GaptError> {
        let a = self.a;
        let root_pro = self.pro_id([(a.init, a.init)].into_iter().collect());
        let root = self.ctx_of(None, root_pro)?;
        let saturated = self.saturate();
        self.stats.contexts = self.ctxs.len();
        self.stats.labels = self.labels.len();
        self.stats.options = self.ctxs.iter().map(|c| c.options.len()).sum();
        saturated?;
        let live = self.live_contexts();
        self.stats.live_contexts = live.iter().filter(|&&b| b).count();
        if !live[root] {
            if self.truncated {
                return Ok(None);
            }
            self.stats.complete = true;
            return Ok(Some(false));
        }
        match self.play(root, &live, cap)? {
            false if self.truncated => Ok(None),
            v => Ok(Some(v)),
        }
    }

    fn saturate(&mut self) -> Result<(), GaptError> {
        while let Some((c, o)) = self.queue.pop_front() {
            self.check_deadline()?;
            self.process(c, o)?;
        }
        Ok(())
    }

    fn pro_id(&mut self, p: PromiseLabel) -> usize {
        if let Some(&id) = self.pro_ids.get(&p) {
            return id;
        }
        self.pros.push(p.clone());
        self.pro_ids.insert(p, self.pros.len() - 1);
        self.pros.len() - 1
    }

    fn ctx_of(&mut self, parent: Option<usize>, pro: usize) -> Result<usize, GaptError> {
        if let Some(&id) = self.ctx_ids.get(&(parent, pro)) {
            return Ok(id);
        }
        if self.ctxs.len() >= self.budget.max_contexts {
            return Err(GaptError::Budget { what: "contexts", limit: self.budget.max_contexts });
        }
        let id = self.ctxs.len();
        self.ctxs.push(Ctx {
            parent,
            pro,
            options: vec![Opt::default()],
            option_ids: [Opt::default()].into_iter().collect(),
            labels: BTreeSet::new(),
        });
        self.ctx_ids.insert((parent, pro), id);
        self.queue.push_back((id, 0));
        Ok(id)
    }

    fn add_option(&mut self, c: usize, o: usize, d: &Opt) {
        let base = &self.ctxs[c].options[o];
        let new = Opt { r: base.r.union(&d.r).copied().collect(), g: base.g.union(&d.g).copied().collect() };
        if self.width.is_some_and(|w| self.ctxs[c].options.len() >= OPTIONS_PER_WIDTH * w) {
            self.truncated = true;
            return;
        }
        let ctx = &mut self.ctxs[c];
        if ctx.option_ids.insert(new.clone()) {
            ctx.options.push(new);
            self.queue.push_back((c, ctx.options.len() - 1));
        }
    }

    fn process(&mut self, c: usize, o: usize) -> Result<(), GaptError> {
        for (label, demand) in self.enumerate(c, o)? {
            match demand {
                None => self.add_label(c, o, label)?,
                Some(d) => {
                    let p = self.ctxs[c].parent.expect("a demand needs a parent");
                    if self.demands[p].insert(d.clone()) {
                        for (c2, o2) in self.origin[p].clone() {
                            self.add_option(c2, o2, &d);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn add_label(&mut self, c: usize, o: usize, label: Label) -> Result<(), GaptError> {
        let lid = match self.label_ids.get(&label) {
            Some(&id) => id,
            None => {
                let id = self.labels.len();
                let graded: Vec<(usize, Direction, usize)> =
                    label.str.iter().filter(|m| m.1.is_graded()).copied().collect();
                let mut choices = match self.choice_cache.get(&graded) {
                    Some(c) => c.clone(),
                    None => {
                        let c = children_choices(&label.str, self.budget.max_choices)?;
                        self.choice_cache.insert(graded, c.clone());
                        c
                    }
                };
                if self.width.is_some() {
                    choices.sort_by_key(|c| (c.iter().map(|p| p.len()).sum::<usize>(), c.len()));
                }
                self.labels.push(label.clone());
                self.label_ids.insert(label, id);
                self.origin.push(BTreeSet::new());
                self.demands.push(BTreeSet::new());
                let mut ctx_choices = Vec::with_capacity(choices.len());
                for choice in choices {
                    let mut kids = Vec::with_capacity(choice.len());
                    for pro in choice {
                        let p = self.pro_id(pro);
                        kids.push(self.ctx_of(Some(id), p)?);
                    }
                    ctx_choices.push(kids);
                }
                if let Some(w) = self.width {
                    if ctx_choices.len() > w {
                        ctx_choices.truncate(w);
                        self.truncated = true;
                    }
                }
                self.choices.push(ctx_choices);
                id
            }
        };
        if self.origin[lid].insert((c, o)) {
            for d in self.demands[lid].clone() {
                self.add_option(c, o, &d);
            }
        }
        self.ctxs[c].labels.insert(lid);
        Ok(())
    }

    fn minimal_sets(&mut self, q: usize, letter: usize) -> &Vec<BTreeSet<Move>> {
        let a = self.a;
        self.sat_cache.entry((q, letter)).or_insert_with(|| {
            let mut sets = a.delta[q][letter].minimal_satisfying_sets();
            sets.sort_by_key(|set| (set.iter().filter(|m| m.dir.is_graded()).count(), set.len()));
            sets
        })
    }

    /// All labels for a context and option, each with its unmet demand on
    /// the parent label.
    fn enumerate(&mut self, c: usize, o: usize) -> Result<Vec<(Label, Option<Opt>)>, GaptError> {
        let pro = self.pros[self.ctxs[c].pro].clone();
        let opt = self.ctxs[c].options[o].clone();
        let parent = self.ctxs[c].parent.map(|p| self.labels[p].clone());
        let mut todo: Vec<usize> = pro.iter().map(|&(_, q)| q).chain(opt.r.iter().copied()).collect();
        todo.sort_unstable();
        todo.dedup();
        todo.reverse();
        let mut leaves = Vec::new();
        let letters = self.letters.clone();
        self.dfs(letters, BTreeSet::new(), todo, StrategyLabel::new(), &mut leaves)?;
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for leaf in leaves {
            if let Some(item) = self.finish(leaf, &pro, &opt, parent.as_ref()) {
                if seen.insert(item.clone()) {
                    out.push(item);
                }
            }
        }
        if let Some(w) = self.width {
            let (mut ready, mut demanding): (Vec<_>, Vec<_>) = out.into_iter().partition(|(_, d)| d.is_none());
            for part in [&mut ready, &mut demanding] {
                if part.len() > w {
                    part.sort_by_key(|(l, _)| label_weight(l));
                    part.truncate(w);
                    self.truncated = true;
                }
            }
            out = ready;
            out.extend(demanding);
        }
        Ok(out)
    }

    fn dfs(
        &mut self,
        letters: Vec<usize>,
        mut processed: BTreeSet<usize>,
        mut todo: Vec<usize>,
        str: StrategyLabel,
        out: &mut Vec<Leaf>,
    ) -> Result<(), GaptError> {
        if self.width.is_some_and(|w| out.len() >= LEAVES_PER_WIDTH * w) {
            self.truncated = true;
            return Ok(());
        }
        let q = loop {
            match todo.pop() {
                None => {
                    if out.len() >= self.budget.max_labels_per_option {
                        return Err(GaptError::Budget {
                            what: "labels per option",
                            limit: self.budget.max_labels_per_option,
                        });
                    }
                    out.push(Leaf { letter: letters[0], head: processed, str });
                    return Ok(());
                }
                Some(q) if processed.contains(&q) => continue,
                Some(q) => break q,
            }
        };
        processed.insert(q);
        let a = self.a;
        let mut groups: BTreeMap<&Transition, Vec<usize>> = BTreeMap::new();
        for &l in &letters {
            groups.entry(&a.delta[q][l]).or_default().push(l);
        }
        for (t, group) in groups {
            if *t == PlusFormula::False {
                continue;
            }
            let sets = self.minimal_sets(q, group[0]).clone();
            for set in sets {
                let mut s2 = str.clone();
                let mut todo2 = todo.clone();
                for m in &set {
                    s2.insert((q, m.dir, m.state));
                    if m.dir == Direction::Here && !processed.contains(&m.state) {
                        todo2.push(m.state);
                    }
                }
                self.dfs(group.clone(), processed.clone(), todo2, s2, out)?;
            }
        }
        Ok(())
    }

    /// Completes a leaf of the enumeration into a label and its demand.
    /// Returns `None` if the label needs a parent and there is none.
    fn finish(&self, leaf: Leaf, pro: &PromiseLabel, opt: &Opt, parent: Option<&Label>) -> Option<(Label, Option<Opt>)> {
        let a = self.a;
        let idx = |q: usize| a.acc.index(q);
        let mut r_d = BTreeSet::new();
        for &(_, d, q1) in &leaf.str {
            if d == Direction::Up {
                let p = parent?;
                if !p.head.contains(&q1) && a.delta[q1][p.letter] != PlusFormula::True {
                    r_d.insert(q1);
                }
            }
        }
        let mut ann: AnnotationLabel = opt.g.clone();
        for &(q, d, q1) in &leaf.str {
            if d == Direction::Here {
                ann.insert((q, idx(q1), q1));
            }
        }
        if let Some(p) = parent {
            for &(q, d, q1) in &leaf.str {
                if d != Direction::Up {
                    continue;
                }
                for (j, q2) in detour_ends(&p.ann, q1, idx(q1)) {
                    for &(q3, c, q4) in p.str.range((q2, Direction::AtLeast(0), 0)..) {
                        if q3 != q2 {
                            break;
                        }
                        if c.is_graded() && pro.contains(&(q2, q4)) {
                            ann.insert((q, idx(q1).min(j).min(idx(q4)), q4));
                        }
                    }
                }
            }
        }
        compose_closure(&mut ann);
        let mut g_d = AnnotationLabel::new();
        if let Some(p) = parent {
            for &(q, c, q1) in &p.str {
                if !c.is_graded() || !pro.contains(&(q, q1)) {
                    continue;
                }
                for (j, q2) in detour_ends(&ann, q1, idx(q1)) {
                    for &(q3, d, q4) in leaf.str.range((q2, Direction::AtLeast(0), 0)..) {
                        if q3 != q2 {
                            break;
                        }
                        if d == Direction::Up {
                            let e = (q, idx(q1).min(j).min(idx(q4)), q4);
                            if !p.ann.contains(&e) {
                                g_d.insert(e);
                            }
                        }
                    }
                }
            }
        }
        let label = Label { letter: leaf.letter, head: leaf.head, str: leaf.str, ann };
        let demand = if r_d.is_empty() && g_d.is_empty() { None } else { Some(Opt { r: r_d, g: g_d }) };
        Some((label, demand))
    }

    /// Contexts from which some valid labelling of a whole tree exists,
    /// ignoring acceptance.
    fn live_contexts(&self) -> Vec<bool> {
        let mut live = vec![true; self.ctxs.len()];
        loop {
            let mut changed = false;
            for c in 0..self.ctxs.len() {
                if live[c] {
                    let ok = self.ctxs[c]
                        .labels
                        .iter()
                        .any(|&lid| self.choices[lid].iter().any(|kids| kids.iter().all(|&k| live[k])));
                    if !ok {
                        live[c] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                return live;
            }
        }
    }

    /// Second phase: the product game with determinized `U`.
    fn play(&mut self, root: usize, live: &[bool], cap: usize) -> Result<bool, GaptError> {
        let a = self.a;
        let bound = UBuchi::bound(a).max(1);
        let neutral = 2 * bound + 2;
        let mut ub = UBuchi::new(a);
        let mut trees: Vec<SafraTree> = Vec::new();
        let mut tree_ids: HashMap<SafraTree, usize> = HashMap::new();
        let mut intern_tree = |t: SafraTree, trees: &mut Vec<SafraTree>| -> usize {
            *tree_ids.entry(t.clone()).or_insert_with(|| {
                trees.push(t);
                trees.len() - 1
            })
        };
        let init_states: BTreeSet<usize> = ub.entries(u_init(a)).into_iter().collect();
        let a3_0 = intern_tree(SafraTree::initial(init_states), &mut trees);

        let mut game = ParityGame::default();
        let mut keys: Vec<VKey> = Vec::new();
        let mut ids: HashMap<VKey, usize> = HashMap::new();
        let mut expanded: Vec<bool> = Vec::new();
        let mut queue: VecDeque<usize> = VecDeque::new();
        let mut vertex = |k: VKey, game: &mut ParityGame, keys: &mut Vec<VKey>, expanded: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
            *ids.entry(k).or_insert_with(|| {
                let owner = if matches!(k, VKey::Choice { .. }) { Player::Antagonist } else { Player::Protagonist };
                let v = game.add_vertex(owner, neutral);
                keys.push(k);
                expanded.push(false);
                queue.push_back(v);
                v
            })
        };
        let v0 = vertex(VKey::Node { ctx: root, a3: a3_0 }, &mut game, &mut keys, &mut expanded, &mut queue);
        let mut done = 0usize;
        let mut next_solve = 256usize;
        let mut capped = false;
        while let Some(v) = queue.pop_front() {
            if game.len() > cap {
                capped = true;
                break;
            }
            self.check_deadline()?;
            expanded[v] = true;
            done += 1;
            match keys[v] {
                VKey::Node { ctx, a3 } => {
                    self.stats.product_states += 1;
                    if !live[ctx] {
                        game.terminal[v] = Some(Player::Antagonist);
                        continue;
                    }
                    let pro = self.ctxs[ctx].pro;
                    for &lid in &self.ctxs[ctx].labels {
                        if self.choices[lid].iter().any(|kids| kids.iter().all(|&k| live[k])) {
                            let w = vertex(VKey::Label { lid, pro, a3 }, &mut game, &mut keys, &mut expanded, &mut queue);
                            game.edges[v].push(w);
                        }
                    }
                }
                VKey::Label { lid, pro, a3 } => {
                    let label = &self.labels[lid];
                    let pro_set = &self.pros[pro];
                    let tree = &trees[a3];
                    let acc_set: HashSet<usize> = tree.states().into_iter().filter(|&s| ub.accepting(s)).collect();
                    let mut hit = false;
                    let mut cache = BTreeMap::new();
                    let (next, p) = tree.step(
                        &mut |set| match ub.post(a, &label.str, pro_set, &label.ann, set, &mut cache) {
                            Some(s) => s,
                            None => {
                                hit = true;
                                BTreeSet::new()
                            }
                        },
                        &|s| acc_set.contains(&s),
                        bound,
                    );
                    if hit {
                        game.terminal[v] = Some(Player::Antagonist);
                        continue;
                    }
                    game.priority[v] = p + 1;
                    let a3n = intern_tree(next, &mut trees);
                    let choices = &self.choices[lid];
                    if choices.iter().any(|kids| kids.is_empty()) {
                        game.terminal[v] = Some(Player::Protagonist);
                        continue;
                    }
                    for (ci, kids) in choices.iter().enumerate() {
                        if kids.iter().all(|&k| live[k]) {
                            let w = vertex(VKey::Choice { lid, choice: ci, a3: a3n }, &mut game, &mut keys, &mut expanded, &mut queue);
                            game.edges[v].push(w);
                        }
                    }
                }
                VKey::Choice { lid, choice, a3 } => {
                    for &k in &self.choices[lid][choice] {
                        let w = vertex(VKey::Node { ctx: k, a3 }, &mut game, &mut keys, &mut expanded, &mut queue);
                        game.edges[v].push(w);
                    }
                }
            }
            if done >= next_solve {
                next_solve *= 2;
                if let Some(r) = self.solve_views(&game, &expanded, v0)? {
                    self.finish_stats(&game, trees.len());
                    return Ok(r);
                }
            }
        }
        self.finish_stats(&game, trees.len());
        if capped {
            return match self.solve_views(&game, &expanded, v0)? {
                Some(r) => Ok(r),
                None => Err(GaptError::Budget { what: "game vertices", limit: cap }),
            };
        }
        self.stats.complete = true;
        self.stats.solves += 1;
        let sol = solve_zielonka(&game).map_err(|_| GaptError::Shape)?;
        Ok(sol.winner[v0] == Player::Protagonist)
    }

    fn finish_stats(&mut self, game: &ParityGame, trees: usize) {
        self.stats.game_vertices = game.len();
        self.stats.safra_states = trees;
        if self.record {
            self.recorded = Some(game.clone());
        }
    }

    fn label_graph(&self) -> LabelGraph {
        let names = &self.a.states;
        let live = self.live_contexts();
        let contexts = self
            .ctxs
            .iter()
            .enumerate()
            .map(|(c, ctx)| ContextDump {
                parent_label: ctx.parent,
                promise: self.pros[ctx.pro].iter().map(|&(q, q1)| format!("({},{})", names[q], names[q1])).collect(),
                labels: ctx.labels.iter().copied().collect(),
                live: live[c],
            })
            .collect();
        let labels = self
            .labels
            .iter()
            .enumerate()
            .map(|(lid, l)| LabelDump {
                letter: self.a.alphabet[l.letter].clone(),
                head: l.head.iter().map(|&q| names[q].clone()).collect(),
                strategy: l.str.iter().map(|&(q, d, q1)| format!("({},{d},{})", names[q], names[q1])).collect(),
                annotation: l.ann.iter().map(|&(q, j, q1)| format!("({},{j},{})", names[q], names[q1])).collect(),
                choices: self.choices.get(lid).cloned().unwrap_or_default(),
            })
            .collect();
        LabelGraph { root: 0, contexts, labels }
    }

    /// Solves the partial game twice: unexplored vertices lost by the
    /// Protagonist (a win proves nonemptiness) and won by her (a loss proves
    /// emptiness).
    fn solve_views(&mut self, game: &ParityGame, expanded: &[bool], v0: usize) -> Result<Option<bool>, GaptError> {
        for (view, verdict) in [(Player::Antagonist, true), (Player::Protagonist, false)] {
            let mut g = game.clone();
            for (v, &e) in expanded.iter().enumerate() {
                if !e {
                    g.terminal[v] = Some(view);
                }
            }
            self.stats.solves += 1;
            let sol = solve_zielonka(&g).map_err(|_| GaptError::Shape)?;
            let wins = sol.winner[v0] == Player::Protagonist;
            if wins == verdict {
                return Ok(Some(verdict));
            }
        }
        Ok(None)
    }
}

/// Children assignments for a strategy label. Every choice is a set of
/// promise labels, one per child kind. Each `⟨n⟩` move reaches `n+1`
/// distinct children and each `[n]` move may skip at most `n` children.
///
/// Only choices in a canonical form are produced: a child skipped by no box
/// carries exactly one `⟨n⟩` move, since such children can be replicated,
/// and a child skipped by some box carries only `⟨n⟩` moves that still need
/// children. Every realizable choice is dominated by a canonical one, and
/// dominated choices (every child of the other is promised no more than
/// some child of this one) are dropped. A label without `⟨n⟩` moves has the
/// single choice "no children".
pub fn children_choices(str: &StrategyLabel, max: usize) -> Result<Vec<Vec<PromiseLabel>>, GaptError> {
    let mut diamonds: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    let mut boxes: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for &(q, d, q1) in str {
        match d {
            Direction::AtLeast(n) => {
                let e = diamonds.entry((q, q1)).or_insert(n);
                *e = (*e).max(n);
            }
            Direction::AllBut(n) => {
                let e = boxes.entry((q, q1)).or_insert(n);
                *e = (*e).min(n);
            }
            _ => {}
        }
    }
    let diamonds: Vec<((usize, usize), usize)> = diamonds.into_iter().map(|(p, n)| (p, n as usize + 1)).collect();
    let always: PromiseLabel = boxes.iter().filter(|(_, &n)| n == 0).map(|(p, _)| *p).collect();
    let skippable: Vec<((usize, usize), usize)> =
        boxes.iter().filter(|(_, &n)| n > 0).map(|(p, &n)| (*p, n as usize)).collect();
    if diamonds.is_empty() {
        return Ok(vec![Vec::new()]);
    }
    let mut kinds = Vec::new();
    for dmask in 1usize..1 << diamonds.len() {
        for emask in 1usize..1 << skippable.len() {
            kinds.push((dmask, emask));
        }
    }
    let mut search = ChoiceSearch {
        diamonds: &diamonds,
        skippable: &skippable,
        always: &always,
        kinds,
        found: BTreeSet::new(),
        count: 0,
        max,
    };
    let mut demand: Vec<usize> = diamonds.iter().map(|&(_, r)| r).collect();
    let mut budget: Vec<usize> = skippable.iter().map(|&(_, n)| n).collect();
    search.run(0, &mut demand, &mut budget, &mut Vec::new())?;
    let all: Vec<BTreeSet<PromiseLabel>> = search.found.into_iter().collect();
    let dominates = |c: &BTreeSet<PromiseLabel>, d: &BTreeSet<PromiseLabel>| {
        c.iter().all(|x| d.iter().any(|y| x.is_subset(y)))
    };
    let mut kept = Vec::new();
    for (i, c) in all.iter().enumerate() {
        let beaten = all.iter().enumerate().any(|(j, d)| j != i && dominates(d, c) && (!dominates(c, d) || j < i));
        if !beaten {
            kept.push(c.iter().cloned().collect());
        }
    }
    Ok(kept)
}

/// Enumerates multisets of skipped children, each a pair of a diamond mask
/// and a box mask.
struct ChoiceSearch<'s> {
    diamonds: &'s [((usize, usize), usize)],
    skippable: &'s [((usize, usize), usize)],
    always: &'s PromiseLabel,
    kinds: Vec<(usize, usize)>,
    found: BTreeSet<BTreeSet<PromiseLabel>>,
    count: usize,
    max: usize,
}

impl ChoiceSearch<'_> {
    fn label(&self, dmask: usize, emask: usize) -> PromiseLabel {
        let mut p = self.always.clone();
        p.extend(self.diamonds.iter().enumerate().filter(|(i, _)| dmask >> i & 1 == 1).map(|(_, (pair, _))| *pair));
        p.extend(self.skippable.iter().enumerate().filter(|(i, _)| emask >> i & 1 == 0).map(|(_, (pair, _))| *pair));
        p
    }

    fn run(
        &mut self,
        start: usize,
        demand: &mut Vec<usize>,
        budget: &mut Vec<usize>,
        skipped: &mut Vec<(usize, usize)>,
    ) -> Result<(), GaptError> {
        self.count += 1;
        if self.count > self.max {
            return Err(GaptError::Budget { what: "children choices", limit: self.max });
        }
        let mut choice: BTreeSet<PromiseLabel> = skipped.iter().map(|&(d, e)| self.label(d, e)).collect();
        for (i, &left) in demand.iter().enumerate() {
            if left > 0 {
                choice.insert(self.label(1 << i, 0));
            }
        }
        self.found.insert(choice);
        for k in start..self.kinds.len() {
            let (dmask, emask) = self.kinds[k];
            let fits = (0..demand.len()).all(|i| dmask >> i & 1 == 0 || demand[i] > 0)
                && (0..budget.len()).all(|i| emask >> i & 1 == 0 || budget[i] > 0);
            if !fits {
                continue;
            }
            for i in 0..demand.len() {
                if dmask >> i & 1 == 1 {
                    demand[i] -= 1;
                }
            }
            for i in 0..budget.len() {
                if emask >> i & 1 == 1 {
                    budget[i] -= 1;
                }
            }
            skipped.push((dmask, emask));
            self.run(k, demand, budget, skipped)?;
            skipped.pop();
            for i in 0..demand.len() {
                if dmask >> i & 1 == 1 {
                    demand[i] += 1;
                }
            }
            for i in 0..budget.len() {
                if emask >> i & 1 == 1 {
                    budget[i] += 1;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::ParityCondition;

    fn m(d: Direction, q: usize) -> Transition {
        PlusFormula::atom(Move::new(d, q))
    }

    fn automaton(delta: Vec<Vec<Transition>>, index: Vec<usize>, b: u32) -> Gapt2 {
        let n = delta.len();
        let letters = delta[0].len();
        Gapt2 {
            alphabet: (0..letters).map(|l| format!("l{l}")).collect(),
            b,
            states: (0..n).map(|q| format!("q{q}")).collect(),
            delta,
            init: 0,
            acc: ParityCondition::from_indices(index),
        }
    }

    #[test]
    fn constants() {
        assert!(gapt_emptiness(&Gapt2::constant(true, vec!["a".into()])).unwrap());
        assert!(!gapt_emptiness(&Gapt2::constant(false, vec!["a".into()])).unwrap());
    }

    #[test]
    fn infinite_path_parity() {
        let even = automaton(vec![vec![m(Direction::AtLeast(0), 0)]], vec![2], 0);
        assert!(gapt_emptiness(&even).unwrap());
        let odd = automaton(vec![vec![m(Direction::AtLeast(0), 0)]], vec![1], 0);
        assert!(!gapt_emptiness(&odd).unwrap());
    }

    #[test]
    fn odd_loop_can_be_escaped_by_a_letter() {
        let a = automaton(vec![vec![m(Direction::AtLeast(0), 0), PlusFormula::True]], vec![1], 0);
        assert!(gapt_emptiness(&a).unwrap());
    }

    #[test]
    fn stay_loop_is_caught_by_the_annotation() {
        let odd = automaton(vec![vec![m(Direction::Here, 0)]], vec![1], 0);
        assert!(!gapt_emptiness(&odd).unwrap());
        let even = automaton(vec![vec![m(Direction::Here, 0)]], vec![2], 0);
        assert!(gapt_emptiness(&even).unwrap());
    }

    #[test]
    fn up_down_loop() {
        // q0 goes to a child in q1; q1 returns to the parent in q0.
        let delta = vec![vec![m(Direction::AtLeast(0), 1)], vec![m(Direction::Up, 0)]];
        assert!(!gapt_emptiness(&automaton(delta.clone(), vec![1, 1], 0)).unwrap());
        assert!(gapt_emptiness(&automaton(delta, vec![2, 2], 0)).unwrap());
    }

    #[test]
    fn up_move_needs_the_parent_to_satisfy_the_target() {
        // q1 asks the parent for q2, which needs letter l1 there; the root must read l0.
        let f = PlusFormula::False;
        let t = PlusFormula::True;
        let delta = vec![
            vec![m(Direction::AtLeast(0), 1), f.clone()],
            vec![m(Direction::Up, 2), m(Direction::Up, 2)],
            vec![f.clone(), t.clone()],
        ];
        assert!(!gapt_emptiness(&automaton(delta, vec![2, 2, 2], 0)).unwrap());
        let delta = vec![
            vec![m(Direction::AtLeast(0), 1), f.clone()],
            vec![m(Direction::Up, 2), m(Direction::Up, 2)],
            vec![t.clone(), f],
        ];
        assert!(gapt_emptiness(&automaton(delta, vec![2, 2, 2], 0)).unwrap());
    }

    #[test]
    fn grades_force_distinct_children() {
        // Two children in q1, at most one child may carry q2 = false.
        let f = PlusFormula::False;
        let delta = vec![
            vec![PlusFormula::and(m(Direction::AtLeast(1), 1), m(Direction::AllBut(0), 2))],
            vec![PlusFormula::True],
            vec![f.clone()],
        ];
        assert!(!gapt_emptiness(&automaton(delta, vec![2, 2, 2], 1)).unwrap());
        let delta = vec![
            vec![PlusFormula::and(m(Direction::AtLeast(1), 1), m(Direction::AllBut(1), 2))],
            vec![PlusFormula::True],
            vec![f.clone()],
        ];
        assert!(!gapt_emptiness(&automaton(delta, vec![2, 2, 2], 1)).unwrap());
        let delta = vec![
            vec![PlusFormula::and(m(Direction::AtLeast(1), 1), m(Direction::AllBut(2), 2))],
            vec![PlusFormula::True],
            vec![f],
        ];
        assert!(gapt_emptiness(&automaton(delta, vec![2, 2, 2], 2)).unwrap());
    }

    #[test]
    fn choices_for_two_diamonds() {
        let s: StrategyLabel =
            [(0, Direction::AtLeast(0), 1), (0, Direction::AtLeast(0), 2)].into_iter().collect();
        let c = children_choices(&s, 1000).unwrap();
        let split: Vec<PromiseLabel> = vec![[(0, 1)].into_iter().collect(), [(0, 2)].into_iter().collect()];
        assert_eq!(c, vec![split]);
        let mut s2 = s.clone();
        s2.insert((0, Direction::AllBut(1), 3));
        // Sharing a child saves a box obligation, splitting gives smaller children.
        assert_eq!(children_choices(&s2, 1000).unwrap().len(), 3);
        let s: StrategyLabel =
            [(0, Direction::AtLeast(1), 1), (0, Direction::AllBut(1), 2)].into_iter().collect();
        let c = children_choices(&s, 1000).unwrap();
        let expect: Vec<PromiseLabel> =
            vec![[(0, 1)].into_iter().collect(), [(0, 1), (0, 2)].into_iter().collect()];
        assert_eq!(c, vec![expect]);
        assert_eq!(children_choices(&StrategyLabel::new(), 10).unwrap(), vec![Vec::<PromiseLabel>::new()]);
    }

    #[allow(clippy::too_many_arguments)]
    fn assign(
        diamonds: &[((usize, usize), usize)],
        boxes: &[((usize, usize), usize)],
        i: usize,
        children: Vec<PromiseLabel>,
        seen: &mut HashSet<(usize, Vec<PromiseLabel>)>,
        found: &mut BTreeSet<BTreeSet<PromiseLabel>>,
        count: &mut usize,
        max: usize,
    ) -> Result<(), GaptError> {
        let mut key = children.clone();
        key.sort();
        if !seen.insert((i, key)) {
            return Ok(());
        }
        *count += 1;
        if *count > max {
            return Err(GaptError::Budget { what: "children choices", limit: max });
        }
        if i == diamonds.len() {
            return except(boxes, 0, &children, &mut vec![BTreeSet::new(); children.len()], found, count, max);
        }
        let (pair, r) = diamonds[i];
        let m = children.len();
        for fresh in 0..=r {
            let old = r - fresh;
            if old > m {
                continue;
            }
            for subset in combinations(m, old) {
                let mut next = children.clone();
                for &c in &subset {
                    next[c].insert(pair);
                }
                for _ in 0..fresh {
                    next.push([pair].into_iter().collect());
                }
                assign(diamonds, boxes, i + 1, next, seen, found, count, max)?;
            }
        }
        Ok(())
    }

    fn except(
        boxes: &[((usize, usize), usize)],
        i: usize,
        children: &[PromiseLabel],
        exempt: &mut Vec<BTreeSet<usize>>,
        found: &mut BTreeSet<BTreeSet<PromiseLabel>>,
        count: &mut usize,
        max: usize,
    ) -> Result<(), GaptError> {
        if i == boxes.len() {
            let choice: BTreeSet<PromiseLabel> = children
                .iter()
                .enumerate()
                .map(|(c, pro)| {
                    let mut p = pro.clone();
                    p.extend(boxes.iter().enumerate().filter(|(b, _)| !exempt[c].contains(b)).map(|(_, (pair, _))| *pair));
                    p
                })
                .collect();
            found.insert(choice);
            return Ok(());
        }
        let (_, n) = boxes[i];
        let m = children.len();
        for subset in combinations(m, n.min(m)) {
            *count += 1;
            if *count > max {
                return Err(GaptError::Budget { what: "children choices", limit: max });
            }
            for &c in &subset {
                exempt[c].insert(i);
            }
            except(boxes, i + 1, children, exempt, found, count, max)?;
            for &c in &subset {
                exempt[c].remove(&i);
            }
        }
        Ok(())
    }

    /// All `k`-subsets of `0..m` in lexicographic order.
    fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for x in start..m {
                if m - x < k - cur.len() {
                    break;
                }
                cur.push(x);
                go(x + 1, m, k, cur, out);
                cur.pop();
            }
        }
        go(0, m, k, &mut cur, &mut out);
        out
    }

    /// Every assignment of obligations to children, without canonical forms
    /// or dominance pruning.
    fn all_choices(str: &StrategyLabel) -> BTreeSet<BTreeSet<PromiseLabel>> {
        let mut diamonds: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        let mut boxes: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for &(q, d, q1) in str {
            match d {
                Direction::AtLeast(n) => {
                    let e = diamonds.entry((q, q1)).or_insert(n);
                    *e = (*e).max(n);
                }
                Direction::AllBut(n) => {
                    let e = boxes.entry((q, q1)).or_insert(n);
                    *e = (*e).min(n);
                }
                _ => {}
            }
        }
        let diamonds: Vec<_> = diamonds.into_iter().map(|(p, n)| (p, n as usize + 1)).collect();
        let boxes: Vec<_> = boxes.into_iter().map(|(p, n)| (p, n as usize)).collect();
        let mut found = BTreeSet::new();
        assign(&diamonds, &boxes, 0, Vec::new(), &mut HashSet::new(), &mut found, &mut 0, usize::MAX).unwrap();
        found
    }

    fn random_strategy(rng: &mut impl rand::Rng) -> StrategyLabel {
        let mut s = StrategyLabel::new();
        for t in 1..=rng.gen_range(1..=3) {
            s.insert((0, Direction::AtLeast(rng.gen_range(0..=1)), t));
        }
        for t in 4..4 + rng.gen_range(0..=2) {
            s.insert((0, Direction::AllBut(rng.gen_range(0..=2)), t));
        }
        s
    }

    #[test]
    fn canonical_choices_match_exhaustive_assignment() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let dominates = |c: &BTreeSet<PromiseLabel>, d: &BTreeSet<PromiseLabel>| {
            c.iter().all(|x| d.iter().any(|y| x.is_subset(y)))
        };
        for _ in 0..60 {
            let s = random_strategy(&mut rng);
            let all = all_choices(&s);
            let kept: Vec<BTreeSet<PromiseLabel>> =
                children_choices(&s, 1_000_000).unwrap().into_iter().map(|c| c.into_iter().collect()).collect();
            for c in &kept {
                assert!(all.contains(c), "canonical choice {c:?} is not realizable for {s:?}");
            }
            for c in &all {
                assert!(kept.iter().any(|k| dominates(k, c)), "choice {c:?} is not dominated for {s:?}");
            }
        }
    }

    #[test]
    fn budget_is_reported() {
        let a = automaton(vec![vec![m(Direction::AtLeast(0), 0)]], vec![2], 0);
        let budget = EmptinessBudget { max_contexts: 1, ..Default::default() };
        let (r, _) = gapt_emptiness_with(&a, &budget);
        assert!(matches!(r, Err(GaptError::Budget { what: "contexts", .. })));
    }

    #[test]
    fn trace_exposes_graph_and_game() {
        let a = automaton(vec![vec![m(Direction::AtLeast(0), 0)]], vec![2], 0);
        let (r, t) = gapt_emptiness_trace(&a, &EmptinessBudget::default());
        assert!(r.unwrap());
        let g = &t.label_graph;
        assert!(g.contexts[g.root].live);
        let lid = g.contexts[g.root].labels[0];
        assert_eq!(g.labels[lid].strategy, vec!["(q0,<0>,q0)"]);
        assert_eq!(g.labels[lid].choices.len(), 1);
        let game = t.game.unwrap();
        assert_eq!(solve_zielonka(&game).unwrap().winner[0], Player::Protagonist);
        let odd = automaton(vec![vec![m(Direction::AtLeast(0), 0)]], vec![1], 0);
        let (r, t) = gapt_emptiness_trace(&odd, &EmptinessBudget::default());
        assert!(!r.unwrap());
        assert_eq!(solve_zielonka(&t.game.unwrap()).unwrap().winner[0], Player::Antagonist);
    }
}
