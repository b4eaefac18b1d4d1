//! Finite Kripke structures.
//!
//! A structure has named states, a relation per atomic program and a set of
//! states per proposition or nominal. Label keys are the proposition name for
//! propositions and `#o` for a nominal `o`. Relations of inverse programs are
//! derived on demand and never stored.
//!
//! Besides the model checker ([`eval`], [`holds`]) the module provides the
//! structural predicates on forest-shaped structures, the encodings of tree
//! and quasi-forest structures as labeled forests, pre-models with choice
//! functions and their unwinding, and a brute-force model search used as an
//! independent satisfiability oracle.

mod eval;
mod oracle;
mod premodel;

pub use eval::{eval, eval_all, holds, Valuation};
pub use oracle::{bounded_model_search, bounded_model_search_limited, random_structure, OracleStats};
pub use premodel::{unwind, validate_choice, validate_premodel, well_founded, Choice, PreModel, Unwinding};

use crate::automata::{node_name, parse_node, LabeledForest, NodeId};
use crate::formula::{Formula, Program};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KripkeError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state `{0}` is declared twice")]
    DuplicateState(String),
    #[error("state index {0} is out of range")]
    BadStateIndex(usize),
    #[error("variable `{0}` is not bound by the valuation")]
    UnboundVariable(String),
    #[error("nominal `{0}` must label exactly one state")]
    NominalNotSingleton(String),
    #[error("structure is not a tree structure")]
    NotTree,
    #[error("structure is not a directed quasi-forest structure")]
    NotQuasiForest,
    #[error("nominal `{0}` does not label a root")]
    NominalNotAtRoot(String),
    #[error("inverse program `{0}` is not supported here")]
    InverseProgram(String),
    #[error("no state carries the formula")]
    NoInitialState,
    #[error("search budget of {0} structures exhausted")]
    Budget(u64),
    #[error("invalid structure JSON: {0}")]
    Json(String),
}

/// Label key of a nominal.
pub fn nominal_key(o: &str) -> String {
    format!("#{o}")
}

/// A finite Kripke structure.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KripkeStructure {
    states: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Edges of each atomic program, as pairs of state indices.
    pub r: BTreeMap<String, BTreeSet<(usize, usize)>>,
    /// States of each proposition (`p`) and nominal (`#o`).
    pub l: BTreeMap<String, BTreeSet<usize>>,
}

impl KripkeStructure {
    pub fn new() -> Self {
        Self::default()
    }

    /// A structure with states named `0`, `1`, ... `n-1`.
    pub fn with_states(n: usize) -> Self {
        let mut k = Self::new();
        for i in 0..n {
            k.add_state(i.to_string()).expect("fresh names");
        }
        k
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> Result<usize, KripkeError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(KripkeError::DuplicateState(name));
        }
        let i = self.states.len();
        self.index.insert(name.clone(), i);
        self.states.push(name);
        Ok(i)
    }

    pub fn add_edge(&mut self, prog: &str, u: usize, v: usize) {
        self.r.entry(prog.to_string()).or_default().insert((u, v));
    }

    /// Adds `w` to the states of a proposition or nominal label key.
    pub fn add_label(&mut self, key: &str, w: usize) {
        self.l.entry(key.to_string()).or_default().insert(w);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn name(&self, w: usize) -> &str {
        &self.states[w]
    }

    pub fn state(&self, name: &str) -> Result<usize, KripkeError> {
        self.index.get(name).copied().ok_or_else(|| KripkeError::UnknownState(name.to_string()))
    }

    pub fn has_label(&self, key: &str, w: usize) -> bool {
        self.l.get(key).is_some_and(|s| s.contains(&w))
    }

    pub fn has_edge(&self, prog: &str, u: usize, v: usize) -> bool {
        self.r.get(prog).is_some_and(|s| s.contains(&(u, v)))
    }

    /// The state named by nominal `o`, if it labels exactly one state.
    pub fn nominal_state(&self, o: &str) -> Option<usize> {
        let s = self.l.get(&nominal_key(o))?;
        (s.len() == 1).then(|| *s.iter().next().unwrap())
    }

    /// Successors of `w` under a possibly inverted program, ascending.
    pub fn successors(&self, w: usize, prog: &Program) -> Vec<usize> {
        let Some(edges) = self.r.get(&prog.name) else { return Vec::new() };
        let mut out: Vec<usize> = if prog.inverted {
            edges.iter().filter(|&&(_, v)| v == w).map(|&(u, _)| u).collect()
        } else {
            edges.range((w, 0)..=(w, usize::MAX)).map(|&(_, v)| v).collect()
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Checks that edges and labels refer to existing states and that every
    /// nominal labels exactly one state.
    pub fn validate(&self) -> Result<(), KripkeError> {
        let n = self.len();
        for edges in self.r.values() {
            if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= n || v >= n) {
                return Err(KripkeError::BadStateIndex(u.max(v)));
            }
        }
        for (key, s) in &self.l {
            if let Some(&w) = s.iter().find(|&&w| w >= n) {
                return Err(KripkeError::BadStateIndex(w));
            }
            if let Some(o) = key.strip_prefix('#') {
                if s.len() != 1 {
                    return Err(KripkeError::NominalNotSingleton(o.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, KripkeError> {
        let raw: KripkeJson = serde_json::from_str(text).map_err(|e| KripkeError::Json(e.to_string()))?;
        Self::try_from(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&KripkeJson::from(self)).expect("serializable")
    }

    fn node_ids(&self) -> Option<Vec<NodeId>> {
        self.states.iter().map(|s| parse_node(s).filter(|x| !x.is_empty())).collect()
    }

    /// Unordered parent-child pairs, or `None` when the state names do not
    /// form a prefix-closed forest.
    fn forest_shape(&self) -> Option<ForestShape> {
        let ids = self.node_ids()?;
        let pos: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, x)| (x, i)).collect();
        let mut parent = vec![None; ids.len()];
        for (i, x) in ids.iter().enumerate() {
            if x.len() > 1 {
                parent[i] = Some(*pos.get(&x[..x.len() - 1].to_vec())?);
            }
        }
        Some(ForestShape { parent })
    }
}

struct ForestShape {
    parent: Vec<Option<usize>>,
}

impl ForestShape {
    fn is_root(&self, w: usize) -> bool {
        self.parent[w].is_none()
    }

    fn is_tree_pair(&self, u: usize, v: usize) -> bool {
        self.parent[v] == Some(u) || self.parent[u] == Some(v)
    }

    /// Condition (ii) of forest structures over the given edges.
    fn edges_match(&self, edges: &BTreeSet<(usize, usize)>) -> bool {
        if !edges.iter().all(|&(u, v)| self.is_tree_pair(u, v)) {
            return false;
        }
        (0..self.parent.len()).all(|v| match self.parent[v] {
            Some(u) => edges.contains(&(u, v)) || edges.contains(&(v, u)),
            None => true,
        })
    }
}

/// The shape class of a structure. Directed classes take precedence, so a
/// tree with an extra edge back into its root is reported as a directed
/// quasi-forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureClass {
    DirectedTree,
    DirectedForest,
    DirectedQuasiForest,
    Tree,
    Forest,
    None,
}

impl fmt::Display for StructureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StructureClass::DirectedTree => "directed-tree",
            StructureClass::Tree => "tree",
            StructureClass::DirectedForest => "directed-forest",
            StructureClass::Forest => "forest",
            StructureClass::DirectedQuasiForest => "directed-quasi-forest",
            StructureClass::None => "none",
        };
        f.write_str(s)
    }
}

/// Which forest-shape predicates a structure satisfies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShapeFlags {
    pub forest: bool,
    pub directed_forest: bool,
    pub tree: bool,
    pub directed_quasi_forest: bool,
}

/// Evaluates the forest-shape predicates on a structure whose state names are
/// dot-separated node paths.
pub fn shape_flags(k: &KripkeStructure) -> ShapeFlags {
    let Some(shape) = k.forest_shape() else { return ShapeFlags::default() };
    let all: BTreeSet<(usize, usize)> = k.r.values().flatten().copied().collect();
    let single_root = (0..k.len()).filter(|&w| shape.is_root(w)).count() == 1;
    let directed = |edges: &BTreeSet<(usize, usize)>| edges.iter().all(|&(u, v)| shape.parent[v] == Some(u));
    let forest = shape.edges_match(&all);
    let kept: BTreeSet<(usize, usize)> = all.iter().filter(|&&(_, v)| !shape.is_root(v)).copied().collect();
    ShapeFlags {
        forest,
        directed_forest: forest && directed(&all),
        tree: forest && single_root,
        directed_quasi_forest: shape.edges_match(&kept) && directed(&kept),
    }
}

/// Classifies a structure whose state names are dot-separated node paths.
pub fn classify_structure(k: &KripkeStructure) -> StructureClass {
    let f = shape_flags(k);
    match () {
        _ if f.directed_forest && f.tree => StructureClass::DirectedTree,
        _ if f.directed_forest => StructureClass::DirectedForest,
        _ if f.directed_quasi_forest => StructureClass::DirectedQuasiForest,
        _ if f.tree => StructureClass::Tree,
        _ if f.forest => StructureClass::Forest,
        _ => StructureClass::None,
    }
}

/// A letter component of an encoded tree or forest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// An atomic proposition, printed as its name.
    Prop(String),
    /// A nominal, printed `#o`.
    Nominal(String),
    /// The program of the edge from the parent, printed `@a` or `@a-`.
    Edge(Program),
    /// An `a`-edge into the root named by nominal `o`, printed `^a#o`.
    Up { prog: String, nominal: String },
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Prop(p) => f.write_str(p),
            Symbol::Nominal(o) => write!(f, "#{o}"),
            Symbol::Edge(a) => write!(f, "@{a}"),
            Symbol::Up { prog, nominal } => write!(f, "^{prog}#{nominal}"),
        }
    }
}

impl std::str::FromStr for Symbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(o) = s.strip_prefix('#') {
            Ok(Symbol::Nominal(o.to_string()))
        } else if let Some(a) = s.strip_prefix('@') {
            Ok(Symbol::Edge(match a.strip_suffix('-') {
                Some(b) => Program::inverse_of(b),
                None => Program::new(a),
            }))
        } else if let Some(rest) = s.strip_prefix('^') {
            let (a, o) = rest.split_once('#').ok_or_else(|| format!("malformed symbol `{s}`"))?;
            Ok(Symbol::Up { prog: a.to_string(), nominal: o.to_string() })
        } else if s.is_empty() {
            Err("empty symbol".to_string())
        } else {
            Ok(Symbol::Prop(s.to_string()))
        }
    }
}

/// A letter: a set of symbols.
pub type Letter = BTreeSet<Symbol>;

/// Encodes a tree structure as a labeled tree over `2^Γ(φ)`.
///
/// A node carries the propositions of `φ` that hold at it and `@α` for every
/// program `α` of `φ` with an `α`-edge from its parent into it.
pub fn tree_encoding(k: &KripkeStructure, phi: &Formula) -> Result<LabeledForest<Letter>, KripkeError> {
    if !shape_flags(k).tree {
        return Err(KripkeError::NotTree);
    }
    let shape = k.forest_shape().expect("classified");
    let ids = k.node_ids().expect("classified");
    let props = phi.propositions();
    let progs = phi.programs();
    let mut labels = BTreeMap::new();
    for w in 0..k.len() {
        let mut letter: Letter = props.iter().filter(|p| k.has_label(p, w)).map(|p| Symbol::Prop(p.clone())).collect();
        if let Some(v) = shape.parent[w] {
            for alpha in &progs {
                let present = if alpha.inverted { k.has_edge(&alpha.name, w, v) } else { k.has_edge(&alpha.name, v, w) };
                if present {
                    letter.insert(Symbol::Edge(alpha.clone()));
                }
            }
        }
        labels.insert(ids[w].clone(), letter);
    }
    Ok(LabeledForest::new(labels).expect("prefix-closed"))
}

/// Reads the parent-child edges back from a tree encoding.
pub fn decode_tree_edges(t: &LabeledForest<Letter>) -> BTreeMap<String, BTreeSet<(NodeId, NodeId)>> {
    let mut out: BTreeMap<String, BTreeSet<(NodeId, NodeId)>> = BTreeMap::new();
    for (x, letter) in &t.labels {
        let Some(parent) = LabeledForest::<Letter>::parent(x) else { continue };
        for s in letter {
            if let Symbol::Edge(a) = s {
                let pair = if a.inverted { (x.clone(), parent.clone()) } else { (parent.clone(), x.clone()) };
                out.entry(a.name.clone()).or_default().insert(pair);
            }
        }
    }
    out
}

/// Encodes a directed quasi-forest structure as a labeled forest over
/// `2^Θ(φ)`.
///
/// A node carries the propositions and nominals of `φ` that hold at it, `@a`
/// for the tree edges into it and `^a#o` for every `a`-edge from it into the
/// root named by `o`. Edges into roots that carry no nominal of `φ` are not
/// represented.
pub fn quasi_forest_encoding(k: &KripkeStructure, phi: &Formula) -> Result<LabeledForest<Letter>, KripkeError> {
    if !shape_flags(k).directed_quasi_forest {
        return Err(KripkeError::NotQuasiForest);
    }
    if let Some(alpha) = phi.programs().into_iter().find(|a| a.inverted) {
        return Err(KripkeError::InverseProgram(alpha.to_string()));
    }
    let shape = k.forest_shape().expect("classified");
    let ids = k.node_ids().expect("classified");
    let mut named_roots = Vec::new();
    for o in phi.nominals() {
        let w = k.nominal_state(&o).ok_or_else(|| KripkeError::NominalNotSingleton(o.clone()))?;
        if !shape.is_root(w) {
            return Err(KripkeError::NominalNotAtRoot(o));
        }
        named_roots.push((o, w));
    }
    let props = phi.propositions();
    let progs = phi.atomic_programs();
    let mut labels = BTreeMap::new();
    for w in 0..k.len() {
        let mut letter: Letter = props.iter().filter(|p| k.has_label(p, w)).map(|p| Symbol::Prop(p.clone())).collect();
        for (o, v) in &named_roots {
            if *v == w {
                letter.insert(Symbol::Nominal(o.clone()));
            }
            for a in &progs {
                if k.has_edge(a, w, *v) {
                    letter.insert(Symbol::Up { prog: a.clone(), nominal: o.clone() });
                }
            }
        }
        if let Some(v) = shape.parent[w] {
            for a in &progs {
                if k.has_edge(a, v, w) {
                    letter.insert(Symbol::Edge(Program::new(a.clone())));
                }
            }
        }
        labels.insert(ids[w].clone(), letter);
    }
    Ok(LabeledForest::new(labels).expect("prefix-closed"))
}

/// JSON dump of a labeled forest: `{"labels": {"1.2": ["p", "@a"], ...}}`.
pub fn forest_to_json(t: &LabeledForest<Letter>) -> String {
    let labels: BTreeMap<String, Vec<String>> =
        t.labels.iter().map(|(x, l)| (node_name(x), l.iter().map(|s| s.to_string()).collect())).collect();
    serde_json::to_string_pretty(&serde_json::json!({ "labels": labels })).expect("serializable")
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StateId {
    Name(String),
    Number(u64),
}

impl StateId {
    fn into_name(self) -> String {
        match self {
            StateId::Name(s) => s,
            StateId::Number(n) => n.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct KripkeJson {
    states: Vec<StateId>,
    #[serde(rename = "R", default)]
    r: BTreeMap<String, Vec<(StateId, StateId)>>,
    #[serde(rename = "L", default)]
    l: BTreeMap<String, Vec<StateId>>,
}

impl TryFrom<KripkeJson> for KripkeStructure {
    type Error = KripkeError;

    fn try_from(raw: KripkeJson) -> Result<Self, KripkeError> {
        let mut k = KripkeStructure::new();
        for s in raw.states {
            k.add_state(s.into_name())?;
        }
        for (a, pairs) in raw.r {
            k.r.entry(a.clone()).or_default();
            for (u, v) in pairs {
                let (u, v) = (k.state(&u.into_name())?, k.state(&v.into_name())?);
                k.add_edge(&a, u, v);
            }
        }
        for (key, ws) in raw.l {
            k.l.entry(key.clone()).or_default();
            for w in ws {
                let w = k.state(&w.into_name())?;
                k.add_label(&key, w);
            }
        }
        k.validate()?;
        Ok(k)
    }
}

impl From<&KripkeStructure> for KripkeJson {
    fn from(k: &KripkeStructure) -> Self {
        let name = |w: usize| StateId::Name(k.states[w].clone());
        KripkeJson {
            states: k.states.iter().map(|s| StateId::Name(s.clone())).collect(),
            r: k.r.iter().map(|(a, e)| (a.clone(), e.iter().map(|&(u, v)| (name(u), name(v))).collect())).collect(),
            l: k.l.iter().map(|(p, s)| (p.clone(), s.iter().map(|&w| name(w)).collect())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn tree(names: &[&str], edges: &[(&str, &str, &str)]) -> KripkeStructure {
        let mut k = KripkeStructure::new();
        for n in names {
            k.add_state(*n).unwrap();
        }
        for (a, u, v) in edges {
            let (u, v) = (k.state(u).unwrap(), k.state(v).unwrap());
            k.add_edge(a, u, v);
        }
        k
    }

    #[test]
    fn json_round_trip() {
        let text = r##"{"states":["u","v"],"R":{"a":[["u","v"],["v","v"]]},"L":{"p":["v"],"#o":["u"]}}"##;
        let k = KripkeStructure::from_json(text).unwrap();
        assert_eq!(k.successors(1, &Program::new("a")), vec![1]);
        assert_eq!(k.successors(1, &Program::inverse_of("a")), vec![0, 1]);
        assert_eq!(KripkeStructure::from_json(&k.to_json()).unwrap(), k);
        let numeric = r#"{"states":[0,1],"R":{"a":[[0,1]]},"L":{}}"#;
        assert_eq!(KripkeStructure::from_json(numeric).unwrap().len(), 2);
    }

    #[test]
    fn json_rejects_bad_nominal() {
        let text = r##"{"states":["u","v"],"R":{},"L":{"#o":["u","v"]}}"##;
        assert_eq!(KripkeStructure::from_json(text), Err(KripkeError::NominalNotSingleton("o".into())));
        let text = r#"{"states":["u"],"R":{"a":[["u","w"]]}}"#;
        assert_eq!(KripkeStructure::from_json(text), Err(KripkeError::UnknownState("w".into())));
    }

    #[test]
    fn classification_examples() {
        let k = tree(&["1", "1.1", "1.2"], &[("a", "1", "1.1"), ("a", "1", "1.2")]);
        assert_eq!(classify_structure(&k), StructureClass::DirectedTree);

        let mut k2 = k.clone();
        k2.add_edge("a", 1, 0);
        k2.add_label("#o", 0);
        assert_eq!(classify_structure(&k2), StructureClass::DirectedQuasiForest);

        let mut k3 = k.clone();
        k3.add_edge("a", 1, 2);
        assert_eq!(classify_structure(&k3), StructureClass::None);

        let k4 = tree(&["1", "1.1"], &[("a", "1.1", "1")]);
        assert_eq!(classify_structure(&k4), StructureClass::Tree);

        let k5 = tree(&["1", "2", "2.1"], &[("a", "2", "2.1")]);
        assert_eq!(classify_structure(&k5), StructureClass::DirectedForest);

        let k6 = tree(&["1", "1.1"], &[]);
        assert_eq!(classify_structure(&k6), StructureClass::None, "missing parent-child edge");

        let k7 = tree(&["x", "y"], &[]);
        assert_eq!(classify_structure(&k7), StructureClass::None);
    }

    #[test]
    fn tree_encoding_examples() {
        let mut k = tree(&["1", "1.1", "1.2"], &[("a", "1", "1.1"), ("a", "1.2", "1")]);
        k.add_label("p", 0);
        k.add_label("p", 2);
        let phi = parse("p & <0,a> p & <0,a-> p").unwrap();
        let t = tree_encoding(&k, &phi).unwrap();
        let sym = |s: &str| s.parse::<Symbol>().unwrap();
        assert_eq!(t.label(&[1]).unwrap(), &[sym("p")].into_iter().collect());
        assert_eq!(t.label(&[1, 1]).unwrap(), &[sym("@a")].into_iter().collect());
        assert_eq!(t.label(&[1, 2]).unwrap(), &[sym("p"), sym("@a-")].into_iter().collect());
        let decoded = decode_tree_edges(&t);
        assert_eq!(decoded["a"], [(vec![1], vec![1, 1]), (vec![1, 2], vec![1])].into_iter().collect());
    }

    #[test]
    fn quasi_forest_encoding_examples() {
        let mut k = tree(&["1"], &[("a", "1", "1")]);
        k.add_label("#o", 0);
        let phi = parse("#o & <0,a> #o").unwrap();
        let t = quasi_forest_encoding(&k, &phi).unwrap();
        let expected: Letter = ["#o", "^a#o"].iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(t.label(&[1]).unwrap(), &expected);

        let mut k = tree(&["1", "1.1"], &[("a", "1", "1.1")]);
        k.add_label("#o", 0);
        k.add_label("#q", 0);
        let phi = parse("#o & #q & <0,a> true").unwrap();
        let t = quasi_forest_encoding(&k, &phi).unwrap();
        assert_eq!(t.label(&[1, 1]).unwrap(), &["@a".parse().unwrap()].into_iter().collect());
        assert_eq!(t.label(&[1]).unwrap().len(), 2);

        let mut k = tree(&["1", "1.1"], &[("a", "1", "1.1")]);
        k.add_label("#o", 0);
        assert_eq!(quasi_forest_encoding(&k, &phi), Err(KripkeError::NominalNotSingleton("q".into())));
        let mut k = tree(&["1", "1.1"], &[("a", "1", "1.1")]);
        k.add_label("#o", 1);
        assert_eq!(quasi_forest_encoding(&k, &phi), Err(KripkeError::NominalNotAtRoot("o".into())));
    }

    #[test]
    fn symbol_round_trip() {
        for s in ["p", "#o", "@a", "@a-", "^a#o"] {
            assert_eq!(s.parse::<Symbol>().unwrap().to_string(), s);
        }
    }
}
