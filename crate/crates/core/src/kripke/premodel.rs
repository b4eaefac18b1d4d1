//! Pre-models, choice functions, well-foundedness and unwinding into
//! directed quasi-forest structures.

use super::eval::{eval_with, Mode};
use super::{KripkeError, KripkeStructure};
use crate::automata::{node_name, NodeId};
use crate::formula::{closure, Formula};
use crate::words::sccs;
use std::collections::{BTreeMap, BTreeSet};

/// A value of a choice function: the chosen disjunct or the chosen set of
/// successors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    Disjunct(Formula),
    States(BTreeSet<usize>),
}

/// A structure together with an atom per state and a choice function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreModel {
    pub k: KripkeStructure,
    pub pi: Vec<BTreeSet<Formula>>,
    pub ch: BTreeMap<(usize, Formula), Choice>,
}

impl PreModel {
    /// The pre-model whose atoms are the closure sentences true at each
    /// state. Disjunctions choose the left disjunct when it holds, atleast
    /// formulas choose every successor satisfying the body and allbut
    /// formulas choose every successor violating it.
    pub fn from_structure(k: &KripkeStructure, phi: &Formula) -> Result<Self, KripkeError> {
        Self::build(k, phi, Mode::default())
    }

    /// Like [`PreModel::from_structure`] but with least fixpoints evaluated
    /// as greatest fixpoints. The result satisfies every local condition of a
    /// pre-model but need not be well-founded.
    pub fn from_structure_greatest(k: &KripkeStructure, phi: &Formula) -> Result<Self, KripkeError> {
        Self::build(k, phi, Mode { mu_as_nu: true })
    }

    fn build(k: &KripkeStructure, phi: &Formula, mode: Mode) -> Result<Self, KripkeError> {
        let cl = closure(phi, false).map_err(|_| KripkeError::UnboundVariable(format!("{phi}")))?;
        let mut pi = vec![BTreeSet::new(); k.len()];
        for f in &cl {
            for w in eval_with(k, f, &Default::default(), mode)? {
                pi[w].insert(f.clone());
            }
        }
        let mut ch = BTreeMap::new();
        for (w, atom) in pi.iter().enumerate() {
            for f in atom {
                let choice = match f {
                    Formula::Or(l, r) => Choice::Disjunct(if atom.contains(&**l) { (**l).clone() } else { (**r).clone() }),
                    Formula::AtLeast { prog, body, .. } => {
                        Choice::States(k.successors(w, prog).into_iter().filter(|&v| pi[v].contains(&**body)).collect())
                    }
                    Formula::AllBut { prog, body, .. } => {
                        Choice::States(k.successors(w, prog).into_iter().filter(|&v| !pi[v].contains(&**body)).collect())
                    }
                    _ => continue,
                };
                ch.insert((w, f.clone()), choice);
            }
        }
        Ok(PreModel { k: k.clone(), pi, ch })
    }

    /// States whose atom contains `φ`.
    pub fn initial_states(&self, phi: &Formula) -> Vec<usize> {
        (0..self.pi.len()).filter(|&w| self.pi[w].contains(phi)).collect()
    }

    fn choice_states(&self, w: usize, f: &Formula) -> Option<&BTreeSet<usize>> {
        match self.ch.get(&(w, f.clone()))? {
            Choice::States(s) => Some(s),
            Choice::Disjunct(_) => None,
        }
    }
}

fn is_atom(a: &BTreeSet<Formula>, cl: &BTreeSet<Formula>) -> bool {
    if !a.is_subset(cl) || a.contains(&Formula::False) {
        return false;
    }
    cl.iter().all(|f| match f {
        Formula::Prop { .. } | Formula::Nominal { .. } => !(a.contains(f) && a.contains(&f.negate_dual())),
        Formula::And(l, r) => a.contains(f) == (a.contains(&**l) && a.contains(&**r)),
        Formula::Or(l, r) => a.contains(f) == (a.contains(&**l) || a.contains(&**r)),
        Formula::Mu { .. } | Formula::Nu { .. } => a.contains(f) == a.contains(&f.unfold().expect("fixpoint")),
        _ => true,
    })
}

/// Checks that every `π(w)` is an atom and that `⟨K, π⟩` is a pre-model of
/// `φ`. Two complementary literals may not share an atom, and `false` is
/// never a member.
pub fn validate_premodel(p: &PreModel, phi: &Formula) -> bool {
    let Ok(cl) = closure(phi, false) else { return false };
    let k = &p.k;
    if p.pi.len() != k.len() || k.validate().is_err() {
        return false;
    }
    if p.initial_states(phi).is_empty() {
        return false;
    }
    p.pi.iter().enumerate().all(|(w, atom)| {
        is_atom(atom, &cl)
            && atom.iter().all(|f| match f {
                Formula::Prop { name, negated } => k.has_label(name, w) != *negated,
                Formula::Nominal { name, negated } => k.has_label(&super::nominal_key(name), w) != *negated,
                Formula::AtLeast { n, prog, body } => {
                    k.successors(w, prog).iter().filter(|&&v| p.pi[v].contains(&**body)).count() > *n as usize
                }
                Formula::AllBut { n, prog, body } => {
                    k.successors(w, prog).iter().filter(|&&v| !p.pi[v].contains(&**body)).count() <= *n as usize
                }
                _ => true,
            })
    })
}

/// Checks the clauses of a choice function for every disjunction, atleast
/// and allbut formula in an atom.
pub fn validate_choice(p: &PreModel, _phi: &Formula) -> bool {
    p.pi.iter().enumerate().all(|(w, atom)| {
        atom.iter().all(|f| match f {
            Formula::Or(l, r) => match p.ch.get(&(w, f.clone())) {
                Some(Choice::Disjunct(d)) => (d == &**l || d == &**r) && atom.contains(d),
                _ => false,
            },
            Formula::AtLeast { n, prog, body } => p.choice_states(w, f).is_some_and(|v| {
                let succ = p.k.successors(w, prog);
                v.len() > *n as usize && v.iter().all(|x| succ.contains(x) && p.pi[*x].contains(&**body))
            }),
            Formula::AllBut { n, prog, body } => p.choice_states(w, f).is_some_and(|v| {
                let succ = p.k.successors(w, prog);
                v.len() <= *n as usize
                    && v.iter().all(|x| succ.contains(x))
                    && succ.iter().filter(|x| !v.contains(x)).all(|&x| p.pi[x].contains(&**body))
            }),
            _ => true,
        })
    })
}

fn contains_sentence(rho: &Formula, m: &Formula) -> bool {
    let mut found = false;
    rho.visit(&mut |f| found |= f == m);
    found
}

/// Successors of `(w, ρ)` in the derivation relation.
fn derivations(p: &PreModel, w: usize, rho: &Formula) -> Vec<(usize, Formula)> {
    if !p.pi[w].contains(rho) {
        return Vec::new();
    }
    match rho {
        Formula::Or(..) => match p.ch.get(&(w, rho.clone())) {
            Some(Choice::Disjunct(d)) => vec![(w, d.clone())],
            _ => Vec::new(),
        },
        Formula::And(l, r) => vec![(w, (**l).clone()), (w, (**r).clone())],
        Formula::AtLeast { body, .. } => {
            p.choice_states(w, rho).into_iter().flatten().map(|&v| (v, (**body).clone())).collect()
        }
        Formula::AllBut { prog, body, .. } => {
            let chosen = p.choice_states(w, rho).cloned().unwrap_or_default();
            p.k.successors(w, prog).into_iter().filter(|v| !chosen.contains(v)).map(|v| (v, (**body).clone())).collect()
        }
        Formula::Mu { .. } | Formula::Nu { .. } => vec![(w, rho.unfold().expect("fixpoint"))],
        _ => Vec::new(),
    }
}

/// Whether no least fixpoint sentence is regenerated infinitely often.
///
/// For every least fixpoint sentence `M` of the closure, the derivation
/// relation is restricted to pairs `(w, ρ)` where `M` occurs in `ρ`. The
/// pre-model is well-founded iff no pair `(w, M)` lies on a cycle of that
/// graph.
pub fn well_founded(p: &PreModel, phi: &Formula) -> bool {
    let Ok(cl) = closure(phi, false) else { return false };
    for m in cl.iter().filter(|f| matches!(f, Formula::Mu { .. })) {
        let carriers: Vec<&Formula> = cl.iter().filter(|rho| contains_sentence(rho, m)).collect();
        let mut id = BTreeMap::new();
        for w in 0..p.k.len() {
            for rho in &carriers {
                let next = id.len();
                id.insert((w, (*rho).clone()), next);
            }
        }
        let mut adj = vec![Vec::new(); id.len()];
        for ((w, rho), &i) in &id {
            for target in derivations(p, *w, rho) {
                if let Some(&j) = id.get(&target) {
                    adj[i].push(j);
                }
            }
        }
        let mut is_m = vec![false; id.len()];
        for ((_, rho), &i) in &id {
            is_m[i] = rho == m;
        }
        let allowed = vec![true; id.len()];
        for comp in sccs(&adj, &allowed) {
            let cyclic = comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
            if cyclic && comp.iter().any(|&i| is_m[i]) {
                return false;
            }
        }
    }
    true
}

/// Result of [`unwind`].
#[derive(Debug, Clone)]
pub struct Unwinding {
    /// The unwound pre-model. States are named by node paths `1`, `1.2`, ...
    pub premodel: PreModel,
    /// The state of the input structure each new state copies.
    pub tau: Vec<usize>,
    /// Set when witnesses at the depth bound were not materialized.
    pub truncated: bool,
}

/// Unwinds a pre-model of a hybrid graded sentence into a directed
/// quasi-forest.
///
/// The roots `1..k` copy the first state carrying `φ` followed by the states
/// named by the nominals of `φ`. Every round expands the nodes of maximal
/// length in ascending order. An atleast witness that is one of the root
/// states becomes an edge back to that root. Every other distinct witness
/// becomes one fresh child. The exceptions chosen for an allbut formula are
/// the successors whose originals were exceptions. Nominals that do not occur in `φ` are dropped.
/// After `depth` rounds the remaining witnesses are
/// dropped and `truncated` is set.
pub fn unwind(p: &PreModel, phi: &Formula, depth: usize) -> Result<Unwinding, KripkeError> {
    if let Some(alpha) = phi.programs().into_iter().find(|a| a.inverted) {
        return Err(KripkeError::InverseProgram(alpha.to_string()));
    }
    let w0 = *p.initial_states(phi).first().ok_or(KripkeError::NoInitialState)?;
    let mut base = vec![w0];
    for o in phi.nominals() {
        if let Some(v) = p.k.nominal_state(&o) {
            if !base.contains(&v) {
                base.push(v);
            }
        }
    }

    let mut out = KripkeStructure::new();
    let mut ids: Vec<NodeId> = Vec::new();
    let mut tau = Vec::new();
    let mut pi = Vec::new();
    let mut ch = BTreeMap::new();
    let noms = phi.nominals();
    let keep_key = |key: &str| key.strip_prefix('#').is_none_or(|o| noms.contains(o));
    let copy_state = |out: &mut KripkeStructure,
                      ids: &mut Vec<NodeId>,
                      tau: &mut Vec<usize>,
                      pi: &mut Vec<BTreeSet<Formula>>,
                      ch: &mut BTreeMap<(usize, Formula), Choice>,
                      id: NodeId,
                      v: usize| {
        let x = out.add_state(node_name(&id)).expect("fresh node");
        for (key, states) in &p.k.l {
            if states.contains(&v) && keep_key(key) {
                out.add_label(key, x);
            }
        }
        for f in &p.pi[v] {
            if let (Formula::Or(..), Some(c)) = (f, p.ch.get(&(v, f.clone()))) {
                ch.insert((x, f.clone()), c.clone());
            }
        }
        ids.push(id);
        tau.push(v);
        pi.push(p.pi[v].clone());
        x
    };
    for (i, &v) in base.iter().enumerate() {
        copy_state(&mut out, &mut ids, &mut tau, &mut pi, &mut ch, vec![i as u32 + 1], v);
    }
    for (a, edges) in &p.k.r {
        out.r.entry(a.clone()).or_default();
        for i in 0..base.len() {
            for j in i..base.len() {
                if edges.contains(&(base[i], base[j])) {
                    out.add_edge(a, i, j);
                }
            }
        }
    }
    for key in p.k.l.keys().filter(|k| keep_key(k)) {
        out.l.entry(key.clone()).or_default();
    }

    let root_of = |v: usize| base.iter().position(|&b| b == v);
    let mut frontier: Vec<usize> = (0..base.len()).collect();
    let mut truncated = false;
    for round in 0..=depth {
        if frontier.is_empty() {
            break;
        }
        frontier.sort_by(|&x, &y| ids[x].cmp(&ids[y]));
        let mut next = Vec::new();
        for &x in &frontier {
            let v0 = tau[x];
            let mut children: Vec<(usize, usize)> = Vec::new();
            let mut atleast = Vec::new();
            for f in &p.pi[v0] {
                let Formula::AtLeast { prog, .. } = f else { continue };
                let witnesses = p.choice_states(v0, f).cloned().unwrap_or_default();
                let mut chosen = BTreeSet::new();
                for v in witnesses {
                    let target = match root_of(v) {
                        Some(j) => Some(j),
                        None => match children.iter().find(|(w, _)| *w == v) {
                            Some(&(_, c)) => Some(c),
                            None if round < depth => {
                                let mut id = ids[x].clone();
                                id.push(children.len() as u32 + 1);
                                let c = copy_state(&mut out, &mut ids, &mut tau, &mut pi, &mut ch, id, v);
                                children.push((v, c));
                                next.push(c);
                                Some(c)
                            }
                            None => {
                                truncated = true;
                                None
                            }
                        },
                    };
                    if let Some(t) = target {
                        out.add_edge(&prog.name, x, t);
                        chosen.insert(t);
                    }
                }
                atleast.push((f.clone(), chosen));
            }
            for (f, chosen) in atleast {
                ch.insert((x, f), Choice::States(chosen));
            }
            for f in &p.pi[v0] {
                if let Formula::AllBut { prog, .. } = f {
                    let exceptions = p.choice_states(v0, f).cloned().unwrap_or_default();
                    let kept = out.successors(x, prog).into_iter().filter(|&y| exceptions.contains(&tau[y]));
                    ch.insert((x, f.clone()), Choice::States(kept.collect()));
                }
            }
        }
        frontier = next;
    }
    Ok(Unwinding { premodel: PreModel { k: out, pi, ch }, tau, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, random_sentence, Program, RandomFormulaConfig};
    use crate::kripke::{holds, random_structure, shape_flags};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn loop_model(nominal: bool) -> KripkeStructure {
        let mut k = KripkeStructure::with_states(1);
        k.add_edge("a", 0, 0);
        if nominal {
            k.add_label("#o", 0);
        }
        k
    }

    #[test]
    fn missing_initial_formula_is_rejected() {
        let k = KripkeStructure::with_states(2);
        let phi = parse("p").unwrap();
        let pm = PreModel { k, pi: vec![BTreeSet::new(); 2], ch: BTreeMap::new() };
        assert!(!validate_premodel(&pm, &phi));
    }

    #[test]
    fn atleast_choice_of_two() {
        let mut k = KripkeStructure::with_states(3);
        k.add_edge("a", 0, 1);
        k.add_edge("a", 0, 2);
        k.add_label("p", 1);
        k.add_label("p", 2);
        let phi = parse("<1,a> p").unwrap();
        let pm = PreModel::from_structure(&k, &phi).unwrap();
        assert!(validate_premodel(&pm, &phi));
        assert!(validate_choice(&pm, &phi));
        assert_eq!(pm.ch[&(0, phi.clone())], Choice::States([1, 2].into_iter().collect()));
    }

    #[test]
    fn allbut_choice_must_cover_exceptions() {
        let mut k = KripkeStructure::with_states(3);
        k.add_edge("a", 0, 1);
        k.add_edge("a", 0, 2);
        k.add_label("p", 1);
        let phi = parse("[0,a] p").unwrap();
        let p = Formula::prop("p");
        let pi = vec![[phi.clone()].into_iter().collect(), [p.clone()].into_iter().collect(), BTreeSet::new()];
        let ch = [((0, phi.clone()), Choice::States(BTreeSet::new()))].into_iter().collect();
        let pm = PreModel { k, pi, ch };
        assert!(!validate_premodel(&pm, &phi));
        assert!(!validate_choice(&pm, &phi));
    }

    #[test]
    fn self_loop_regenerates_least_fixpoint() {
        let phi = parse("mu y. <0,a> y").unwrap();
        let pm = PreModel::from_structure_greatest(&loop_model(false), &phi).unwrap();
        assert!(validate_premodel(&pm, &phi));
        assert!(validate_choice(&pm, &phi));
        assert!(!well_founded(&pm, &phi));
        assert!(!holds(&pm.k, 0, &phi).unwrap());
    }

    #[test]
    fn chain_to_p_is_well_founded() {
        let mut k = KripkeStructure::with_states(2);
        k.add_edge("a", 0, 1);
        k.add_label("p", 1);
        let phi = parse("mu y. p | <0,a> y").unwrap();
        let pm = PreModel::from_structure(&k, &phi).unwrap();
        assert!(validate_premodel(&pm, &phi));
        assert!(well_founded(&pm, &phi));
        let nu = parse("nu y. <0,a> y | p").unwrap();
        let pm = PreModel::from_structure(&loop_model(false), &nu).unwrap();
        assert!(well_founded(&pm, &nu), "no least fixpoints");
    }

    #[test]
    fn unwinding_self_loop_with_nominal() {
        let phi = parse("#o & <0,a> #o").unwrap();
        let pm = PreModel::from_structure(&loop_model(true), &phi).unwrap();
        let u = unwind(&pm, &phi, 3).unwrap();
        assert!(!u.truncated);
        assert_eq!(u.premodel.k.states(), &["1".to_string()]);
        assert!(u.premodel.k.has_edge("a", 0, 0));
        assert!(shape_flags(&u.premodel.k).directed_quasi_forest);
        assert!(holds(&u.premodel.k, 0, &phi).unwrap());
    }

    #[test]
    fn unwinding_tree_is_isomorphic() {
        let mut k = KripkeStructure::with_states(3);
        k.add_edge("a", 0, 1);
        k.add_edge("a", 0, 2);
        k.add_label("p", 1);
        let phi = parse("<1,a> true").unwrap();
        let pm = PreModel::from_structure(&k, &phi).unwrap();
        let u = unwind(&pm, &phi, 2).unwrap();
        assert!(!u.truncated);
        assert_eq!(u.premodel.k.states(), &["1", "1.1", "1.2"].map(String::from));
        assert_eq!(u.tau, vec![0, 1, 2]);
        assert!(u.premodel.k.has_label("p", 1));
    }

    #[test]
    fn unwinding_truncates_infinite_paths() {
        let phi = parse("nu y. <0,a> y").unwrap();
        let pm = PreModel::from_structure(&loop_model(false), &phi).unwrap();
        let u = unwind(&pm, &phi, 2).unwrap();
        assert!(!u.truncated, "the witness is the root itself");
        let mut k = KripkeStructure::with_states(2);
        k.add_edge("a", 0, 1);
        k.add_edge("a", 1, 1);
        let pm = PreModel::from_structure(&k, &phi).unwrap();
        let u = unwind(&pm, &phi, 2).unwrap();
        assert!(u.truncated);
        assert_eq!(u.premodel.k.states(), &["1", "1.1", "1.1.1"].map(String::from));
        assert!(unwind(&pm, &phi, 0).unwrap().truncated);
    }

    fn hybrid_config() -> RandomFormulaConfig {
        RandomFormulaConfig {
            max_length: 10,
            max_grade: 2,
            props: vec!["p".into()],
            nominals: vec!["o".into()],
            programs: vec![Program::new("a")],
        }
    }

    /// A pre-model with random choices taken among the admissible ones.
    fn randomize_choices(pm: &mut PreModel, rng: &mut impl Rng) {
        let keys: Vec<(usize, Formula)> = pm.ch.keys().cloned().collect();
        for (w, f) in keys {
            let atom = &pm.pi[w];
            let choice = match &f {
                Formula::Or(l, r) => {
                    let opts: Vec<&Formula> = [&**l, &**r].into_iter().filter(|d| atom.contains(*d)).collect();
                    Choice::Disjunct(opts[rng.gen_range(0..opts.len())].clone())
                }
                Formula::AtLeast { n, prog, body } => {
                    let mut good: Vec<usize> =
                        pm.k.successors(w, prog).into_iter().filter(|&v| pm.pi[v].contains(&**body)).collect();
                    while good.len() > *n as usize + 1 && rng.gen_bool(0.5) {
                        good.remove(rng.gen_range(0..good.len()));
                    }
                    Choice::States(good.into_iter().collect())
                }
                _ => continue,
            };
            pm.ch.insert((w, f), choice);
        }
    }

    proptest! {
        #[test]
        fn well_founded_premodels_are_models(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = hybrid_config();
            let n = rng.gen_range(1..=4);
            let k = random_structure(&mut rng, n, &["a".into()], &cfg.props, &cfg.nominals, 0.4);
            let phi = random_sentence(&mut rng, &cfg);
            let mut pm = PreModel::from_structure_greatest(&k, &phi).unwrap();
            randomize_choices(&mut pm, &mut rng);
            prop_assert!(validate_choice(&pm, &phi));
            if validate_premodel(&pm, &phi) && well_founded(&pm, &phi) {
                for w in pm.initial_states(&phi) {
                    prop_assert!(holds(&k, w, &phi).unwrap());
                }
            }
        }

        #[test]
        fn unwinding_preserves_models(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = hybrid_config();
            let n = rng.gen_range(1..=4);
            let k = random_structure(&mut rng, n, &["a".into()], &cfg.props, &cfg.nominals, 0.4);
            let phi = random_sentence(&mut rng, &cfg);
            let mut pm = PreModel::from_structure(&k, &phi).unwrap();
            if pm.initial_states(&phi).is_empty() {
                return Ok(());
            }
            for _ in 0..8 {
                if well_founded(&pm, &phi) {
                    break;
                }
                randomize_choices(&mut pm, &mut rng);
            }
            if !well_founded(&pm, &phi) {
                return Ok(());
            }
            prop_assert!(validate_premodel(&pm, &phi) && validate_choice(&pm, &phi));
            let u = unwind(&pm, &phi, 6).unwrap();
            prop_assert!(shape_flags(&u.premodel.k).directed_quasi_forest);
            if !u.truncated {
                prop_assert!(validate_premodel(&u.premodel, &phi));
                prop_assert!(validate_choice(&u.premodel, &phi));
                prop_assert!(well_founded(&u.premodel, &phi));
                prop_assert!(holds(&u.premodel.k, 0, &phi).unwrap());
            }
        }
    }
}
