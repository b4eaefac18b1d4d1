//! Exhaustive search for small models and random structures.

use super::eval::{run, Compiled, Frame, Mode, StateSet};
use super::{nominal_key, KripkeError, KripkeStructure};
use crate::formula::Formula;
use rand::Rng;

/// Counters reported by [`bounded_model_search_limited`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleStats {
    /// Structures that were model checked.
    pub structures: u64,
}

/// Searches all structures with at most `max_states` states over the
/// programs, propositions and nominals of `φ` and returns the first structure
/// and state where `φ` holds.
///
/// Sizes are tried in increasing order. Within a size, proposition labels are
/// enumerated with nondecreasing codes along the state order, which visits at
/// least one member of every isomorphism class. Then come nominal placements
/// and finally the edge relations as binary counters. The order is
/// deterministic.
pub fn bounded_model_search(phi: &Formula, max_states: usize) -> Option<(KripkeStructure, usize)> {
    bounded_model_search_limited(phi, max_states, u64::MAX).expect("unlimited budget").0
}

/// Like [`bounded_model_search`] but fails once more than `limit` structures
/// have been checked.
pub fn bounded_model_search_limited(
    phi: &Formula,
    max_states: usize,
    limit: u64,
) -> Result<(Option<(KripkeStructure, usize)>, OracleStats), KripkeError> {
    assert!(max_states <= 8, "the oracle enumerates at most 8 states");
    let c = Compiled::new(phi);
    if let Some(y) = c.free.first() {
        return Err(KripkeError::UnboundVariable(y.clone()));
    }
    let props: Vec<String> = phi.propositions().into_iter().collect();
    let noms: Vec<String> = phi.nominals().into_iter().collect();
    let atomic: Vec<String> = phi.atomic_programs().into_iter().collect();
    let mut stats = OracleStats::default();

    for n in 1..=max_states {
        let edge_bits = n * n * atomic.len();
        assert!(edge_bits < 64, "too many edge combinations");
        let mut codes = vec![0usize; n];
        loop {
            let mut nom_at = vec![0usize; noms.len()];
            loop {
                for edges in 0..(1u64 << edge_bits) {
                    stats.structures += 1;
                    if stats.structures > limit {
                        return Err(KripkeError::Budget(limit));
                    }
                    let frame = build_frame(&c, n, &codes, &nom_at, edges, &props, &noms, &atomic);
                    let mut env = vec![0u64; c.slots];
                    let sat = run(&c, &frame, &mut env, c.root, Mode::default());
                    if sat != 0 {
                        let k = materialize(n, &codes, &nom_at, edges, &props, &noms, &atomic);
                        return Ok((Some((k, sat.trailing_zeros() as usize)), stats));
                    }
                }
                if !advance(&mut nom_at, n) {
                    break;
                }
            }
            if !advance_sorted(&mut codes, 1 << props.len()) {
                break;
            }
        }
    }
    Ok((None, stats))
}

/// Odometer over `0..base` digits. Returns false after the last value.
fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Next nondecreasing sequence over `0..base`, in lexicographic order.
fn advance_sorted(digits: &mut [usize], base: usize) -> bool {
    for i in (0..digits.len()).rev() {
        if digits[i] + 1 < base {
            let v = digits[i] + 1;
            for d in &mut digits[i..] {
                *d = v;
            }
            return true;
        }
    }
    false
}

fn edge(edges: u64, prog: usize, n: usize, u: usize, v: usize) -> bool {
    edges >> (prog * n * n + u * n + v) & 1 == 1
}

#[allow(clippy::too_many_arguments)]
fn build_frame(
    c: &Compiled,
    n: usize,
    codes: &[usize],
    nom_at: &[usize],
    edges: u64,
    props: &[String],
    noms: &[String],
    atomic: &[String],
) -> Frame<u64> {
    let labels = c
        .keys
        .iter()
        .map(|key| {
            let mut s = 0u64;
            if let Some(o) = key.strip_prefix('#') {
                let i = noms.iter().position(|x| x == o).expect("nominal of φ");
                s.insert(nom_at[i]);
            } else {
                let i = props.iter().position(|x| x == key).expect("proposition of φ");
                for (w, code) in codes.iter().enumerate() {
                    if code >> i & 1 == 1 {
                        s.insert(w);
                    }
                }
            }
            s
        })
        .collect();
    let succ = c
        .progs
        .iter()
        .map(|p| {
            let a = atomic.iter().position(|x| *x == p.name).expect("program of φ");
            (0..n)
                .map(|w| {
                    (0..n)
                        .filter(|&v| if p.inverted { edge(edges, a, n, v, w) } else { edge(edges, a, n, w, v) })
                        .collect()
                })
                .collect()
        })
        .collect();
    Frame { n, labels, succ }
}

fn materialize(
    n: usize,
    codes: &[usize],
    nom_at: &[usize],
    edges: u64,
    props: &[String],
    noms: &[String],
    atomic: &[String],
) -> KripkeStructure {
    let mut k = KripkeStructure::with_states(n);
    for (i, p) in props.iter().enumerate() {
        k.l.entry(p.clone()).or_default();
        for (w, code) in codes.iter().enumerate() {
            if code >> i & 1 == 1 {
                k.add_label(p, w);
            }
        }
    }
    for (i, o) in noms.iter().enumerate() {
        k.add_label(&nominal_key(o), nom_at[i]);
    }
    for (a, name) in atomic.iter().enumerate() {
        k.r.entry(name.clone()).or_default();
        for u in 0..n {
            for v in 0..n {
                if edge(edges, a, n, u, v) {
                    k.add_edge(name, u, v);
                }
            }
        }
    }
    k
}

/// A random structure with `n` states. Every edge of every program is present
/// with probability `density`, every proposition holds at every state with
/// probability one half and every nominal names a uniformly chosen state.
pub fn random_structure(
    rng: &mut impl Rng,
    n: usize,
    programs: &[String],
    props: &[String],
    nominals: &[String],
    density: f64,
) -> KripkeStructure {
    let mut k = KripkeStructure::with_states(n);
    for a in programs {
        k.r.entry(a.clone()).or_default();
        for u in 0..n {
            for v in 0..n {
                if rng.gen_bool(density) {
                    k.add_edge(a, u, v);
                }
            }
        }
    }
    for p in props {
        k.l.entry(p.clone()).or_default();
        for w in 0..n {
            if rng.gen_bool(0.5) {
                k.add_label(p, w);
            }
        }
    }
    for o in nominals {
        k.add_label(&nominal_key(o), rng.gen_range(0..n));
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::kripke::holds;

    #[test]
    fn sorted_sequences() {
        let mut d = vec![0, 0];
        let mut seen = vec![d.clone()];
        while advance_sorted(&mut d, 3) {
            seen.push(d.clone());
        }
        assert_eq!(seen, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2], vec![2, 2]]);
    }

    #[test]
    fn proposition_has_a_one_state_model() {
        let (k, w) = bounded_model_search(&parse("p").unwrap(), 3).unwrap();
        assert_eq!(k.len(), 1);
        assert!(holds(&k, w, &parse("p").unwrap()).unwrap());
    }

    #[test]
    fn contradiction_has_no_model() {
        assert!(bounded_model_search(&parse("p & !p").unwrap(), 3).is_none());
        assert!(bounded_model_search(&parse("mu y. y").unwrap(), 3).is_none());
    }

    #[test]
    fn three_successors_need_three_states() {
        let phi = parse("<2,a> true").unwrap();
        assert!(bounded_model_search(&phi, 2).is_none());
        let (k, w) = bounded_model_search(&phi, 4).unwrap();
        assert_eq!(k.len(), 3, "a state may be its own successor");
        assert!(holds(&k, w, &phi).unwrap());
    }

    #[test]
    fn nominal_cycle_is_found() {
        let phi = parse("#o & <0,a> (p & <0,a> (!p & <0,a> #o)) & [0,a] !#o").unwrap();
        let (k, w) = bounded_model_search(&phi, 3).unwrap();
        assert!(holds(&k, w, &phi).unwrap());
        assert!(k.validate().is_ok());
    }

    #[test]
    fn budget_is_enforced() {
        let phi = parse("p & !p").unwrap();
        assert_eq!(bounded_model_search_limited(&phi, 3, 5).unwrap_err(), KripkeError::Budget(5));
    }
}
