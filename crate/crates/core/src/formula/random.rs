//! Seeded generation of random sentences for property tests and the
//! acceptance harness.

use super::{Formula, Program};
use rand::seq::SliceRandom;
use rand::Rng;

/// Vocabulary and size limits for [`random_sentence`].
#[derive(Debug, Clone)]
pub struct RandomFormulaConfig {
    /// Upper bound on [`Formula::length`].
    pub max_length: usize,
    /// Largest grade of a modality.
    pub max_grade: u32,
    pub props: Vec<String>,
    pub nominals: Vec<String>,
    /// Programs used by modalities, possibly inverted.
    pub programs: Vec<Program>,
}

/// A random sentence in positive normal form whose length does not exceed
/// `cfg.max_length`. Every fixpoint binder occurs in its body.
pub fn random_sentence(rng: &mut impl Rng, cfg: &RandomFormulaConfig) -> Formula {
    loop {
        let budget = rng.gen_range(1..=cfg.max_length.max(1));
        let f = gen(rng, cfg, budget, &mut Vec::new());
        if f.length() <= cfg.max_length && f.is_sentence() {
            return f;
        }
    }
}

fn leaf(rng: &mut impl Rng, cfg: &RandomFormulaConfig, vars: &[String]) -> Formula {
    let roll = rng.gen_range(0..100);
    if !vars.is_empty() && roll < 35 {
        return Formula::var(vars.choose(rng).unwrap().clone());
    }
    if !cfg.nominals.is_empty() && roll < 55 {
        let o = cfg.nominals.choose(rng).unwrap().clone();
        return if rng.gen_bool(0.5) { Formula::nominal(o) } else { Formula::not_nominal(o) };
    }
    if !cfg.props.is_empty() && roll < 90 {
        let p = cfg.props.choose(rng).unwrap().clone();
        return if rng.gen_bool(0.5) { Formula::prop(p) } else { Formula::not_prop(p) };
    }
    if rng.gen_bool(0.7) {
        Formula::True
    } else {
        Formula::False
    }
}

fn gen(rng: &mut impl Rng, cfg: &RandomFormulaConfig, budget: usize, vars: &mut Vec<String>) -> Formula {
    if budget <= 1 {
        return leaf(rng, cfg, vars);
    }
    let modal = !cfg.programs.is_empty();
    match rng.gen_range(0..10) {
        0..=1 if budget >= 3 => {
            let left = rng.gen_range(1..budget - 1);
            let l = gen(rng, cfg, left, vars);
            let r = gen(rng, cfg, budget - 1 - left, vars);
            Formula::and(l, r)
        }
        2..=3 if budget >= 3 => {
            let left = rng.gen_range(1..budget - 1);
            let l = gen(rng, cfg, left, vars);
            let r = gen(rng, cfg, budget - 1 - left, vars);
            Formula::or(l, r)
        }
        4..=6 if modal => {
            let n = rng.gen_range(0..=cfg.max_grade);
            let prog = cfg.programs.choose(rng).unwrap().clone();
            let body = gen(rng, cfg, budget - 1, vars);
            if rng.gen_bool(0.5) {
                Formula::at_least(n, prog, body)
            } else {
                Formula::all_but(n, prog, body)
            }
        }
        7..=8 => {
            let y = format!("y{}", vars.len());
            vars.push(y.clone());
            let body = gen(rng, cfg, budget - 1, vars);
            vars.pop();
            if !body.has_free_var(&y) {
                body
            } else if rng.gen_bool(0.5) {
                Formula::mu(y, body)
            } else {
                Formula::nu(y, body)
            }
        }
        _ => gen(rng, cfg, budget - 1, vars),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sentences_respect_limits_and_parse_back() {
        let cfg = RandomFormulaConfig {
            max_length: 12,
            max_grade: 2,
            props: vec!["p".into()],
            nominals: vec!["o".into()],
            programs: vec![Program::new("a"), Program::inverse_of("a")],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut saw_fixpoint = false;
        for _ in 0..500 {
            let f = random_sentence(&mut rng, &cfg);
            assert!(f.length() <= 12);
            assert!(f.is_sentence());
            assert!(f.max_grade().unwrap_or(0) <= 2);
            assert_eq!(parse(&f.to_string()).unwrap(), f);
            saw_fixpoint |= f.to_string().contains("mu") || f.to_string().contains("nu");
        }
        assert!(saw_fixpoint);
    }
}
