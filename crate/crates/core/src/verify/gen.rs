use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{Formula, RelSym, Signature, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("the signature needs a relation of positive arity")]
    NoRelations,
}

/// Bounds for random formulas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub max_atoms: usize,
    pub max_vars: usize,
    pub max_depth: usize,
    #[serde(skip, default = "default_signature")]
    pub signature: Signature,
}

/// `R/2` and `S/1`.
pub fn default_signature() -> Signature {
    Signature::new([RelSym::new("R", 2), RelSym::new("S", 1)]).expect("valid symbols")
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 0, max_atoms: 4, max_vars: 4, max_depth: 4, signature: default_signature() }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenConfig { seed, ..GenConfig::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [("max_atoms", self.max_atoms), ("max_vars", self.max_vars), ("max_depth", self.max_depth)] {
            if v == 0 {
                return Err(ConfigError::NonPositive(name));
            }
        }
        if !self.signature.relations().any(|r| r.arity > 0) {
            return Err(ConfigError::NoRelations);
        }
        Ok(())
    }

    /// The generator for one case of a run; cases use separate streams of
    /// the same seed so each can be replayed alone.
    pub fn case_rng(&self, case: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(case);
        rng
    }

    fn relations(&self) -> Vec<RelSym> {
        self.signature.relations().filter(|r| r.arity > 0).collect()
    }
}

/// Variable names `x, y, z, w, u, t`, then `x6, x7, ...`.
pub fn variable_names(n: usize) -> Vec<Var> {
    const BASE: [&str; 6] = ["x", "y", "z", "w", "u", "t"];
    (0..n)
        .map(|i| match BASE.get(i) {
            Some(b) => Var::new(*b),
            None => Var::new(format!("x{i}")),
        })
        .collect()
}

/// A clean positive existential formula, deterministic in `cfg.seed`.
pub fn random_pe_formula(cfg: &GenConfig) -> Formula {
    pe_formula(&mut ChaCha8Rng::seed_from_u64(cfg.seed), cfg)
}

/// A clean positive existential formula with at most `cfg.max_atoms` atomic
/// subformulas over at most `cfg.max_vars` variable names. Bound names are
/// drawn from a reserve disjoint from the free ones and used once.
pub fn pe_formula(rng: &mut impl Rng, cfg: &GenConfig) -> Formula {
    // Skewed towards several variables; one-variable formulas exercise little.
    let count = if cfg.max_vars > 1 && rng.gen_bool(0.85) {
        rng.gen_range(2..=cfg.max_vars)
    } else {
        rng.gen_range(1..=cfg.max_vars)
    };
    let mut names = variable_names(count);
    names.shuffle(rng);
    let free_count = rng.gen_range(1..=names.len());
    let reserve = names.split_off(free_count);
    let mut g = PeGen { rng, rels: cfg.relations(), reserve };
    let atoms = g.rng.gen_range(1..=cfg.max_atoms);
    let mut scope = names;
    g.node(atoms, cfg.max_depth, &mut scope)
}

struct PeGen<'a, R: Rng> {
    rng: &'a mut R,
    rels: Vec<RelSym>,
    reserve: Vec<Var>,
}

impl<R: Rng> PeGen<'_, R> {
    fn node(&mut self, atoms: usize, depth: usize, scope: &mut Vec<Var>) -> Formula {
        let can_bind = depth > 1 && !self.reserve.is_empty();
        if can_bind && self.rng.gen_bool(0.35) {
            let width = if self.reserve.len() >= 2 && self.rng.gen_bool(0.25) { 2 } else { 1 };
            let mut bound = Vec::new();
            for _ in 0..width {
                let i = self.rng.gen_range(0..self.reserve.len());
                bound.push(self.reserve.swap_remove(i));
            }
            let mark = scope.len();
            scope.extend(bound.iter().cloned());
            let body = self.node(atoms, depth - 1, scope);
            scope.truncate(mark);
            return Formula::exists(bound, body);
        }
        if atoms >= 2 && depth > 1 {
            let left = self.rng.gen_range(1..atoms);
            let l = self.node(left, depth - 1, scope);
            let r = self.node(atoms - left, depth - 1, scope);
            return Formula::and(l, r);
        }
        atomic(self.rng, &self.rels, scope)
    }
}

fn atomic(rng: &mut impl Rng, rels: &[RelSym], scope: &[Var]) -> Formula {
    let pick = |rng: &mut _| scope.choose(rng).expect("scope is never empty").clone();
    if rng.gen_bool(0.15) {
        let a = pick(rng);
        return Formula::eq(a, pick(rng));
    }
    let r = rels.choose(rng).expect("validated signature");
    let args = (0..r.arity).map(|_| pick(rng)).collect();
    Formula::atom(r, args)
}

/// Options for [`fo_formula`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoOptions {
    /// Allow second-order quantifiers over signature symbols.
    pub second_order: bool,
    /// Allow `true`.
    pub top: bool,
}

/// An arbitrary first-order formula (names may be reused and rebound) with at
/// most `cfg.max_atoms` atomic subformulas, over the first `cfg.max_vars`
/// variable names.
pub fn fo_formula(rng: &mut impl Rng, cfg: &GenConfig, opts: FoOptions) -> Formula {
    let names = variable_names(cfg.max_vars);
    let atoms = rng.gen_range(1..=cfg.max_atoms);
    let mut g = FoGen { rng, names, rels: cfg.relations(), opts };
    g.node(atoms, cfg.max_depth)
}

struct FoGen<'a, R: Rng> {
    rng: &'a mut R,
    names: Vec<Var>,
    rels: Vec<RelSym>,
    opts: FoOptions,
}

impl<R: Rng> FoGen<'_, R> {
    fn node(&mut self, atoms: usize, depth: usize) -> Formula {
        if depth <= 1 {
            return self.leaf();
        }
        let choice = self.rng.gen_range(0..if self.opts.second_order { 7 } else { 6 });
        match choice {
            0 if atoms >= 2 => self.binary(atoms, depth),
            1 | 2 if atoms >= 2 => self.binary(atoms, depth),
            3 => Formula::not(self.node(atoms, depth - 1)),
            4 | 5 => {
                let width = 1 + usize::from(self.rng.gen_bool(0.2));
                let mut vs: Vec<Var> = self.names.choose_multiple(self.rng, width).cloned().collect();
                vs.sort();
                let body = self.node(atoms, depth - 1);
                if self.rng.gen_bool(0.5) {
                    Formula::exists(vs, body)
                } else {
                    Formula::forall(vs, body)
                }
            }
            6 => {
                let r = self.rels.choose(self.rng).expect("validated signature").clone();
                let body = self.node(atoms, depth - 1);
                if self.rng.gen_bool(0.5) {
                    Formula::so_exists(r, body)
                } else {
                    Formula::so_forall(r, body)
                }
            }
            _ => self.leaf(),
        }
    }

    fn binary(&mut self, atoms: usize, depth: usize) -> Formula {
        let left = self.rng.gen_range(1..atoms);
        let l = self.node(left, depth - 1);
        let r = self.node(atoms - left, depth - 1);
        match self.rng.gen_range(0..3) {
            0 => Formula::and(l, r),
            1 => Formula::or(l, r),
            _ => Formula::implies(l, r),
        }
    }

    fn leaf(&mut self) -> Formula {
        if self.opts.top && self.rng.gen_bool(0.05) {
            return Formula::Top;
        }
        atomic(self.rng, &self.rels, &self.names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragments::classify_pe;
    use crate::syntax::is_clean;

    #[test]
    fn pe_samples_are_clean_and_bounded() {
        let cfg = GenConfig::default();
        for case in 0..500 {
            let f = pe_formula(&mut cfg.case_rng(case), &cfg);
            assert!(classify_pe(&f).member, "{f}");
            assert!(is_clean(&f), "{f}");
            assert!(f.all_vars().len() <= cfg.max_vars);
            let mut atoms = 0;
            f.visit(&mut |g| atoms += usize::from(g.is_atomic()));
            assert!(atoms <= cfg.max_atoms);
        }
    }

    #[test]
    fn determinism() {
        let cfg = GenConfig::with_seed(11);
        assert_eq!(random_pe_formula(&cfg), random_pe_formula(&cfg));
    }

    #[test]
    fn single_atom_budget() {
        let cfg = GenConfig { max_atoms: 1, ..GenConfig::default() };
        let f = random_pe_formula(&cfg);
        let mut atoms = Vec::new();
        f.visit(&mut |g| {
            if g.is_atomic() {
                atoms.push(g.clone())
            }
        });
        assert_eq!(atoms.len(), 1, "{f}");
    }

    #[test]
    fn config_validation() {
        assert!(GenConfig::default().validate().is_ok());
        assert!(GenConfig { max_vars: 0, ..GenConfig::default() }.validate().is_err());
        let empty = GenConfig { signature: Signature::default(), ..GenConfig::default() };
        assert_eq!(empty.validate(), Err(ConfigError::NoRelations));
    }
}
