//! Finite structures and Tarskian evaluation, including second-order
//! quantifiers ranging over every relation on the domain.
//!
//! [`eval`] is the straightforward reference evaluator. The bounded checks in
//! [`check`] run a bit-parallel evaluator that is tested against it.

pub mod check;
mod enumerate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{Formula, RelSym, Signature, Var};

pub use check::{
    check_entailment, check_equivalence, default_max_size, truth_table, CheckError, Direction,
    EntailmentVerdict, Status, Witness,
};
pub use enumerate::{enumerate_structures, structure_count, StructureIter};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("free variable '{0}' has no value")]
    UnassignedVariable(Var),
    #[error("variable '{var}' is assigned {value}, outside a domain of size {size}")]
    ValueOutOfRange { var: Var, value: usize, size: usize },
    #[error("relation symbol '{0}' is not interpreted")]
    UninterpretedSymbol(String),
    #[error("relation '{name}' is interpreted with arity {interpreted} but used with arity {used}")]
    ArityMismatch { name: String, interpreted: usize, used: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("domain size must be positive")]
    EmptyDomain,
    #[error("relation '{0}' is not in the signature")]
    UnknownRelation(String),
    #[error("tuple {tuple:?} for '{name}' does not fit arity {arity} over a domain of size {size}")]
    BadTuple { name: String, tuple: Vec<usize>, arity: usize, size: usize },
    #[error("malformed structure: {0}")]
    Json(String),
}

/// A finite structure with domain `{0, ..., size - 1}`. Every symbol of the
/// signature is interpreted, possibly by the empty relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    size: usize,
    sig: Signature,
    interp: BTreeMap<String, BTreeSet<Vec<usize>>>,
}

#[derive(Serialize, Deserialize)]
struct StructureFile {
    size: usize,
    interp: BTreeMap<String, Vec<Vec<usize>>>,
}

impl Structure {
    /// All relations empty.
    pub fn empty(sig: &Signature, size: usize) -> Result<Self, StructureError> {
        if size == 0 {
            return Err(StructureError::EmptyDomain);
        }
        Ok(Structure {
            size,
            sig: sig.clone(),
            interp: sig.relations().map(|r| (r.name, BTreeSet::new())).collect(),
        })
    }

    pub fn with_relations<'a>(
        sig: &Signature,
        size: usize,
        interp: impl IntoIterator<Item = (&'a str, Vec<Vec<usize>>)>,
    ) -> Result<Self, StructureError> {
        let mut m = Structure::empty(sig, size)?;
        for (name, tuples) in interp {
            m.set(name, tuples)?;
        }
        Ok(m)
    }

    /// Replaces the interpretation of `name`.
    pub fn set(&mut self, name: &str, tuples: impl IntoIterator<Item = Vec<usize>>) -> Result<(), StructureError> {
        let arity = self
            .sig
            .arity(name)
            .ok_or_else(|| StructureError::UnknownRelation(name.to_string()))?;
        let mut set = BTreeSet::new();
        for t in tuples {
            if t.len() != arity || t.iter().any(|&e| e >= self.size) {
                return Err(StructureError::BadTuple { name: name.to_string(), tuple: t, arity, size: self.size });
            }
            set.insert(t);
        }
        self.interp.insert(name.to_string(), set);
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn relation(&self, name: &str) -> Option<&BTreeSet<Vec<usize>>> {
        self.interp.get(name)
    }

    pub fn holds(&self, name: &str, tuple: &[usize]) -> bool {
        self.interp.get(name).is_some_and(|s| s.contains(tuple))
    }

    /// The structure with `rel` added (or reinterpreted) as `tuples`.
    pub fn expand(&self, rel: &RelSym, tuples: impl IntoIterator<Item = Vec<usize>>) -> Result<Self, StructureError> {
        let kept: Vec<String> = self.sig.relations().filter(|r| r.name != rel.name).map(|r| r.name).collect();
        let sig = self
            .sig
            .restrict(kept.iter().map(String::as_str))
            .extended([rel.clone()])
            .expect("the expanded name was removed first");
        let mut m = Structure { size: self.size, sig, interp: self.interp.clone() };
        m.interp.insert(rel.name.clone(), BTreeSet::new());
        m.set(&rel.name, tuples)?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("structure serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_file()).expect("structure serializes")
    }

    fn to_file(&self) -> StructureFile {
        StructureFile {
            size: self.size,
            interp: self
                .interp
                .iter()
                .map(|(n, s)| (n.clone(), s.iter().cloned().collect()))
                .collect(),
        }
    }

    /// Parses the JSON form; symbols missing from `interp` are empty.
    pub fn from_json(text: &str, sig: &Signature) -> Result<Self, StructureError> {
        let file: StructureFile = serde_json::from_str(text).map_err(|e| StructureError::Json(e.to_string()))?;
        Structure::with_relations(sig, file.size, file.interp.iter().map(|(n, t)| (n.as_str(), t.clone())))
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// A variable assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<Var, usize>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, v: Var, value: usize) -> Self {
        self.0.insert(v, value);
        self
    }

    pub fn set(&mut self, v: Var, value: usize) {
        self.0.insert(v, value);
    }

    pub fn get(&self, v: &Var) -> Option<usize> {
        self.0.get(v).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, usize)> {
        self.0.iter().map(|(v, &x)| (v, x))
    }

    /// Every assignment of `vars` into a domain of `size` elements, with the
    /// first variable most significant.
    pub fn all(vars: &[Var], size: usize) -> Vec<Assignment> {
        let count = size.pow(vars.len() as u32);
        (0..count)
            .map(|mut i| {
                let mut values = vec![0; vars.len()];
                for slot in values.iter_mut().rev() {
                    *slot = i % size;
                    i /= size;
                }
                Assignment(vars.iter().cloned().zip(values).collect())
            })
            .collect()
    }
}

impl FromIterator<(Var, usize)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (Var, usize)>>(iter: T) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

/// Decides `m, g |= f`.
pub fn eval(m: &Structure, g: &Assignment, f: &Formula) -> Result<bool, EvalError> {
    for v in f.free_vars() {
        match g.get(&v) {
            None => return Err(EvalError::UnassignedVariable(v)),
            Some(value) if value >= m.size => {
                return Err(EvalError::ValueOutOfRange { var: v, value, size: m.size })
            }
            Some(_) => {}
        }
    }
    for r in f.free_relations() {
        match m.sig.arity(&r.name) {
            None => return Err(EvalError::UninterpretedSymbol(r.name)),
            Some(a) if a != r.arity => {
                return Err(EvalError::ArityMismatch { name: r.name, interpreted: a, used: r.arity })
            }
            Some(_) => {}
        }
    }
    let mut env: BTreeMap<Var, usize> = g.0.clone();
    Ok(Reference { m, overlay: Vec::new() }.sat(f, &mut env))
}

struct Reference<'a> {
    m: &'a Structure,
    /// Interpretations of second-order bound symbols, innermost last.
    overlay: Vec<(String, BTreeSet<Vec<usize>>)>,
}

impl Reference<'_> {
    fn holds(&self, name: &str, tuple: &[usize]) -> bool {
        match self.overlay.iter().rev().find(|(n, _)| n == name) {
            Some((_, set)) => set.contains(tuple),
            None => self.m.holds(name, tuple),
        }
    }

    fn sat(&mut self, f: &Formula, env: &mut BTreeMap<Var, usize>) -> bool {
        match f {
            Formula::Top => true,
            Formula::Atom(r, args) => {
                let t: Vec<usize> = args.iter().map(|a| env[a]).collect();
                self.holds(&r.name, &t)
            }
            Formula::Eq(a, b) => env[a] == env[b],
            Formula::Not(b) => !self.sat(b, env),
            Formula::And(l, r) => self.sat(l, env) && self.sat(r, env),
            Formula::Or(l, r) => self.sat(l, env) || self.sat(r, env),
            Formula::Implies(l, r) => !self.sat(l, env) || self.sat(r, env),
            Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
                let want = matches!(f, Formula::Exists(..));
                let saved: Vec<Option<usize>> = vs.iter().map(|v| env.get(v).copied()).collect();
                let mut result = !want;
                for a in Assignment::all(vs, self.m.size) {
                    env.extend(a.0);
                    if self.sat(b, env) == want {
                        result = want;
                        break;
                    }
                }
                for (v, old) in vs.iter().zip(saved) {
                    match old {
                        Some(x) => env.insert(v.clone(), x),
                        None => env.remove(v),
                    };
                }
                result
            }
            Formula::SoExists(r, b) | Formula::SoForall(r, b) => {
                let want = matches!(f, Formula::SoExists(..));
                let tuples: Vec<Vec<usize>> = all_tuples(self.m.size, r.arity);
                let mut result = !want;
                for subset in 0u64..(1u64 << tuples.len()) {
                    let set = tuples
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| subset >> i & 1 == 1)
                        .map(|(_, t)| t.clone())
                        .collect();
                    self.overlay.push((r.name.clone(), set));
                    let v = self.sat(b, env);
                    self.overlay.pop();
                    if v == want {
                        result = want;
                        break;
                    }
                }
                result
            }
        }
    }
}

/// All tuples of the given arity in lexicographic order.
pub fn all_tuples(size: usize, arity: usize) -> Vec<Vec<usize>> {
    let count = size.pow(arity as u32);
    (0..count).map(|t| tuple_of(t, arity, size)).collect()
}

/// The `index`-th tuple in lexicographic order (first coordinate most significant).
pub fn tuple_of(mut index: usize, arity: usize, size: usize) -> Vec<usize> {
    let mut t = vec![0; arity];
    for slot in t.iter_mut().rev() {
        *slot = index % size;
        index /= size;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, vars};

    fn sig() -> Signature {
        Signature::new([RelSym::new("R", 2), RelSym::new("P", 1)]).unwrap()
    }

    #[test]
    fn exists_successor() {
        let s = sig();
        let m = Structure::with_relations(&s, 2, [("R", vec![vec![0, 1]])]).unwrap();
        let g = Assignment::new().with(Var::new("x"), 0);
        assert!(eval(&m, &g, &parse("E y. R(x,y)", &s).unwrap()).unwrap());
        let g1 = Assignment::new().with(Var::new("x"), 1);
        assert!(!eval(&m, &g1, &parse("E y. R(x,y)", &s).unwrap()).unwrap());
    }

    #[test]
    fn top_always_true() {
        let s = sig();
        for size in 1..=2 {
            for m in enumerate_structures(&s, size) {
                assert!(eval(&m, &Assignment::new(), &Formula::Top).unwrap());
            }
        }
    }

    #[test]
    fn empty_predicate_witnesses_vacuous_uniqueness() {
        let s = sig();
        let f = parse("E2 Q. A y. (Q(y) -> y = x)", &s).unwrap();
        for size in 1..=2 {
            for m in enumerate_structures(&s, size) {
                for g in Assignment::all(&vars(&["x"]), size) {
                    assert!(eval(&m, &g, &f).unwrap());
                }
            }
        }
    }

    #[test]
    fn eval_errors() {
        let s = sig();
        let m = Structure::empty(&s, 2).unwrap();
        let f = parse("R(x,y)", &s).unwrap();
        assert!(matches!(
            eval(&m, &Assignment::new().with(Var::new("x"), 0), &f),
            Err(EvalError::UnassignedVariable(_))
        ));
        let g = Assignment::new().with(Var::new("x"), 0).with(Var::new("y"), 5);
        assert!(matches!(eval(&m, &g, &f), Err(EvalError::ValueOutOfRange { .. })));

        let other = Signature::new([RelSym::new("Q", 1)]).unwrap();
        let q = parse("Q(x)", &other).unwrap();
        assert!(matches!(
            eval(&m, &Assignment::new().with(Var::new("x"), 0), &q),
            Err(EvalError::UninterpretedSymbol(_))
        ));
    }

    #[test]
    fn so_bound_symbols_need_no_interpretation() {
        let s = sig();
        let m = Structure::empty(&s, 2).unwrap();
        let f = parse("A2 Q. E x. Q(x) | !Q(x)", &s).unwrap();
        assert!(eval(&m, &Assignment::new(), &f).unwrap());
    }

    #[test]
    fn structure_json_round_trip() {
        let s = sig();
        let m = Structure::with_relations(&s, 2, [("R", vec![vec![0, 1]]), ("P", vec![vec![0]])]).unwrap();
        assert_eq!(m.to_json(), r#"{"size":2,"interp":{"P":[[0]],"R":[[0,1]]}}"#);
        assert_eq!(Structure::from_json(r#"{"size":2,"interp":{"R":[[0,1]],"P":[[0]]}}"#, &s).unwrap(), m);
        assert!(Structure::from_json(r#"{"size":2,"interp":{"R":[[0,2]]}}"#, &s).is_err());
        assert!(Structure::from_json(r#"{"size":2,"interp":{"X":[[0]]}}"#, &s).is_err());
    }

    #[test]
    fn assignments_enumerate_first_var_most_significant() {
        let all = Assignment::all(&vars(&["x", "y"]), 2);
        let pairs: Vec<(usize, usize)> = all
            .iter()
            .map(|a| (a.get(&Var::new("x")).unwrap(), a.get(&Var::new("y")).unwrap()))
            .collect();
        assert_eq!(pairs, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(Assignment::all(&[], 3).len(), 1);
    }
}
