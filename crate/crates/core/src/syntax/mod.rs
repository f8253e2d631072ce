//! Formula syntax: variables, relation symbols, signatures and the formula AST.
//!
//! Formulas are first-order over a purely relational signature (no constants,
//! no function symbols), extended with second-order quantifiers over relation
//! symbols. The second-order layer exists so that the semantic checker can
//! state closure properties such as `E2 P. (P(x) & phi)` directly.

mod clean;
mod parse;
mod render;
mod subst;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{cleanse, is_clean};
pub use parse::{parse, ParseError};
pub use render::render;
pub use subst::{rename_relation, substitute_relation, substitute_vars, SubstError};

/// Words the parser treats as keywords rather than identifiers.
pub const RESERVED: &[&str] = &["E", "A", "E2", "A2", "true"];

/// A first-order variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(String);

impl Var {
    /// Panics on a name that is not a valid variable identifier; use
    /// [`Var::try_new`] for untrusted input.
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        match Self::try_new(name.clone()) {
            Ok(v) => v,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn try_new(name: impl Into<String>) -> Result<Self, SignatureError> {
        let name = name.into();
        if !is_identifier(&name, char::is_lowercase) || RESERVED.contains(&name.as_str()) {
            return Err(SignatureError::BadVariable(name));
        }
        Ok(Var(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand for building variable lists in tests and generators.
pub fn vars(names: &[&str]) -> Vec<Var> {
    names.iter().map(|n| Var::new(*n)).collect()
}

/// A relation symbol together with its arity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelSym {
    pub name: String,
    pub arity: usize,
}

impl RelSym {
    /// Panics on an invalid relation name; see [`RelSym::try_new`].
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        match Self::try_new(name, arity) {
            Ok(r) => r,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn try_new(name: impl Into<String>, arity: usize) -> Result<Self, SignatureError> {
        let name = name.into();
        if !is_identifier(&name, char::is_uppercase) || RESERVED.contains(&name.as_str()) {
            return Err(SignatureError::BadRelation(name));
        }
        Ok(RelSym { name, arity })
    }
}

impl fmt::Display for RelSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

fn is_identifier(s: &str, first: impl Fn(char) -> bool) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() && first(c) => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("'{0}' is not a valid variable name (lowercase initial, alphanumeric or '_')")]
    BadVariable(String),
    #[error("'{0}' is not a valid relation name (uppercase initial, alphanumeric or '_')")]
    BadRelation(String),
    #[error("relation '{0}' is declared twice")]
    Duplicate(String),
    #[error("malformed signature file: {0}")]
    Json(String),
}

/// A finite relational signature. Symbols are kept sorted by name, which is
/// also the order used when enumerating structures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    relations: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SignatureFile {
    relations: Vec<RelSym>,
}

impl Signature {
    pub fn new(relations: impl IntoIterator<Item = RelSym>) -> Result<Self, SignatureError> {
        let mut sig = Signature::default();
        for r in relations {
            sig.insert(r)?;
        }
        Ok(sig)
    }

    /// Declares a symbol. Fails if the name is already taken.
    pub fn insert(&mut self, rel: RelSym) -> Result<(), SignatureError> {
        let checked = RelSym::try_new(rel.name, rel.arity)?;
        if self.relations.contains_key(&checked.name) {
            return Err(SignatureError::Duplicate(checked.name));
        }
        self.relations.insert(checked.name, checked.arity);
        Ok(())
    }

    /// Returns a copy with the given symbols added.
    pub fn extended(&self, extra: impl IntoIterator<Item = RelSym>) -> Result<Self, SignatureError> {
        let mut sig = self.clone();
        for r in extra {
            sig.insert(r)?;
        }
        Ok(sig)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<RelSym> {
        self.arity(name).map(|arity| RelSym { name: name.to_string(), arity })
    }

    pub fn contains(&self, rel: &RelSym) -> bool {
        self.arity(&rel.name) == Some(rel.arity)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelSym> + '_ {
        self.relations
            .iter()
            .map(|(name, &arity)| RelSym { name: name.clone(), arity })
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Restriction to the named symbols (unknown names are ignored).
    pub fn restrict<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Signature {
        let wanted: BTreeSet<&str> = names.into_iter().collect();
        Signature {
            relations: self
                .relations
                .iter()
                .filter(|(n, _)| wanted.contains(n.as_str()))
                .map(|(n, a)| (n.clone(), *a))
                .collect(),
        }
    }

    /// Mints `count` symbols `{prefix}0, {prefix}1, ...` of the given arity,
    /// skipping every name declared here or occurring in `avoid`.
    pub fn fresh_relations(
        &self,
        prefix: &str,
        count: usize,
        arity: usize,
        avoid: &[&Formula],
    ) -> Vec<RelSym> {
        let mut taken: BTreeSet<String> = self.relations.keys().cloned().collect();
        for f in avoid {
            taken.extend(f.relation_names());
        }
        let mut out = Vec::with_capacity(count);
        let mut i = 0usize;
        while out.len() < count {
            let name = format!("{prefix}{i}");
            i += 1;
            if taken.insert(name.clone()) {
                out.push(RelSym::new(name, arity));
            }
        }
        out
    }

    pub fn fresh_relation(&self, prefix: &str, arity: usize, avoid: &[&Formula]) -> RelSym {
        self.fresh_relations(prefix, 1, arity, avoid).remove(0)
    }

    pub fn from_json(text: &str) -> Result<Self, SignatureError> {
        let file: SignatureFile =
            serde_json::from_str(text).map_err(|e| SignatureError::Json(e.to_string()))?;
        Signature::new(file.relations)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SignatureFile { relations: self.relations().collect() })
            .expect("signature serializes")
    }
}

/// First-order formulas with second-order quantification over relations.
///
/// Quantifier nodes carry non-empty, duplicate-free variable lists; use
/// [`Formula::exists`] / [`Formula::forall`], which treat an empty list as
/// the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Top,
    Atom(RelSym, Vec<Var>),
    Eq(Var, Var),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<Var>, Box<Formula>),
    Forall(Vec<Var>, Box<Formula>),
    SoExists(RelSym, Box<Formula>),
    SoForall(RelSym, Box<Formula>),
}

impl Formula {
    /// Panics if `args.len() != rel.arity`.
    pub fn atom(rel: &RelSym, args: Vec<Var>) -> Self {
        assert_eq!(rel.arity, args.len(), "arity mismatch for {}", rel.name);
        Formula::Atom(rel.clone(), args)
    }

    pub fn eq(left: Var, right: Var) -> Self {
        Formula::Eq(left, right)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(body: Formula) -> Self {
        Formula::Not(Box::new(body))
    }

    pub fn and(left: Formula, right: Formula) -> Self {
        Formula::And(Box::new(left), Box::new(right))
    }

    pub fn or(left: Formula, right: Formula) -> Self {
        Formula::Or(Box::new(left), Box::new(right))
    }

    pub fn implies(left: Formula, right: Formula) -> Self {
        Formula::Implies(Box::new(left), Box::new(right))
    }

    pub fn exists(vars: Vec<Var>, body: Formula) -> Self {
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    pub fn forall(vars: Vec<Var>, body: Formula) -> Self {
        if vars.is_empty() {
            body
        } else {
            Formula::Forall(vars, Box::new(body))
        }
    }

    pub fn so_exists(rel: RelSym, body: Formula) -> Self {
        Formula::SoExists(rel, Box::new(body))
    }

    pub fn so_forall(rel: RelSym, body: Formula) -> Self {
        Formula::SoForall(rel, Box::new(body))
    }

    /// Nested second-order universal quantification, outermost first.
    pub fn so_forall_all(rels: &[RelSym], body: Formula) -> Self {
        rels.iter().rev().fold(body, |acc, r| Formula::so_forall(r.clone(), acc))
    }

    pub fn so_exists_all(rels: &[RelSym], body: Formula) -> Self {
        rels.iter().rev().fold(body, |acc, r| Formula::so_exists(r.clone(), acc))
    }

    /// Right-nested conjunction; the empty conjunction is `Top`.
    pub fn conj(parts: impl IntoIterator<Item = Formula>) -> Self {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Formula::Top;
        };
        while let Some(p) = parts.pop() {
            acc = Formula::and(p, acc);
        }
        acc
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Formula::Atom(..) | Formula::Eq(..))
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Top | Formula::Atom(..) | Formula::Eq(..) => vec![],
            Formula::Not(b)
            | Formula::Exists(_, b)
            | Formula::Forall(_, b)
            | Formula::SoExists(_, b)
            | Formula::SoForall(_, b) => vec![b],
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => vec![l, r],
        }
    }

    /// Subformula at an AST path; each step is a child index.
    pub fn at(&self, path: &[usize]) -> Option<&Formula> {
        let mut cur = self;
        for &i in path {
            cur = *cur.children().get(i)?;
        }
        Some(cur)
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a Var>, out: &mut BTreeSet<Var>) {
        let note = |v: &'a Var, bound: &Vec<&'a Var>, out: &mut BTreeSet<Var>| {
            if !bound.contains(&v) {
                out.insert(v.clone());
            }
        };
        match self {
            Formula::Top => {}
            Formula::Atom(_, args) => args.iter().for_each(|v| note(v, bound, out)),
            Formula::Eq(a, b) => {
                note(a, bound, out);
                note(b, bound, out);
            }
            Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
                let mark = bound.len();
                bound.extend(vs.iter());
                b.collect_free(bound, out);
                bound.truncate(mark);
            }
            _ => self.children().into_iter().for_each(|c| c.collect_free(bound, out)),
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every variable name occurring anywhere, free or bound.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Atom(_, args) => out.extend(args.iter().cloned()),
            Formula::Eq(a, b) => {
                out.insert(a.clone());
                out.insert(b.clone());
            }
            Formula::Exists(vs, _) | Formula::Forall(vs, _) => out.extend(vs.iter().cloned()),
            _ => {}
        });
        out
    }

    /// Binders of first-order quantifiers in pre-order, with repetition.
    pub fn binders(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Exists(vs, _) | Formula::Forall(vs, _) = f {
                out.extend(vs.iter().cloned());
            }
        });
        out
    }

    /// Names of every relation symbol occurring, including second-order binders.
    pub fn relation_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Atom(r, _) | Formula::SoExists(r, _) | Formula::SoForall(r, _) => {
                out.insert(r.name.clone());
            }
            _ => {}
        });
        out
    }

    /// Relation symbols occurring outside the scope of a second-order binder
    /// for the same name; these must be interpreted by a structure.
    pub fn free_relations(&self) -> BTreeSet<RelSym> {
        fn go<'a>(f: &'a Formula, bound: &mut Vec<&'a str>, out: &mut BTreeSet<RelSym>) {
            match f {
                Formula::Atom(r, _) => {
                    if !bound.contains(&r.name.as_str()) {
                        out.insert(r.clone());
                    }
                }
                Formula::SoExists(r, b) | Formula::SoForall(r, b) => {
                    bound.push(&r.name);
                    go(b, bound, out);
                    bound.pop();
                }
                _ => f.children().into_iter().for_each(|c| go(c, bound, out)),
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn mentions_relation(&self, name: &str) -> bool {
        self.relation_names().contains(name)
    }

    pub fn has_second_order(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| found |= matches!(f, Formula::SoExists(..) | Formula::SoForall(..)));
        found
    }

    /// Largest arity among second-order binders, if there are any.
    pub fn max_so_arity(&self) -> Option<usize> {
        let mut best = None;
        self.visit(&mut |f| {
            if let Formula::SoExists(r, _) | Formula::SoForall(r, _) = f {
                best = Some(best.map_or(r.arity, |b: usize| b.max(r.arity)));
            }
        });
        best
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

/// Picks a variable name not in `avoid`, trying `preferred` first and then
/// `v0, v1, ...`.
pub fn fresh_var(preferred: &str, avoid: &BTreeSet<Var>) -> Var {
    let p = Var::new(preferred);
    if !avoid.contains(&p) {
        return p;
    }
    (0..)
        .map(|i| Var::new(format!("v{i}")))
        .find(|v| !avoid.contains(v))
        .expect("unbounded supply of names")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r() -> RelSym {
        RelSym::new("R", 2)
    }
    fn s1() -> RelSym {
        RelSym::new("S", 1)
    }

    #[test]
    fn free_vars_examples() {
        let rxy = Formula::atom(&r(), vars(&["x", "y"]));
        assert_eq!(rxy.free_vars(), vars(&["x", "y"]).into_iter().collect());

        let ex = Formula::exists(vars(&["x"]), rxy.clone());
        assert_eq!(ex.free_vars(), vars(&["y"]).into_iter().collect());

        let mixed = Formula::and(
            Formula::eq(Var::new("x"), Var::new("y")),
            Formula::exists(vars(&["y"]), Formula::atom(&s1(), vars(&["y"]))),
        );
        assert_eq!(mixed.free_vars(), vars(&["x", "y"]).into_iter().collect());
    }

    #[test]
    fn sentences() {
        let p = RelSym::new("P", 1);
        assert!(Formula::exists(vars(&["x"]), Formula::atom(&p, vars(&["x"]))).is_sentence());
        assert!(!Formula::atom(&p, vars(&["x"])).is_sentence());
        assert!(Formula::Top.is_sentence());
    }

    #[test]
    fn empty_quantifier_is_identity() {
        let p = Formula::atom(&s1(), vars(&["x"]));
        assert_eq!(Formula::exists(vec![], p.clone()), p);
        assert_eq!(Formula::forall(vec![], p.clone()), p);
    }

    #[test]
    fn rejects_bad_names() {
        assert!(Var::try_new("X").is_err());
        assert!(Var::try_new("true").is_err());
        assert!(RelSym::try_new("r", 1).is_err());
        assert!(RelSym::try_new("E", 1).is_err());
        assert!(Signature::new([RelSym::new("R", 1), RelSym::new("R", 2)]).is_err());
    }

    #[test]
    fn fresh_relations_skip_taken_names() {
        let sig = Signature::new([RelSym::new("P0", 1)]).unwrap();
        let f = Formula::atom(&RelSym::new("P1", 1), vars(&["x"]));
        let fresh = sig.fresh_relations("P", 2, 1, &[&f]);
        assert_eq!(fresh, vec![RelSym::new("P2", 1), RelSym::new("P3", 1)]);
    }

    #[test]
    fn signature_json() {
        let sig = Signature::from_json(r#"{"relations":[{"name":"R","arity":2},{"name":"P","arity":1}]}"#)
            .unwrap();
        assert_eq!(sig.arity("R"), Some(2));
        assert_eq!(Signature::from_json(&sig.to_json()).unwrap(), sig);
        assert!(Signature::from_json(r#"{"relations":[{"name":"r","arity":2}]}"#).is_err());
    }

    #[test]
    fn free_relations_skip_so_bound() {
        let p = RelSym::new("P", 1);
        let f = Formula::and(
            Formula::so_exists(p.clone(), Formula::atom(&p, vars(&["x"]))),
            Formula::atom(&s1(), vars(&["x"])),
        );
        assert_eq!(f.free_relations(), [s1()].into_iter().collect());
    }
}
