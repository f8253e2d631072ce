use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Formula, RelSym, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubstError {
    #[error("relation {rel} has arity {arity} but {params} template parameters were given")]
    ArityMismatch { rel: String, arity: usize, params: usize },
    #[error("template parameter '{0}' is listed twice")]
    DuplicateParam(Var),
    #[error("template has free variable '{0}' that is not a parameter")]
    UnboundTemplateVar(Var),
    #[error("relation '{name}' occurs with arity {found}, expected {expected}")]
    OccurrenceArity { name: String, expected: usize, found: usize },
    #[error("template mentions '{0}', which a second-order quantifier of the host formula would capture")]
    SecondOrderCapture(String),
}

/// Simultaneous capture-avoiding substitution of variables for variables.
///
/// A binder that would capture the image of a substituted variable is renamed
/// to the first unused name among `v0, v1, ...`.
pub fn substitute_vars(f: &Formula, map: &BTreeMap<Var, Var>) -> Formula {
    let mut avoid = f.all_vars();
    avoid.extend(map.keys().cloned());
    avoid.extend(map.values().cloned());
    let mut s = VarSubst { avoid, next: 0 };
    s.go(f, map)
}

struct VarSubst {
    avoid: BTreeSet<Var>,
    next: usize,
}

impl VarSubst {
    fn mint(&mut self) -> Var {
        loop {
            let v = Var::new(format!("v{}", self.next));
            self.next += 1;
            if self.avoid.insert(v.clone()) {
                return v;
            }
        }
    }

    fn go(&mut self, f: &Formula, map: &BTreeMap<Var, Var>) -> Formula {
        if map.is_empty() {
            return f.clone();
        }
        let look = |v: &Var| map.get(v).cloned().unwrap_or_else(|| v.clone());
        match f {
            Formula::Top => Formula::Top,
            Formula::Atom(r, args) => Formula::Atom(r.clone(), args.iter().map(look).collect()),
            Formula::Eq(a, b) => Formula::Eq(look(a), look(b)),
            Formula::Not(b) => Formula::not(self.go(b, map)),
            Formula::And(l, r) => {
                let l = self.go(l, map);
                Formula::and(l, self.go(r, map))
            }
            Formula::Or(l, r) => {
                let l = self.go(l, map);
                Formula::or(l, self.go(r, map))
            }
            Formula::Implies(l, r) => {
                let l = self.go(l, map);
                Formula::implies(l, self.go(r, map))
            }
            Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
                let body_free = b.free_vars();
                let mut inner: BTreeMap<Var, Var> = map
                    .iter()
                    .filter(|(k, _)| !vs.contains(k) && body_free.contains(k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                let images: BTreeSet<Var> = inner.values().cloned().collect();
                let mut renamed = Vec::with_capacity(vs.len());
                for v in vs {
                    if images.contains(v) {
                        let n = self.mint();
                        inner.insert(v.clone(), n.clone());
                        renamed.push(n);
                    } else {
                        renamed.push(v.clone());
                    }
                }
                let body = Box::new(self.go(b, &inner));
                if matches!(f, Formula::Exists(..)) {
                    Formula::Exists(renamed, body)
                } else {
                    Formula::Forall(renamed, body)
                }
            }
            Formula::SoExists(r, b) => Formula::so_exists(r.clone(), self.go(b, map)),
            Formula::SoForall(r, b) => Formula::so_forall(r.clone(), self.go(b, map)),
        }
    }
}

/// Replaces every free occurrence `rel(a1, ..., an)` in `f` by `template`
/// with `params` simultaneously renamed to `a1, ..., an`.
///
/// The template must be closed over its parameters. Bound variables inside
/// each inserted copy are renamed where they would capture an argument, so
/// the host formula itself is never rewritten.
pub fn substitute_relation(
    f: &Formula,
    rel: &RelSym,
    template: &Formula,
    params: &[Var],
) -> Result<Formula, SubstError> {
    if params.len() != rel.arity {
        return Err(SubstError::ArityMismatch {
            rel: rel.name.clone(),
            arity: rel.arity,
            params: params.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for p in params {
        if !seen.insert(p) {
            return Err(SubstError::DuplicateParam(p.clone()));
        }
    }
    if let Some(v) = template.free_vars().into_iter().find(|v| !seen.contains(v)) {
        return Err(SubstError::UnboundTemplateVar(v));
    }
    let template_rels: BTreeSet<String> =
        template.free_relations().into_iter().map(|r| r.name).collect();
    let ctx = RelSubst { rel, template, params, template_rels };
    ctx.go(f)
}

struct RelSubst<'a> {
    rel: &'a RelSym,
    template: &'a Formula,
    params: &'a [Var],
    template_rels: BTreeSet<String>,
}

impl RelSubst<'_> {
    fn go(&self, f: &Formula) -> Result<Formula, SubstError> {
        Ok(match f {
            Formula::Atom(r, args) if r.name == self.rel.name => {
                if r.arity != self.rel.arity {
                    return Err(SubstError::OccurrenceArity {
                        name: r.name.clone(),
                        expected: self.rel.arity,
                        found: r.arity,
                    });
                }
                let map: BTreeMap<Var, Var> =
                    self.params.iter().cloned().zip(args.iter().cloned()).collect();
                substitute_vars(self.template, &map)
            }
            Formula::Top | Formula::Atom(..) | Formula::Eq(..) => f.clone(),
            Formula::Not(b) => Formula::not(self.go(b)?),
            Formula::And(l, r) => Formula::and(self.go(l)?, self.go(r)?),
            Formula::Or(l, r) => Formula::or(self.go(l)?, self.go(r)?),
            Formula::Implies(l, r) => Formula::implies(self.go(l)?, self.go(r)?),
            Formula::Exists(vs, b) => Formula::Exists(vs.clone(), Box::new(self.go(b)?)),
            Formula::Forall(vs, b) => Formula::Forall(vs.clone(), Box::new(self.go(b)?)),
            Formula::SoExists(r, b) | Formula::SoForall(r, b) => {
                let body = if r.name == self.rel.name {
                    (**b).clone()
                } else {
                    if self.template_rels.contains(&r.name) && b.mentions_relation(&self.rel.name) {
                        return Err(SubstError::SecondOrderCapture(r.name.clone()));
                    }
                    self.go(b)?
                };
                if matches!(f, Formula::SoExists(..)) {
                    Formula::so_exists(r.clone(), body)
                } else {
                    Formula::so_forall(r.clone(), body)
                }
            }
        })
    }
}

/// Renames every free occurrence of relation `from` to `to`; both must have
/// the same arity.
pub fn rename_relation(f: &Formula, from: &RelSym, to: &RelSym) -> Formula {
    assert_eq!(from.arity, to.arity, "renaming must preserve arity");
    match f {
        Formula::Atom(r, args) if r.name == from.name => Formula::Atom(to.clone(), args.clone()),
        Formula::Top | Formula::Atom(..) | Formula::Eq(..) => f.clone(),
        Formula::Not(b) => Formula::not(rename_relation(b, from, to)),
        Formula::And(l, r) => Formula::and(rename_relation(l, from, to), rename_relation(r, from, to)),
        Formula::Or(l, r) => Formula::or(rename_relation(l, from, to), rename_relation(r, from, to)),
        Formula::Implies(l, r) => {
            Formula::implies(rename_relation(l, from, to), rename_relation(r, from, to))
        }
        Formula::Exists(vs, b) => Formula::Exists(vs.clone(), Box::new(rename_relation(b, from, to))),
        Formula::Forall(vs, b) => Formula::Forall(vs.clone(), Box::new(rename_relation(b, from, to))),
        Formula::SoExists(r, _) | Formula::SoForall(r, _) if r.name == from.name => f.clone(),
        Formula::SoExists(r, b) => Formula::so_exists(r.clone(), rename_relation(b, from, to)),
        Formula::SoForall(r, b) => Formula::so_forall(r.clone(), rename_relation(b, from, to)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, vars, Signature};

    fn sig() -> Signature {
        Signature::new([RelSym::new("R", 2), RelSym::new("S", 2), RelSym::new("P", 1)]).unwrap()
    }

    #[test]
    fn non_closure_example() {
        let s = sig();
        let f = parse("E x y. R(x,y) & !S(x,y)", &s).unwrap();
        let template = parse("x = x & y = y", &s).unwrap();
        let out = substitute_relation(&f, &RelSym::new("R", 2), &template, &vars(&["x", "y"])).unwrap();
        // The template occupies the atom's position as a single conjunct.
        assert_eq!(out, parse("E x y. (x = x & y = y) & !S(x,y)", &s).unwrap());
    }

    #[test]
    fn identity_template_is_identity() {
        let s = sig();
        let f = parse("E x. R(x,y) & A y. R(y,x) | P(x)", &s).unwrap();
        let r = RelSym::new("R", 2);
        let params = vars(&["a", "b"]);
        let template = Formula::atom(&r, params.clone());
        assert_eq!(substitute_relation(&f, &r, &template, &params).unwrap(), f);
    }

    #[test]
    fn template_binder_is_renamed_on_capture() {
        let s = sig();
        let f = parse("E z. P(z) & R(x,z)", &s).unwrap();
        let template = parse("E z. S(a,z) & S(z,b)", &s).unwrap();
        let out = substitute_relation(&f, &RelSym::new("R", 2), &template, &vars(&["a", "b"])).unwrap();
        assert_eq!(out, parse("E z. P(z) & (E v0. S(x,v0) & S(v0,z))", &s).unwrap());
    }

    #[test]
    fn precondition_errors() {
        let s = sig();
        let f = parse("R(x,y)", &s).unwrap();
        let r = RelSym::new("R", 2);
        let t = parse("S(a,b)", &s).unwrap();
        assert!(matches!(
            substitute_relation(&f, &r, &t, &vars(&["a"])),
            Err(SubstError::ArityMismatch { .. })
        ));
        assert!(matches!(
            substitute_relation(&f, &r, &t, &vars(&["a", "a"])),
            Err(SubstError::DuplicateParam(_))
        ));
        assert!(matches!(
            substitute_relation(&f, &r, &t, &vars(&["a", "c"])),
            Err(SubstError::UnboundTemplateVar(_))
        ));
    }

    #[test]
    fn so_binder_shadows_and_captures() {
        let s = sig();
        let r = RelSym::new("R", 2);
        let shadow = parse("A2 R. R(x,y)", &s).unwrap();
        let t = parse("S(a,b)", &s).unwrap();
        assert_eq!(substitute_relation(&shadow, &r, &t, &vars(&["a", "b"])).unwrap(), shadow);

        let capture = parse("E2 S. R(x,y)", &s).unwrap();
        assert!(matches!(
            substitute_relation(&capture, &r, &t, &vars(&["a", "b"])),
            Err(SubstError::SecondOrderCapture(_))
        ));
    }

    #[test]
    fn substitute_vars_simultaneous() {
        let s = sig();
        let f = parse("R(x,y) & E x. R(x,y)", &s).unwrap();
        let map: BTreeMap<Var, Var> =
            [(Var::new("x"), Var::new("y")), (Var::new("y"), Var::new("x"))].into_iter().collect();
        assert_eq!(substitute_vars(&f, &map), parse("R(y,x) & E v0. R(v0,x)", &s).unwrap());
    }
}
