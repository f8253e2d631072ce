//! Syntactic constructions used in the interpolation arguments: binding free
//! variables to unary predicates, encoding free variables as singleton
//! predicates, the interpolant pairs for the inductive steps, and the two
//! closure rewrites.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::fragments::{classify_pe, is_exists_guard, is_guard};
use crate::syntax::{fresh_var, is_clean, rename_relation, Formula, RelSym, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error("{vars} variables but {preds} predicates")]
    LengthMismatch { vars: usize, preds: usize },
    #[error("'{0}' must be unary")]
    NotUnary(RelSym),
    #[error("variable '{0}' is listed twice")]
    DuplicateVar(Var),
    #[error("predicate '{0}' is listed twice")]
    DuplicatePred(String),
    #[error("'{0}' already occurs in the formula")]
    NotFresh(String),
    #[error("formula is not clean")]
    NotClean,
    #[error("formula is not positive existential: {0}")]
    NotPositiveExistential(String),
    #[error("variable '{0}' to be bound is quantified inside the formula")]
    BoundVar(Var),
    #[error("variable '{0}' appears in both tuples")]
    NotDisjoint(Var),
    #[error("free order {given:?} does not list the free variables {expected:?}")]
    FreeOrder { given: Vec<Var>, expected: Vec<Var> },
    #[error("'{0}' does not occur in the formula")]
    MissingRelation(String),
    #[error("guard relation '{name}' must have arity {expected}")]
    GuardArity { name: String, expected: usize },
    #[error("{0} is not a guard for the formula")]
    NotAGuard(String),
}

/// Variables `y1..yn` paired with unary predicates `P1..Pn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindSpec {
    vars: Vec<Var>,
    preds: Vec<RelSym>,
}

impl BindSpec {
    pub fn new(vars: Vec<Var>, preds: Vec<RelSym>) -> Result<Self, TransformError> {
        if vars.len() != preds.len() {
            return Err(TransformError::LengthMismatch { vars: vars.len(), preds: preds.len() });
        }
        distinct_vars(&vars)?;
        unary_distinct(&preds)?;
        Ok(BindSpec { vars, preds })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn preds(&self) -> &[RelSym] {
        &self.preds
    }

    /// The binding for `self.vars ++ other.vars`.
    pub fn concat(&self, other: &BindSpec) -> Result<Self, TransformError> {
        BindSpec::new(
            self.vars.iter().chain(&other.vars).cloned().collect(),
            self.preds.iter().chain(&other.preds).cloned().collect(),
        )
    }

    /// `P1(y1) & ... & Pn(yn)`, or `true` when empty.
    pub fn assumption(&self) -> Formula {
        Formula::conj(self.vars.iter().zip(&self.preds).map(|(v, p)| Formula::atom(p, vec![v.clone()])))
    }
}

fn distinct_vars(vs: &[Var]) -> Result<(), TransformError> {
    let mut seen = BTreeSet::new();
    for v in vs {
        if !seen.insert(v) {
            return Err(TransformError::DuplicateVar(v.clone()));
        }
    }
    Ok(())
}

fn unary_distinct(ps: &[RelSym]) -> Result<(), TransformError> {
    let mut seen = BTreeSet::new();
    for p in ps {
        if p.arity != 1 {
            return Err(TransformError::NotUnary(p.clone()));
        }
        if !seen.insert(&p.name) {
            return Err(TransformError::DuplicatePred(p.name.clone()));
        }
    }
    Ok(())
}

fn fresh_in<'a>(f: &Formula, rels: impl IntoIterator<Item = &'a RelSym>) -> Result<(), TransformError> {
    let used = f.relation_names();
    for r in rels {
        if used.contains(&r.name) {
            return Err(TransformError::NotFresh(r.name.clone()));
        }
    }
    Ok(())
}

fn require_pe(f: &Formula) -> Result<(), TransformError> {
    let report = classify_pe(f);
    match report.violation {
        None => Ok(()),
        Some(v) => Err(TransformError::NotPositiveExistential(v.reason)),
    }
}

/// Binds the variables of `spec` to its predicates. `f` must be a clean
/// positive existential formula not mentioning the predicates.
pub fn bind(f: &Formula, spec: &BindSpec) -> Result<Formula, TransformError> {
    if !is_clean(f) {
        return Err(TransformError::NotClean);
    }
    rebind(f, spec)
}

/// [`bind`] without the cleanliness requirement: it is enough that no
/// variable of `spec` is quantified in `f`. This admits the output of an
/// earlier `bind`, whose inserted quantifiers may repeat names.
pub fn rebind(f: &Formula, spec: &BindSpec) -> Result<Formula, TransformError> {
    require_pe(f)?;
    fresh_in(f, &spec.preds)?;
    let bound: BTreeSet<Var> = f.binders().into_iter().collect();
    if let Some(v) = spec.vars.iter().find(|v| bound.contains(v)) {
        return Err(TransformError::BoundVar(v.clone()));
    }
    Ok(bind_rec(f, spec))
}

fn bind_rec(f: &Formula, spec: &BindSpec) -> Formula {
    match f {
        Formula::Atom(..) | Formula::Eq(..) => {
            let free = f.free_vars();
            let (ys, ps): (Vec<Var>, Vec<Formula>) = spec
                .vars
                .iter()
                .zip(&spec.preds)
                .filter(|(y, _)| free.contains(y))
                .map(|(y, p)| (y.clone(), Formula::atom(p, vec![y.clone()])))
                .unzip();
            if ys.is_empty() {
                f.clone()
            } else {
                Formula::exists(ys, Formula::conj(std::iter::once(f.clone()).chain(ps)))
            }
        }
        Formula::And(l, r) => Formula::and(bind_rec(l, spec), bind_rec(r, spec)),
        Formula::Exists(zs, b) => Formula::Exists(zs.clone(), Box::new(bind_rec(b, spec))),
        _ => f.clone(),
    }
}

/// `E x1..xn. ((P1(x1) & A y. (P1(y) -> y = x1)) & ... ) & f`, the sentence
/// saying that `f` holds when each `xi` is the unique element of `Pi`.
pub fn singleton_encoding(f: &Formula, free_order: &[Var], preds: &[RelSym]) -> Result<Formula, TransformError> {
    if free_order.len() != preds.len() {
        return Err(TransformError::LengthMismatch { vars: free_order.len(), preds: preds.len() });
    }
    distinct_vars(free_order)?;
    let expected: Vec<Var> = f.free_vars().into_iter().collect();
    let given: BTreeSet<&Var> = free_order.iter().collect();
    if given.len() != expected.len() || expected.iter().any(|v| !given.contains(v)) {
        return Err(TransformError::FreeOrder { given: free_order.to_vec(), expected });
    }
    unary_distinct(preds)?;
    fresh_in(f, preds)?;
    if free_order.is_empty() {
        return Ok(f.clone());
    }
    // The uniqueness conjuncts do not scope over `f`, so only the xs must be avoided.
    let y = fresh_var("y", &free_order.iter().cloned().collect());
    let block = Formula::conj(
        free_order
            .iter()
            .zip(preds)
            .map(|(x, p)| Formula::and(Formula::atom(p, vec![x.clone()]), uniqueness(p, &y, x))),
    );
    Ok(Formula::exists(free_order.to_vec(), Formula::and(block, f.clone())))
}

/// `A y. (P(y) -> y = x)`
fn uniqueness(p: &RelSym, y: &Var, x: &Var) -> Formula {
    Formula::forall(
        vec![y.clone()],
        Formula::implies(Formula::atom(p, vec![y.clone()]), Formula::eq(y.clone(), x.clone())),
    )
}

/// The pair for the two-variable case: `psi & P(x)` and
/// `(P'(x) & A y. (P'(y) -> y = x)) -> psi'`, where `psi'` renames `P` to `P'`.
pub fn gamma_chi_fo2(
    psi: &Formula,
    p_last: &RelSym,
    p_prime: &RelSym,
    x: &Var,
) -> Result<(Formula, Formula), TransformError> {
    for p in [p_last, p_prime] {
        if p.arity != 1 {
            return Err(TransformError::NotUnary(p.clone()));
        }
    }
    if !psi.mentions_relation(&p_last.name) {
        return Err(TransformError::MissingRelation(p_last.name.clone()));
    }
    if p_prime.name == p_last.name {
        return Err(TransformError::NotFresh(p_prime.name.clone()));
    }
    fresh_in(psi, [p_prime])?;
    let gamma = Formula::and(psi.clone(), Formula::atom(p_last, vec![x.clone()]));
    let y = fresh_var("y", &BTreeSet::from([x.clone()]));
    let chi = Formula::implies(
        Formula::and(Formula::atom(p_prime, vec![x.clone()]), uniqueness(p_prime, &y, x)),
        rename_relation(psi, p_last, p_prime),
    );
    Ok((gamma, chi))
}

fn guard_atom(g: &RelSym, args: Vec<Var>) -> Result<Formula, TransformError> {
    if g.arity != args.len() {
        return Err(TransformError::GuardArity { name: g.name.clone(), expected: args.len() });
    }
    Ok(Formula::atom(g, args))
}

fn check_fresh_symbols(psi: &Formula, guard: &RelSym, unary: &[&RelSym]) -> Result<(), TransformError> {
    let owned: Vec<RelSym> = unary.iter().map(|r| (*r).clone()).collect();
    unary_distinct(&owned)?;
    if owned.iter().any(|r| r.name == guard.name) {
        return Err(TransformError::DuplicatePred(guard.name.clone()));
    }
    fresh_in(psi, unary.iter().copied().chain([guard]))
}

/// The pair for a quantifier step of the positive existential case:
/// `E z. G(xs, z) & bind[ys->ps](psi)` and
/// `Q1(x1) & ... -> E z. z = z & bind[xs ys->qs ps](psi)`.
pub fn gamma_chi_bind_step(
    psi: &Formula,
    xs: &[Var],
    ys: &[Var],
    qs: &[RelSym],
    ps: &[RelSym],
    guard_rel: &RelSym,
    z: &Var,
) -> Result<(Formula, Formula), TransformError> {
    if !is_clean(psi) {
        return Err(TransformError::NotClean);
    }
    require_pe(psi)?;
    if let Some(v) = xs.iter().find(|v| ys.contains(v)) {
        return Err(TransformError::NotDisjoint(v.clone()));
    }
    if xs.contains(z) || ys.contains(z) {
        return Err(TransformError::NotDisjoint(z.clone()));
    }
    check_fresh_symbols(psi, guard_rel, &qs.iter().chain(ps).collect::<Vec<_>>())?;
    let inner = BindSpec::new(ys.to_vec(), ps.to_vec())?;
    let outer = BindSpec::new(xs.to_vec(), qs.to_vec())?.concat(&inner)?;
    let mut gargs = xs.to_vec();
    gargs.push(z.clone());
    let gamma = Formula::exists(
        vec![z.clone()],
        Formula::and(guard_atom(guard_rel, gargs)?, bind(psi, &inner)?),
    );
    let chi = Formula::implies(
        BindSpec::new(xs.to_vec(), qs.to_vec())?.assumption(),
        Formula::exists(vec![z.clone()], Formula::and(Formula::eq(z.clone(), z.clone()), bind(psi, &outer)?)),
    );
    Ok((gamma, chi))
}

/// The pair for removing one existential quantifier from a conjunctive
/// query: `E x. G(x, ys) & psi` and `P1(y1) & ... -> E x. x = x & bind[ys->ps](psi)`.
pub fn gamma_chi_cq_step(
    psi: &Formula,
    x: &Var,
    ys: &[Var],
    ps: &[RelSym],
    guard_rel: &RelSym,
) -> Result<(Formula, Formula), TransformError> {
    if !is_clean(psi) {
        return Err(TransformError::NotClean);
    }
    require_pe(psi)?;
    if ys.contains(x) {
        return Err(TransformError::NotDisjoint(x.clone()));
    }
    check_fresh_symbols(psi, guard_rel, &ps.iter().collect::<Vec<_>>())?;
    let spec = BindSpec::new(ys.to_vec(), ps.to_vec())?;
    let mut gargs = vec![x.clone()];
    gargs.extend(ys.iter().cloned());
    let gamma = Formula::exists(vec![x.clone()], Formula::and(guard_atom(guard_rel, gargs)?, psi.clone()));
    let chi = Formula::implies(
        spec.assumption(),
        Formula::exists(vec![x.clone()], Formula::and(Formula::eq(x.clone(), x.clone()), bind(psi, &spec)?)),
    );
    Ok((gamma, chi))
}

/// `alpha & !(alpha & f)`, a guarded negation equivalent to `alpha & !f`.
pub fn guarded_negation_rewrite(alpha: &Formula, f: &Formula) -> Result<Formula, TransformError> {
    if !is_guard(alpha, f) && !is_exists_guard(alpha, f) {
        return Err(TransformError::NotAGuard(alpha.to_string()));
    }
    Ok(Formula::and(alpha.clone(), Formula::not(Formula::and(alpha.clone(), f.clone()))))
}

/// `(x = x & !P(x)) | f`, equivalent to `P(x) -> f`.
pub fn unary_implication_rewrite(p: &RelSym, x: &Var, f: &Formula) -> Result<Formula, TransformError> {
    if p.arity != 1 {
        return Err(TransformError::NotUnary(p.clone()));
    }
    Ok(Formula::or(
        Formula::and(Formula::eq(x.clone(), x.clone()), Formula::not(Formula::atom(p, vec![x.clone()]))),
        f.clone(),
    ))
}
