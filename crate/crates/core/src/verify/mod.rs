//! Random instances of the binding, interpolant-pair and rewrite properties,
//! checked with the bounded model checker.

mod gen;

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::semantics::{check_entailment, check_equivalence, EntailmentVerdict};
use crate::syntax::{render, Formula, RelSym, Signature, Var};
use crate::transform::{
    bind, gamma_chi_bind_step, gamma_chi_cq_step, gamma_chi_fo2, guarded_negation_rewrite, rebind,
    singleton_encoding, unary_implication_rewrite, BindSpec, TransformError,
};

pub use gen::{
    default_signature, fo_formula, pe_formula, random_pe_formula, variable_names, ConfigError, FoOptions,
    GenConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Property {
    BindComp,
    ImpLemma,
    EqLemma,
    GammaChiFo2,
    GammaChiBind,
    GammaChiCq,
    SandwichFo2,
    SandwichBind,
    SandwichCq,
    RewriteGn,
    RewriteUi,
}

impl Property {
    pub const ALL: [Property; 11] = [
        Property::BindComp,
        Property::ImpLemma,
        Property::EqLemma,
        Property::GammaChiFo2,
        Property::GammaChiBind,
        Property::GammaChiCq,
        Property::SandwichFo2,
        Property::SandwichBind,
        Property::SandwichCq,
        Property::RewriteGn,
        Property::RewriteUi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::BindComp => "BIND_COMP",
            Property::ImpLemma => "IMP_LEMMA",
            Property::EqLemma => "EQ_LEMMA",
            Property::GammaChiFo2 => "GAMMA_CHI_FO2",
            Property::GammaChiBind => "GAMMA_CHI_BIND",
            Property::GammaChiCq => "GAMMA_CHI_CQ",
            Property::SandwichFo2 => "SANDWICH_FO2",
            Property::SandwichBind => "SANDWICH_BIND",
            Property::SandwichCq => "SANDWICH_CQ",
            Property::RewriteGn => "REWRITE_GN",
            Property::RewriteUi => "REWRITE_UI",
        }
    }

    /// Case-insensitive, so `eq_lemma` works on the command line.
    pub fn from_name(s: &str) -> Option<Property> {
        Property::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s))
    }

    /// Draws an instance that meets the property's preconditions.
    pub fn sample(self, rng: &mut impl Rng, cfg: &GenConfig) -> Instance {
        loop {
            if let Some(inst) = self.try_sample(rng, cfg) {
                return inst;
            }
        }
    }

    fn try_sample(self, rng: &mut impl Rng, cfg: &GenConfig) -> Option<Instance> {
        let fo_opts = FoOptions { second_order: false, top: true };
        match self {
            Property::BindComp | Property::ImpLemma => {
                let f = pe_formula(rng, cfg);
                let mut subset = nonempty_subset(rng, &f)?;
                let split = match (self, subset.len()) {
                    (Property::ImpLemma, _) => 0,
                    (_, n) if n >= 2 && rng.gen_bool(0.8) => rng.gen_range(1..n),
                    (_, n) => rng.gen_range(0..=n),
                };
                let ys = subset.split_off(split);
                Some(Instance { xs: subset, ys, ..Instance::new(f) })
            }
            Property::EqLemma => {
                let f = pe_formula(rng, cfg);
                let mut free = shuffled_free(rng, &f);
                if free.len() < 2 {
                    return None;
                }
                let x = free.remove(0);
                let k = rng.gen_range(1..=free.len());
                free.truncate(k);
                Some(Instance { ys: free, var: Some(x), ..Instance::new(f) })
            }
            Property::GammaChiBind | Property::SandwichBind => {
                let f = pe_formula(rng, cfg);
                let mut free = shuffled_free(rng, &f);
                if free.is_empty() {
                    return None;
                }
                let z = free.remove(0);
                let k = usize::from(!free.is_empty() && rng.gen_bool(0.8));
                let ys = free.split_off(k);
                Some(Instance { xs: free, ys, var: Some(z), ..Instance::new(f) })
            }
            Property::GammaChiCq | Property::SandwichCq => {
                let f = pe_formula(rng, cfg);
                let mut free = shuffled_free(rng, &f);
                if free.is_empty() || free.len() > 2 {
                    return None;
                }
                let x = free.remove(0);
                Some(Instance { ys: free, var: Some(x), ..Instance::new(f) })
            }
            Property::GammaChiFo2 | Property::SandwichFo2 => {
                let two = GenConfig { max_vars: cfg.max_vars.min(2), ..cfg.clone() };
                if two.signature.relations().any(|r| r.arity > 2) {
                    return None;
                }
                let f = fo_formula(rng, &two, fo_opts);
                let order = shuffled_free(rng, &f);
                if order.is_empty() {
                    return None;
                }
                Some(Instance { xs: order, var: Some(Var::new("x")), ..Instance::new(f) })
            }
            Property::RewriteGn => {
                let f = fo_formula(rng, cfg, fo_opts);
                let guard = random_guard(rng, cfg, &f)?;
                Some(Instance { guard: Some(guard), ..Instance::new(f) })
            }
            Property::RewriteUi => {
                let f = fo_formula(rng, cfg, fo_opts);
                let x = variable_names(cfg.max_vars).choose(rng).cloned();
                let unary: Vec<RelSym> = cfg.signature.relations().filter(|r| r.arity == 1).collect();
                let pred = if rng.gen_bool(0.5) { unary.choose(rng).cloned() } else { None };
                Some(Instance { var: x, pred, ..Instance::new(f) })
            }
        }
    }

    /// Builds both sides of the property for `inst` over `sig` extended with
    /// freshly minted symbols.
    pub fn build(self, inst: &Instance, sig: &Signature) -> Result<Case, TransformError> {
        let f = &inst.formula;
        let fresh = |s: &Signature, prefix: &str, n: usize, arity: usize, avoid: &[&Formula]| {
            s.fresh_relations(prefix, n, arity, avoid)
        };
        let var = || inst.var.clone().expect("this property needs a distinguished variable");
        let mut checks = Vec::new();
        let mut sig = sig.clone();
        let extend = |sig: &mut Signature, rels: &[RelSym]| {
            *sig = sig.extended(rels.iter().cloned()).expect("minted names are fresh");
        };
        match self {
            Property::BindComp => {
                let ps = fresh(&sig, "P", inst.xs.len(), 1, &[f]);
                let qs = fresh(&sig, "Q", inst.ys.len(), 1, &[f]);
                extend(&mut sig, &ps);
                extend(&mut sig, &qs);
                let outer = BindSpec::new(inst.xs.clone(), ps.clone())?;
                let inner = BindSpec::new(inst.ys.clone(), qs)?;
                let joint = outer.concat(&inner)?;
                checks.push(Check::equivalent("BIND[xs ys](f) == BIND[xs](BIND[ys](f))", bind(f, &joint)?, rebind(&bind(f, &inner)?, &outer)?));
            }
            Property::ImpLemma => {
                let ps = fresh(&sig, "P", inst.ys.len(), 1, &[f]);
                extend(&mut sig, &ps);
                let spec = BindSpec::new(inst.ys.clone(), ps)?;
                checks.push(Check::entails(
                    "P(ys) & f |= BIND(f)",
                    Formula::and(spec.assumption(), f.clone()),
                    bind(f, &spec)?,
                ));
            }
            Property::EqLemma => {
                let x = var();
                if inst.ys.contains(&x) {
                    return Err(TransformError::NotDisjoint(x));
                }
                let ps = fresh(&sig, "P", inst.ys.len(), 1, &[f]);
                let spec = BindSpec::new(inst.ys.clone(), ps.clone())?;
                let rhs = Formula::so_forall_all(
                    &ps,
                    Formula::implies(spec.assumption(), Formula::exists(vec![x.clone()], bind(f, &spec)?)),
                );
                checks.push(Check::equivalent("E x. f == A2 P. P(ys) -> E x. BIND(f)", Formula::exists(vec![x], f.clone()), rhs));
            }
            Property::GammaChiBind | Property::SandwichBind => {
                let z = var();
                let g = sig.fresh_relation("G", inst.xs.len() + 1, &[f]);
                let qs = fresh(&sig, "Q", inst.xs.len(), 1, &[f]);
                let ps = fresh(&sig, "P", inst.ys.len(), 1, &[f]);
                let (gamma, chi) = gamma_chi_bind_step(f, &inst.xs, &inst.ys, &qs, &ps, &g, &z)?;
                if self == Property::GammaChiBind {
                    extend(&mut sig, &[g]);
                    extend(&mut sig, &qs);
                    extend(&mut sig, &ps);
                    checks.push(Check::entails("gamma |= chi", gamma, chi));
                } else {
                    extend(&mut sig, &ps);
                    let target = Formula::exists(vec![z], bind(f, &BindSpec::new(inst.ys.clone(), ps)?)?);
                    checks.push(Check::equivalent("E2 G. gamma == E z. BIND(psi)", Formula::so_exists(g, gamma), target.clone()));
                    checks.push(Check::equivalent("A2 Q. chi == E z. BIND(psi)", Formula::so_forall_all(&qs, chi), target));
                }
            }
            Property::GammaChiCq | Property::SandwichCq => {
                let x = var();
                let g = sig.fresh_relation("G", inst.ys.len() + 1, &[f]);
                let ps = fresh(&sig, "P", inst.ys.len(), 1, &[f]);
                let (gamma, chi) = gamma_chi_cq_step(f, &x, &inst.ys, &ps, &g)?;
                if self == Property::GammaChiCq {
                    extend(&mut sig, &[g]);
                    extend(&mut sig, &ps);
                    checks.push(Check::entails("gamma |= chi", gamma, chi));
                } else {
                    let target = Formula::exists(vec![x], f.clone());
                    checks.push(Check::equivalent("E2 G. gamma == E x. psi", Formula::so_exists(g, gamma), target.clone()));
                    checks.push(Check::equivalent("A2 P. chi == E x. psi", Formula::so_forall_all(&ps, chi), target));
                }
            }
            Property::GammaChiFo2 | Property::SandwichFo2 => {
                let preds = fresh(&sig, "P", inst.xs.len(), 1, &[f]);
                let psi = singleton_encoding(f, &inst.xs, &preds)?;
                extend(&mut sig, &preds);
                let last = preds.last().expect("free order is nonempty").clone();
                let prime = sig.fresh_relation("P", 1, &[&psi]);
                let (gamma, chi) = gamma_chi_fo2(&psi, &last, &prime, &var())?;
                if self == Property::GammaChiFo2 {
                    extend(&mut sig, &[prime]);
                    checks.push(Check::entails("gamma |= chi", gamma, chi));
                } else {
                    sig = sig.restrict(
                        sig.relations().filter(|r| r.name != last.name).map(|r| r.name).collect::<Vec<_>>().iter().map(String::as_str),
                    );
                    checks.push(Check::equivalent("E2 P. gamma == A2 P'. chi", Formula::so_exists(last, gamma), Formula::so_forall(prime, chi)));
                }
            }
            Property::RewriteGn => {
                let alpha = inst.guard.clone().expect("REWRITE_GN needs a guard");
                checks.push(Check::equivalent(
                    "a & !(a & f) == a & !f",
                    guarded_negation_rewrite(&alpha, f)?,
                    Formula::and(alpha, Formula::not(f.clone())),
                ));
            }
            Property::RewriteUi => {
                let x = var();
                let p = match &inst.pred {
                    Some(p) => p.clone(),
                    None => {
                        let p = sig.fresh_relation("P", 1, &[f]);
                        extend(&mut sig, std::slice::from_ref(&p));
                        p
                    }
                };
                checks.push(Check::equivalent(
                    "(x = x & !P(x)) | f == P(x) -> f",
                    unary_implication_rewrite(&p, &x, f)?,
                    Formula::implies(Formula::atom(&p, vec![x]), f.clone()),
                ));
            }
        }
        Ok(Case { property: self, summary: inst.to_string(), sig, checks })
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn shuffled_free(rng: &mut impl Rng, f: &Formula) -> Vec<Var> {
    let mut free: Vec<Var> = f.free_vars().into_iter().collect();
    free.shuffle(rng);
    free
}

fn nonempty_subset(rng: &mut impl Rng, f: &Formula) -> Option<Vec<Var>> {
    let mut free = shuffled_free(rng, f);
    if free.is_empty() {
        return None;
    }
    let k = rng.gen_range(1..=free.len());
    free.truncate(k);
    Some(free)
}

/// An atom, equality, or existentially quantified atom whose free variables
/// cover those of `f`.
fn random_guard(rng: &mut impl Rng, cfg: &GenConfig, f: &Formula) -> Option<Formula> {
    let free: Vec<Var> = f.free_vars().into_iter().collect();
    let names = variable_names(cfg.max_vars);
    let rels: Vec<RelSym> = cfg.signature.relations().filter(|r| r.arity >= free.len().max(1)).collect();
    let mut choices = 1;
    if free.len() <= 2 && !free.is_empty() {
        choices += 1;
    }
    let use_eq = rels.is_empty() || rng.gen_range(0..choices + 2) == 0;
    if use_eq {
        if free.len() > 2 {
            return None;
        }
        let a = free.first().or_else(|| names.choose(rng)).cloned()?;
        let b = free.get(1).cloned().unwrap_or_else(|| a.clone());
        return Some(Formula::eq(a, b));
    }
    let r = rels.choose(rng)?;
    let mut args = free.clone();
    let quantify = args.len() < r.arity && rng.gen_bool(0.4);
    let extra = crate::syntax::fresh_var("v", &f.all_vars());
    while args.len() < r.arity {
        let pad = if quantify { extra.clone() } else { names.choose(rng)?.clone() };
        args.push(pad);
    }
    args.shuffle(rng);
    let atom = Formula::atom(r, args);
    Some(if quantify { Formula::exists(vec![extra], atom) } else { atom })
}

/// The data a property is instantiated with. Which fields matter depends on
/// the property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub formula: Formula,
    pub xs: Vec<Var>,
    pub ys: Vec<Var>,
    pub var: Option<Var>,
    pub guard: Option<Formula>,
    pub pred: Option<RelSym>,
}

impl Instance {
    pub fn new(formula: Formula) -> Self {
        Instance { formula, xs: Vec::new(), ys: Vec::new(), var: None, guard: None, pred: None }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |vs: &[Var]| vs.iter().map(Var::name).collect::<Vec<_>>().join(",");
        write!(f, "{}", render(&self.formula))?;
        if !self.xs.is_empty() {
            write!(f, "; xs=[{}]", list(&self.xs))?;
        }
        if !self.ys.is_empty() {
            write!(f, "; ys=[{}]", list(&self.ys))?;
        }
        if let Some(v) = &self.var {
            write!(f, "; var={v}")?;
        }
        if let Some(g) = &self.guard {
            write!(f, "; guard={}", render(g))?;
        }
        if let Some(p) = &self.pred {
            write!(f, "; pred={}", p.name)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckKind {
    Entails,
    Equivalent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub label: &'static str,
    pub kind: CheckKind,
    pub left: Formula,
    pub right: Formula,
}

impl Check {
    fn entails(label: &'static str, left: Formula, right: Formula) -> Self {
        Check { label, kind: CheckKind::Entails, left, right }
    }

    fn equivalent(label: &'static str, left: Formula, right: Formula) -> Self {
        Check { label, kind: CheckKind::Equivalent, left, right }
    }
}

/// A built instance: the semantic checks and the signature they range over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub property: Property,
    pub summary: String,
    pub sig: Signature,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail { check: &'static str, verdict: EntailmentVerdict },
    PreconditionViolated(String),
    Error(String),
}

/// Runs every check of `case` up to `max_size`, stopping at the first failure.
pub fn check_case(case: &Case, max_size: usize) -> Outcome {
    for c in &case.checks {
        let verdict = match c.kind {
            CheckKind::Entails => check_entailment(&c.left, &c.right, &case.sig, max_size),
            CheckKind::Equivalent => check_equivalence(&c.left, &c.right, &case.sig, max_size),
        };
        match verdict {
            Err(e) => return Outcome::Error(e.to_string()),
            Ok(v) if !v.holds() => return Outcome::Fail { check: c.label, verdict: v },
            Ok(_) => {}
        }
    }
    Outcome::Pass
}

/// Builds and checks one instance.
pub fn check_instance(p: Property, inst: &Instance, sig: &Signature, max_size: usize) -> Outcome {
    match p.build(inst, sig) {
        Ok(case) => check_case(&case, max_size),
        Err(e) => Outcome::PreconditionViolated(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyFailure {
    pub case: u64,
    pub formula: String,
    pub reason: String,
    pub verdict: Option<EntailmentVerdict>,
    pub repro: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyRunReport {
    pub property: Property,
    pub seed: u64,
    pub max_size: usize,
    pub cases_run: u64,
    pub failures: Vec<PropertyFailure>,
}

impl PropertyRunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for PropertyRunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} cases, {} failures (seed {}, max size {})",
            self.property,
            self.cases_run,
            self.failures.len(),
            self.seed,
            self.max_size
        )?;
        for fail in &self.failures {
            write!(f, "\n  case {}: {}\n    {}\n    rerun: {}", fail.case, fail.formula, fail.reason, fail.repro)?;
            if let Some(w) = fail.verdict.as_ref().and_then(|v| v.witness.as_ref()) {
                write!(f, "\n    {}", serde_json::to_string(w).expect("witness serializes"))?;
            }
        }
        Ok(())
    }
}

/// A command line that reruns exactly one case.
pub fn repro_command(p: Property, cfg: &GenConfig, max_size: usize, case: u64) -> String {
    let mut cmd = format!(
        "glk verify --prop {} --seed {} --max-size {} --case {} --max-atoms {} --max-vars {} --max-depth {}",
        p.name().to_ascii_lowercase(),
        cfg.seed,
        max_size,
        case,
        cfg.max_atoms,
        cfg.max_vars,
        cfg.max_depth
    );
    if cfg.signature != default_signature() {
        cmd.push_str(&format!(" --sig '{}'", cfg.signature.to_json()));
    }
    cmd
}

/// Samples, builds and checks case number `case` of a run.
pub fn run_case(p: Property, cfg: &GenConfig, max_size: usize, case: u64) -> Option<PropertyFailure> {
    let inst = p.sample(&mut cfg.case_rng(case), cfg);
    let (reason, verdict) = match check_instance(p, &inst, &cfg.signature, max_size) {
        Outcome::Pass => return None,
        Outcome::Fail { check, verdict } => (format!("{check} fails"), Some(verdict)),
        Outcome::PreconditionViolated(m) => (format!("precondition violated: {m}"), None),
        Outcome::Error(m) => (format!("check error: {m}"), None),
    };
    Some(PropertyFailure { case, formula: inst.to_string(), reason, verdict, repro: repro_command(p, cfg, max_size, case) })
}

/// Runs cases `0..n_cases` in order and collects the failures.
pub fn run_property(p: Property, cfg: &GenConfig, max_size: usize, n_cases: u64) -> PropertyRunReport {
    let failures = (0..n_cases).filter_map(|case| run_case(p, cfg, max_size, case)).collect();
    PropertyRunReport { property: p, seed: cfg.seed, max_size, cases_run: n_cases, failures }
}
