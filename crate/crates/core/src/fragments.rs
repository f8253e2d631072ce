//! Syntactic membership tests for the guarded, guarded-negation, two-variable
//! and existential-conjunctive fragments.
//!
//! Each classifier either accepts or reports the AST path of a node where no
//! grammar clause of the fragment applies. Paths are child indices as in
//! [`Formula::at`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::{substitute_relation, Formula, RelSym, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Fragment {
    #[serde(rename = "GFO")]
    Gfo,
    #[serde(rename = "GNFO")]
    Gnfo,
    #[serde(rename = "GNFO_UCQ")]
    GnfoUcq,
    #[serde(rename = "FO2")]
    Fo2,
    #[serde(rename = "PE")]
    Pe,
    #[serde(rename = "SELF_GUARDED")]
    SelfGuarded,
}

impl Fragment {
    pub const ALL: [Fragment; 6] = [
        Fragment::Gfo,
        Fragment::Gnfo,
        Fragment::GnfoUcq,
        Fragment::Fo2,
        Fragment::Pe,
        Fragment::SelfGuarded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fragment::Gfo => "GFO",
            Fragment::Gnfo => "GNFO",
            Fragment::GnfoUcq => "GNFO_UCQ",
            Fragment::Fo2 => "FO2",
            Fragment::Pe => "PE",
            Fragment::SelfGuarded => "SELF_GUARDED",
        }
    }

    /// Accepts the canonical names case-insensitively.
    pub fn from_name(s: &str) -> Option<Fragment> {
        Fragment::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(s))
    }

    pub fn classify(self, f: &Formula) -> FragmentReport {
        match self {
            Fragment::Gfo => classify_gfo(f),
            Fragment::Gnfo => classify_gnfo(f),
            Fragment::GnfoUcq => classify_gnfo_ucq(f),
            Fragment::Fo2 => classify_fo2(f),
            Fragment::Pe => classify_pe(f),
            Fragment::SelfGuarded => is_self_guarded(f),
        }
    }
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentReport {
    pub fragment: Fragment,
    pub member: bool,
    pub violation: Option<Violation>,
}

impl FragmentReport {
    fn from_result(fragment: Fragment, r: Result<(), Violation>) -> Self {
        match r {
            Ok(()) => FragmentReport { fragment, member: true, violation: None },
            Err(v) => FragmentReport { fragment, member: false, violation: Some(v) },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for FragmentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(f, "{}: member", self.fragment),
            Some(v) => write!(f, "{}: non-member at {:?} ({})", self.fragment, v.path, v.reason),
        }
    }
}

fn fail(path: &[usize], reason: impl Into<String>) -> Result<(), Violation> {
    Err(Violation { path: path.to_vec(), reason: reason.into() })
}

/// Runs `check` on a child, with the child index pushed onto `path`.
fn child<T>(path: &mut Vec<usize>, i: usize, check: impl FnOnce(&mut Vec<usize>) -> T) -> T {
    path.push(i);
    let out = check(path);
    path.pop();
    out
}

fn kind(f: &Formula) -> &'static str {
    match f {
        Formula::Top => "true",
        Formula::Atom(..) => "atom",
        Formula::Eq(..) => "equality",
        Formula::Not(..) => "negation",
        Formula::And(..) => "conjunction",
        Formula::Or(..) => "disjunction",
        Formula::Implies(..) => "implication",
        Formula::Exists(..) => "existential quantifier",
        Formula::Forall(..) => "universal quantifier",
        Formula::SoExists(..) | Formula::SoForall(..) => "second-order quantifier",
    }
}

/// `alpha` is an atom or equality whose free variables include those of `f`.
pub fn is_guard(alpha: &Formula, f: &Formula) -> bool {
    alpha.is_atomic() && f.free_vars().is_subset(&alpha.free_vars())
}

/// `g` is an atom or equality under zero or more existential quantifiers,
/// and its free variables include those of `f`.
pub fn is_exists_guard(g: &Formula, f: &Formula) -> bool {
    strip_exists(g).is_atomic() && f.free_vars().is_subset(&g.free_vars())
}

fn strip_exists(mut g: &Formula) -> &Formula {
    while let Formula::Exists(_, b) = g {
        g = b;
    }
    g
}

pub fn classify_gfo(f: &Formula) -> FragmentReport {
    FragmentReport::from_result(Fragment::Gfo, gfo(f, &mut Vec::new()))
}

fn gfo(f: &Formula, path: &mut Vec<usize>) -> Result<(), Violation> {
    match f {
        Formula::Top | Formula::Atom(..) | Formula::Eq(..) => Ok(()),
        Formula::Not(b) => child(path, 0, |p| gfo(b, p)),
        Formula::And(l, r) => {
            child(path, 0, |p| gfo(l, p))?;
            child(path, 1, |p| gfo(r, p))
        }
        Formula::Exists(_, body) => match &**body {
            // The lone guard reads as alpha & true.
            b if b.is_atomic() => Ok(()),
            Formula::And(alpha, rest) if alpha.is_atomic() => {
                if is_guard(alpha, rest) {
                    child(path, 0, |p| child(p, 1, |p| gfo(rest, p)))
                } else {
                    fail(
                        path,
                        format!("{} does not guard the rest of the quantified body", crate::syntax::render(alpha)),
                    )
                }
            }
            Formula::And(alpha, _) => fail(
                path,
                format!("guard position holds the non-atomic formula {}", crate::syntax::render(alpha)),
            ),
            other => fail(path, format!("quantified body is a {}, not a guarded conjunction", kind(other))),
        },
        other => fail(path, format!("{} is not a GFO connective", kind(other))),
    }
}

pub fn classify_gnfo(f: &Formula) -> FragmentReport {
    FragmentReport::from_result(Fragment::Gnfo, gnfo(f, &mut Vec::new()))
}

/// Matches `alpha & !phi` with `alpha` a guard for `phi`.
fn guarded_negation(f: &Formula) -> Option<(&Formula, &Formula)> {
    match f {
        Formula::And(alpha, r) => match &**r {
            Formula::Not(phi) if is_guard(alpha, phi) => Some((alpha, phi)),
            _ => None,
        },
        _ => None,
    }
}

fn gnfo(f: &Formula, path: &mut Vec<usize>) -> Result<(), Violation> {
    if let Some((_, phi)) = guarded_negation(f) {
        return child(path, 1, |p| child(p, 0, |p| gnfo(phi, p)));
    }
    match f {
        Formula::Top | Formula::Atom(..) | Formula::Eq(..) => Ok(()),
        Formula::Or(l, r) | Formula::And(l, r) => {
            child(path, 0, |p| gnfo(l, p))?;
            child(path, 1, |p| gnfo(r, p))
        }
        // A block E x y. is read as nested single-variable quantifiers.
        Formula::Exists(_, b) => child(path, 0, |p| gnfo(b, p)),
        Formula::Not(_) => fail(path, "negation is not guarded (expected alpha & !phi with alpha a guard for phi)"),
        other => fail(path, format!("{} is not a GNFO connective", kind(other))),
    }
}

/// A split of a formula into a UCQ shell and the self-guarded formulas
/// plugged into its atom positions. Substituting every plug back into the
/// shell yields the original formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UcqDecomposition {
    pub shell: Formula,
    pub plugs: Vec<Plug>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plug {
    pub rel: RelSym,
    pub params: Vec<Var>,
    pub formula: Formula,
}

impl UcqDecomposition {
    /// Plugs every subformula back into the shell.
    pub fn reassemble(&self) -> Formula {
        self.plugs.iter().fold(self.shell.clone(), |acc, plug| {
            substitute_relation(&acc, &plug.rel, &plug.formula, &plug.params)
                .expect("plug parameters are the plug's free variables")
        })
    }
}

pub fn classify_gnfo_ucq(f: &Formula) -> FragmentReport {
    FragmentReport::from_result(Fragment::GnfoUcq, ucq(f, &mut Vec::new()))
}

/// Finds the decomposition used by [`classify_gnfo_ucq`], if `f` is a member.
///
/// Search is top-down: a guarded negation is always taken as a plug, atoms
/// and equalities stay in the shell, and conjunction, disjunction,
/// existential quantification and `true` are shell connectives.
pub fn decompose_gnfo_ucq(f: &Formula) -> Option<UcqDecomposition> {
    ucq(f, &mut Vec::new()).ok()?;
    let mut taken = f.relation_names();
    let mut plugs = Vec::new();
    let shell = build_shell(f, &mut taken, &mut plugs);
    Some(UcqDecomposition { shell, plugs })
}

fn build_shell(f: &Formula, taken: &mut BTreeSet<String>, plugs: &mut Vec<Plug>) -> Formula {
    if guarded_negation(f).is_some() {
        let name = (0..)
            .map(|i| format!("U{i}"))
            .find(|n| !taken.contains(n))
            .expect("unbounded supply of names");
        taken.insert(name.clone());
        let params: Vec<Var> = f.free_vars().into_iter().collect();
        let rel = RelSym::new(name, params.len());
        plugs.push(Plug { rel: rel.clone(), params: params.clone(), formula: f.clone() });
        return Formula::Atom(rel, params);
    }
    match f {
        Formula::And(l, r) => {
            let l = build_shell(l, taken, plugs);
            Formula::and(l, build_shell(r, taken, plugs))
        }
        Formula::Or(l, r) => {
            let l = build_shell(l, taken, plugs);
            Formula::or(l, build_shell(r, taken, plugs))
        }
        Formula::Exists(vs, b) => Formula::Exists(vs.clone(), Box::new(build_shell(b, taken, plugs))),
        other => other.clone(),
    }
}

fn ucq(f: &Formula, path: &mut Vec<usize>) -> Result<(), Violation> {
    if let Some((_, phi)) = guarded_negation(f) {
        let plug_ok = is_self_guarded(f).member;
        debug_assert!(plug_ok, "a guarded negation is self-guarded");
        return child(path, 1, |p| child(p, 0, |p| ucq(phi, p)));
    }
    match f {
        Formula::Top | Formula::Atom(..) | Formula::Eq(..) => Ok(()),
        Formula::And(l, r) | Formula::Or(l, r) => {
            child(path, 0, |p| ucq(l, p))?;
            child(path, 1, |p| ucq(r, p))
        }
        Formula::Exists(_, b) => child(path, 0, |p| ucq(b, p)),
        Formula::Not(_) => fail(path, "negation outside a guarded negation alpha & !phi"),
        other => fail(
            path,
            format!("{} is neither a UCQ shell connective nor a self-guarded plug", kind(other)),
        ),
    }
}

pub fn classify_fo2(f: &Formula) -> FragmentReport {
    FragmentReport::from_result(Fragment::Fo2, fo2(f))
}

fn fo2(f: &Formula) -> Result<(), Violation> {
    let mut path = Vec::new();
    if let Some(v) = first_offender(f, &mut path, &|g| match g {
        Formula::Atom(r, _) if r.arity > 2 => Some(format!("relation {} has arity {} > 2", r.name, r.arity)),
        Formula::SoExists(..) | Formula::SoForall(..) => Some("second-order quantifier".to_string()),
        _ => None,
    }) {
        return Err(v);
    }
    if f.all_vars().len() <= 2 {
        return Ok(());
    }
    // Descend to a smallest subformula that mentions three or more names.
    let mut cur = f;
    let mut path = Vec::new();
    'descend: loop {
        for (i, c) in cur.children().into_iter().enumerate() {
            if c.all_vars().len() > 2 {
                path.push(i);
                cur = c;
                continue 'descend;
            }
        }
        break;
    }
    let names: Vec<String> = cur.all_vars().iter().map(|v| v.to_string()).collect();
    fail(&path, format!("uses {} variable names ({})", names.len(), names.join(", ")))
}

/// Pre-order search for the first node that `bad` rejects.
fn first_offender(
    f: &Formula,
    path: &mut Vec<usize>,
    bad: &dyn Fn(&Formula) -> Option<String>,
) -> Option<Violation> {
    if let Some(reason) = bad(f) {
        return Some(Violation { path: path.clone(), reason });
    }
    for (i, c) in f.children().into_iter().enumerate() {
        if let Some(v) = child(path, i, |p| first_offender(c, p, bad)) {
            return Some(v);
        }
    }
    None
}

pub fn classify_pe(f: &Formula) -> FragmentReport {
    let v = first_offender(f, &mut Vec::new(), &|g| match g {
        Formula::Atom(..) | Formula::Eq(..) | Formula::And(..) | Formula::Exists(..) => None,
        other => Some(format!("{} is not allowed in the existential-conjunctive fragment", kind(other))),
    });
    FragmentReport::from_result(Fragment::Pe, v.map_or(Ok(()), Err))
}

/// Sentences, `g & phi` with `g` an existential guard for `phi`, and bare
/// (possibly existentially quantified) atoms, read as `alpha & true`.
pub fn is_self_guarded(f: &Formula) -> FragmentReport {
    let ok = f.is_sentence()
        || strip_exists(f).is_atomic()
        || matches!(f, Formula::And(g, phi) if is_exists_guard(g, phi));
    let r = if ok {
        Ok(())
    } else {
        fail(&[], "neither a sentence nor of the form alpha & phi with alpha an existential guard for phi")
    };
    FragmentReport::from_result(Fragment::SelfGuarded, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, vars, Signature};

    fn sig() -> Signature {
        Signature::new([
            RelSym::new("R", 2),
            RelSym::new("S", 2),
            RelSym::new("P", 1),
            RelSym::new("Q", 1),
            RelSym::new("T", 3),
        ])
        .unwrap()
    }

    fn f(text: &str) -> Formula {
        parse(text, &sig()).unwrap()
    }

    #[test]
    fn guards() {
        assert!(is_guard(&f("R(x,y)"), &f("P(x)")));
        assert!(!is_guard(&f("P(x)"), &f("S(x,y)")));
        assert!(is_guard(&f("x = y"), &f("R(x,y)")));
        assert!(!is_guard(&f("E z. R(x,z)"), &f("P(x)")));
    }

    #[test]
    fn exists_guards() {
        assert!(is_exists_guard(&f("E z. R(x,z)"), &f("P(x)")));
        assert!(is_exists_guard(&f("R(x,y)"), &f("S(x,y)")));
        assert!(!is_exists_guard(&f("E z. R(z,z)"), &f("P(x)")));
        assert!(!is_exists_guard(&f("E z. P(z) & R(x,z)"), &f("P(x)")));
    }

    #[test]
    fn gfo_examples() {
        assert!(classify_gfo(&f("E x y. R(x,y) & !S(x,y)")).member);
        assert!(classify_gfo(&f("P(x)")).member);

        let bad = classify_gfo(&f("E x y. x = x & y = y & !S(x,y)"));
        assert!(!bad.member);
        let v = bad.violation.unwrap();
        assert_eq!(v.path, Vec::<usize>::new());
        assert!(v.reason.contains("x = x does not guard"), "{}", v.reason);

        assert!(classify_gfo(&f("E x. R(x,y)")).member, "lone guard reads as alpha & true");
        assert!(!classify_gfo(&f("P(x) | P(y)")).member);
    }

    #[test]
    fn gfo_violation_inside_guarded_body() {
        let r = classify_gfo(&f("!E x y. R(x,y) & (P(x) | P(y))"));
        assert_eq!(r.violation.unwrap().path, vec![0, 0, 1]);
    }

    #[test]
    fn gnfo_examples() {
        assert!(classify_gnfo(&f("R(x,y) & !S(x,y)")).member);
        assert!(classify_gnfo(&f("E x. P(x)")).member);
        let bad = classify_gnfo(&f("E x. E y. x = x & y = y & !S(x,y)"));
        assert!(!bad.member);
        assert!(!classify_gnfo(&f("E x y. x = x & y = y & !S(x,y)")).member);
        assert!(!classify_gnfo(&f("!P(x)")).member);
        assert!(classify_gnfo(&f("E x y. R(x,y) & !S(x,y)")).member);
        assert!(classify_gnfo(&f("P(x) | E y. R(x,y) & !(E z. S(y,z))")).member);
    }

    #[test]
    fn gnfo_unguarded_negation_points_at_negation() {
        let r = classify_gnfo(&f("P(x) & !S(x,y)"));
        let v = r.violation.unwrap();
        assert_eq!(v.path, vec![1]);
    }

    #[test]
    fn ucq_examples() {
        assert!(classify_gnfo_ucq(&f("x = y")).member);
        assert!(!classify_gnfo_ucq(&f("!P(x)")).member);

        let g = f("E x. R(x,y) & (P(x) & !Q(x))");
        assert!(classify_gnfo_ucq(&g).member);
        let d = decompose_gnfo_ucq(&g).unwrap();
        assert_eq!(d.plugs.len(), 1);
        assert_eq!(d.plugs[0].formula, f("P(x) & !Q(x)"));
        assert_eq!(d.shell, Formula::exists(
            vars(&["x"]),
            Formula::and(f("R(x,y)"), Formula::atom(&RelSym::new("U0", 1), vars(&["x"]))),
        ));
        assert_eq!(d.reassemble(), g);
    }

    #[test]
    fn ucq_rejects_universal() {
        let r = classify_gnfo_ucq(&f("R(x,y) & A z. P(z)"));
        assert_eq!(r.violation.unwrap().path, vec![1]);
    }

    #[test]
    fn fo2_examples() {
        assert!(classify_fo2(&f("E x y. R(x,y) & E x. R(y,x)")).member);
        let three = classify_fo2(&f("E x y z. R(x,y) & R(y,z)"));
        assert!(!three.member);
        assert!(!classify_fo2(&f("T(x,y,x)")).member);
        assert_eq!(classify_fo2(&f("P(x) & T(x,y,x)")).violation.unwrap().path, vec![1]);
        assert!(classify_fo2(&f("A u. E w. R(u,w) -> P(w)")).member, "any two names");
    }

    #[test]
    fn fo2_violation_is_minimal() {
        let r = classify_fo2(&f("P(x) & E y. (R(x,y) & E z. R(y,z))"));
        // The smallest subformula with three names is the conjunction under E y.
        assert_eq!(r.violation.unwrap().path, vec![1, 0]);
    }

    #[test]
    fn pe_examples() {
        assert!(classify_pe(&f("E x. R(x,y) & P(x)")).member);
        assert!(!classify_pe(&f("!P(x)")).member);
        assert!(classify_pe(&f("x = y")).member);
        assert!(!classify_pe(&f("true")).member);
    }

    #[test]
    fn self_guarded_examples() {
        assert!(is_self_guarded(&f("E x. P(x)")).member);
        assert!(is_self_guarded(&f("x = x & (P(x) | !P(x))")).member);
        assert!(is_self_guarded(&f("S(x,y)")).member);
        assert!(!is_self_guarded(&f("E z. R(x,z) & P(x)")).member, "prefix binds the whole conjunction");
        assert!(is_self_guarded(&f("(E z. R(x,z)) & P(x)")).member);
        assert!(!is_self_guarded(&f("P(x) | P(y)")).member);
        assert!(!is_self_guarded(&f("P(x) & S(x,y)")).member);
    }

    #[test]
    fn report_json_shape() {
        let r = classify_gfo(&f("P(x) | P(y)"));
        assert_eq!(
            r.to_json(),
            r#"{"fragment":"GFO","member":false,"violation":{"path":[],"reason":"disjunction is not a GFO connective"}}"#
        );
        let ok = classify_pe(&f("P(x)"));
        assert_eq!(ok.to_json(), r#"{"fragment":"PE","member":true,"violation":null}"#);
    }
}
