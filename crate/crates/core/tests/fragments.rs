//! Generator/decider agreement: formulas built by following a fragment's
//! grammar clauses are members of that fragment.

use glk::fragments::{classify_gnfo_ucq, classify_pe, decompose_gnfo_ucq, Fragment};
use glk::syntax::{parse, Formula, RelSym, Signature, Var};
use glk::verify::{fo_formula, pe_formula, variable_names, FoOptions, GenConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const SAMPLES: u64 = 500;

fn rels() -> Vec<RelSym> {
    vec![RelSym::new("R", 2), RelSym::new("S", 1), RelSym::new("T", 3)]
}

fn sig() -> Signature {
    Signature::new(rels()).unwrap()
}

fn rng(case: u64) -> ChaCha8Rng {
    GenConfig::with_seed(99).case_rng(case)
}

/// An atom (or equality) whose variables are exactly `cover`.
fn covering_atom(rng: &mut ChaCha8Rng, cover: &[Var]) -> Formula {
    assert!(!cover.is_empty() && cover.len() <= 3);
    if cover.len() <= 2 && rng.gen_bool(0.2) {
        return Formula::eq(cover[0].clone(), cover[cover.len() - 1].clone());
    }
    let candidates: Vec<RelSym> = rels().into_iter().filter(|r| r.arity >= cover.len()).collect();
    let r = candidates.choose(rng).unwrap().clone();
    let mut args = cover.to_vec();
    while args.len() < r.arity {
        args.push(cover.choose(rng).unwrap().clone());
    }
    args.shuffle(rng);
    Formula::atom(&r, args)
}

fn small_atom(rng: &mut ChaCha8Rng, scope: &[Var]) -> Formula {
    let width = rng.gen_range(1..=scope.len().min(3));
    let cover: Vec<Var> = scope.choose_multiple(rng, width).cloned().collect();
    covering_atom(rng, &cover)
}

fn gfo(rng: &mut ChaCha8Rng, scope: &[Var], depth: usize) -> Formula {
    if depth == 0 || scope.is_empty() {
        return if scope.is_empty() || rng.gen_bool(0.1) { Formula::Top } else { small_atom(rng, scope) };
    }
    match rng.gen_range(0..5) {
        0 => Formula::not(gfo(rng, scope, depth - 1)),
        1 => Formula::and(gfo(rng, scope, depth - 1), gfo(rng, scope, depth - 1)),
        2 | 3 => {
            // E xs. (alpha & phi) where alpha mentions every variable phi may use.
            let names = variable_names(8);
            let keep = rng.gen_range(0..=scope.len().min(2));
            let mut inner: Vec<Var> = scope.choose_multiple(rng, keep).cloned().collect();
            let fresh: Vec<Var> = names.iter().filter(|v| !inner.contains(v)).take(rng.gen_range(1..=(3 - keep).min(2))).cloned().collect();
            inner.extend(fresh.iter().cloned());
            let alpha = covering_atom(rng, &inner);
            let body = if rng.gen_bool(0.2) { alpha } else { Formula::and(alpha, gfo(rng, &inner, depth - 1)) };
            Formula::exists(fresh, body)
        }
        _ => small_atom(rng, scope),
    }
}

fn gnfo(rng: &mut ChaCha8Rng, scope: &[Var], depth: usize) -> Formula {
    if depth == 0 {
        return if rng.gen_bool(0.1) { Formula::Top } else { small_atom(rng, scope) };
    }
    match rng.gen_range(0..6) {
        0 => Formula::and(gnfo(rng, scope, depth - 1), gnfo(rng, scope, depth - 1)),
        1 => Formula::or(gnfo(rng, scope, depth - 1), gnfo(rng, scope, depth - 1)),
        2 => {
            let v = scope.choose(rng).unwrap().clone();
            Formula::exists(vec![v], gnfo(rng, scope, depth - 1))
        }
        3 | 4 => guarded_negation(rng, scope, depth),
        _ => small_atom(rng, scope),
    }
}

fn guarded_negation(rng: &mut ChaCha8Rng, scope: &[Var], depth: usize) -> Formula {
    let phi = gnfo(rng, scope, depth.saturating_sub(1));
    let free: Vec<Var> = phi.free_vars().into_iter().collect();
    let alpha = if free.is_empty() { small_atom(rng, scope) } else { covering_atom(rng, &free) };
    Formula::and(alpha, Formula::not(phi))
}

fn ucq(rng: &mut ChaCha8Rng, scope: &[Var], depth: usize) -> Formula {
    if depth == 0 {
        return if rng.gen_bool(0.5) { guarded_negation(rng, scope, 2) } else { small_atom(rng, scope) };
    }
    match rng.gen_range(0..4) {
        0 => Formula::and(ucq(rng, scope, depth - 1), ucq(rng, scope, depth - 1)),
        1 => Formula::or(ucq(rng, scope, depth - 1), ucq(rng, scope, depth - 1)),
        2 => {
            let v = scope.choose(rng).unwrap().clone();
            Formula::exists(vec![v], ucq(rng, scope, depth - 1))
        }
        _ => ucq(rng, scope, 0),
    }
}

fn self_guarded(rng: &mut ChaCha8Rng, case: u64) -> Formula {
    let cfg = GenConfig { max_vars: 3, signature: sig(), ..GenConfig::with_seed(case) };
    let phi = fo_formula(rng, &cfg, FoOptions { second_order: false, top: true });
    let free: Vec<Var> = phi.free_vars().into_iter().collect();
    if free.is_empty() || rng.gen_bool(0.3) {
        return Formula::forall(free, phi);
    }
    // An existential guard: an atom over free(phi) plus some extra names, closed off.
    let extra: Vec<Var> = variable_names(6).into_iter().filter(|v| !free.contains(v)).take(rng.gen_range(0..=1)).collect();
    let mut cover = free.clone();
    cover.extend(extra.iter().cloned());
    if cover.len() > 3 {
        return Formula::forall(free, phi);
    }
    Formula::and(Formula::exists(extra, covering_atom(rng, &cover)), phi)
}

fn assert_members(fragment: Fragment, mut make: impl FnMut(&mut ChaCha8Rng, u64) -> Formula) {
    for case in 0..SAMPLES {
        let f = make(&mut rng(case), case);
        let report = fragment.classify(&f);
        assert!(report.member, "case {case}: {f}: {report}");
    }
}

#[test]
fn gfo_generator_agrees() {
    assert_members(Fragment::Gfo, |r, _| {
        let scope = variable_names(2);
        gfo(r, &scope, 4)
    });
}

#[test]
fn gnfo_generator_agrees() {
    assert_members(Fragment::Gnfo, |r, _| gnfo(r, &variable_names(3), 4));
}

#[test]
fn gnfo_ucq_generator_agrees() {
    assert_members(Fragment::GnfoUcq, |r, _| ucq(r, &variable_names(3), 3));
}

#[test]
fn fo2_generator_agrees() {
    let cfg = GenConfig { max_vars: 2, max_atoms: 6, max_depth: 6, ..GenConfig::with_seed(5) };
    assert_members(Fragment::Fo2, |r, _| fo_formula(r, &cfg, FoOptions { second_order: false, top: true }));
}

#[test]
fn pe_generator_agrees() {
    let cfg = GenConfig { signature: sig(), ..GenConfig::with_seed(6) };
    assert_members(Fragment::Pe, |r, _| pe_formula(r, &cfg));
}

#[test]
fn self_guarded_generator_agrees() {
    assert_members(Fragment::SelfGuarded, self_guarded);
}

#[test]
fn pe_members_decompose_as_ucq() {
    let cfg = GenConfig { signature: sig(), ..GenConfig::with_seed(7) };
    for case in 0..SAMPLES {
        let f = pe_formula(&mut rng(case), &cfg);
        assert!(classify_pe(&f).member);
        assert!(classify_gnfo_ucq(&f).member, "{f}");
    }
}

#[test]
fn ucq_decomposition_reassembles() {
    for case in 0..SAMPLES {
        let f = ucq(&mut rng(case), &variable_names(3), 3);
        let d = decompose_gnfo_ucq(&f).unwrap_or_else(|| panic!("{f}"));
        let mut negations = 0;
        d.shell.visit(&mut |g| negations += usize::from(matches!(g, Formula::Not(_))));
        assert_eq!(negations, 0, "{}", d.shell);
        for plug in &d.plugs {
            assert!(Fragment::SelfGuarded.classify(&plug.formula).member, "{}", plug.formula);
        }
        assert_eq!(d.reassemble(), f);
    }
}

#[test]
fn violation_paths_resolve() {
    let cfg = GenConfig { max_vars: 3, max_atoms: 5, signature: sig(), ..GenConfig::with_seed(8) };
    let mut rejected = 0;
    for case in 0..SAMPLES {
        let f = fo_formula(&mut rng(case), &cfg, FoOptions { second_order: true, top: true });
        for fragment in Fragment::ALL {
            let report = fragment.classify(&f);
            assert_eq!(report.member, report.violation.is_none());
            if let Some(v) = &report.violation {
                rejected += 1;
                assert!(f.at(&v.path).is_some(), "{fragment} path {:?} in {f}", v.path);
                assert!(!v.reason.is_empty());
            }
        }
    }
    assert!(rejected > SAMPLES as usize);
}

#[test]
fn worked_examples() {
    let s = Signature::new([RelSym::new("R", 2), RelSym::new("S", 2), RelSym::new("P", 1)]).unwrap();
    let cases = [
        ("E x y. R(x,y) & E x. R(y,x)", Fragment::Fo2, true),
        ("E x y. R(x,y) & !S(x,y)", Fragment::Gfo, true),
        ("E x y. R(x,y) & !S(x,y)", Fragment::Gnfo, true),
        ("E x y. x = x & y = y & !S(x,y)", Fragment::Gfo, false),
        ("E x y. x = x & y = y & !S(x,y)", Fragment::Gnfo, false),
        ("x = x & !P(x)", Fragment::SelfGuarded, true),
        ("x = x & (E y. R(x,y) & !P(y))", Fragment::SelfGuarded, true),
        ("E x y z. R(x,y) & R(y,z)", Fragment::Fo2, false),
    ];
    for (text, fragment, member) in cases {
        let report = fragment.classify(&parse(text, &s).unwrap());
        assert_eq!(report.member, member, "{text}: {report}");
    }
}
