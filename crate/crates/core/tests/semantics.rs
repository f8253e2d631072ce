use glk::semantics::{
    all_tuples, check_entailment, check_equivalence, enumerate_structures, eval, structure_count, Assignment,
    Direction, EntailmentVerdict, Status, Structure,
};
use glk::syntax::{parse, Formula, RelSym, Signature, Var};
use glk::verify::{fo_formula, FoOptions, GenConfig};

fn sig() -> Signature {
    Signature::new([RelSym::new("R", 2), RelSym::new("S", 1)]).unwrap()
}

fn sample(cfg: &GenConfig, case: u64, second_order: bool) -> Formula {
    fo_formula(&mut cfg.case_rng(case), cfg, FoOptions { second_order, top: true })
}

/// Straightforward search in enumeration order over the symbols the formulas use.
fn naive(left: &Formula, right: &Formula, max_size: usize, both_ways: bool) -> Option<(Structure, Assignment, Direction)> {
    let names: Vec<String> = left.free_relations().into_iter().chain(right.free_relations()).map(|r| r.name).collect();
    let s = sig().restrict(names.iter().map(String::as_str));
    let free: Vec<Var> = left.free_vars().union(&right.free_vars()).cloned().collect();
    for size in 1..=max_size {
        for m in enumerate_structures(&s, size) {
            for a in Assignment::all(&free, size) {
                let (l, r) = (eval(&m, &a, left).unwrap(), eval(&m, &a, right).unwrap());
                if l && !r {
                    return Some((m, a, Direction::LeftToRight));
                }
                if both_ways && r && !l {
                    return Some((m, a, Direction::RightToLeft));
                }
            }
        }
    }
    None
}

fn same_witness(v: &EntailmentVerdict, expected: &Option<(Structure, Assignment, Direction)>, both_ways: bool) {
    match expected {
        None => assert_eq!(v.status, Status::HoldsUpToBound),
        Some((m, a, d)) => {
            let w = v.witness.as_ref().expect("counterexample carries a witness");
            assert_eq!(w.structure.size(), m.size());
            for r in m.signature().relations() {
                assert_eq!(w.structure.relation(&r.name), m.relation(&r.name), "{}", r.name);
            }
            for r in w.structure.signature().relations() {
                if !m.signature().contains(&r) {
                    assert!(w.structure.relation(&r.name).unwrap().is_empty());
                }
            }
            assert_eq!(&w.assignment, a);
            if both_ways {
                assert_eq!(w.direction, Some(*d));
            }
        }
    }
}

#[test]
fn checker_finds_the_least_counterexample() {
    let cfg = GenConfig { max_vars: 3, max_atoms: 3, ..GenConfig::with_seed(12) };
    let mut refuted = 0;
    for case in 0..200 {
        let left = sample(&cfg, 2 * case, case % 4 == 0);
        let right = sample(&cfg, 2 * case + 1, false);
        let v = check_entailment(&left, &right, &sig(), 2).unwrap();
        same_witness(&v, &naive(&left, &right, 2, false), false);
        let v = check_equivalence(&left, &right, &sig(), 2).unwrap();
        same_witness(&v, &naive(&left, &right, 2, true), true);
        refuted += usize::from(!v.holds());
    }
    assert!(refuted > 50);
}

#[test]
fn witnesses_falsify_the_entailment() {
    let cfg = GenConfig { max_vars: 3, ..GenConfig::with_seed(13) };
    for case in 0..100 {
        let (p, c) = (sample(&cfg, 2 * case, false), sample(&cfg, 2 * case + 1, false));
        let v = check_entailment(&p, &c, &sig(), 3).unwrap();
        assert_eq!(v.witness.is_some(), v.status == Status::Counterexample);
        if let Some(w) = &v.witness {
            assert!(eval(&w.structure, &w.assignment, &p).unwrap());
            assert!(!eval(&w.structure, &w.assignment, &c).unwrap());
        }
    }
}

#[test]
fn equivalence_is_symmetric() {
    let cfg = GenConfig { max_vars: 3, ..GenConfig::with_seed(14) };
    for case in 0..100 {
        let (f, g) = (sample(&cfg, 2 * case, false), sample(&cfg, 2 * case + 1, false));
        let a = check_equivalence(&f, &g, &sig(), 2).unwrap();
        let b = check_equivalence(&g, &f, &sig(), 2).unwrap();
        assert_eq!(a.status, b.status);
        if let (Some(wa), Some(wb)) = (&a.witness, &b.witness) {
            assert_eq!(wa.structure, wb.structure);
            assert_eq!(wa.assignment, wb.assignment);
            assert_eq!(wa.direction.map(Direction::flipped), wb.direction);
        }
    }
}

#[test]
fn irrelevant_variables_do_not_matter() {
    let cfg = GenConfig { max_vars: 4, ..GenConfig::with_seed(15) };
    let names = glk::verify::variable_names(4);
    for case in 0..100 {
        let f = sample(&cfg, case, true);
        let free = f.free_vars();
        for m in enumerate_structures(&sig(), 2).step_by(5) {
            for a in Assignment::all(&names, 2) {
                let mut b = a.clone();
                for v in names.iter().filter(|v| !free.contains(v)) {
                    b.set(v.clone(), 1 - a.get(v).unwrap());
                }
                assert_eq!(eval(&m, &a, &f).unwrap(), eval(&m, &b, &f).unwrap(), "{f}");
            }
        }
    }
}

#[test]
fn second_order_quantifiers_range_over_all_extensions() {
    let cfg = GenConfig { max_vars: 2, ..GenConfig::with_seed(16) };
    for case in 0..60 {
        let f = sample(&cfg, case, false);
        let free: Vec<Var> = f.free_vars().into_iter().collect();
        for rel in sig().relations() {
            let (ex, all) = (Formula::so_exists(rel.clone(), f.clone()), Formula::so_forall(rel.clone(), f.clone()));
            for size in 1..=2 {
                let tuples = all_tuples(size, rel.arity);
                for m in enumerate_structures(&sig(), size).step_by(3) {
                    for a in Assignment::all(&free, size) {
                        let values: Vec<bool> = (0u32..1 << tuples.len())
                            .map(|mask| {
                                let chosen = tuples.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1);
                                let m2 = m.expand(&rel, chosen.map(|(_, t)| t.clone())).unwrap();
                                eval(&m2, &a, &f).unwrap()
                            })
                            .collect();
                        assert_eq!(eval(&m, &a, &ex).unwrap(), values.iter().any(|&b| b), "{ex}");
                        assert_eq!(eval(&m, &a, &all).unwrap(), values.iter().all(|&b| b), "{all}");
                    }
                }
            }
        }
    }
}

#[test]
fn structure_counts() {
    let p = RelSym::new("P", 1);
    let r = RelSym::new("R", 2);
    let both = Signature::new([p.clone(), r.clone()]).unwrap();
    assert_eq!(enumerate_structures(&Signature::new([p]).unwrap(), 1).count(), 2);
    assert_eq!(enumerate_structures(&Signature::new([r]).unwrap(), 2).count(), 16);
    assert_eq!(enumerate_structures(&both, 2).count(), 64);
    assert_eq!(structure_count(&both, 2), Some(64));
    assert_eq!(structure_count(&both, 3), Some(1 << (3 + 9)));
}

#[test]
fn checking_examples() {
    let s = Signature::new([RelSym::new("P", 1), RelSym::new("R", 2)]).unwrap();
    let f = |t: &str| parse(t, &s).unwrap();
    let holds = |v: EntailmentVerdict| v.status == Status::HoldsUpToBound;
    assert!(holds(check_entailment(&f("P(x)"), &f("E y. P(y)"), &s, 3).unwrap()));
    assert!(holds(check_equivalence(&f("E x. E y. R(x,y)"), &f("E y. E x. R(x,y)"), &s, 3).unwrap()));
    let phi = f("E x. P(x) & A y. R(x,y) -> P(y)");
    assert!(holds(check_equivalence(&phi, &phi, &s, 3).unwrap()));

    let v = check_entailment(&f("E x. P(x)"), &f("A x. P(x)"), &s, 3).unwrap();
    let w = v.witness.unwrap();
    assert_eq!(w.structure.size(), 2);
    assert_eq!(w.structure.relation("P").unwrap().iter().cloned().collect::<Vec<_>>(), vec![vec![0]]);

    let v = check_equivalence(&f("P(x)"), &Formula::Top, &s, 3).unwrap();
    let w = v.witness.unwrap();
    assert_eq!((w.structure.size(), w.direction), (1, Some(Direction::RightToLeft)));
    assert!(w.structure.relation("P").unwrap().is_empty());
}

#[test]
fn vacuous_second_order_sentence() {
    let s = Signature::new([RelSym::new("R", 2)]).unwrap();
    let f = parse("E2 P. A y. P(y) -> y = x", &s).unwrap();
    for size in 1..=3 {
        for m in enumerate_structures(&s, size) {
            for a in Assignment::all(&[Var::new("x")], size) {
                assert!(eval(&m, &a, &f).unwrap());
            }
        }
    }
}
