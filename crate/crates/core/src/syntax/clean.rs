use std::collections::{BTreeSet, HashMap};

use super::{Formula, Var};

/// A formula is clean when no free variable also occurs bound and no two
/// quantifiers bind the same name.
pub fn is_clean(f: &Formula) -> bool {
    let free = f.free_vars();
    let mut seen = BTreeSet::new();
    f.binders().into_iter().all(|v| !free.contains(&v) && seen.insert(v))
}

/// Alpha-renames bound variables until the formula is clean.
///
/// Binders are visited left to right. A binder keeps its name unless that name
/// is free in `f` or already used by an earlier binder, in which case it gets
/// the next unused name from `v0, v1, ...`. Clean input comes back unchanged.
pub fn cleanse(f: &Formula) -> Formula {
    let free = f.free_vars();
    let mut renamer = Renamer {
        avoid: f.all_vars(),
        taken: free,
        next: 0,
    };
    renamer.go(f, &HashMap::new())
}

struct Renamer {
    /// Names that a freshly minted binder must not collide with.
    avoid: BTreeSet<Var>,
    /// Names already claimed by free variables or earlier binders.
    taken: BTreeSet<Var>,
    next: usize,
}

impl Renamer {
    fn mint(&mut self) -> Var {
        loop {
            let v = Var::new(format!("v{}", self.next));
            self.next += 1;
            if !self.avoid.contains(&v) && !self.taken.contains(&v) {
                return v;
            }
        }
    }

    fn go(&mut self, f: &Formula, env: &HashMap<Var, Var>) -> Formula {
        let look = |v: &Var| env.get(v).cloned().unwrap_or_else(|| v.clone());
        match f {
            Formula::Top => Formula::Top,
            Formula::Atom(r, args) => Formula::Atom(r.clone(), args.iter().map(look).collect()),
            Formula::Eq(a, b) => Formula::Eq(look(a), look(b)),
            Formula::Not(b) => Formula::not(self.go(b, env)),
            Formula::And(l, r) => {
                let l = self.go(l, env);
                Formula::and(l, self.go(r, env))
            }
            Formula::Or(l, r) => {
                let l = self.go(l, env);
                Formula::or(l, self.go(r, env))
            }
            Formula::Implies(l, r) => {
                let l = self.go(l, env);
                Formula::implies(l, self.go(r, env))
            }
            Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
                let mut inner = env.clone();
                let mut renamed = Vec::with_capacity(vs.len());
                for v in vs {
                    let n = if self.taken.contains(v) { self.mint() } else { v.clone() };
                    self.taken.insert(n.clone());
                    inner.insert(v.clone(), n.clone());
                    renamed.push(n);
                }
                let body = Box::new(self.go(b, &inner));
                if matches!(f, Formula::Exists(..)) {
                    Formula::Exists(renamed, body)
                } else {
                    Formula::Forall(renamed, body)
                }
            }
            Formula::SoExists(r, b) => Formula::so_exists(r.clone(), self.go(b, env)),
            Formula::SoForall(r, b) => Formula::so_forall(r.clone(), self.go(b, env)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{vars, RelSym};

    fn s(v: &str) -> Formula {
        Formula::atom(&RelSym::new("S", 1), vars(&[v]))
    }

    #[test]
    fn clean_examples() {
        let r = RelSym::new("R", 2);
        assert!(is_clean(&Formula::exists(vars(&["x"]), Formula::atom(&r, vars(&["x", "y"])))));

        let free_and_bound = Formula::and(
            Formula::eq(Var::new("x"), Var::new("y")),
            Formula::exists(vars(&["y"]), s("y")),
        );
        assert!(!is_clean(&free_and_bound));

        let p = RelSym::new("P", 1);
        let twice = Formula::and(
            Formula::exists(vars(&["x"]), Formula::atom(&p, vars(&["x"]))),
            Formula::exists(vars(&["x"]), s("x")),
        );
        assert!(!is_clean(&twice));
    }

    #[test]
    fn cleanse_renames_to_v0() {
        let f = Formula::and(
            Formula::eq(Var::new("x"), Var::new("y")),
            Formula::exists(vars(&["y"]), s("y")),
        );
        let expected = Formula::and(
            Formula::eq(Var::new("x"), Var::new("y")),
            Formula::exists(vars(&["v0"]), s("v0")),
        );
        assert_eq!(cleanse(&f), expected);
    }

    #[test]
    fn cleanse_leaves_clean_formulas_alone() {
        let r = RelSym::new("R", 2);
        let f = Formula::exists(
            vars(&["x", "z"]),
            Formula::and(Formula::atom(&r, vars(&["x", "y"])), s("z")),
        );
        assert_eq!(cleanse(&f), f);
    }

    #[test]
    fn cleanse_skips_names_already_in_use() {
        // v0 is free, so the renamed binder must become v1.
        let f = Formula::and(
            Formula::and(s("v0"), s("x")),
            Formula::exists(vars(&["x"]), s("x")),
        );
        let out = cleanse(&f);
        assert!(is_clean(&out));
        assert_eq!(out.free_vars(), f.free_vars());
        assert_eq!(out.binders(), vars(&["v1"]));
    }

    #[test]
    fn cleanse_second_binder_of_same_name() {
        let f = Formula::and(
            Formula::exists(vars(&["x"]), s("x")),
            Formula::forall(vars(&["x"]), Formula::exists(vars(&["x"]), s("x"))),
        );
        let out = cleanse(&f);
        assert!(is_clean(&out));
        assert_eq!(out.binders(), vars(&["x", "v0", "v1"]));
    }
}
