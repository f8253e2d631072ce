//! Bounded entailment and equivalence checking.
//!
//! Formulas are compiled to a small tree over variable and relation slots and
//! evaluated on 64 structures at once: each relation tuple holds a `u64` whose
//! bit `l` says whether the tuple is in the relation in lane `l`. Only the
//! symbols occurring free in the checked formulas are enumerated; the others
//! cannot affect the outcome and are reported empty.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Serialize, Serializer};
use thiserror::Error;

use super::enumerate::structure_from_index;
use super::{Assignment, EvalError, Structure};
use crate::syntax::{Formula, RelSym, Signature, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("max size must be at least 1")]
    ZeroBound,
    #[error("structures of size {size} need {bits} bits, more than can be enumerated")]
    SpaceTooLarge { size: usize, bits: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    HoldsUpToBound,
    Counterexample,
}

/// Which entailment of an equivalence check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    /// The left formula holds and the right one does not.
    LeftToRight,
    /// The right formula holds and the left one does not.
    RightToLeft,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::LeftToRight => Direction::RightToLeft,
            Direction::RightToLeft => Direction::LeftToRight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub structure: Structure,
    pub assignment: Assignment,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntailmentVerdict {
    pub status: Status,
    pub bound: usize,
    pub witness: Option<Witness>,
}

impl EntailmentVerdict {
    pub fn holds(&self) -> bool {
        self.status == Status::HoldsUpToBound
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdict serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("verdict serializes")
    }
}

impl Serialize for Structure {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

/// 3 for first-order checks, 2 once a second-order quantifier of arity at
/// least 2 occurs.
pub fn default_max_size(formulas: &[&Formula]) -> usize {
    if formulas.iter().any(|f| f.max_so_arity().is_some_and(|a| a >= 2)) {
        2
    } else {
        3
    }
}

/// Searches structures of size `1..=max_size` (in enumeration order) and
/// assignments of the free variables for one satisfying `premise` but not
/// `conclusion`.
pub fn check_entailment(
    premise: &Formula,
    conclusion: &Formula,
    sig: &Signature,
    max_size: usize,
) -> Result<EntailmentVerdict, CheckError> {
    search(premise, conclusion, sig, max_size, false)
}

/// Checks both entailments, structure by structure, and reports the first
/// pair on which the formulas disagree.
pub fn check_equivalence(
    f: &Formula,
    g: &Formula,
    sig: &Signature,
    max_size: usize,
) -> Result<EntailmentVerdict, CheckError> {
    search(f, g, sig, max_size, true)
}

/// `table[s][a]` is the truth value of `f` in the `s`-th structure of
/// [`super::enumerate_structures`] under the `a`-th assignment of its sorted
/// free variables (see [`Assignment::all`]).
pub fn truth_table(f: &Formula, sig: &Signature, size: usize) -> Result<Vec<Vec<bool>>, CheckError> {
    validate(&[f], sig)?;
    let free: Vec<Var> = f.free_vars().into_iter().collect();
    let prog = Program::compile(&[f], sig, &free);
    let mut rows = Vec::new();
    prog.scan(size, |_, values| {
        for l in 0..values.len_lanes {
            rows.push(values.cols[0].iter().map(|v| v >> l & 1 == 1).collect());
        }
        false
    })?;
    Ok(rows)
}

fn validate(formulas: &[&Formula], sig: &Signature) -> Result<(), EvalError> {
    for f in formulas {
        for r in f.free_relations() {
            match sig.arity(&r.name) {
                None => return Err(EvalError::UninterpretedSymbol(r.name)),
                Some(a) if a != r.arity => {
                    return Err(EvalError::ArityMismatch { name: r.name, interpreted: a, used: r.arity })
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

fn search(
    left: &Formula,
    right: &Formula,
    sig: &Signature,
    max_size: usize,
    both_ways: bool,
) -> Result<EntailmentVerdict, CheckError> {
    if max_size == 0 {
        return Err(CheckError::ZeroBound);
    }
    validate(&[left, right], sig)?;
    let relevant: BTreeSet<String> = left
        .free_relations()
        .into_iter()
        .chain(right.free_relations())
        .map(|r| r.name)
        .collect();
    let indexed = sig.restrict(relevant.iter().map(String::as_str));
    let free: Vec<Var> = left.free_vars().union(&right.free_vars()).cloned().collect();
    let prog = Program::compile(&[left, right], &indexed, &free);

    for size in 1..=max_size {
        let mut found = None;
        prog.scan(size, |block, values| {
            let (l, r) = (&values.cols[0], &values.cols[1]);
            let fail = |a: usize| -> (u64, u64) {
                let fwd = l[a] & !r[a];
                let bwd = if both_ways { r[a] & !l[a] } else { 0 };
                (fwd & values.valid, bwd & values.valid)
            };
            let any = (0..l.len()).fold(0u64, |acc, a| {
                let (f, b) = fail(a);
                acc | f | b
            });
            if any == 0 {
                return false;
            }
            let lane = any.trailing_zeros() as usize;
            let a = (0..l.len())
                .find(|&a| {
                    let (f, b) = fail(a);
                    (f | b) >> lane & 1 == 1
                })
                .expect("some assignment fails in this lane");
            let (f, _) = fail(a);
            let direction = if f >> lane & 1 == 1 { Direction::LeftToRight } else { Direction::RightToLeft };
            found = Some(((block << 6) | lane as u128, a, direction));
            true
        })?;
        if let Some((index, a, direction)) = found {
            let small = structure_from_index(&indexed, size, index);
            let mut structure = Structure::empty(sig, size).expect("size is positive");
            for r in indexed.relations() {
                structure.interp.insert(r.name.clone(), small.interp[&r.name].clone());
            }
            let assignment = Assignment::all(&free, size).swap_remove(a);
            return Ok(EntailmentVerdict {
                status: Status::Counterexample,
                bound: max_size,
                witness: Some(Witness {
                    structure,
                    assignment,
                    direction: both_ways.then_some(direction),
                }),
            });
        }
    }
    Ok(EntailmentVerdict { status: Status::HoldsUpToBound, bound: max_size, witness: None })
}

const LANE_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

#[derive(Debug)]
enum Node {
    Top,
    Atom(usize, Vec<usize>),
    Eq(usize, usize),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Exists(Vec<usize>, Box<Node>),
    Forall(Vec<usize>, Box<Node>),
    SoExists(usize, Box<Node>),
    SoForall(usize, Box<Node>),
}

/// Compiled formulas sharing one slot layout.
struct Program {
    roots: Vec<Node>,
    /// Arity of every relation slot. The first `indexed.len()` slots are the
    /// enumerated symbols in signature order; the rest are second-order bound.
    arities: Vec<usize>,
    indexed: usize,
    var_count: usize,
    /// Slots of the free variables, first most significant.
    free: Vec<usize>,
}

/// Values of every root under every free-variable assignment for one block.
struct BlockValues {
    cols: Vec<Vec<u64>>,
    valid: u64,
    len_lanes: usize,
}

struct Compiler {
    vars: BTreeMap<Var, usize>,
    free_rels: BTreeMap<String, usize>,
    scope: Vec<(String, usize)>,
    arities: Vec<usize>,
}

impl Compiler {
    fn var(&mut self, v: &Var) -> usize {
        let next = self.vars.len();
        *self.vars.entry(v.clone()).or_insert(next)
    }

    fn rel(&self, r: &RelSym) -> usize {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| *n == r.name)
            .map(|(_, s)| *s)
            .or_else(|| self.free_rels.get(&r.name).copied())
            .expect("relations are validated before compiling")
    }

    fn node(&mut self, f: &Formula) -> Node {
        let bx = |c: &mut Self, g: &Formula| Box::new(c.node(g));
        match f {
            Formula::Top => Node::Top,
            Formula::Atom(r, args) => {
                let slot = self.rel(r);
                Node::Atom(slot, args.iter().map(|a| self.var(a)).collect())
            }
            Formula::Eq(a, b) => Node::Eq(self.var(a), self.var(b)),
            Formula::Not(b) => Node::Not(bx(self, b)),
            Formula::And(l, r) => Node::And(bx(self, l), bx(self, r)),
            Formula::Or(l, r) => Node::Or(bx(self, l), bx(self, r)),
            Formula::Implies(l, r) => Node::Implies(bx(self, l), bx(self, r)),
            Formula::Exists(vs, b) => Node::Exists(vs.iter().map(|v| self.var(v)).collect(), bx(self, b)),
            Formula::Forall(vs, b) => Node::Forall(vs.iter().map(|v| self.var(v)).collect(), bx(self, b)),
            Formula::SoExists(r, b) | Formula::SoForall(r, b) => {
                let slot = self.arities.len();
                self.arities.push(r.arity);
                self.scope.push((r.name.clone(), slot));
                let body = bx(self, b);
                self.scope.pop();
                if matches!(f, Formula::SoExists(..)) {
                    Node::SoExists(slot, body)
                } else {
                    Node::SoForall(slot, body)
                }
            }
        }
    }
}

impl Program {
    fn compile(formulas: &[&Formula], indexed: &Signature, free: &[Var]) -> Program {
        let mut c = Compiler {
            vars: BTreeMap::new(),
            free_rels: BTreeMap::new(),
            scope: Vec::new(),
            arities: Vec::new(),
        };
        for r in indexed.relations() {
            c.free_rels.insert(r.name, c.arities.len());
            c.arities.push(r.arity);
        }
        let free_slots = free.iter().map(|v| c.var(v)).collect();
        let roots = formulas.iter().map(|f| c.node(f)).collect();
        Program {
            roots,
            indexed: indexed.len(),
            arities: c.arities,
            var_count: c.vars.len(),
            free: free_slots,
        }
    }

    /// Evaluates every root on all structures of `size`, 64 at a time, and
    /// hands each block to `visit` until it returns true.
    fn scan(
        &self,
        size: usize,
        mut visit: impl FnMut(u128, &BlockValues) -> bool,
    ) -> Result<(), CheckError> {
        let mut total_bits: u64 = 0;
        let mut offsets = vec![0u64; self.indexed];
        for slot in (0..self.indexed).rev() {
            offsets[slot] = total_bits;
            total_bits += (size as u64).saturating_pow(self.arities[slot] as u32);
        }
        for &a in &self.arities[self.indexed..] {
            let n = (size as u64).saturating_pow(a as u32);
            if n > 30 {
                return Err(CheckError::SpaceTooLarge { size, bits: n });
            }
        }
        if total_bits >= 64 {
            return Err(CheckError::SpaceTooLarge { size, bits: total_bits });
        }
        let (blocks, valid, lanes) = if total_bits < 6 {
            let n = 1usize << total_bits;
            (1u128, if n == 64 { !0 } else { (1u64 << n) - 1 }, n)
        } else {
            (1u128 << (total_bits - 6), !0u64, 64)
        };

        let mut m = Machine {
            size,
            rels: self.arities.iter().map(|&a| vec![0u64; size.pow(a as u32)]).collect(),
            env: vec![0; self.var_count],
        };
        let assignments = size.pow(self.free.len() as u32);
        let mut values = BlockValues {
            cols: vec![vec![0; assignments]; self.roots.len()],
            valid,
            len_lanes: lanes,
        };
        for block in 0..blocks {
            for (rel, &offset) in m.rels.iter_mut().zip(&offsets).take(self.indexed) {
                for (t, mask) in rel.iter_mut().enumerate() {
                    let p = offset + t as u64;
                    *mask = if p < 6 {
                        LANE_PATTERNS[p as usize]
                    } else if block >> (p - 6) & 1 == 1 {
                        !0
                    } else {
                        0
                    };
                }
            }
            for a in 0..assignments {
                let mut rest = a;
                for &slot in self.free.iter().rev() {
                    m.env[slot] = rest % size;
                    rest /= size;
                }
                for (root, col) in self.roots.iter().zip(values.cols.iter_mut()) {
                    col[a] = m.eval(root);
                }
            }
            if visit(block, &values) {
                break;
            }
        }
        Ok(())
    }
}

struct Machine {
    size: usize,
    rels: Vec<Vec<u64>>,
    env: Vec<usize>,
}

impl Machine {
    fn eval(&mut self, n: &Node) -> u64 {
        match n {
            Node::Top => !0,
            Node::Atom(slot, args) => {
                let idx = args.iter().fold(0, |i, &a| i * self.size + self.env[a]);
                self.rels[*slot][idx]
            }
            Node::Eq(a, b) => {
                if self.env[*a] == self.env[*b] {
                    !0
                } else {
                    0
                }
            }
            Node::Not(b) => !self.eval(b),
            Node::And(l, r) => {
                let l = self.eval(l);
                if l == 0 {
                    0
                } else {
                    l & self.eval(r)
                }
            }
            Node::Or(l, r) => {
                let l = self.eval(l);
                if l == !0 {
                    !0
                } else {
                    l | self.eval(r)
                }
            }
            Node::Implies(l, r) => {
                let l = self.eval(l);
                if l == 0 {
                    !0
                } else {
                    !l | self.eval(r)
                }
            }
            Node::Exists(vs, b) => self.first_order(vs, b, true),
            Node::Forall(vs, b) => self.first_order(vs, b, false),
            Node::SoExists(slot, b) => self.second_order(*slot, b, true),
            Node::SoForall(slot, b) => self.second_order(*slot, b, false),
        }
    }

    fn first_order(&mut self, vs: &[usize], body: &Node, exists: bool) -> u64 {
        let saved: Vec<usize> = vs.iter().map(|&v| self.env[v]).collect();
        for &v in vs {
            self.env[v] = 0;
        }
        let mut acc = if exists { 0 } else { !0 };
        'outer: loop {
            let v = self.eval(body);
            if exists {
                acc |= v;
                if acc == !0 {
                    break;
                }
            } else {
                acc &= v;
                if acc == 0 {
                    break;
                }
            }
            for &slot in vs.iter().rev() {
                self.env[slot] += 1;
                if self.env[slot] < self.size {
                    continue 'outer;
                }
                self.env[slot] = 0;
            }
            break;
        }
        for (&v, old) in vs.iter().zip(saved) {
            self.env[v] = old;
        }
        acc
    }

    fn second_order(&mut self, slot: usize, body: &Node, exists: bool) -> u64 {
        let n = self.rels[slot].len();
        let saved = std::mem::take(&mut self.rels[slot]);
        let mut current = vec![0u64; n];
        let mut acc = if exists { 0 } else { !0 };
        for subset in 0u64..(1u64 << n) {
            for (t, mask) in current.iter_mut().enumerate() {
                *mask = if subset >> t & 1 == 1 { !0 } else { 0 };
            }
            self.rels[slot] = std::mem::take(&mut current);
            let v = self.eval(body);
            current = std::mem::take(&mut self.rels[slot]);
            if exists {
                acc |= v;
                if acc == !0 {
                    break;
                }
            } else {
                acc &= v;
                if acc == 0 {
                    break;
                }
            }
        }
        self.rels[slot] = saved;
        acc
    }
}
