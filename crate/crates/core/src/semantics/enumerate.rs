use std::collections::BTreeSet;

use super::{tuple_of, Structure};
use crate::syntax::{RelSym, Signature};

/// Number of bits needed to describe one structure: the sum of `size^arity`
/// over the signature.
pub(crate) fn structure_bits(sig: &Signature, size: usize) -> Option<u32> {
    let mut bits: u32 = 0;
    for r in sig.relations() {
        let n = size.checked_pow(r.arity as u32)?;
        bits = bits.checked_add(u32::try_from(n).ok()?)?;
    }
    Some(bits)
}

/// `prod 2^(size^arity)` over the signature, or `None` if it exceeds `u128`.
pub fn structure_count(sig: &Signature, size: usize) -> Option<u128> {
    let bits = structure_bits(sig, size)?;
    1u128.checked_shl(bits).filter(|_| bits < 128)
}

/// Decodes a structure index. Symbols are ordered by name with the last one
/// least significant; inside a symbol, bit `t` belongs to the `t`-th tuple in
/// lexicographic order.
pub(crate) fn structure_from_index(sig: &Signature, size: usize, mut index: u128) -> Structure {
    let rels: Vec<RelSym> = sig.relations().collect();
    let mut m = Structure::empty(sig, size).expect("size is positive");
    for r in rels.iter().rev() {
        let n = size.pow(r.arity as u32);
        let mut set = BTreeSet::new();
        for t in 0..n {
            if index & 1 == 1 {
                set.insert(tuple_of(t, r.arity, size));
            }
            index >>= 1;
        }
        m.interp.insert(r.name.clone(), set);
    }
    m
}

/// Every structure over `sig` with the given domain size, in index order.
///
/// # Panics
/// If the number of structures does not fit in a `u128`.
pub fn enumerate_structures(sig: &Signature, size: usize) -> StructureIter {
    assert!(size > 0, "domain size must be positive");
    let total = structure_count(sig, size).expect("too many structures to enumerate");
    StructureIter { sig: sig.clone(), size, next: 0, total }
}

pub struct StructureIter {
    sig: Signature,
    size: usize,
    next: u128,
    total: u128,
}

impl Iterator for StructureIter {
    type Item = Structure;

    fn next(&mut self) -> Option<Structure> {
        if self.next >= self.total {
            return None;
        }
        let m = structure_from_index(&self.sig, self.size, self.next);
        self.next += 1;
        Some(m)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = usize::try_from(self.total - self.next).ok();
        (left.unwrap_or(usize::MAX), left)
    }
}
