//! Hashable string keys for the propagation inner loops. Strings on at most
//! 64 qubits pack into two machine words; wider ones use `PauliString`.

use std::hash::Hash;

use super::{PauliString, Phase};

pub(crate) trait StringKey: Clone + Eq + Hash {
    fn pack(p: &PauliString) -> Self;
    fn unpack(&self, n: usize) -> PauliString;
    fn commutes(&self, other: &Self) -> bool;
    fn weight(&self) -> usize;
    /// `−i·G·P` for anticommuting `G = self`, `P`, as `(sign, string)`.
    fn partner(&self, p: &Self) -> (f64, Self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct Packed {
    x: u64,
    z: u64,
}

impl Packed {
    #[inline]
    pub(crate) fn new(x: u64, z: u64) -> Self {
        Packed { x, z }
    }

    #[inline]
    pub(crate) fn masks(self) -> (u64, u64) {
        (self.x, self.z)
    }
}

impl StringKey for Packed {
    #[inline]
    fn pack(p: &PauliString) -> Self {
        let (x, z) = p.low_masks();
        Packed { x, z }
    }

    fn unpack(&self, n: usize) -> PauliString {
        PauliString::from_words(n, &[self.x], &[self.z]).expect("packed key fits its width")
    }

    #[inline]
    fn commutes(&self, o: &Self) -> bool {
        ((self.x & o.z) ^ (self.z & o.x)).count_ones() & 1 == 0
    }

    #[inline]
    fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    #[inline]
    fn partner(&self, p: &Self) -> (f64, Self) {
        let (x1, z1, x2, z2) = (self.x, self.z, p.x, p.z);
        let (px1, py1, pz1) = (x1 & !z1, x1 & z1, !x1 & z1);
        let (px2, py2, pz2) = (x2 & !z2, x2 & z2, !x2 & z2);
        let plus = ((px1 & py2) | (py1 & pz2) | (pz1 & px2)).count_ones() as i64;
        let minus = ((py1 & px2) | (pz1 & py2) | (px1 & pz2)).count_ones() as i64;
        let sign = match (plus - minus).rem_euclid(4) {
            1 => 1.0,
            3 => -1.0,
            _ => unreachable!("commuting pair reached the split rule"),
        };
        (sign, Packed { x: x1 ^ x2, z: z1 ^ z2 })
    }
}

impl StringKey for PauliString {
    fn pack(p: &PauliString) -> Self {
        p.clone()
    }

    fn unpack(&self, _n: usize) -> PauliString {
        self.clone()
    }

    #[inline]
    fn commutes(&self, other: &Self) -> bool {
        self.commutes_unchecked(other)
    }

    #[inline]
    fn weight(&self) -> usize {
        PauliString::weight(self)
    }

    #[inline]
    fn partner(&self, p: &Self) -> (f64, Self) {
        let (phase, q) = self.multiply_unchecked(p);
        let sign = match phase {
            Phase::I => 1.0,
            Phase::MinusI => -1.0,
            _ => unreachable!("commuting pair reached the split rule"),
        };
        (sign, q)
    }
}
