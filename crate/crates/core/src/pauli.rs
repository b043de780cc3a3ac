//! Bitmask Pauli strings and real-weighted sparse Pauli sums.
//!
//! A site carries `(x, z)` bits: `I = (0,0)`, `X = (1,0)`, `Y = (1,1)`, `Z = (0,1)`.
//! Qubit 0 is the lowest bit of the first word and the leftmost character of
//! the textual form (`"ZIIX"` is `Z` on qubit 0 and `X` on qubit 3).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use smallvec::SmallVec;

use crate::error::{Error, Result};

pub(crate) mod key;

type Words = SmallVec<[u64; 2]>;

#[inline]
fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

/// Single-qubit Pauli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Global phase `i^k` from a Pauli product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    One,
    I,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_power(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Phase::One,
            1 => Phase::I,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn power(self) -> u8 {
        match self {
            Phase::One => 0,
            Phase::I => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn mul(self, other: Phase) -> Phase {
        Phase::from_power(self.power() as i64 + other.power() as i64)
    }

    /// `(re, im)` of the phase.
    pub fn value(self) -> (f64, f64) {
        match self {
            Phase::One => (1.0, 0.0),
            Phase::I => (0.0, 1.0),
            Phase::MinusOne => (-1.0, 0.0),
            Phase::MinusI => (0.0, -1.0),
        }
    }
}

/// An n-qubit Pauli string without phase.
///
/// Ordering is lexicographic on `(n, x words, z words)`, which is the canonical
/// key used for every deterministic serialization.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: Words,
    z: Words,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString { n, x: SmallVec::from_elem(0, w), z: SmallVec::from_elem(0, w) }
    }

    /// Builds a string with the given single-qubit Paulis at the given sites.
    pub fn from_sites(n: usize, sites: &[(usize, Pauli)]) -> Result<Self> {
        let mut p = PauliString::identity(n);
        for &(q, s) in sites {
            p.set(q, s)?;
        }
        Ok(p)
    }

    /// Builds from raw bit words. Bits at or above `n` must be clear.
    pub fn from_words(n: usize, x: &[u64], z: &[u64]) -> Result<Self> {
        let w = words_for(n);
        if x.len() != w || z.len() != w {
            return Err(Error::Invalid(format!("expected {w} words for {n} qubits")));
        }
        let p = PauliString { n, x: SmallVec::from_slice(x), z: SmallVec::from_slice(z) };
        if !n.is_multiple_of(64) {
            let mask = !((1u64 << (n % 64)) - 1);
            if (p.x[w - 1] | p.z[w - 1]) & mask != 0 {
                return Err(Error::Invalid("bits set beyond qubit count".into()));
            }
        }
        Ok(p)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn get(&self, q: usize) -> Pauli {
        debug_assert!(q < self.n);
        let (w, b) = (q / 64, q % 64);
        Pauli::from_bits((self.x[w] >> b) & 1 == 1, (self.z[w] >> b) & 1 == 1)
    }

    pub fn set(&mut self, q: usize, p: Pauli) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { qubit: q, n: self.n });
        }
        let (w, b) = (q / 64, q % 64);
        let (xb, zb) = p.bits();
        self.x[w] = (self.x[w] & !(1 << b)) | ((xb as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((zb as u64) << b);
        Ok(())
    }

    /// Number of sites carrying a non-identity Pauli.
    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(x, z)| (x | z).count_ones() as usize).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    /// Sites with a non-identity Pauli, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.weight());
        for (wi, (x, z)) in self.x.iter().zip(&self.z).enumerate() {
            let mut m = x | z;
            while m != 0 {
                let b = m.trailing_zeros() as usize;
                out.push(wi * 64 + b);
                m &= m - 1;
            }
        }
        out
    }

    /// Support as a bitmask, one word per 64 qubits.
    pub fn support_words(&self) -> Words {
        self.x.iter().zip(&self.z).map(|(x, z)| x | z).collect()
    }

    /// Width of the smallest contiguous qubit interval containing the support
    /// (0 for the identity).
    pub fn span(&self) -> usize {
        let s = self.support();
        match (s.first(), s.last()) {
            (Some(a), Some(b)) => b - a + 1,
            _ => 0,
        }
    }

    fn check_size(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::SizeMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    /// Sitewise product `self · other` with its accumulated phase.
    pub fn multiply(&self, other: &PauliString) -> Result<(Phase, PauliString)> {
        self.check_size(other)?;
        Ok(self.multiply_unchecked(other))
    }

    pub(crate) fn multiply_unchecked(&self, other: &PauliString) -> (Phase, PauliString) {
        let mut plus = 0i64;
        let mut minus = 0i64;
        let mut x = Words::with_capacity(self.x.len());
        let mut z = Words::with_capacity(self.z.len());
        for i in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[i], self.z[i], other.x[i], other.z[i]);
            let (px1, py1, pz1) = (x1 & !z1, x1 & z1, !x1 & z1);
            let (px2, py2, pz2) = (x2 & !z2, x2 & z2, !x2 & z2);
            // XY = iZ, YZ = iX, ZX = iY and the reversed orders give -i.
            plus += ((px1 & py2) | (py1 & pz2) | (pz1 & px2)).count_ones() as i64;
            minus += ((py1 & px2) | (pz1 & py2) | (px1 & pz2)).count_ones() as i64;
            x.push(x1 ^ x2);
            z.push(z1 ^ z2);
        }
        (Phase::from_power(plus - minus), PauliString { n: self.n, x, z })
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_size(other)?;
        Ok(self.commutes_unchecked(other))
    }

    #[inline]
    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        let mut parity = 0u32;
        for i in 0..self.x.len() {
            parity ^= ((self.x[i] & other.z[i]) ^ (self.z[i] & other.x[i])).count_ones();
        }
        parity & 1 == 0
    }

    pub fn to_text(&self) -> String {
        (0..self.n).map(|q| self.get(q).as_char()).collect()
    }

    /// The low word of x and z bits, for strings on at most 64 qubits.
    pub(crate) fn low_masks(&self) -> (u64, u64) {
        (self.x[0], self.z[0])
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({})", self.to_text())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::ParsePauli { text: s.into(), reason: "empty".into() });
        }
        let n = s.chars().count();
        let mut p = PauliString::identity(n);
        for (q, c) in s.chars().enumerate() {
            let site = Pauli::from_char(c)
                .ok_or_else(|| Error::ParsePauli { text: s.into(), reason: format!("unexpected character {c:?}") })?;
            p.set(q, site)?;
        }
        Ok(p)
    }
}

/// Sparse real combination of Pauli strings, ordered by canonical key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PauliSum {
    n: usize,
    terms: BTreeMap<PauliString, f64>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        PauliSum { n, terms: BTreeMap::new() }
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        let mut s = PauliSum::new(n);
        for (p, c) in terms {
            s.add_term(p, c)?;
        }
        Ok(s)
    }

    pub fn single(p: PauliString) -> Self {
        let mut s = PauliSum::new(p.num_qubits());
        s.terms.insert(p, 1.0);
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, p: &PauliString) -> Option<f64> {
        self.terms.get(p).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.terms.iter().map(|(p, &c)| (p, c))
    }

    /// Adds `coeff · p`, merging with an existing term. A term that cancels to
    /// exactly zero is removed.
    pub fn add_term(&mut self, p: PauliString, coeff: f64) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::SizeMismatch { left: self.n, right: p.num_qubits() });
        }
        match self.terms.entry(p) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = *e.get() + coeff;
                if v == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                if coeff != 0.0 {
                    e.insert(coeff);
                }
            }
        }
        Ok(())
    }

    pub fn add(&mut self, other: &PauliSum) -> Result<()> {
        for (p, c) in other.iter() {
            self.add_term(p.clone(), c)?;
        }
        Ok(())
    }

    /// Drops terms with `|coeff| < threshold`.
    pub fn prune(&mut self, threshold: f64) {
        self.terms.retain(|_, c| c.abs() >= threshold);
    }

    /// `Σ coeff²`, the normalized Hilbert–Schmidt purity of the operator.
    pub fn squared_norm(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for c in self.terms.values_mut() {
            *c *= factor;
        }
    }
}
