//! Heisenberg-picture Pauli propagation with weight and frequency truncation.
//!
//! Gates are applied in reverse circuit order, breadth first over the whole
//! term map so identical strings merge after every gate. A rotation with
//! generator `G` leaves commuting strings untouched and splits an
//! anticommuting `P` into `cosθ·P` and `sinθ·(−iGP)`, where `−iGP` is always a
//! real-signed Pauli string.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::map::Entry;
use indexmap::IndexMap;
use rustc_hash::FxBuildHasher;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::pauli::key::{Packed, StringKey};
use crate::pauli::{PauliString, PauliSum, Phase};
use crate::statevector::{StateVector, ORACLE_MAX_QUBITS};

/// How the frequency of a merged term is derived from its incoming paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyMerge {
    #[default]
    Min,
    Max,
}

impl FrequencyMerge {
    #[inline]
    pub(crate) fn combine(self, a: u32, b: u32) -> u32 {
        match self {
            FrequencyMerge::Min => a.min(b),
            FrequencyMerge::Max => a.max(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Largest Pauli weight kept; `None` is unbounded.
    pub max_weight: Option<usize>,
    /// Largest number of sine/cosine factors on a path; `None` is unbounded.
    pub max_frequency: Option<u32>,
    /// Terms with `|coeff| < min_coeff` are dropped after each gate.
    pub min_coeff: f64,
    #[serde(default)]
    pub frequency_merge: FrequencyMerge,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            max_weight: None,
            max_frequency: None,
            min_coeff: 1e-12,
            frequency_merge: FrequencyMerge::Min,
        }
    }
}

impl TruncationPolicy {
    /// No truncation of any kind.
    pub fn exact() -> Self {
        TruncationPolicy { min_coeff: 0.0, ..Default::default() }
    }

    pub fn with_max_weight(k: usize) -> Self {
        TruncationPolicy { max_weight: Some(k), min_coeff: 0.0, ..Default::default() }
    }

    #[inline]
    pub(crate) fn weight_ok(&self, w: usize) -> bool {
        self.max_weight.is_none_or(|k| w <= k)
    }

    #[inline]
    pub(crate) fn frequency_ok(&self, l: u32) -> bool {
        self.max_frequency.is_none_or(|m| l <= m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_coeff >= 0.0) {
            return Err(Error::Invalid(format!("min_coeff must be >= 0, got {}", self.min_coeff)));
        }
        Ok(())
    }
}

/// A propagated term: string, real coefficient, path frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub pauli: PauliString,
    pub coeff: f64,
    pub frequency: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TruncationStats {
    pub dropped_weight: usize,
    pub dropped_frequency: usize,
    pub pruned: usize,
}

pub(crate) type FxIndexMap<K, V> = IndexMap<K, V, FxBuildHasher>;

/// The truncated Heisenberg-evolved observable.
#[derive(Debug, Clone)]
pub struct PropagatedOperator {
    n: usize,
    terms: FxIndexMap<PauliString, (f64, u32)>,
    pub stats: TruncationStats,
}

/// `−i·G·P` for anticommuting `G`, `P`, returned as `(sign, string)`.
#[inline]
pub(crate) fn split_partner(generator: &PauliString, p: &PauliString) -> (f64, PauliString) {
    let (phase, q) = generator.multiply_unchecked(p);
    let sign = match phase {
        Phase::I => 1.0,
        Phase::MinusI => -1.0,
        // Anticommuting products always carry ±i.
        _ => unreachable!("commuting pair reached the split rule"),
    };
    (sign, q)
}

/// Applies a single rotation to one term, returning up to two terms.
pub fn apply_rotation_heisenberg(
    term: &Term,
    gate: &Gate,
    theta: f64,
    policy: &TruncationPolicy,
) -> SmallVec<[Term; 2]> {
    let mut out = SmallVec::new();
    if gate.generator.commutes_unchecked(&term.pauli) {
        out.push(term.clone());
        return out;
    }
    let freq = term.frequency + 1;
    if !policy.frequency_ok(freq) {
        return out;
    }
    let (sin, cos) = theta.sin_cos();
    out.push(Term { pauli: term.pauli.clone(), coeff: term.coeff * cos, frequency: freq });
    let (sign, q) = split_partner(&gate.generator, &term.pauli);
    if policy.weight_ok(q.weight()) {
        out.push(Term { pauli: q, coeff: sign * term.coeff * sin, frequency: freq });
    }
    out
}

impl PropagatedOperator {
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> Option<f64> {
        self.terms.get(p).map(|t| t.0)
    }

    pub fn frequency(&self, p: &PauliString) -> Option<u32> {
        self.terms.get(p).map(|t| t.1)
    }

    /// Terms in canonical key order.
    pub fn sorted_terms(&self) -> Vec<Term> {
        let mut v: Vec<Term> =
            self.terms.iter().map(|(p, &(coeff, frequency))| Term { pauli: p.clone(), coeff, frequency }).collect();
        v.sort_by(|a, b| a.pauli.cmp(&b.pauli));
        v
    }

    pub fn to_sum(&self) -> PauliSum {
        let mut s = PauliSum::new(self.n);
        for t in self.sorted_terms() {
            s.add_term(t.pauli, t.coeff).expect("sizes agree");
        }
        s
    }

    pub fn squared_norm(&self) -> f64 {
        self.terms.values().map(|(c, _)| c * c).sum()
    }

    /// `Σ_α c_α ⟨P_α⟩` for a dense state.
    pub fn expectation_from_state(&self, sv: &StateVector) -> Result<f64> {
        if sv.num_qubits() > ORACLE_MAX_QUBITS {
            return Err(Error::OversizeState {
                what: "expectation_from_state",
                n: sv.num_qubits(),
                max: ORACLE_MAX_QUBITS,
            });
        }
        let mut acc = 0.0;
        for t in self.sorted_terms() {
            acc += t.coeff * sv.expectation(&t.pauli)?;
        }
        Ok(acc)
    }

    /// `Σ_α c_α f(P_α)` for an arbitrary lookup; missing strings contribute 0.
    pub fn dot<F: FnMut(&PauliString) -> Option<f64>>(&self, mut lookup: F) -> f64 {
        self.terms.iter().map(|(p, &(c, _))| lookup(p).map_or(0.0, |v| c * v)).sum()
    }

    /// CSV with columns `pauli,coefficient,frequency`, physics convention.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pauli,coefficient,frequency\n");
        for t in self.sorted_terms() {
            let _ = writeln!(s, "{},{:e},{}", t.pauli, t.coeff, t.frequency);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Propagates `observable` backwards through `circuit` at `theta`.
pub fn propagate(
    circuit: &Circuit,
    observable: &PauliSum,
    theta: &[f64],
    policy: &TruncationPolicy,
) -> Result<PropagatedOperator> {
    policy.validate()?;
    if observable.num_qubits() != circuit.num_qubits() {
        return Err(Error::SizeMismatch { left: circuit.num_qubits(), right: observable.num_qubits() });
    }
    if theta.len() != circuit.num_params() {
        return Err(Error::ParamLength { expected: circuit.num_params(), got: theta.len() });
    }
    let mut stats = TruncationStats::default();
    let n = circuit.num_qubits();
    let terms = if dense_eligible(n, policy) {
        propagate_dense(circuit, observable, theta, policy, &mut stats)
    } else if n <= 64 {
        let keyed = propagate_keys::<Packed>(circuit, observable, theta, policy, &mut stats);
        keyed.into_iter().map(|(k, v)| (k.unpack(n), v)).collect()
    } else {
        propagate_keys::<PauliString>(circuit, observable, theta, policy, &mut stats).into_iter().collect()
    };
    Ok(PropagatedOperator { n, terms, stats })
}

/// Untruncated propagation on at most this many qubits runs on a dense
/// table over all `4^n` strings instead of a hash map.
pub const DENSE_MAX_QUBITS: usize = 10;

// Frequency marker for an absent string, or for a term removed by the
// frequency cap in the current gate. removed by the frequency cap in the current gate.
pub(crate) const DROPPED: u32 = u32::MAX;

/// Pairs of dense-table slots mixed by one rotation. String `(x, z)` on `n`
/// qubits lives at index `x | z << n`, so the partner of `p` under generator
/// `g` sits at `p ^ g`.
pub(crate) struct DenseSweep {
    /// `(i, j, sign of −iG·P_i, sign of −iG·P_j)` on the generator's support.
    pairs: Vec<(usize, usize, f64, f64)>,
    rest: usize,
}

impl DenseSweep {
    pub(crate) fn new(generator: &PauliString, n: usize) -> Self {
        let g = Packed::pack(generator);
        let (gx, gz) = g.masks();
        let gi = dense_index(generator, n);
        // Phases only come from the generator's support, so the anticommuting
        // pairs and their signs are fixed by the local bits.
        let site = (gx | gz) as usize;
        let support = site | (site << n);
        let mut pairs = Vec::new();
        for loc in submasks(support) {
            let other = loc ^ gi;
            let (a, b) = (dense_key(loc, n), dense_key(other, n));
            if loc < other && !g.commutes(&a) {
                pairs.push((loc, other, g.partner(&a).0, g.partner(&b).0));
            }
        }
        DenseSweep { pairs, rest: ((1usize << (2 * n)) - 1) ^ support }
    }

    #[inline]
    pub(crate) fn for_each<F: FnMut(usize, usize, f64, f64)>(&self, mut f: F) {
        for rest in submasks(self.rest) {
            for &(i, j, si, sj) in &self.pairs {
                f(rest | i, rest | j, si, sj);
            }
        }
    }
}

/// All submasks of `mask` in increasing order.
fn submasks(mask: usize) -> impl Iterator<Item = usize> {
    let mut next = Some(0usize);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask { None } else { Some(cur.wrapping_sub(mask) & mask) };
        Some(cur)
    })
}

pub(crate) fn dense_index(p: &PauliString, n: usize) -> usize {
    let (x, z) = p.low_masks();
    (x | (z << n)) as usize
}

fn dense_key(i: usize, n: usize) -> Packed {
    Packed::new(i as u64 & ((1u64 << n) - 1), (i as u64) >> n)
}

pub(crate) fn dense_string(i: usize, n: usize) -> PauliString {
    dense_key(i, n).unpack(n)
}

/// Whether an untruncated-weight run on `n` qubits uses the dense table.
pub(crate) fn dense_eligible(n: usize, policy: &TruncationPolicy) -> bool {
    n <= DENSE_MAX_QUBITS && policy.max_weight.is_none_or(|k| k >= n)
}

/// Frequency after one more split, or `None` when absent or capped.
#[inline]
pub(crate) fn next_frequency(l: u32, policy: &TruncationPolicy) -> Option<u32> {
    let next = l.checked_add(1)?;
    policy.frequency_ok(next).then_some(next)
}

fn propagate_dense(
    circuit: &Circuit,
    observable: &PauliSum,
    theta: &[f64],
    policy: &TruncationPolicy,
    stats: &mut TruncationStats,
) -> FxIndexMap<PauliString, (f64, u32)> {
    let n = circuit.num_qubits();
    let mut coeff = vec![0.0f64; 1 << (2 * n)];
    let mut freq = vec![DROPPED; 1 << (2 * n)];
    for (p, c) in observable.iter() {
        let i = dense_index(p, n);
        coeff[i] = c;
        freq[i] = 0;
    }
    let merge = policy.frequency_merge;
    let uncapped = policy.max_frequency.is_none();
    for gate in circuit.gates().iter().rev() {
        let (sin, cos) = theta[gate.param_id].sin_cos();
        DenseSweep::new(&gate.generator, n).for_each(|i, j, si, sj| {
            let (li, lj) = (freq[i], freq[j]);
            if li == DROPPED && lj == DROPPED {
                return;
            }
            let (ci, cj) = (coeff[i], coeff[j]);
            if uncapped && li != DROPPED && lj != DROPPED {
                let l = merge.combine(li, lj) + 1;
                (coeff[i], freq[i]) = (ci * cos + sj * cj * sin, l);
                (coeff[j], freq[j]) = (cj * cos + si * ci * sin, l);
                return;
            }
            let (fi, fj) = (next_frequency(li, policy), next_frequency(lj, policy));
            stats.dropped_frequency += usize::from(li != DROPPED && fi.is_none());
            stats.dropped_frequency += usize::from(lj != DROPPED && fj.is_none());
            let (mut ni, mut nj) = ((0.0, DROPPED), (0.0, DROPPED));
            if let Some(f) = fi {
                ni = (ci * cos, f);
                nj = (si * ci * sin, f);
            }
            if let Some(f) = fj {
                nj = if nj.1 == DROPPED { (cj * cos, f) } else { (cj * cos + nj.0, merge.combine(f, nj.1)) };
                ni = if ni.1 == DROPPED { (sj * cj * sin, f) } else { (ni.0 + sj * cj * sin, merge.combine(ni.1, f)) };
            }
            (coeff[i], freq[i]) = ni;
            (coeff[j], freq[j]) = nj;
        });
        if policy.min_coeff > 0.0 {
            for (c, l) in coeff.iter_mut().zip(freq.iter_mut()) {
                if *l != DROPPED && c.abs() < policy.min_coeff {
                    *l = DROPPED;
                    *c = 0.0;
                    stats.pruned += 1;
                }
            }
        }
    }
    let mut out = FxIndexMap::default();
    out.reserve(freq.iter().filter(|&&l| l != DROPPED).count());
    for (i, (&c, &l)) in coeff.iter().zip(&freq).enumerate() {
        if l != DROPPED {
            out.insert(dense_string(i, n), (c, l));
        }
    }
    out
}

fn propagate_keys<K: StringKey>(
    circuit: &Circuit,
    observable: &PauliSum,
    theta: &[f64],
    policy: &TruncationPolicy,
    stats: &mut TruncationStats,
) -> FxIndexMap<K, (f64, u32)> {
    let mut terms: FxIndexMap<K, (f64, u32)> = FxIndexMap::default();
    for (p, c) in observable.iter() {
        if policy.weight_ok(p.weight()) {
            terms.insert(K::pack(p), (c, 0));
        } else {
            stats.dropped_weight += 1;
        }
    }

    // Every anticommuting string receives its own cosine branch and at most
    // one sine branch, from its unique partner, so updating in place and then
    // merging the partners matches a remove-and-reinsert sweep.
    let mut partners: Vec<(K, f64, u32)> = Vec::new();
    for gate in circuit.gates().iter().rev() {
        let g = K::pack(&gate.generator);
        let (sin, cos) = theta[gate.param_id].sin_cos();
        partners.clear();
        let mut any_dropped = false;
        for (p, (c, l)) in terms.iter_mut() {
            if g.commutes(p) {
                continue;
            }
            let freq = *l + 1;
            if !policy.frequency_ok(freq) {
                stats.dropped_frequency += 1;
                *l = DROPPED;
                any_dropped = true;
                continue;
            }
            let (sign, q) = g.partner(p);
            if policy.weight_ok(q.weight()) {
                partners.push((q, sign * *c * sin, freq));
            } else {
                stats.dropped_weight += 1;
            }
            *c *= cos;
            *l = freq;
        }
        for (q, c, freq) in partners.drain(..) {
            match terms.entry(q) {
                Entry::Occupied(mut e) => {
                    let (c0, l0) = e.get_mut();
                    if *l0 == DROPPED {
                        *c0 = c;
                        *l0 = freq;
                    } else {
                        *c0 += c;
                        *l0 = policy.frequency_merge.combine(*l0, freq);
                    }
                }
                Entry::Vacant(e) => {
                    e.insert((c, freq));
                }
            }
        }
        if any_dropped {
            terms.retain(|_, &mut (_, l)| l != DROPPED);
        }
        if policy.min_coeff > 0.0 {
            let before = terms.len();
            terms.retain(|_, &mut (c, _)| c.abs() >= policy.min_coeff);
            stats.pruned += before - terms.len();
        }
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_qcnn, LayoutStyle};
    use crate::statevector::statevector_oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn term(s: &str) -> Term {
        Term { pauli: p(s), coeff: 1.0, frequency: 0 }
    }

    fn gate(s: &str) -> Gate {
        Gate { generator: p(s), param_id: 0 }
    }

    #[test]
    fn dense_sweep_matches_hash_map() {
        let (circuit, layout) = build_qcnn(6, LayoutStyle::Brick).unwrap();
        let obs = PauliSum::single(
            crate::circuit::readout_observables(&layout, crate::circuit::Task::Binary).unwrap().remove(0),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..circuit.num_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
        for cap in [None, Some(6), Some(9)] {
            for rule in [FrequencyMerge::Min, FrequencyMerge::Max] {
                let policy =
                    TruncationPolicy { max_frequency: cap, frequency_merge: rule, ..TruncationPolicy::exact() };
                let mut s1 = TruncationStats::default();
                let mut s2 = TruncationStats::default();
                let dense = propagate_dense(&circuit, &obs, &theta, &policy, &mut s1);
                let sparse = propagate_keys::<Packed>(&circuit, &obs, &theta, &policy, &mut s2);
                assert_eq!(dense.len(), sparse.len());
                assert_eq!(s1, s2);
                for (k, &(c, l)) in &sparse {
                    let (cd, ld) = dense[&k.unpack(6)];
                    assert!((c - cd).abs() < 1e-14);
                    assert_eq!(l, ld);
                }
            }
        }
    }

    #[test]
    fn rz_on_x_splits_into_x_and_y() {
        let theta = 0.3;
        let out = apply_rotation_heisenberg(&term("X"), &gate("Z"), theta, &TruncationPolicy::exact());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].pauli, p("X"));
        assert!((out[0].coeff - theta.cos()).abs() < 1e-15);
        assert_eq!(out[1].pauli, p("Y"));
        assert!((out[1].coeff - theta.sin()).abs() < 1e-15);
        assert!(out.iter().all(|t| t.frequency == 1));
    }

    #[test]
    fn commuting_rotation_is_identity() {
        let out = apply_rotation_heisenberg(&term("Z"), &gate("Z"), 0.3, &TruncationPolicy::exact());
        assert_eq!(out.as_slice(), &[term("Z")]);
    }

    #[test]
    fn xx_rotation_on_z1_and_weight_cap() {
        let theta = 0.4;
        let out = apply_rotation_heisenberg(&term("ZI"), &gate("XX"), theta, &TruncationPolicy::exact());
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].pauli, p("YX"));
        // −i·(XX)(ZI) = −i·(−iY)X = −YX.
        assert!((out[1].coeff + theta.sin()).abs() < 1e-15);

        let capped = apply_rotation_heisenberg(&term("ZI"), &gate("XX"), theta, &TruncationPolicy::with_max_weight(1));
        assert_eq!(capped.len(), 1);
        assert_eq!(capped[0].pauli, p("ZI"));
    }

    #[test]
    fn frequency_cap_drops_both_branches() {
        let policy = TruncationPolicy { max_frequency: Some(0), ..TruncationPolicy::exact() };
        assert!(apply_rotation_heisenberg(&term("X"), &gate("Z"), 0.3, &policy).is_empty());
    }

    #[test]
    fn empty_circuit_and_zero_angles_leave_observable() {
        let obs = PauliSum::single(p("ZIII"));
        let out = propagate(&Circuit::empty(4), &obs, &[], &TruncationPolicy::exact()).unwrap();
        assert_eq!(out.to_sum(), obs);

        let (c, _) = build_qcnn(4, LayoutStyle::Brick).unwrap();
        let zeros = vec![0.0; c.num_params()];
        let out = propagate(&c, &obs, &zeros, &TruncationPolicy::default()).unwrap();
        assert_eq!(out.to_sum(), obs);
    }

    #[test]
    fn parameter_length_checked() {
        let (c, _) = build_qcnn(4, LayoutStyle::Brick).unwrap();
        let obs = PauliSum::single(p("ZIII"));
        assert!(matches!(propagate(&c, &obs, &[0.0], &TruncationPolicy::exact()), Err(Error::ParamLength { .. })));
    }

    #[test]
    fn expectation_examples() {
        let sv = StateVector::zero(3).unwrap();
        let (c, _) = build_qcnn(3, LayoutStyle::Brick).unwrap();
        let zeros = vec![0.0; c.num_params()];
        let z1 = propagate(&c, &PauliSum::single(p("ZII")), &zeros, &TruncationPolicy::exact()).unwrap();
        assert_eq!(z1.expectation_from_state(&sv).unwrap(), 1.0);
        let x1 = propagate(&c, &PauliSum::single(p("XII")), &zeros, &TruncationPolicy::exact()).unwrap();
        assert_eq!(x1.expectation_from_state(&sv).unwrap(), 0.0);

        // |01…⟩: qubit 1 flipped.
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 8];
        amps[0b010] = num_complex::Complex64::new(1.0, 0.0);
        let sv = StateVector::from_amplitudes(3, amps).unwrap();
        let obs = PauliSum::from_terms(3, [(p("ZII"), 0.6), (p("ZZI"), 0.8)]).unwrap();
        let op = propagate(&Circuit::empty(3), &obs, &[], &TruncationPolicy::exact()).unwrap();
        assert!((op.expectation_from_state(&sv).unwrap() + 0.2).abs() < 1e-15);
    }

    #[test]
    fn exact_propagation_matches_oracle_n6() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (c, _) = build_qcnn(6, LayoutStyle::Brick).unwrap();
        let obs = PauliSum::single(p("ZIIIII"));
        for _ in 0..50 {
            let theta: Vec<f64> = (0..c.num_params()).map(|_| rng.random_range(-3.2..3.2)).collect();
            let input = StateVector::random_product(6, &mut rng).unwrap();
            let op = propagate(&c, &obs, &theta, &TruncationPolicy::exact()).unwrap();
            let out = statevector_oracle(&c, &theta, &input).unwrap();
            let want = out.expectation(&p("ZIIIII")).unwrap();
            assert!((op.expectation_from_state(&input).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_only_loses_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (c, _) = build_qcnn(8, LayoutStyle::Brick).unwrap();
        let obs = PauliSum::single(p("ZIIIIIII"));
        let theta: Vec<f64> = (0..c.num_params()).map(|_| rng.random_range(-3.2..3.2)).collect();
        let full = propagate(&c, &obs, &theta, &TruncationPolicy::exact()).unwrap();
        assert!((full.squared_norm() - 1.0).abs() < 1e-10);
        for k in 1..=4 {
            let t = propagate(&c, &obs, &theta, &TruncationPolicy::with_max_weight(k)).unwrap();
            assert!(t.squared_norm() <= full.squared_norm() + 1e-12);
            assert!(t.sorted_terms().iter().all(|t| t.pauli.weight() <= k));
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let (c, _) = build_qcnn(2, LayoutStyle::Brick).unwrap();
        let theta = vec![0.1; c.num_params()];
        let op = propagate(&c, &PauliSum::single(p("ZI")), &theta, &TruncationPolicy::exact()).unwrap();
        let csv = op.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("pauli,coefficient,frequency"));
        assert_eq!(lines.count(), op.len());
    }
}
