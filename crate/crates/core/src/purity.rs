//! Average k-purities of a single-site observable Heisenberg-evolved through
//! a QCNN whose blocks are independent Haar-random two-qubit unitaries.
//!
//! Second moments of Haar blocks act on the span of `{|i⟩, |s⟩}` per qubit
//! (identity and swap on two copies). The per-block map is the P-gate:
//! `|ii⟩ → |ii⟩`, `|ss⟩ → |ss⟩`, `|is⟩, |si⟩ → a(|ii⟩ + |ss⟩)` with `a = 2/5`.
//! A string with `m` swap sites and coefficient `c` carries
//! `c · C(m,k) (3/2)^k (1/2)^{m−k}` of weight-`k` purity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::circuit::{build_layout, LayoutStyle, QcnnLayout};
use crate::error::{Error, Result};

/// P-gate off-diagonal entry.
pub const PGATE_A: f64 = 2.0 / 5.0;

/// Largest `n` for the dense Monte-Carlo oracle.
pub const MC_MAX_QUBITS: usize = 10;

/// Largest `n` for the {i,s} network propagation (strings are 128-bit masks).
pub const NETWORK_MAX_QUBITS: usize = 128;

pub const CONVENTION: &str = "weight-k multiplicity C(m,k) included; value[0] is the identity component";

/// Sparse vector over `{i,s}` strings; bit `q` set means `s` on qubit `q`.
/// Amplitudes stay nonnegative; the constant `−(1/3)|i…i⟩` part of the
/// initial vector is fixed under every P-gate and is kept in `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsState {
    pub n: usize,
    pub amps: BTreeMap<u128, f64>,
    pub offset: f64,
}

impl IsState {
    /// `(2/3)|s i…i⟩ − (1/3)|i…i⟩` with the `s` on `site`: the two-copy
    /// twirl of a normalized single-site Pauli.
    pub fn single_site(n: usize, site: usize) -> Result<Self> {
        if n == 0 || n > NETWORK_MAX_QUBITS {
            return Err(Error::OversizeState { what: "purity network", n, max: NETWORK_MAX_QUBITS });
        }
        if site >= n {
            return Err(Error::QubitOutOfRange { qubit: site, n });
        }
        let amps = BTreeMap::from([(1u128 << site, 2.0 / 3.0)]);
        Ok(IsState { n, amps, offset: -1.0 / 3.0 })
    }

    /// Weight-`k` purities for `k = 0..=n` (index 0 is the identity part).
    pub fn purities(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n + 1];
        out[0] = self.offset;
        for (&mask, &c) in &self.amps {
            let m = mask.count_ones() as usize;
            let mut binom = 1.0;
            for (k, slot) in out.iter_mut().enumerate().take(m + 1) {
                *slot += c * binom * 1.5f64.powi(k as i32) * 0.5f64.powi((m - k) as i32);
                binom = binom * (m - k) as f64 / (k + 1) as f64;
            }
        }
        out
    }

    /// `Σ c · 2^m`, the total Hilbert–Schmidt mass including the identity.
    pub fn total_mass(&self) -> f64 {
        self.offset + self.amps.iter().map(|(m, c)| c * 2f64.powi(m.count_ones() as i32)).sum::<f64>()
    }
}

/// Applies the P-gate to qubits `(q1, q2)` and merges equal strings.
pub fn pgate_apply(state: &IsState, q1: usize, q2: usize) -> Result<IsState> {
    if q1 == q2 {
        return Err(Error::SameQubit(q1));
    }
    for q in [q1, q2] {
        if q >= state.n {
            return Err(Error::QubitOutOfRange { qubit: q, n: state.n });
        }
    }
    let (b1, b2) = (1u128 << q1, 1u128 << q2);
    let both = b1 | b2;
    let mut out = BTreeMap::new();
    for (&mask, &c) in &state.amps {
        let s1 = mask & b1 != 0;
        let s2 = mask & b2 != 0;
        if s1 == s2 {
            *out.entry(mask).or_insert(0.0) += c;
        } else {
            let rest = mask & !both;
            *out.entry(rest).or_insert(0.0) += PGATE_A * c;
            *out.entry(rest | both).or_insert(0.0) += PGATE_A * c;
        }
    }
    Ok(IsState { n: state.n, amps: out, offset: state.offset })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurityDistribution {
    pub n: usize,
    pub method: &'static str,
    /// `values[k]` for `k = 0..=n`; `values[0]` is the identity component.
    pub values: Vec<f64>,
    /// Standard errors (Monte-Carlo only).
    pub stderr: Option<Vec<f64>>,
    pub convention: &'static str,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl PurityDistribution {
    /// Total including the identity component.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Average contribution of one weight-`k` Pauli: `p^(k) / (3^k C(n,k))`.
    pub fn per_pauli(&self, k: usize) -> f64 {
        self.values[k] / (3f64.powi(k as i32) * binomial(self.n, k))
    }

    /// CSV columns `k,value,per_pauli,stderr,method` for `k ≥ 1`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,value,per_pauli,stderr,method\n");
        for k in 1..self.values.len() {
            let se = self.stderr.as_ref().map_or(String::new(), |e| format!("{:?}", e[k]));
            writeln!(s, "{k},{:?},{:?},{se},{}", self.values[k], self.per_pauli(k), self.method).unwrap();
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Least-squares slope of `ln(per-Pauli contribution)` against `k` over
    /// `ks`, skipping zero entries.
    pub fn log_slope(&self, ks: std::ops::RangeInclusive<usize>) -> f64 {
        let pts: Vec<(f64, f64)> = ks
            .filter(|&k| k < self.values.len() && self.per_pauli(k) > 0.0)
            .map(|k| (k as f64, self.per_pauli(k).ln()))
            .collect();
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        num / den
    }
}

/// Heisenberg order: last layer first, blocks within a layer reversed.
fn reversed_blocks(layout: &QcnnLayout) -> impl Iterator<Item = (usize, usize)> + '_ {
    layout.layers.iter().rev().flat_map(|l| l.iter().rev().copied())
}

/// P-gate network propagation of `Z` on the layout's readout qubit.
pub fn purities_network(layout: &QcnnLayout) -> Result<PurityDistribution> {
    let site =
        *layout.readout_qubits.first().ok_or_else(|| Error::InvalidCircuit("layout has no readout qubit".into()))?;
    let mut state = IsState::single_site(layout.n, site)?;
    for (q1, q2) in reversed_blocks(layout) {
        state = pgate_apply(&state, q1, q2)?;
    }
    Ok(PurityDistribution {
        n: layout.n,
        method: "network",
        values: state.purities(),
        stderr: None,
        convention: CONVENTION,
    })
}

/// Closed-form evaluation for the non-crossing QCNN on `n = 2^L` qubits.
/// Each layer (in Heisenberg order) turns every swap site into either an
/// identity pair or a swap pair with weight `a`, so the state is summarized
/// by its swap count `m`.
pub fn purities_recursive(layers: usize) -> Result<PurityDistribution> {
    if layers == 0 || layers > 7 {
        return Err(Error::Invalid(format!("recursion supports 1 <= L <= 7, got {layers}")));
    }
    let n = 1usize << layers;
    // w[m]: summed coefficient of strings with m swap sites, starting from |s⟩.
    let mut w = vec![0.0; 2];
    w[1] = 1.0;
    for _ in 0..layers {
        let mut next = vec![0.0; 2 * (w.len() - 1) + 1];
        next[0] += w[0];
        for (m, &wm) in w.iter().enumerate().skip(1) {
            if wm == 0.0 {
                continue;
            }
            let weight = wm * PGATE_A.powi(m as i32);
            for pairs in 0..=m {
                next[2 * pairs] += weight * binomial(m, pairs);
            }
        }
        w = next;
    }
    let mut values = vec![0.0; n + 1];
    for (m, &wm) in w.iter().enumerate() {
        for (k, v) in values.iter_mut().enumerate().take(m + 1) {
            *v += (2.0 / 3.0) * wm * binomial(m, k) * 1.5f64.powi(k as i32) * 0.5f64.powi((m - k) as i32);
        }
    }
    values[0] -= 1.0 / 3.0;
    Ok(PurityDistribution { n, method: "recursive", values, stderr: None, convention: CONVENTION })
}

fn pauli_matrices() -> [Matrix4<Complex64>; 16] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let single = [[[o, z], [z, o]], [[z, o], [o, z]], [[z, -i], [i, z]], [[o, z], [z, -o]]];
    std::array::from_fn(|a| {
        let (p1, p2) = (a % 4, a / 4);
        // Basis index bit 0 is the block's first qubit.
        Matrix4::from_fn(|r, c| single[p2][r >> 1][c >> 1] * single[p1][r & 1][c & 1])
    })
}

/// Haar unitary via Gram–Schmidt on a complex Gaussian matrix (positive
/// real diagonal of R).
fn haar_u4(rng: &mut ChaCha8Rng) -> Matrix4<Complex64> {
    let mut cols: Vec<[Complex64; 4]> = (0..4)
        .map(|_| {
            std::array::from_fn(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            })
        })
        .collect();
    for j in 0..4 {
        for k in 0..j {
            let proj: Complex64 = (0..4).map(|r| cols[k][r].conj() * cols[j][r]).sum();
            for r in 0..4 {
                let v = cols[k][r];
                cols[j][r] -= proj * v;
            }
        }
        let norm = cols[j].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|c| *c /= norm);
    }
    Matrix4::from_fn(|r, c| cols[c][r])
}

/// Pauli transfer matrix of `P ↦ U† P U`: `R[a][b] = Tr[P_a U† P_b U] / 4`.
fn heisenberg_ptm(u: &Matrix4<Complex64>, paulis: &[Matrix4<Complex64>; 16]) -> [[f64; 16]; 16] {
    let ud = u.adjoint();
    let conj: Vec<Matrix4<Complex64>> = paulis.iter().map(|p| ud * p * u).collect();
    let mut r = [[0.0; 16]; 16];
    for (a, pa) in paulis.iter().enumerate() {
        for (b, cb) in conj.iter().enumerate() {
            r[a][b] = (pa * cb).trace().re / 4.0;
        }
    }
    r
}

/// Monte-Carlo estimate with Haar-random blocks, evolving the observable's
/// Pauli coefficients densely (`4^n` entries).
pub fn purities_mc(layout: &QcnnLayout, samples: usize, seed: u64) -> Result<PurityDistribution> {
    let n = layout.n;
    if n > MC_MAX_QUBITS {
        return Err(Error::OversizeState { what: "Monte-Carlo purities", n, max: MC_MAX_QUBITS });
    }
    if samples < 2 {
        return Err(Error::Invalid("Monte-Carlo purities need at least two samples".into()));
    }
    let site =
        *layout.readout_qubits.first().ok_or_else(|| Error::InvalidCircuit("layout has no readout qubit".into()))?;
    let paulis = pauli_matrices();
    let blocks: Vec<(usize, usize)> = reversed_blocks(layout).collect();
    let dim = 1usize << (2 * n);
    let weight_of: Vec<u8> = (0..dim).map(|idx| (0..n).filter(|q| (idx >> (2 * q)) & 3 != 0).count() as u8).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    let mut coeffs = vec![0.0; dim];
    let mut local = [0.0; 16];
    for _ in 0..samples {
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        coeffs[3 << (2 * site)] = 1.0;
        for &(q1, q2) in &blocks {
            let r = heisenberg_ptm(&haar_u4(&mut rng), &paulis);
            let (s1, s2) = (2 * q1, 2 * q2);
            let block_mask = (3 << s1) | (3 << s2);
            for rest in 0..dim {
                if rest & block_mask != 0 {
                    continue;
                }
                let idx = |a: usize| rest | ((a % 4) << s1) | ((a / 4) << s2);
                let mut any = false;
                for (a, l) in local.iter_mut().enumerate() {
                    *l = coeffs[idx(a)];
                    any |= *l != 0.0;
                }
                if !any {
                    continue;
                }
                for a in 0..16 {
                    coeffs[idx(a)] = (0..16).map(|b| r[a][b] * local[b]).sum();
                }
            }
        }
        let mut p = vec![0.0; n + 1];
        for (c, &w) in coeffs.iter().zip(&weight_of) {
            p[w as usize] += c * c;
        }
        for k in 0..=n {
            sum[k] += p[k];
            sum_sq[k] += p[k] * p[k];
        }
    }
    let s = samples as f64;
    let values: Vec<f64> = sum.iter().map(|v| v / s).collect();
    let stderr =
        (0..=n).map(|k| ((sum_sq[k] / s - values[k] * values[k]).max(0.0) * s / (s - 1.0) / s).sqrt()).collect();
    Ok(PurityDistribution { n, method: "mc", values, stderr: Some(stderr), convention: CONVENTION })
}

/// Non-crossing layout on `2^L` qubits.
pub fn non_crossing_layout(layers: usize) -> Result<QcnnLayout> {
    build_layout(1 << layers, LayoutStyle::NonCrossing)
}
